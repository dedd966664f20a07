#include <cmath>

#include "doctest.h"
#include "whisker/errors.hpp"
#include "whisker/rng.hpp"
#include "whisker/rod.hpp"
#include "whisker/shapes.hpp"

using namespace whisker;

namespace {

WhiskerSpec straight_spec() {
    WhiskerSpec spec;
    spec.distal_arc_length = 0.0;
    return spec;
}

}  // namespace

TEST_CASE("rest shape geometry") {
    SUBCASE("straight rod ends at (L, 0)") {
        WhiskerSpec spec = straight_spec();
        spec.n_segments = 30;
        const RodState rest = build_rest_shape(spec);
        REQUIRE(rest.node_positions.size() == 31);
        CHECK((rest.node_positions[30] - Vec2(60.0, 0.0)).norm() < 1e-12);
        CHECK(rest.base_moment.norm() == 0.0);
    }
    SUBCASE("uniform node spacing") {
        WhiskerSpec spec;  // defaults: pre-curved
        spec.n_segments = 30;
        const RodState rest = build_rest_shape(spec);
        const double h = spec.segment_length();
        for (std::size_t i = 0; i + 1 < rest.node_positions.size(); ++i) {
            const double d = (rest.node_positions[i + 1] - rest.node_positions[i]).norm();
            CHECK(std::abs(d - h) / h < 1e-9);
        }
        CHECK(rest.node_positions[0].norm() == 0.0);
    }
    SUBCASE("distal discrete curvature matches the arc radius") {
        const WhiskerSpec spec;  // arc radius 20, arc length 30, L 60
        const RodState rest = build_rest_shape(spec);
        const auto& P = rest.node_positions;
        const double h = spec.segment_length();
        // Discrete curvature = turn angle / h at joints well inside the arc.
        int checked = 0;
        for (int j = 1; j < spec.n_segments; ++j) {
            const double s_lo = (j - 1 + 0.5) * h;  // midpoints of both segments
            if (s_lo <= spec.total_length - spec.distal_arc_length) continue;
            const Vec2 t0 = (P[j] - P[j - 1]).normalized();
            const Vec2 t1 = (P[j + 1] - P[j]).normalized();
            const double turn = std::asin(std::clamp(cross2(t0, t1), -1.0, 1.0));
            const double curvature = std::abs(turn) / h;
            CHECK(curvature == doctest::Approx(1.0 / 20.0).epsilon(0.02));
            ++checked;
        }
        CHECK(checked >= 10);
    }
    SUBCASE("invalid specs rejected") {
        WhiskerSpec bad;
        bad.total_length = -1.0;
        CHECK_THROWS_AS(build_rest_shape(bad), ValidationError);
        WhiskerSpec few;
        few.n_segments = 4;
        CHECK_THROWS_AS(build_rest_shape(few), ValidationError);
        WhiskerSpec arc;
        arc.distal_arc_length = 100.0;
        CHECK_THROWS_AS(build_rest_shape(arc), ValidationError);
    }
}

TEST_CASE("cantilever oracle: base moment equals F*d in the small-deflection limit") {
    const WhiskerSpec spec = straight_spec();
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const double F = rng.uniform(0.2e-3, 2.0e-3);  // N, keeps deflection tiny
        const double d = rng.uniform(10.0, 58.0);      // mm
        const RodState st = solve_point_force(spec, d, Vec2(0.0, F));
        CHECK(st.base_moment.x() == doctest::Approx(F * d).epsilon(0.01));
        // Transverse channel reads the scaled transverse force component.
        CHECK(st.base_moment.y() == doctest::Approx(kTransverseGaugeLeverMm * F).epsilon(1e-9));
    }
}

TEST_CASE("point force on joints beyond the load is moment-free") {
    const WhiskerSpec spec = straight_spec();
    const RodState st = solve_point_force(spec, 30.0, Vec2(0.0, 1e-3));
    const double h = spec.segment_length();
    for (int j = 0; j < spec.n_segments; ++j) {
        if (j * h > 30.0 + 1e-9) CHECK(std::abs(st.joint_angles[j]) < 1e-12);
    }
}

TEST_CASE("free solve returns the rest shape") {
    const WhiskerSpec spec;
    const EquilibriumResult res = solve_equilibrium(spec, Pose2{}, nullptr);
    CHECK_FALSE(res.contact.has_value());
    CHECK(res.state.base_moment.norm() == 0.0);

    // Object far out of reach behaves the same.
    const PolyObject far_circle = make_circle(5.0, 64);
    Pose2 base;
    base.translation = Vec2(0.0, -200.0);  // object at world origin, base far away
    const EquilibriumResult res2 = solve_equilibrium(spec, base, &far_circle);
    CHECK_FALSE(res2.contact.has_value());
    CHECK(res2.state.base_moment.norm() == 0.0);
}

namespace {

// A circle parked on the whisker's path, base placed so the rod presses
// into it from below.
struct ContactScene {
    WhiskerSpec spec;
    PolyObject object = make_circle(15.0, 64);
    Pose2 base;

    ContactScene() {
        // Object centered at (30, 18) in world; base at origin pointing +x;
        // sweep has advanced so the rod (y<=0 at rest) overlaps the circle.
        object = object.transformed([] {
            Pose2 p;
            p.translation = Vec2(30.0, 18.0);
            return p;
        }());
        base.translation = Vec2(0.0, 6.0);  // rod base above circle bottom edge
    }
};

}  // namespace

TEST_CASE("contact solve satisfies joint-wise moment balance") {
    ContactScene sc;
    const EquilibriumResult res = solve_equilibrium(sc.spec, sc.base, &sc.object);
    REQUIRE(res.contact.has_value());
    const ContactPoint& c = *res.contact;
    CHECK(c.force_magnitude >= 0.0);
    CHECK(std::abs(c.normal.norm() - 1.0) < 1e-9);

    const double k = sc.spec.joint_stiffness();
    const double h = sc.spec.segment_length();
    for (int j = 0; j < sc.spec.n_segments; ++j) {
        const double spring = k * res.state.joint_angles[j];
        double lever = 0.0;
        if (j * h <= c.arc_length) {
            lever = c.force_magnitude *
                    cross2(c.position - res.state.node_positions[j], c.normal);
        }
        CHECK(std::abs(spring - lever) < 1e-6);
    }

    // The contact point rests on the object surface (world frame).
    const Vec2 world_contact = sc.base.apply(c.position);
    CHECK(std::abs(sc.object.signed_distance(world_contact)) < 1e-6);
}

TEST_CASE("solver merit is non-increasing across accepted iterations") {
    ContactScene sc;
    std::vector<double> history;
    SolveOptions opts;
    opts.merit_history = &history;
    (void)solve_equilibrium(sc.spec, sc.base, &sc.object, nullptr, opts);
    REQUIRE(history.size() >= 2);
    for (std::size_t i = 1; i < history.size(); ++i) {
        CHECK(history[i] <= history[i - 1] + 1e-18);
    }
}

TEST_CASE("mirror symmetry for a straight rod") {
    const WhiskerSpec spec = straight_spec();
    const PolyObject circle = make_circle(12.0, 64);

    // Centers 10 mm off-axis: the radius-12 circle overlaps the rest line by
    // 2 mm, so the rod engages it without any sweep motion.
    Pose2 up;
    up.translation = Vec2(35.0, 10.0);
    Pose2 down;
    down.translation = Vec2(35.0, -10.0);

    const PolyObject obj_up = circle.transformed(up);
    const PolyObject obj_down = circle.transformed(down);

    const EquilibriumResult a = solve_equilibrium(spec, Pose2{}, &obj_up);
    const EquilibriumResult b = solve_equilibrium(spec, Pose2{}, &obj_down);
    REQUIRE(a.contact.has_value());
    REQUIRE(b.contact.has_value());
    CHECK(a.state.base_moment.x() == doctest::Approx(-b.state.base_moment.x()).epsilon(1e-6));
    CHECK(a.state.base_moment.y() == doctest::Approx(-b.state.base_moment.y()).epsilon(1e-6));
}

TEST_CASE("frame equivariance: rotating scene and base together changes nothing") {
    ContactScene sc;
    const EquilibriumResult ref = solve_equilibrium(sc.spec, sc.base, &sc.object);
    REQUIRE(ref.contact.has_value());

    Rng rng(5);
    for (int trial = 0; trial < 3; ++trial) {
        Pose2 world;
        world.rotation = rng.uniform(-M_PI, M_PI);
        world.translation = Vec2(rng.uniform(-40.0, 40.0), rng.uniform(-40.0, 40.0));

        const PolyObject moved_obj = sc.object.transformed(world);
        Pose2 moved_base;
        moved_base.rotation = sc.base.rotation + world.rotation;
        moved_base.translation = world.apply(sc.base.translation);

        const EquilibriumResult res = solve_equilibrium(sc.spec, moved_base, &moved_obj);
        REQUIRE(res.contact.has_value());
        CHECK(std::abs(res.state.base_moment.x() - ref.state.base_moment.x()) < 1e-9);
        CHECK(std::abs(res.state.base_moment.y() - ref.state.base_moment.y()) < 1e-9);
    }
}

TEST_CASE("proximal contact picks the crossing nearest the base") {
    const WhiskerSpec spec = straight_spec();
    const RodState rest = build_rest_shape(spec);

    SUBCASE("rod fully outside") {
        const PolyObject c = make_circle(5.0, 64).transformed([] {
            Pose2 p;
            p.translation = Vec2(30.0, 30.0);
            return p;
        }());
        CHECK_FALSE(find_proximal_contact(rest, c, Pose2{}).has_value());
    }
    SUBCASE("rod crossing a circle twice") {
        // Circle centered on the rod axis: entry at x = 25, exit at x = 35.
        const PolyObject c = make_circle(5.0, 256).transformed([] {
            Pose2 p;
            p.translation = Vec2(30.0, 0.0);
            return p;
        }());
        const auto hit = find_proximal_contact(rest, c, Pose2{});
        REQUIRE(hit.has_value());
        CHECK(hit->arc_length == doctest::Approx(25.0).epsilon(0.01));
    }
    SUBCASE("tip touching the boundary reports full arc length") {
        // Square whose left edge sits exactly at the tip x = 60.
        const PolyObject sq = PolyObject({{60.0, -5.0}, {70.0, -5.0}, {70.0, 5.0}, {60.0, 5.0}});
        const auto hit = find_proximal_contact(rest, sq, Pose2{});
        REQUIRE(hit.has_value());
        CHECK(hit->arc_length == doctest::Approx(60.0).epsilon(1e-9));
    }
}

TEST_CASE("pinned solve") {
    const WhiskerSpec spec;

    SUBCASE("pin on the rest shape produces near-zero moments") {
        const RodState rest = build_rest_shape(spec);
        // A point exactly on the rest centerline, mid-rod.
        const Vec2 target = 0.5 * (rest.node_positions[10] + rest.node_positions[11]);
        const PinnedResult res = solve_pinned(spec, target);
        CHECK(res.state.base_moment.norm() < 1e-6);
        CHECK(res.contact.force_magnitude < 1e-6);
    }
    SUBCASE("pin off the rest shape is held exactly and balances moments") {
        const RodState rest = build_rest_shape(spec);
        const Vec2 target = rest.node_positions[20] + Vec2(0.0, 4.0);
        const PinnedResult res = solve_pinned(spec, target);
        CHECK((res.contact.position - target).norm() < 1e-6);
        CHECK(res.contact.force_magnitude > 0.0);

        const double k = spec.joint_stiffness();
        const double h = spec.segment_length();
        const Vec2 force = res.contact.force_magnitude * res.contact.normal;
        for (int j = 0; j < spec.n_segments; ++j) {
            const double spring = k * res.state.joint_angles[j];
            double lever = 0.0;
            if (j * h <= res.contact.arc_length) {
                lever = cross2(res.contact.position - res.state.node_positions[j], force);
            }
            CHECK(std::abs(spring - lever) < 1e-6);
        }
    }
    SUBCASE("unreachable pin rejected") {
        CHECK_THROWS_AS(solve_pinned(spec, Vec2(80.0, 0.0)), ValidationError);
    }
}
