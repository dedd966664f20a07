#include "doctest.h"
#include "whisker/placement.hpp"
#include "whisker/shapes.hpp"

using namespace whisker;

TEST_CASE("random placement") {
    const WhiskerSpec spec;
    const RodState rest = build_rest_shape(spec);
    const PolyObject obj = make_rectangle(30.0, 15.0);

    SUBCASE("deterministic per seed") {
        const ScenePlacement a = random_placement(obj, rest, 99);
        const ScenePlacement b = random_placement(obj, rest, 99);
        CHECK(a.rotation == b.rotation);
        CHECK((a.translation - b.translation).norm() == 0.0);
        CHECK(a.standoff == b.standoff);
        const ScenePlacement c = random_placement(obj, rest, 100);
        CHECK(c.rotation != a.rotation);
    }

    SUBCASE("standoff realized exactly and within range") {
        PlacementConfig cfg;
        cfg.standoff_min = 10.0;
        cfg.standoff_max = 30.0;
        for (std::uint64_t seed = 0; seed < 200; ++seed) {
            const ScenePlacement pl = random_placement(obj, rest, seed, cfg);
            CHECK(pl.standoff >= 10.0);
            CHECK(pl.standoff <= 30.0);
            // The placed object's nearest point to the base path x=0 is the
            // standoff, by construction.
            const PolyObject placed = obj.transformed(pl.pose());
            CHECK(placed.min_corner().x() == doctest::Approx(pl.standoff).epsilon(1e-12));
        }
    }

    SUBCASE("degenerate standoff range is honored exactly") {
        PlacementConfig cfg;
        cfg.standoff_min = 15.0;
        cfg.standoff_max = 15.0;
        const ScenePlacement pl = random_placement(obj, rest, 7, cfg);
        CHECK(pl.standoff == 15.0);
    }

    SUBCASE("placement clears the rest shape") {
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            const ScenePlacement pl = random_placement(obj, rest, seed);
            const PolyObject placed = obj.transformed(pl.pose());
            for (std::size_t i = 0; i + 1 < rest.node_positions.size(); ++i) {
                CHECK_FALSE(placed.intersects_segment(rest.node_positions[i],
                                                      rest.node_positions[i + 1]));
            }
        }
    }
}
