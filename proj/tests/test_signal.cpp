#include <cmath>

#include "doctest.h"
#include "whisker/errors.hpp"
#include "whisker/placement.hpp"
#include "whisker/shapes.hpp"
#include "whisker/signal.hpp"

using namespace whisker;

namespace {

std::vector<ContactSample> synthetic_sequence(int n) {
    std::vector<ContactSample> seq(n);
    for (int i = 0; i < n; ++i) {
        seq[i].t = 0.2 * i;
        seq[i].moment = Vec2(0.01 * i, 0.0);
        seq[i].in_contact = true;
        seq[i].contact_pos = Vec2(30.0, 0.1 * i);
    }
    return seq;
}

}  // namespace

TEST_CASE("random trajectories") {
    TrajectoryConfig cfg;
    Rng rng(123);
    const SweepTrajectory tr = make_random_trajectory(60.0, rng, cfg);

    CHECK(tr.initial_speed >= 3.0);
    CHECK(tr.initial_speed <= 7.0);
    for (double a : tr.acceleration_profile) CHECK(std::abs(a) <= 0.4);
    for (double v : tr.step_speeds()) CHECK(v > 0.0);

    const auto pos = tr.base_offsets();
    CHECK(pos.front() == 0.0);
    CHECK(pos.back() >= 60.0 - 7.0 / 50.0);  // covered the path up to one step

    // Acceleration is piecewise constant per second.
    const int sps = 50;
    for (std::size_t j = 0; j + 1 < tr.acceleration_profile.size(); ++j) {
        if ((j + 1) % sps != 0) {
            CHECK(tr.acceleration_profile[j] == tr.acceleration_profile[j + 1]);
        }
    }

    Rng rng2(123);
    const SweepTrajectory again = make_random_trajectory(60.0, rng2, cfg);
    CHECK(again.initial_speed == tr.initial_speed);
    REQUIRE(again.acceleration_profile.size() == tr.acceleration_profile.size());
}

TEST_CASE("constant-speed trajectories for ablations") {
    Rng rng(9);
    const SweepTrajectory fixed = make_constant_speed_trajectory(40.0, 8.0, false, rng);
    for (double v : fixed.step_speeds()) CHECK(v == doctest::Approx(8.0).epsilon(1e-12));

    const SweepTrajectory jit = make_constant_speed_trajectory(40.0, 8.0, true, rng);
    bool varied = false;
    for (double v : jit.step_speeds()) {
        CHECK(v >= 8.0 * 0.8 - 1e-9);
        CHECK(v <= 8.0 * 1.2 + 1e-9);
        if (std::abs(v - 8.0) > 1e-6) varied = true;
    }
    CHECK(varied);
}

TEST_CASE("sweep execution") {
    const WhiskerSpec spec;
    const RodState rest = build_rest_shape(spec);
    const PolyObject circle = make_circle(15.0, 64);

    SUBCASE("object beyond reach leaves the signal silent") {
        ScenePlacement pl;
        pl.rotation = 0.0;
        pl.translation = Vec2(100.0, 30.0);  // past the whisker tip
        pl.standoff = 100.0;
        Rng rng(4);
        const SweepTrajectory tr = make_random_trajectory(50.0, rng);
        const auto raw = run_sweep(spec, circle, pl, tr);
        REQUIRE(raw.size() == tr.n_steps());
        for (const ContactSample& s : raw) {
            CHECK_FALSE(s.in_contact);
            CHECK(s.moment.norm() == 0.0);
        }
    }

    SUBCASE("a circle on the path produces one contiguous contact episode") {
        const ScenePlacement pl = random_placement(circle, rest, 21);
        Rng rng(21);
        const double path_len = circle.transformed(pl.pose()).max_corner().y() + 14.0 + 6.0;
        const SweepTrajectory tr = make_random_trajectory(path_len, rng);
        const auto raw = run_sweep(spec, circle, pl, tr);

        int episodes = 0;
        bool prev = false;
        int contact_steps = 0;
        for (const ContactSample& s : raw) {
            if (s.in_contact && !prev) ++episodes;
            prev = s.in_contact;
            if (s.in_contact) ++contact_steps;
        }
        CHECK(episodes == 1);
        CHECK(contact_steps > 10);
    }

    SUBCASE("same inputs give bitwise-identical streams") {
        const ScenePlacement pl = random_placement(circle, rest, 33);
        Rng rng_a(33), rng_b(33);
        const SweepTrajectory tr_a = make_random_trajectory(70.0, rng_a);
        const SweepTrajectory tr_b = make_random_trajectory(70.0, rng_b);
        const auto raw_a = run_sweep(spec, circle, pl, tr_a);
        const auto raw_b = run_sweep(spec, circle, pl, tr_b);
        REQUIRE(raw_a.size() == raw_b.size());
        for (std::size_t i = 0; i < raw_a.size(); ++i) {
            CHECK(raw_a[i].moment.x() == raw_b[i].moment.x());
            CHECK(raw_a[i].moment.y() == raw_b[i].moment.y());
            CHECK(raw_a[i].contact_pos.x() == raw_b[i].contact_pos.x());
            CHECK(raw_a[i].in_contact == raw_b[i].in_contact);
        }
    }
}

TEST_CASE("sequence filtering") {
    FilterThresholds th;
    th.moment_max = 5.0;
    th.jump_max = 5.0;

    SUBCASE("all-zero sequence accepted") {
        std::vector<ContactSample> seq(20);
        const FilterOutcome out = filter_sequence(seq, th, 5.0);
        CHECK(out.accepted);
    }
    SUBCASE("torque spike rejected") {
        auto seq = synthetic_sequence(20);
        seq[7].moment = Vec2(10.0, 0.0);
        const FilterOutcome out = filter_sequence(seq, th, 5.0);
        CHECK_FALSE(out.accepted);
        CHECK(out.reason == RejectReason::torque_threshold);
    }
    SUBCASE("8 mm contact jump in one 5 Hz step rejected") {
        auto seq = synthetic_sequence(20);
        seq[10].contact_pos = seq[9].contact_pos + Vec2(8.0, 0.0);
        const FilterOutcome out = filter_sequence(seq, th, 5.0);
        CHECK_FALSE(out.accepted);
        CHECK(out.reason == RejectReason::contact_jump);
    }
    SUBCASE("jump threshold applies per 5 Hz step, not per sim step") {
        // At 50 Hz, contact hopping one rod segment (~2 mm) within a single
        // sim step is ordinary sliding; only the 0.2 s displacement counts.
        std::vector<ContactSample> seq(100);
        for (int i = 0; i < 100; ++i) {
            seq[i].in_contact = true;
            seq[i].moment = Vec2(1.0, 0.0);
            seq[i].contact_pos = Vec2(30.0 - 2.0 * (i / 25), 0.0);  // 2 mm hop every 25 steps
        }
        CHECK(filter_sequence(seq, th, 50.0).accepted);

        // A persistent 8 mm hop is visible across the 5 Hz boundary.
        for (int i = 50; i < 100; ++i) seq[i].contact_pos += Vec2(0.0, 8.0);
        const FilterOutcome out = filter_sequence(seq, th, 50.0);
        CHECK_FALSE(out.accepted);
        CHECK(out.reason == RejectReason::contact_jump);
    }
    SUBCASE("two contact episodes rejected") {
        auto seq = synthetic_sequence(20);
        seq[10].in_contact = false;
        const FilterOutcome out = filter_sequence(seq, th, 5.0);
        CHECK_FALSE(out.accepted);
        CHECK(out.reason == RejectReason::multiple_episodes);
    }
}

TEST_CASE("downsampling to 5 Hz") {
    SUBCASE("stride arithmetic") {
        std::vector<ContactSample> raw(1000);
        for (int i = 0; i < 1000; ++i) raw[i].moment = Vec2(0.001 * i, 0.0);
        const auto out = downsample_to_5hz(raw, 100.0);
        CHECK(out.size() == 50);
        // Decimation keeps exact values: a linear ramp stays on the line.
        for (std::size_t j = 0; j < out.size(); ++j) {
            CHECK(out[j].moment.x() == raw[j * 20].moment.x());
            CHECK(out[j].t == doctest::Approx(0.2 * j).epsilon(1e-12));
        }
    }
    SUBCASE("indivisible rate rejected") {
        std::vector<ContactSample> raw(10);
        CHECK_THROWS_AS(downsample_to_5hz(raw, 52.0), ValidationError);
    }
}

TEST_CASE("augmentation") {
    AugmentConfig cfg;

    SUBCASE("prefix is no-contact and in-contact samples stay untouched") {
        auto seq = synthetic_sequence(40);
        const auto original = seq;
        Rng rng(17);
        augment(seq, rng, cfg);
        REQUIRE(seq.size() >= original.size());
        const std::size_t k = seq.size() - original.size();
        CHECK(k <= 10);
        for (std::size_t i = 0; i < k; ++i) {
            CHECK_FALSE(seq[i].in_contact);
            CHECK(seq[i].contact_pos.norm() == 0.0);
        }
        for (std::size_t i = 0; i < original.size(); ++i) {
            CHECK(seq[k + i].moment.x() == original[i].moment.x());
            CHECK(seq[k + i].contact_pos.y() == original[i].contact_pos.y());
            CHECK(seq[k + i].in_contact == original[i].in_contact);
        }
        // Timestamps sit on the 0.2 s grid.
        for (std::size_t i = 0; i < seq.size(); ++i) {
            CHECK(seq[i].t == doctest::Approx(0.2 * i).epsilon(1e-12));
        }
    }

    SUBCASE("over-long sequences keep the most recent samples") {
        auto seq = synthetic_sequence(300);
        Rng rng(2);
        augment(seq, rng, cfg);
        CHECK(seq.size() == 256);
        // The tail of the original (moment grows with index) must survive.
        CHECK(seq.back().moment.x() == doctest::Approx(0.01 * 299));
    }
}

TEST_CASE("dataset split") {
    auto make_sequences = [](int n) {
        std::vector<SignalSequence> xs(n);
        for (int i = 0; i < n; ++i) xs[i].seed = static_cast<std::uint64_t>(i);
        return xs;
    };

    SUBCASE("80/20 arithmetic") {
        const DatasetSplit s10 = split_dataset(make_sequences(10), 0.8, 5);
        CHECK(s10.train.size() == 8);
        CHECK(s10.validation.size() == 2);
        const DatasetSplit s100 = split_dataset(make_sequences(100), 0.8, 5);
        CHECK(s100.train.size() == 80);
        CHECK(s100.validation.size() == 20);
    }
    SUBCASE("deterministic and disjoint") {
        const DatasetSplit a = split_dataset(make_sequences(20), 0.8, 9);
        const DatasetSplit b = split_dataset(make_sequences(20), 0.8, 9);
        REQUIRE(a.train.size() == b.train.size());
        for (std::size_t i = 0; i < a.train.size(); ++i) {
            CHECK(a.train[i].seed == b.train[i].seed);
        }
        std::vector<bool> seen(20, false);
        for (const auto& s : a.train) seen[s.seed] = true;
        for (const auto& s : a.validation) {
            CHECK_FALSE(seen[s.seed]);
            seen[s.seed] = true;
        }
    }
    SUBCASE("too few sequences rejected") {
        CHECK_THROWS_AS(split_dataset(make_sequences(4), 0.8, 1), ValidationError);
    }
}
