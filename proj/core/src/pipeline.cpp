#include "whisker/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "whisker/errors.hpp"
#include "whisker/rng.hpp"

namespace whisker {

namespace {

// Base travel long enough that the whisker's trailing curl clears the far
// edge of the placed object before the sweep ends.
double sweep_path_length(const PolyObject& placed, double trail_margin) {
    return std::max(placed.max_corner().y(), 0.0) + trail_margin;
}

}  // namespace

std::uint64_t stage_seed_datagen(std::uint64_t master) { return mix_seed(master, "datagen"); }
std::uint64_t stage_seed_surrogate(std::uint64_t master) { return mix_seed(master, "surrogate"); }
std::uint64_t stage_seed_train(std::uint64_t master) { return mix_seed(master, "train"); }
std::uint64_t stage_seed_eval(std::uint64_t master) { return mix_seed(master, "eval"); }

SurrogateSensorModel seeded_surrogate(const RunConfig& cfg) {
    SurrogateSensorModel model = cfg.surrogate;
    model.seed = stage_seed_surrogate(cfg.seed);
    return model;
}

double resolve_moment_max(const RunConfig& cfg) {
    if (!cfg.datagen.auto_moment_max) return cfg.datagen.filter.moment_max;

    // Noise-free rig pass: the threshold should depend on the bench
    // geometry, not on one noise draw.
    SurrogateSensorModel quiet = cfg.surrogate;
    quiet.noise_sigma = 0.0;
    std::vector<double> norms;
    try {
        for (const CalibrationPair& p : run_calibration_rig(cfg.whisker, quiet, cfg.calibration.rig)) {
            norms.push_back(p.moment.norm());
        }
    } catch (const SolverError&) {
        return cfg.datagen.filter.moment_max;
    }
    if (norms.empty()) return cfg.datagen.filter.moment_max;
    std::sort(norms.begin(), norms.end());
    // Nearest-rank 95th percentile: ceil(0.95 n) in 1-based ranks.
    const std::size_t rank =
        static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(norms.size())));
    return 5.0 * norms[rank - 1];
}

SignalSequence run_processed_sweep(const WhiskerSpec& spec, const PolyObject& object,
                                   const ScenePlacement& placement,
                                   const SweepTrajectory& trajectory,
                                   const std::string& object_name, std::uint64_t seed) {
    SignalSequence s;
    s.samples = downsample_to_5hz(run_sweep(spec, object, placement, trajectory), trajectory.sim_rate);
    s.object_name = object_name;
    s.placement = placement;
    s.trajectory = trajectory;
    s.seed = seed;
    return s;
}

Corpus generate_corpus(const RunConfig& cfg) {
    const std::uint64_t datagen = stage_seed_datagen(cfg.seed);
    const RodState rest_shape = build_rest_shape(cfg.whisker);

    FilterThresholds thresholds = cfg.datagen.filter;
    thresholds.moment_max = resolve_moment_max(cfg);

    Corpus corpus;
    corpus.stats.moment_max = thresholds.moment_max;
    for (const RejectReason reason :
         {RejectReason::torque_threshold, RejectReason::contact_jump,
          RejectReason::multiple_episodes, RejectReason::solver_failure, RejectReason::no_contact}) {
        corpus.stats.rejected[reject_reason_name(reason)] = 0;
    }
    const auto tally = [&corpus](RejectReason reason) {
        ++corpus.stats.rejected[reject_reason_name(reason)];
    };

    std::vector<SignalSequence> accepted;
    for (std::size_t oi = 0; oi < cfg.train_shapes.size(); ++oi) {
        const ShapeSpec& shape = cfg.train_shapes[oi];
        const PolyObject object = make_shape(shape);
        const std::uint64_t object_seed = mix_seed(datagen, oi);
        for (int si = 0; si < cfg.datagen.sweeps_per_object; ++si) {
            const std::uint64_t sweep_seed = mix_seed(object_seed, static_cast<std::uint64_t>(si));
            ++corpus.stats.attempted;

            const ScenePlacement placement = random_placement(
                object, rest_shape, mix_seed(sweep_seed, "placement"), cfg.datagen.placement);
            const PolyObject placed = object.transformed(placement.pose());
            Rng traj_rng(mix_seed(sweep_seed, "trajectory"));
            const SweepTrajectory trajectory = make_random_trajectory(
                sweep_path_length(placed, cfg.datagen.trail_margin), traj_rng,
                cfg.datagen.trajectory);

            std::vector<ContactSample> raw;
            try {
                raw = run_sweep(cfg.whisker, object, placement, trajectory);
            } catch (const SolverError&) {
                tally(RejectReason::solver_failure);
                continue;
            }
            const bool touched = std::any_of(raw.begin(), raw.end(),
                                             [](const ContactSample& c) { return c.in_contact; });
            if (!touched) {
                tally(RejectReason::no_contact);
                continue;
            }
            const FilterOutcome outcome =
                filter_sequence(raw, thresholds, cfg.datagen.trajectory.sim_rate);
            if (!outcome.accepted) {
                tally(outcome.reason);
                continue;
            }

            SignalSequence s;
            s.samples = downsample_to_5hz(raw, cfg.datagen.trajectory.sim_rate);
            Rng aug_rng(mix_seed(sweep_seed, "augment"));
            augment(s.samples, aug_rng, cfg.datagen.augment);
            s.object_name = shape.name;
            s.placement = placement;
            s.trajectory = trajectory;
            s.seed = sweep_seed;
            accepted.push_back(std::move(s));
            ++corpus.stats.accepted;
        }
    }

    corpus.split =
        split_dataset(std::move(accepted), cfg.datagen.train_ratio, mix_seed(datagen, "split"));
    return corpus;
}

}  // namespace whisker
