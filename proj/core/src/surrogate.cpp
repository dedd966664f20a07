#include "whisker/surrogate.hpp"

#include <cmath>
#include <string>

#include "whisker/errors.hpp"
#include "whisker/rng.hpp"

namespace whisker {

void SurrogateSensorModel::validate() const {
    if (std::abs(coupling.determinant()) < 1e-9) {
        throw ValidationError("surrogate coupling matrix must be invertible");
    }
    if (coupling(0, 1) == 0.0 || coupling(1, 0) == 0.0) {
        throw ValidationError("surrogate coupling must have non-zero off-diagonal terms");
    }
    if (noise_sigma < 0.0) throw ValidationError("surrogate noise_sigma must be >= 0");
    if (!cubic_coeff.allFinite()) throw ValidationError("surrogate cubic_coeff must be finite");
}

Vec2 moments_to_wavelengths(const SurrogateSensorModel& model, const Vec2& moment,
                            std::uint64_t call_index) {
    Vec2 w = model.coupling * moment;
    w.x() += model.cubic_coeff.x() * moment.x() * moment.x() * moment.x();
    w.y() += model.cubic_coeff.y() * moment.y() * moment.y() * moment.y();
    if (model.noise_sigma > 0.0) {
        Rng rng(mix_seed(mix_seed(model.seed, "surrogate-noise"), call_index));
        w.x() += model.noise_sigma * rng.gaussian();
        w.y() += model.noise_sigma * rng.gaussian();
    }
    return w;
}

void RigConfig::validate() const {
    if (n_trajectories < 1) throw ValidationError("rig n_trajectories must be >= 1");
    if (points_per_traj < 1) throw ValidationError("rig points_per_traj must be >= 1");
    if (!(frac_min > 0.0) || !(frac_max <= 1.0) || frac_min >= frac_max) {
        throw ValidationError("rig arc-length fraction range must satisfy 0 < min < max <= 1");
    }
    if (!(max_depth_mm > 0.0)) throw ValidationError("rig max_depth_mm must be positive");
    if (!depth_overrides.empty() &&
        static_cast<int>(depth_overrides.size()) != points_per_traj) {
        throw ValidationError("rig depth_overrides size must equal points_per_traj");
    }
}

std::vector<CalibrationPair> run_calibration_rig(const WhiskerSpec& spec,
                                                 const SurrogateSensorModel& model,
                                                 const RigConfig& cfg) {
    spec.validate();
    model.validate();
    cfg.validate();

    const RodState rest = build_rest_shape(spec);
    const double h = spec.segment_length();

    std::vector<double> depths;
    if (!cfg.depth_overrides.empty()) {
        depths = cfg.depth_overrides;
    } else {
        for (int j = 0; j < cfg.points_per_traj; ++j) {
            depths.push_back(cfg.max_depth_mm * static_cast<double>(j + 1) / cfg.points_per_traj);
        }
    }

    std::vector<CalibrationPair> pairs;
    pairs.reserve(static_cast<std::size_t>(cfg.n_trajectories) * depths.size());
    std::uint64_t call_index = 0;

    for (int i = 0; i < cfg.n_trajectories; ++i) {
        const double frac =
            cfg.n_trajectories == 1
                ? 0.5 * (cfg.frac_min + cfg.frac_max)
                : cfg.frac_min + (cfg.frac_max - cfg.frac_min) * i / (cfg.n_trajectories - 1.0);
        const double s = frac * spec.total_length;

        // Anchor on the rest shape and the local rod direction there.
        const int seg = std::min(static_cast<int>(s / h), spec.n_segments - 1);
        const Vec2 a = rest.node_positions[seg];
        const Vec2 b = rest.node_positions[seg + 1];
        const Vec2 tangent = (b - a).normalized();
        const Vec2 anchor = a + (s - seg * h) * tangent;
        const double side = (i % 2 == 0) ? 1.0 : -1.0;  // alternate push direction
        const Vec2 push = side * rot90(tangent);

        for (double depth : depths) {
            const Vec2 pin = anchor + depth * push;
            const PinnedResult solved = solve_pinned(spec, pin);
            CalibrationPair pair;
            pair.moment = solved.state.base_moment;
            pair.wavelength = moments_to_wavelengths(model, pair.moment, call_index);
            pairs.push_back(pair);
            ++call_index;
        }
    }
    return pairs;
}

}  // namespace whisker
