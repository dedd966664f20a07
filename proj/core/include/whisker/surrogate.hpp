#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "whisker/geometry.hpp"
#include "whisker/rod.hpp"

namespace whisker {

// Stand-in for the optical strain sensor: maps true base moments (N·mm) to
// two coupled, slightly nonlinear, noisy wavelength-shift channels (pm).
//   w = coupling · m + cubic_coeff ⊙ m³ + N(0, noise_sigma²)
// The noise stream is indexed by an explicit call index so concurrent
// callers stay deterministic.
struct SurrogateSensorModel {
    Eigen::Matrix2d coupling = (Eigen::Matrix2d() << 10.0, 2.0, 3.0, 12.0).finished();
    Vec2 cubic_coeff{0.05, 0.05};  // pm per (N·mm)^3
    double noise_sigma = 0.5;      // pm
    std::uint64_t seed = 0;

    void validate() const;  // invertible, deliberately cross-coupled, sigma >= 0
};

Vec2 moments_to_wavelengths(const SurrogateSensorModel& model, const Vec2& moment,
                            std::uint64_t call_index);

// One calibration observation: sensed wavelengths against the simulator's
// base moments for the same pose.
struct CalibrationPair {
    Vec2 wavelength{0.0, 0.0};  // pm
    Vec2 moment{0.0, 0.0};      // N·mm
};

// Bench rig: a sliding groove pins the whisker at known positions. Anchor
// points sit on the rest shape at n_trajectories evenly spaced arc-length
// fractions of [frac_min, frac_max]; each trajectory pushes the groove
// perpendicular to the rod through points_per_traj evenly spaced depths up
// to max_depth_mm, alternating the push side per trajectory so both moment
// channels see both signs.
struct RigConfig {
    int n_trajectories = 9;
    int points_per_traj = 3;
    // The distal cap stays clear of the tip: past ~0.9 the groove cannot
    // hold the whisker statically — it slides out along its own axis.
    double frac_min = 0.35;
    double frac_max = 0.85;
    double max_depth_mm = 6.0;
    // When non-empty, replaces the evenly spaced depth ladder (used to
    // generate held-out poses between the standard stops).
    std::vector<double> depth_overrides;

    void validate() const;
};

// Runs the rig: one equilibrium solve per (trajectory, depth), exactly
// n_trajectories × points_per_traj pairs, wavelengths drawn with the pair
// index as noise index. Throws on unreachable poses or solver failure.
std::vector<CalibrationPair> run_calibration_rig(const WhiskerSpec& spec,
                                                 const SurrogateSensorModel& model,
                                                 const RigConfig& cfg = {});

}  // namespace whisker
