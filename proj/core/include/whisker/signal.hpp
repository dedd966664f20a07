#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "whisker/geometry.hpp"
#include "whisker/placement.hpp"
#include "whisker/rng.hpp"
#include "whisker/rod.hpp"

namespace whisker {

// Base motion of one sweep. The base advances along `direction` with
// per-step accelerations; integration is semi-implicit with a small floor
// so speed stays positive:
//   v[j+1] = max(v[j] + a[j]·dt, kSpeedFloor);  pos[j+1] = pos[j] + v[j+1]·dt
// Sample j is taken at pos[j] (so sample 0 is the start pose).
struct SweepTrajectory {
    Vec2 direction{0.0, 1.0};
    double initial_speed = 5.0;                  // mm/s
    std::vector<double> acceleration_profile;    // mm/s² per sim step
    double duration = 0.0;                       // s
    double sim_rate = 50.0;                      // Hz

    static constexpr double kSpeedFloor = 0.5;   // mm/s

    std::size_t n_steps() const { return acceleration_profile.size(); }

    // Speed in effect at each sample (v[0] = initial_speed).
    std::vector<double> step_speeds() const;

    // Distance traveled along `direction` at each sample.
    std::vector<double> base_offsets() const;

    Pose2 base_pose(std::size_t step) const;
};

struct TrajectoryConfig {
    double sim_rate = 50.0;        // Hz
    double speed_min = 3.0;        // mm/s
    double speed_max = 7.0;
    double accel_limit = 0.4;      // mm/s², resampled uniformly each second

    void validate() const;
};

// Randomized trajectory long enough to cover path_length mm. The
// acceleration is piecewise constant, redrawn each second.
SweepTrajectory make_random_trajectory(double path_length, Rng& rng,
                                       const TrajectoryConfig& cfg = {});

// Deterministic-speed trajectory for ablations. When speed_jitter is true,
// each step's speed is the nominal speed scaled by an independent uniform
// draw from [0.8, 1.2] (encoded through the acceleration profile).
SweepTrajectory make_constant_speed_trajectory(double path_length, double speed_mm_s,
                                               bool speed_jitter, Rng& rng,
                                               double sim_rate = 50.0);

// One simulated reading. contact_pos is in the whisker-base frame and is a
// (0,0) sentinel whenever in_contact is false.
struct ContactSample {
    double t = 0.0;        // s
    Vec2 moment{0.0, 0.0}; // N·mm
    Vec2 contact_pos{0.0, 0.0};
    bool in_contact = false;
};

// A processed 5 Hz sequence plus the provenance needed to replay it.
struct SignalSequence {
    std::vector<ContactSample> samples;
    std::string object_name;
    ScenePlacement placement;
    SweepTrajectory trajectory;
    std::uint64_t seed = 0;
};

enum class RejectReason {
    torque_threshold,
    contact_jump,
    multiple_episodes,
    solver_failure,
    no_contact,
};
const char* reject_reason_name(RejectReason reason);

struct FilterThresholds {
    double moment_max = 5.0;  // N·mm, any sample above rejects the sweep
    double jump_max = 5.0;    // mm of contact travel per 5 Hz interval
};

struct FilterOutcome {
    bool accepted = false;
    RejectReason reason = RejectReason::torque_threshold;  // valid when !accepted
};

// Steps the base along the trajectory, solving rod equilibrium against the
// placed object at every sim step (warm-started). Throws SolverError if any
// step fails to converge; callers treat that as a discarded sweep.
std::vector<ContactSample> run_sweep(const WhiskerSpec& spec, const PolyObject& object,
                                     const ScenePlacement& placement,
                                     const SweepTrajectory& trajectory);

// Accept/reject per the corpus rules: any |moment| beyond moment_max, any
// in-contact displacement faster than jump_max per 5 Hz interval, or more
// than one contact episode. Rejection is a value, not an error.
FilterOutcome filter_sequence(const std::vector<ContactSample>& raw,
                              const FilterThresholds& thresholds, double sim_rate);

// Stride decimation to 5 Hz with timestamps rewritten to the exact 0.2 s
// grid. sim_rate must be divisible by 5.
std::vector<ContactSample> downsample_to_5hz(const std::vector<ContactSample>& raw,
                                             double sim_rate);

struct AugmentConfig {
    int k_max = 10;             // prepended no-contact samples: k ~ U{0..k_max}
    double noise_sigma = 0.02;  // N·mm noise on the prepended samples
    int max_length = 256;       // truncate keeping the latest samples

    void validate() const;
};

// Prepends k no-contact samples, truncates to max_length keeping the most
// recent, and rewrites timestamps onto the 0.2 s grid. In-contact samples
// are never modified.
void augment(std::vector<ContactSample>& samples, Rng& rng, const AugmentConfig& cfg);

struct DatasetSplit {
    std::vector<SignalSequence> train;
    std::vector<SignalSequence> validation;
};

// Seeded shuffle then an 80/20 (by default) cut. Requires >= 5 sequences.
DatasetSplit split_dataset(std::vector<SignalSequence> sequences, double train_ratio,
                           std::uint64_t seed);

}  // namespace whisker
