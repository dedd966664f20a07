#include "whisker/signal.hpp"

#include <algorithm>
#include <cmath>

#include "whisker/errors.hpp"

namespace whisker {

std::vector<double> SweepTrajectory::step_speeds() const {
    std::vector<double> v(n_steps());
    if (v.empty()) return v;
    const double dt = 1.0 / sim_rate;
    v[0] = initial_speed;
    for (std::size_t j = 0; j + 1 < v.size(); ++j) {
        v[j + 1] = std::max(v[j] + acceleration_profile[j] * dt, kSpeedFloor);
    }
    return v;
}

std::vector<double> SweepTrajectory::base_offsets() const {
    const std::vector<double> v = step_speeds();
    std::vector<double> pos(v.size());
    const double dt = 1.0 / sim_rate;
    double p = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) {
        pos[j] = p;
        if (j + 1 < v.size()) p += v[j + 1] * dt;
    }
    return pos;
}

Pose2 SweepTrajectory::base_pose(std::size_t step) const {
    // Used rarely (error paths, plots); sweep execution integrates inline.
    const std::vector<double> pos = base_offsets();
    Pose2 pose;
    pose.translation = direction * pos.at(step);
    return pose;
}

void TrajectoryConfig::validate() const {
    if (!(sim_rate >= 50.0)) throw ValidationError("trajectory sim_rate must be >= 50 Hz");
    if (!(speed_min > 0.0) || speed_max < speed_min) {
        throw ValidationError("trajectory speed range invalid");
    }
    if (accel_limit < 0.0) throw ValidationError("trajectory accel_limit must be >= 0");
}

SweepTrajectory make_random_trajectory(double path_length, Rng& rng,
                                       const TrajectoryConfig& cfg) {
    cfg.validate();
    if (!(path_length > 0.0)) throw ValidationError("trajectory path_length must be positive");

    SweepTrajectory tr;
    tr.sim_rate = cfg.sim_rate;
    tr.initial_speed = rng.uniform(cfg.speed_min, cfg.speed_max);

    const double dt = 1.0 / cfg.sim_rate;
    const int steps_per_second = static_cast<int>(std::lround(cfg.sim_rate));
    double v = tr.initial_speed;
    double pos = 0.0;
    double accel = rng.uniform(-cfg.accel_limit, cfg.accel_limit);
    // Hard cap so a pathological draw can't spin forever.
    const std::size_t max_steps = static_cast<std::size_t>(
        std::ceil(path_length / SweepTrajectory::kSpeedFloor * cfg.sim_rate)) + steps_per_second;
    while (pos < path_length && tr.acceleration_profile.size() < max_steps) {
        const std::size_t j = tr.acceleration_profile.size();
        if (j > 0 && j % steps_per_second == 0) {
            accel = rng.uniform(-cfg.accel_limit, cfg.accel_limit);
        }
        tr.acceleration_profile.push_back(accel);
        v = std::max(v + accel * dt, SweepTrajectory::kSpeedFloor);
        pos += v * dt;
    }
    tr.duration = tr.acceleration_profile.size() * dt;
    return tr;
}

SweepTrajectory make_constant_speed_trajectory(double path_length, double speed_mm_s,
                                               bool speed_jitter, Rng& rng,
                                               double sim_rate) {
    if (!(speed_mm_s > 0.0)) throw ValidationError("trajectory speed must be positive");
    if (!(path_length > 0.0)) throw ValidationError("trajectory path_length must be positive");

    SweepTrajectory tr;
    tr.sim_rate = sim_rate;
    const double dt = 1.0 / sim_rate;

    // Build the target per-step speeds, then encode them as accelerations so
    // the integration rule reproduces them exactly.
    std::vector<double> speeds;
    speeds.push_back(speed_jitter ? speed_mm_s * rng.uniform(0.8, 1.2) : speed_mm_s);
    double pos = 0.0;
    while (pos < path_length) {
        const double v = speed_jitter ? speed_mm_s * rng.uniform(0.8, 1.2) : speed_mm_s;
        speeds.push_back(v);
        pos += v * dt;
    }
    tr.initial_speed = speeds[0];
    tr.acceleration_profile.resize(speeds.size() - 1);
    for (std::size_t j = 0; j + 1 < speeds.size(); ++j) {
        tr.acceleration_profile[j] = (speeds[j + 1] - speeds[j]) / dt;
    }
    tr.duration = tr.acceleration_profile.size() * dt;
    return tr;
}

const char* reject_reason_name(RejectReason reason) {
    switch (reason) {
        case RejectReason::torque_threshold: return "torque_threshold";
        case RejectReason::contact_jump: return "contact_jump";
        case RejectReason::multiple_episodes: return "multiple_episodes";
        case RejectReason::solver_failure: return "solver_failure";
        case RejectReason::no_contact: return "no_contact";
    }
    return "unknown";
}

std::vector<ContactSample> run_sweep(const WhiskerSpec& spec, const PolyObject& object,
                                     const ScenePlacement& placement,
                                     const SweepTrajectory& trajectory) {
    const PolyObject placed = object.transformed(placement.pose());
    const double dt = 1.0 / trajectory.sim_rate;

    std::vector<ContactSample> samples;
    samples.reserve(trajectory.n_steps());

    EquilibriumResult prev;
    bool have_prev = false;
    double v = trajectory.initial_speed;
    double pos = 0.0;
    for (std::size_t j = 0; j < trajectory.n_steps(); ++j) {
        Pose2 base;
        base.translation = trajectory.direction * pos;

        const EquilibriumResult res = solve_equilibrium(
            spec, base, &placed, have_prev ? &prev : nullptr);

        ContactSample s;
        s.t = j * dt;
        s.moment = res.state.base_moment;
        if (res.contact.has_value()) {
            s.in_contact = true;
            s.contact_pos = res.contact->position;
        }
        samples.push_back(s);

        prev = res;
        have_prev = true;
        v = std::max(v + trajectory.acceleration_profile[j] * dt, SweepTrajectory::kSpeedFloor);
        pos += v * dt;
    }
    return samples;
}

namespace {

// Decimation stride taking sim_rate down to 5 Hz; the rate must divide.
int five_hz_stride(double sim_rate) {
    const double stride_f = sim_rate / 5.0;
    const int stride = static_cast<int>(std::lround(stride_f));
    if (std::abs(stride_f - stride) > 1e-9 || stride < 1) {
        throw ValidationError("sim_rate must be divisible by 5 Hz");
    }
    return stride;
}

}  // namespace

FilterOutcome filter_sequence(const std::vector<ContactSample>& raw,
                              const FilterThresholds& thresholds, double sim_rate) {
    if (raw.empty()) throw ValidationError("filter_sequence: empty sequence");

    for (const ContactSample& s : raw) {
        if (s.moment.norm() > thresholds.moment_max) {
            return {false, RejectReason::torque_threshold};
        }
    }

    // jump_max is stated per 5 Hz step, so compare the same decimated pairs
    // the 5 Hz consumer will see. Judging raw consecutive steps instead
    // would trip on discretization node hops: the contact slides smoothly
    // but its recorded position migrates segment-by-segment, one segment
    // length within a single sim step.
    const std::size_t stride = static_cast<std::size_t>(five_hz_stride(sim_rate));
    for (std::size_t i = stride; i < raw.size(); i += stride) {
        if (raw[i].in_contact && raw[i - stride].in_contact &&
            (raw[i].contact_pos - raw[i - stride].contact_pos).norm() > thresholds.jump_max) {
            return {false, RejectReason::contact_jump};
        }
    }

    int episodes = 0;
    bool prev_contact = false;
    for (const ContactSample& s : raw) {
        if (s.in_contact && !prev_contact) ++episodes;
        prev_contact = s.in_contact;
    }
    if (episodes > 1) return {false, RejectReason::multiple_episodes};

    return {true, RejectReason::torque_threshold};
}

std::vector<ContactSample> downsample_to_5hz(const std::vector<ContactSample>& raw,
                                             double sim_rate) {
    const std::size_t stride = static_cast<std::size_t>(five_hz_stride(sim_rate));
    std::vector<ContactSample> out;
    out.reserve(raw.size() / stride + 1);
    for (std::size_t i = 0; i < raw.size(); i += stride) {
        ContactSample s = raw[i];
        s.t = 0.2 * static_cast<double>(out.size());
        out.push_back(s);
    }
    return out;
}

void AugmentConfig::validate() const {
    if (k_max < 0) throw ValidationError("augment k_max must be >= 0");
    if (noise_sigma < 0.0) throw ValidationError("augment noise_sigma must be >= 0");
    if (max_length < 1) throw ValidationError("augment max_length must be >= 1");
}

void augment(std::vector<ContactSample>& samples, Rng& rng, const AugmentConfig& cfg) {
    cfg.validate();
    const int k = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(cfg.k_max) + 1));

    std::vector<ContactSample> prefix(k);
    for (int i = 0; i < k; ++i) {
        prefix[i].moment = Vec2(rng.gaussian(0.0, cfg.noise_sigma),
                                rng.gaussian(0.0, cfg.noise_sigma));
        prefix[i].in_contact = false;
    }
    samples.insert(samples.begin(), prefix.begin(), prefix.end());

    if (static_cast<int>(samples.size()) > cfg.max_length) {
        samples.erase(samples.begin(),
                      samples.end() - cfg.max_length);
    }
    for (std::size_t i = 0; i < samples.size(); ++i) samples[i].t = 0.2 * static_cast<double>(i);
}

DatasetSplit split_dataset(std::vector<SignalSequence> sequences, double train_ratio,
                           std::uint64_t seed) {
    if (sequences.size() < 5) {
        throw ValidationError("split needs at least 5 sequences, got " +
                              std::to_string(sequences.size()));
    }
    if (!(train_ratio > 0.0 && train_ratio < 1.0)) {
        throw ValidationError("split train_ratio must lie in (0, 1)");
    }
    Rng rng(mix_seed(seed, "split"));
    rng.shuffle(sequences);

    const std::size_t n_train = static_cast<std::size_t>(
        std::llround(train_ratio * static_cast<double>(sequences.size())));
    DatasetSplit out;
    out.train.assign(sequences.begin(), sequences.begin() + n_train);
    out.validation.assign(sequences.begin() + n_train, sequences.end());
    return out;
}

}  // namespace whisker
