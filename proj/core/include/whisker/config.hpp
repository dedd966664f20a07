#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "whisker/gpr.hpp"
#include "whisker/placement.hpp"
#include "whisker/rod.hpp"
#include "whisker/shapes.hpp"
#include "whisker/signal.hpp"
#include "whisker/surrogate.hpp"
#include "whisker/whiskernet.hpp"

namespace whisker {

inline constexpr int kConfigSchemaVersion = 1;

// Corpus generation knobs on top of the sweep primitives.
struct DatagenConfig {
    int sweeps_per_object = 50;
    TrajectoryConfig trajectory;
    FilterThresholds filter;
    // When set, filter.moment_max is replaced by 5x the 95th percentile of
    // the calibration rig's moment magnitudes (a run-specific "way past
    // anything the bench produces" threshold).
    bool auto_moment_max = true;
    AugmentConfig augment;
    PlacementConfig placement;
    // Base travel past the object's far edge, covering the trailing curl of
    // the whisker so every contact episode ends inside the sweep.
    double trail_margin = 30.0;  // mm
    double train_ratio = 0.8;

    void validate() const;
};

struct CalibrationConfig {
    RigConfig rig;
    double radius = 0.0;          // kernel radius; 0 -> 2x data diameter
    double noise_variance = 0.25; // pm^2, the surrogate's default sigma^2
    PreprocessConfig preprocess;

    void validate() const;
};

struct EvalConfig {
    int sweeps_per_object = 6;
    std::vector<double> ablation_speeds{4.0, 6.0, 8.0, 10.0, 12.0};  // mm/s
    int ablation_sweeps = 6;          // sweeps per ablation cell
    double activity_threshold = 0.05; // N*mm prediction gate

    void validate() const;
};

// Everything one pipeline run needs. A single master seed fans out to named
// sub-seeds (datagen / surrogate / train / eval), so the derived
// SurrogateSensorModel::seed and TrainConfig::seed fields are not part of
// the file format.
struct RunConfig {
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    WhiskerSpec whisker;
    std::vector<ShapeSpec> train_shapes;
    std::vector<ShapeSpec> eval_shapes;
    DatagenConfig datagen;
    SurrogateSensorModel surrogate;
    CalibrationConfig calibration;
    WhiskerNetConfig model;
    TrainConfig train;
    EvalConfig eval;

    void validate() const;
};

// Desk-scale defaults: six training shapes (two circles, two rectangles, a
// blob, an L bracket), a held-out circle and rectangle, 50 sweeps per
// object, and the trimmed model.
RunConfig default_run_config();

// Scales the run up to the reference protocol: 200 sweeps per object and
// the full-size network.
void apply_paper_scale(RunConfig& cfg);

// Strict JSON: every key optional (defaults fill in), unknown keys rejected
// with their full path, schema version checked. parse(serialize(c))
// reproduces c exactly.
std::string serialize_run_config(const RunConfig& cfg);
RunConfig parse_run_config(const std::string& text);

RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const RunConfig& cfg, const std::filesystem::path& path);

}  // namespace whisker
