#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "whisker/geometry.hpp"
#include "whisker/surrogate.hpp"

namespace whisker {

// Thin-plate covariance k(r) = (2r³ − 3Rr² + R³)/12 for 0 ≤ r ≤ R.
// k(0) = R³/12, k(R) = 0; values beyond R clamp to 0 (outside the modeled
// region).
double tp_kernel(double r, double R);

// One scalar-output GP over 2-vector inputs (wavelength pm → moment N·mm).
// alpha solves (K + noise·I)·alpha = targets; the factorization is kept for
// posterior variance and is rebuilt when a persisted model is loaded.
struct GPRModel {
    std::vector<Vec2> inputs;
    Eigen::VectorXd targets;
    double radius = 0.0;
    double noise_variance = 0.0;
    Eigen::VectorXd alpha;
    Eigen::MatrixXd chol_lower;  // L with L·Lᵀ = K + (noise+jitter)·I

    bool fitted() const { return alpha.size() > 0; }
};

// Fits one channel. radius <= 0 selects the default: 2× the maximum
// pairwise input distance. Throws ValidationError on bad inputs (fewer than
// 3 pairs, duplicates with zero noise, radius not exceeding the data
// diameter) and SolverError if the Gram factorization fails.
GPRModel fit_gpr(const std::vector<Vec2>& inputs, const Eigen::VectorXd& targets,
                 double radius, double noise_variance);

double gpr_mean(const GPRModel& model, const Vec2& query);

// (posterior mean, posterior variance >= 0)
std::pair<double, double> gpr_predict(const GPRModel& model, const Vec2& query);

// Both moment channels as independent GPs over the same wavelength inputs.
struct CalibrationMap {
    GPRModel channel[2];
};

CalibrationMap fit_calibration(const std::vector<CalibrationPair>& pairs, double radius = 0.0,
                               double noise_variance = 0.25);

Vec2 calibrated_moments(const CalibrationMap& map, const Vec2& wavelength);

// Wavelength-stream cleanup ahead of calibration: centered moving-average
// smoothing, then gating — samples whose magnitude stays below the activity
// threshold are zeroed and marked inactive (treated as no-contact).
struct PreprocessConfig {
    int smoothing_window = 3;      // samples
    double activity_threshold = 1.5;  // pm

    void validate() const;
};

struct PreprocessResult {
    std::vector<Vec2> series;
    std::vector<bool> active;
};

PreprocessResult preprocess(const std::vector<Vec2>& raw, const PreprocessConfig& cfg);

}  // namespace whisker
