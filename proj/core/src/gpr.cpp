#include "whisker/gpr.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "whisker/errors.hpp"

namespace whisker {

namespace {
constexpr double kJitter = 1e-10;
}

double tp_kernel(double r, double R) {
    r = std::abs(r);
    if (r > R) return 0.0;
    // Factored form of (2r³ − 3Rr² + R³)/12: exact zero at r = R, where the
    // expanded polynomial loses ~1e-9 to cancellation.
    return (R - r) * (R - r) * (2.0 * r + R) / 12.0;
}

GPRModel fit_gpr(const std::vector<Vec2>& inputs, const Eigen::VectorXd& targets,
                 double radius, double noise_variance) {
    const int n = static_cast<int>(inputs.size());
    if (n < 3) throw ValidationError("GPR fit needs at least 3 pairs, got " + std::to_string(n));
    if (targets.size() != n) throw ValidationError("GPR fit: inputs/targets size mismatch");
    if (noise_variance < 0.0) throw ValidationError("GPR noise_variance must be >= 0");

    double max_dist = 0.0, min_dist = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double d = (inputs[i] - inputs[j]).norm();
            max_dist = std::max(max_dist, d);
            min_dist = std::min(min_dist, d);
        }
    }
    if (min_dist == 0.0 && noise_variance == 0.0) {
        throw ValidationError("GPR fit: duplicate inputs with zero noise make the Gram matrix singular");
    }
    if (radius <= 0.0) radius = 2.0 * max_dist;
    if (radius <= max_dist) {
        throw ValidationError("GPR kernel radius must exceed the largest pairwise input distance");
    }

    Eigen::MatrixXd K(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            const double k = tp_kernel((inputs[i] - inputs[j]).norm(), radius);
            K(i, j) = k;
            K(j, i) = k;
        }
    }
    Eigen::MatrixXd Kn = K;
    Kn.diagonal().array() += noise_variance + kJitter;

    Eigen::LLT<Eigen::MatrixXd> llt(Kn);
    if (llt.info() != Eigen::Success) {
        throw SolverError("GPR Gram factorization failed (n=" + std::to_string(n) +
                              ", R=" + std::to_string(radius) +
                              ", noise=" + std::to_string(noise_variance) + ")",
                          0.0);
    }

    // One factorized solve plus two rounds of iterative refinement keeps the
    // training-point residuals at the round-off floor, which the zero-noise
    // interpolation property depends on.
    Eigen::VectorXd alpha = llt.solve(targets);
    for (int round = 0; round < 2; ++round) {
        const Eigen::VectorXd resid = targets - Kn * alpha;
        alpha += llt.solve(resid);
    }

    GPRModel model;
    model.inputs = inputs;
    model.targets = targets;
    model.radius = radius;
    model.noise_variance = noise_variance;
    model.alpha = std::move(alpha);
    model.chol_lower = llt.matrixL();
    return model;
}

namespace {

Eigen::VectorXd kernel_vector(const GPRModel& model, const Vec2& query) {
    const int n = static_cast<int>(model.inputs.size());
    Eigen::VectorXd ks(n);
    for (int i = 0; i < n; ++i) {
        ks[i] = tp_kernel((query - model.inputs[i]).norm(), model.radius);
    }
    return ks;
}

}  // namespace

double gpr_mean(const GPRModel& model, const Vec2& query) {
    if (!model.fitted()) throw ValidationError("GPR predict called before fit");
    return kernel_vector(model, query).dot(model.alpha);
}

std::pair<double, double> gpr_predict(const GPRModel& model, const Vec2& query) {
    if (!model.fitted()) throw ValidationError("GPR predict called before fit");
    const Eigen::VectorXd ks = kernel_vector(model, query);
    const double mean = ks.dot(model.alpha);

    // var = k(0) − k*ᵀ (K + noise I)⁻¹ k*, via the stored Cholesky factor.
    const Eigen::VectorXd v =
        model.chol_lower.triangularView<Eigen::Lower>().solve(ks);
    const double var = tp_kernel(0.0, model.radius) - v.squaredNorm();
    return {mean, std::max(var, 0.0)};
}

CalibrationMap fit_calibration(const std::vector<CalibrationPair>& pairs, double radius,
                               double noise_variance) {
    const int n = static_cast<int>(pairs.size());
    std::vector<Vec2> inputs;
    inputs.reserve(n);
    Eigen::VectorXd t0(n), t1(n);
    for (int i = 0; i < n; ++i) {
        inputs.push_back(pairs[i].wavelength);
        t0[i] = pairs[i].moment.x();
        t1[i] = pairs[i].moment.y();
    }
    CalibrationMap map;
    map.channel[0] = fit_gpr(inputs, t0, radius, noise_variance);
    map.channel[1] = fit_gpr(inputs, t1, radius, noise_variance);
    return map;
}

Vec2 calibrated_moments(const CalibrationMap& map, const Vec2& wavelength) {
    return Vec2(gpr_mean(map.channel[0], wavelength), gpr_mean(map.channel[1], wavelength));
}

void PreprocessConfig::validate() const {
    if (smoothing_window < 1) throw ValidationError("preprocess smoothing_window must be >= 1");
    if (activity_threshold < 0.0) throw ValidationError("preprocess activity_threshold must be >= 0");
}

PreprocessResult preprocess(const std::vector<Vec2>& raw, const PreprocessConfig& cfg) {
    cfg.validate();
    const int n = static_cast<int>(raw.size());
    PreprocessResult out;
    out.series.resize(n);
    out.active.resize(n);

    const int half_lo = (cfg.smoothing_window - 1) / 2;
    const int half_hi = cfg.smoothing_window / 2;
    for (int i = 0; i < n; ++i) {
        const int lo = std::max(0, i - half_lo);
        const int hi = std::min(n - 1, i + half_hi);
        Vec2 acc(0.0, 0.0);
        for (int j = lo; j <= hi; ++j) acc += raw[j];
        out.series[i] = acc / static_cast<double>(hi - lo + 1);
    }
    for (int i = 0; i < n; ++i) {
        const bool on = out.series[i].norm() >= cfg.activity_threshold;
        out.active[i] = on;
        if (!on) out.series[i] = Vec2(0.0, 0.0);
    }
    return out;
}

}  // namespace whisker
