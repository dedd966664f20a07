#include <Eigen/Dense>

#include "doctest.h"
#include "whisker/errors.hpp"
#include "whisker/surrogate.hpp"

using namespace whisker;

namespace {

SurrogateSensorModel clean_model() {
    SurrogateSensorModel m;
    m.noise_sigma = 0.0;
    m.cubic_coeff = Vec2(0.0, 0.0);
    return m;
}

}  // namespace

TEST_CASE("wavelength map basics") {
    SUBCASE("zero moment maps to zero") {
        CHECK(moments_to_wavelengths(clean_model(), Vec2(0.0, 0.0), 0).norm() == 0.0);
    }
    SUBCASE("linear for zero cubic term") {
        const SurrogateSensorModel m = clean_model();
        const Vec2 w1 = moments_to_wavelengths(m, Vec2(0.3, -0.2), 0);
        const Vec2 w2 = moments_to_wavelengths(m, Vec2(0.6, -0.4), 0);
        CHECK((w2 - 2.0 * w1).norm() < 1e-12);
    }
    SUBCASE("default coupling on the unit moment") {
        const Vec2 w = moments_to_wavelengths(clean_model(), Vec2(1.0, 1.0), 0);
        CHECK(w.x() == doctest::Approx(12.0));
        CHECK(w.y() == doctest::Approx(15.0));
    }
    SUBCASE("round trip through the inverse coupling") {
        const SurrogateSensorModel m = clean_model();
        const Vec2 moment(0.42, -0.17);
        const Vec2 w = moments_to_wavelengths(m, moment, 0);
        const Vec2 back = m.coupling.inverse() * w;
        CHECK((back - moment).norm() < 1e-9);
    }
    SUBCASE("noise is deterministic per call index") {
        SurrogateSensorModel m;
        m.seed = 77;
        const Vec2 a = moments_to_wavelengths(m, Vec2(0.1, 0.1), 5);
        const Vec2 b = moments_to_wavelengths(m, Vec2(0.1, 0.1), 5);
        const Vec2 c = moments_to_wavelengths(m, Vec2(0.1, 0.1), 6);
        CHECK((a - b).norm() == 0.0);
        CHECK((a - c).norm() > 0.0);
    }
}

TEST_CASE("surrogate model validation") {
    SurrogateSensorModel m;
    m.coupling << 1.0, 0.0, 0.0, 1.0;  // uncoupled
    CHECK_THROWS_AS(m.validate(), ValidationError);

    SurrogateSensorModel s;
    s.coupling << 2.0, 1.0, 4.0, 2.0;  // singular
    CHECK_THROWS_AS(s.validate(), ValidationError);

    SurrogateSensorModel n;
    n.noise_sigma = -1.0;
    CHECK_THROWS_AS(n.validate(), ValidationError);
}

TEST_CASE("calibration rig") {
    const WhiskerSpec spec;

    SUBCASE("default run yields exactly 27 pairs satisfying the forward model") {
        const SurrogateSensorModel m = clean_model();
        const auto pairs = run_calibration_rig(spec, m);
        REQUIRE(pairs.size() == 27);
        for (const CalibrationPair& p : pairs) {
            const Vec2 expect = m.coupling * p.moment;
            CHECK((p.wavelength - expect).norm() < 1e-9);
        }
    }

    SUBCASE("rig moments span both channels with full-rank covariance") {
        const auto pairs = run_calibration_rig(spec, clean_model());
        Vec2 mean(0.0, 0.0);
        for (const auto& p : pairs) mean += p.moment;
        mean /= static_cast<double>(pairs.size());
        Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
        for (const auto& p : pairs) {
            const Vec2 d = p.moment - mean;
            cov += d * d.transpose();
        }
        cov /= static_cast<double>(pairs.size());
        const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
        CHECK(es.eigenvalues().minCoeff() > 1e-8);
    }

    SUBCASE("near-tangent rig stop produces a near-zero pair") {
        RigConfig cfg;
        cfg.n_trajectories = 1;
        cfg.points_per_traj = 1;
        cfg.depth_overrides = {1e-7};
        const auto pairs = run_calibration_rig(spec, clean_model(), cfg);
        REQUIRE(pairs.size() == 1);
        CHECK(pairs[0].moment.norm() < 1e-4);
        CHECK(pairs[0].wavelength.norm() < 1e-3);
    }
}
