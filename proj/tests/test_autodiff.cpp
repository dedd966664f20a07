#include <cmath>
#include <functional>

#include "doctest.h"
#include "whisker/autodiff.hpp"
#include "whisker/errors.hpp"
#include "whisker/rng.hpp"

using namespace whisker;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double span = 1.0) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-span, span);
    }
    return m;
}

// Scalar loss assembled from a single differentiable leaf; the same builder
// runs once recording (for the tape gradient) and many times value-only
// (for the central differences).
using LossBuilder = std::function<Tape::NodeId(Tape&, TapeOps&, Tape::NodeId)>;

double eval_loss(const Eigen::MatrixXd& theta, const LossBuilder& build) {
    Tape tape(false);
    TapeOps ops(tape);
    const Tape::NodeId leaf = tape.constant(theta);
    return tape.value(build(tape, ops, leaf))(0, 0);
}

double max_rel_gradient_error(const Eigen::MatrixXd& theta, const LossBuilder& build,
                              double h = 1e-5) {
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(theta.rows(), theta.cols());
    {
        Tape tape(true);
        TapeOps ops(tape);
        const Tape::NodeId leaf = tape.parameter(theta, &grad);
        tape.backward(build(tape, ops, leaf));
    }
    double worst = 0.0;
    for (Eigen::Index i = 0; i < theta.rows(); ++i) {
        for (Eigen::Index j = 0; j < theta.cols(); ++j) {
            Eigen::MatrixXd tp = theta, tm = theta;
            tp(i, j) += h;
            tm(i, j) -= h;
            const double fd = (eval_loss(tp, build) - eval_loss(tm, build)) / (2.0 * h);
            const double rel =
                std::abs(grad(i, j) - fd) / std::max({1e-6, std::abs(grad(i, j)), std::abs(fd)});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

// Mean of squares: a smooth scalar head for any op under test.
Tape::NodeId mean_square(Tape& tape, TapeOps& ops, Tape::NodeId x) {
    const Eigen::MatrixXd& v = tape.value(x);
    return ops.masked_mse(x, Eigen::MatrixXd::Zero(v.rows(), v.cols()),
                          std::vector<bool>(v.rows(), true));
}

}  // namespace

TEST_CASE("matmul gradients match central differences") {
    Rng rng(101);
    const Eigen::MatrixXd a = random_matrix(4, 3, rng);
    const Eigen::MatrixXd b = random_matrix(3, 5, rng);

    const double err_a = max_rel_gradient_error(a, [&](Tape& t, TapeOps& ops, Tape::NodeId leaf) {
        return mean_square(t, ops, ops.matmul(leaf, t.constant(b)));
    });
    CHECK(err_a < 1e-6);

    const double err_b = max_rel_gradient_error(b, [&](Tape& t, TapeOps& ops, Tape::NodeId leaf) {
        return mean_square(t, ops, ops.matmul(t.constant(a), leaf));
    });
    CHECK(err_b < 1e-6);
}

TEST_CASE("matmul_nt gradients match central differences") {
    Rng rng(102);
    const Eigen::MatrixXd a = random_matrix(4, 3, rng);
    const Eigen::MatrixXd b = random_matrix(5, 3, rng);

    const double err_a = max_rel_gradient_error(a, [&](Tape& t, TapeOps& ops, Tape::NodeId leaf) {
        return mean_square(t, ops, ops.matmul_nt(leaf, t.constant(b)));
    });
    CHECK(err_a < 1e-6);

    const double err_b = max_rel_gradient_error(b, [&](Tape& t, TapeOps& ops, Tape::NodeId leaf) {
        return mean_square(t, ops, ops.matmul_nt(t.constant(a), leaf));
    });
    CHECK(err_b < 1e-6);

    Tape tape(false);
    TapeOps ops(tape);
    const Eigen::MatrixXd direct =
        tape.value(ops.matmul_nt(tape.constant(a), tape.constant(b)));
    CHECK((direct - a * b.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("add, subtract, scale, and row broadcast gradients") {
    Rng rng(103);
    const Eigen::MatrixXd a = random_matrix(3, 4, rng);
    const Eigen::MatrixXd b = random_matrix(3, 4, rng);
    const Eigen::MatrixXd row = random_matrix(1, 4, rng);

    CHECK(max_rel_gradient_error(a, [&](Tape& t, TapeOps& ops, Tape::NodeId leaf) {
              return mean_square(t, ops, ops.add(leaf, t.constant(b)));
          }) < 1e-6);
    CHECK(max_rel_gradient_error(b, [&](Tape& t, TapeOps& ops, Tape::NodeId leaf) {
              return mean_square(t, ops, ops.subtract(t.constant(a), leaf));
          }) < 1e-6);
    CHECK(max_rel_gradient_error(a, [&](Tape& t, TapeOps& ops, Tape::NodeId leaf) {
              return mean_square(t, ops, ops.scale(leaf, -2.5));
          }) < 1e-6);
    CHECK(max_rel_gradient_error(a, [&](Tape& t, TapeOps& ops, Tape::NodeId leaf) {
              return mean_square(t, ops, ops.add_row_broadcast(leaf, t.constant(row)));
          }) < 1e-6);
    CHECK(max_rel_gradient_error(row, [&](Tape& t, TapeOps& ops, Tape::NodeId leaf) {
              return mean_square(t, ops, ops.add_row_broadcast(t.constant(a), leaf));
          }) < 1e-6);
}

TEST_CASE("slice and concat gradients scatter into the right windows") {
    Rng rng(104);
    const Eigen::MatrixXd a = random_matrix(6, 5, rng);

    CHECK(max_rel_gradient_error(a, [&](Tape& t, TapeOps& ops, Tape::NodeId leaf) {
              return mean_square(t, ops, ops.slice_rows(leaf, 1, 3));
          }) < 1e-6);
    CHECK(max_rel_gradient_error(a, [&](Tape& t, TapeOps& ops, Tape::NodeId leaf) {
              return mean_square(t, ops, ops.slice_cols(leaf, 2, 2));
          }) < 1e-6);
    CHECK(max_rel_gradient_error(a, [&](Tape& t, TapeOps& ops, Tape::NodeId leaf) {
              const auto left = ops.slice_cols(leaf, 0, 2);
              const auto right = ops.slice_cols(leaf, 2, 3);
              return mean_square(t, ops, ops.concat_cols({right, left}));
          }) < 1e-6);

    // Rows outside a slice window get no gradient.
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(a.rows(), a.cols());
    Tape tape(true);
    TapeOps ops(tape);
    const Tape::NodeId leaf = tape.parameter(a, &grad);
    tape.backward(mean_square(tape, ops, ops.slice_rows(leaf, 1, 3)));
    CHECK(grad.row(0).cwiseAbs().maxCoeff() == 0.0);
    CHECK(grad.row(5).cwiseAbs().maxCoeff() == 0.0);
    CHECK(grad.row(2).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("gelu values and gradients") {
    Tape tape(false);
    TapeOps ops(tape);
    Eigen::MatrixXd x(1, 3);
    x << 0.0, 1.0, -2.0;
    const Eigen::MatrixXd y = tape.value(ops.gelu(tape.constant(x)));
    CHECK(y(0, 0) == 0.0);
    // x * Phi(x) at x = 1: Phi(1) = 0.8413447460685429
    CHECK(y(0, 1) == doctest::Approx(0.8413447460685429).epsilon(1e-12));
    CHECK(y(0, 2) == doctest::Approx(-2.0 * 0.022750131948179212).epsilon(1e-9));

    Rng rng(105);
    const Eigen::MatrixXd a = random_matrix(4, 4, rng, 2.0);
    CHECK(max_rel_gradient_error(a, [&](Tape& t, TapeOps& ops2, Tape::NodeId leaf) {
              return mean_square(t, ops2, ops2.gelu(leaf));
          }) < 1e-6);
}

TEST_CASE("layer_norm normalizes rows and backpropagates exactly") {
    Rng rng(106);
    const Eigen::MatrixXd x = random_matrix(4, 6, rng, 3.0);
    const Eigen::MatrixXd gamma = random_matrix(1, 6, rng).array() + 1.5;
    const Eigen::MatrixXd beta = random_matrix(1, 6, rng);

    Tape tape(false);
    TapeOps ops(tape);
    const Eigen::MatrixXd y = tape.value(
        ops.layer_norm(tape.constant(x), tape.constant(gamma), tape.constant(beta), 0.0));
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        const Eigen::ArrayXd xhat = (y.row(i).array() - beta.row(0).array()) / gamma.row(0).array();
        CHECK(xhat.mean() == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(xhat.square().mean() == doctest::Approx(1.0).epsilon(1e-10));
    }

    CHECK(max_rel_gradient_error(x, [&](Tape& t, TapeOps& o, Tape::NodeId leaf) {
              return mean_square(t, o, o.layer_norm(leaf, t.constant(gamma), t.constant(beta)));
          }) < 1e-5);
    CHECK(max_rel_gradient_error(gamma, [&](Tape& t, TapeOps& o, Tape::NodeId leaf) {
              return mean_square(t, o, o.layer_norm(t.constant(x), leaf, t.constant(beta)));
          }) < 1e-6);
    CHECK(max_rel_gradient_error(beta, [&](Tape& t, TapeOps& o, Tape::NodeId leaf) {
              return mean_square(t, o, o.layer_norm(t.constant(x), t.constant(gamma), leaf));
          }) < 1e-6);
}

TEST_CASE("causal softmax rows are distributions over the past") {
    Rng rng(107);
    const Eigen::MatrixXd s = random_matrix(5, 5, rng, 4.0);
    Tape tape(false);
    TapeOps ops(tape);
    const Eigen::MatrixXd p = tape.value(ops.causal_softmax(tape.constant(s)));
    for (Eigen::Index i = 0; i < 5; ++i) {
        CHECK(p.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
        for (Eigen::Index j = i + 1; j < 5; ++j) CHECK(p(i, j) == 0.0);
        for (Eigen::Index j = 0; j <= i; ++j) CHECK(p(i, j) > 0.0);
    }

    CHECK(max_rel_gradient_error(s, [&](Tape& t, TapeOps& o, Tape::NodeId leaf) {
              return mean_square(t, o, o.causal_softmax(leaf));
          }) < 1e-5);
}

TEST_CASE("dropout is inverted, seeded, and exact in the backward pass") {
    Rng rng(108);
    const Eigen::MatrixXd a = random_matrix(8, 8, rng);

    // rate 0 is the identity and consumes no randomness.
    {
        Tape tape(false);
        TapeOps ops(tape);
        Rng drop_rng(1);
        const Eigen::MatrixXd y = tape.value(ops.dropout(tape.constant(a), 0.0, drop_rng));
        CHECK((y - a).cwiseAbs().maxCoeff() == 0.0);
        CHECK(drop_rng.raw() == Rng(1).raw());
    }

    // Same seed, same mask; kept entries scale by 1/keep.
    {
        Tape t1(false), t2(false);
        TapeOps o1(t1), o2(t2);
        Rng r1(7), r2(7);
        const Eigen::MatrixXd y1 = t1.value(o1.dropout(t1.constant(a), 0.4, r1));
        const Eigen::MatrixXd y2 = t2.value(o2.dropout(t2.constant(a), 0.4, r2));
        CHECK((y1 - y2).cwiseAbs().maxCoeff() == 0.0);
        int kept = 0;
        for (Eigen::Index i = 0; i < y1.rows(); ++i) {
            for (Eigen::Index j = 0; j < y1.cols(); ++j) {
                if (y1(i, j) != 0.0) {
                    ++kept;
                    CHECK(y1(i, j) == doctest::Approx(a(i, j) / 0.6).epsilon(1e-12));
                }
            }
        }
        CHECK(kept > 0);
        CHECK(kept < 64);
    }

    // With the mask fixed by the seed, dropout is linear: FD agrees.
    CHECK(max_rel_gradient_error(a, [&](Tape& t, TapeOps& o, Tape::NodeId leaf) {
              Rng drop_rng(12);
              return mean_square(t, o, o.dropout(leaf, 0.3, drop_rng));
          }) < 1e-6);

    Tape tape(false);
    TapeOps ops(tape);
    Rng bad(1);
    CHECK_THROWS_AS(ops.dropout(tape.constant(a), 1.0, bad), ValidationError);
}

TEST_CASE("masked mse matches hand arithmetic") {
    Eigen::MatrixXd pred(1, 2), target(1, 2);
    pred << 3.0, 4.0;
    target << 0.0, 0.0;
    CHECK(masked_mse_value(pred, target, {true}) == doctest::Approx(12.5).epsilon(1e-15));

    CHECK(masked_mse_value(target, target, {true}) == 0.0);

    // A masked-out step contributes nothing, however wrong it is.
    Eigen::MatrixXd p2(2, 2), t2(2, 2);
    p2 << 3.0, 4.0, 1e9, -1e9;
    t2 << 0.0, 0.0, 0.0, 0.0;
    CHECK(masked_mse_value(p2, t2, {true, false}) == doctest::Approx(12.5).epsilon(1e-15));

    CHECK_THROWS_AS(masked_mse_value(p2, t2, {false, false}), ValidationError);
    CHECK_THROWS_AS(masked_mse_value(p2, t2, {true}), ValidationError);

    Rng rng(109);
    const Eigen::MatrixXd pr = random_matrix(5, 3, rng);
    const Eigen::MatrixXd tg = random_matrix(5, 3, rng);
    const std::vector<bool> mask{true, false, true, true, false};
    CHECK(max_rel_gradient_error(pr, [&](Tape&, TapeOps& o, Tape::NodeId leaf) {
              return o.masked_mse(leaf, tg, mask);
          }) < 1e-6);
}

TEST_CASE("backward seed scales gradients linearly") {
    Rng rng(110);
    const Eigen::MatrixXd a = random_matrix(3, 3, rng);
    const Eigen::MatrixXd target = random_matrix(3, 3, rng);

    auto run = [&](double seed, Eigen::MatrixXd& grad) {
        Tape tape(true);
        TapeOps ops(tape);
        const Tape::NodeId leaf = tape.parameter(a, &grad);
        tape.backward(ops.masked_mse(leaf, target, std::vector<bool>(3, true)), seed);
    };
    Eigen::MatrixXd g1 = Eigen::MatrixXd::Zero(3, 3), ghalf = Eigen::MatrixXd::Zero(3, 3);
    run(1.0, g1);
    run(0.5, ghalf);
    CHECK((g1 - 2.0 * ghalf).cwiseAbs().maxCoeff() == 0.0);

    // Two backward passes into the same buffer accumulate: the duplicated
    // sample under a sum reduction carries twice the single-sample gradient.
    Eigen::MatrixXd gsum = Eigen::MatrixXd::Zero(3, 3);
    run(1.0, gsum);
    run(1.0, gsum);
    CHECK((gsum - 2.0 * g1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("loss is invariant under batch permutation") {
    Rng rng(111);
    const Eigen::MatrixXd p1 = random_matrix(4, 2, rng), t1 = random_matrix(4, 2, rng);
    const Eigen::MatrixXd p2 = random_matrix(4, 2, rng), t2 = random_matrix(4, 2, rng);
    const std::vector<bool> mask(4, true);
    const double ab =
        0.5 * (masked_mse_value(p1, t1, mask) + masked_mse_value(p2, t2, mask));
    const double ba =
        0.5 * (masked_mse_value(p2, t2, mask) + masked_mse_value(p1, t1, mask));
    CHECK(ab == ba);
}
