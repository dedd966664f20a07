#include "whisker/autodiff.hpp"

#include <cmath>
#include <string>

#include "whisker/errors.hpp"

namespace whisker {

namespace {

// Standard normal CDF and PDF, the exact-erf flavor used by GELU.
double norm_cdf(double x) {
    return 0.5 * std::erfc(-x * 0.7071067811865475244);  // 1/sqrt(2)
}

double norm_pdf(double x) {
    return 0.3989422804014326779 * std::exp(-0.5 * x * x);  // 1/sqrt(2*pi)
}

void require_same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ValidationError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) +
                              "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                              "x" + std::to_string(b.cols()) + ")");
    }
}

}  // namespace

Tape::NodeId Tape::push(Eigen::MatrixXd value) {
    values_.push_back(std::move(value));
    return values_.size() - 1;
}

Tape::NodeId Tape::constant(Eigen::MatrixXd value) {
    return push(std::move(value));
}

Tape::NodeId Tape::parameter(const Eigen::MatrixXd& value, Eigen::MatrixXd* grad_sink) {
    const NodeId id = push(value);
    if (recording_ && grad_sink != nullptr) {
        if (grad_sink->rows() != value.rows() || grad_sink->cols() != value.cols()) {
            throw ValidationError("tape parameter: gradient buffer shape mismatch");
        }
        sinks_.emplace_back(id, grad_sink);
    }
    return id;
}

Eigen::MatrixXd& Tape::adjoint(NodeId id) {
    Eigen::MatrixXd& g = adjoints_[id];
    if (g.size() == 0) g = Eigen::MatrixXd::Zero(values_[id].rows(), values_[id].cols());
    return g;
}

Eigen::MatrixXd Tape::gradient(NodeId id) const {
    const Eigen::MatrixXd& g = adjoints_[id];
    if (g.size() == 0) return Eigen::MatrixXd::Zero(values_[id].rows(), values_[id].cols());
    return g;
}

void Tape::backward(NodeId loss, double seed) {
    if (!recording_) throw ValidationError("tape backward: tape was built with recording off");
    if (values_[loss].rows() != 1 || values_[loss].cols() != 1) {
        throw ValidationError("tape backward: loss node must be 1x1");
    }
    adjoints_.assign(values_.size(), Eigen::MatrixXd());
    adjoint(loss)(0, 0) = seed;
    for (auto it = backprop_.rbegin(); it != backprop_.rend(); ++it) (*it)();
    for (const auto& [id, sink] : sinks_) {
        const Eigen::MatrixXd& g = adjoints_[id];
        if (g.size() != 0) *sink += g;
    }
}

Tape::NodeId TapeOps::matmul(NodeId a, NodeId b) {
    const Eigen::MatrixXd& av = t_.value(a);
    const Eigen::MatrixXd& bv = t_.value(b);
    if (av.cols() != bv.rows()) throw ValidationError("matmul: inner dimensions disagree");
    const NodeId out = t_.push(av * bv);
    if (t_.recording_) {
        Tape* t = &t_;
        t_.backprop_.push_back([t, a, b, out] {
            const Eigen::MatrixXd& g = t->adjoint(out);
            t->adjoint(a).noalias() += g * t->value(b).transpose();
            t->adjoint(b).noalias() += t->value(a).transpose() * g;
        });
    }
    return out;
}

Tape::NodeId TapeOps::matmul_nt(NodeId a, NodeId b) {
    const Eigen::MatrixXd& av = t_.value(a);
    const Eigen::MatrixXd& bv = t_.value(b);
    if (av.cols() != bv.cols()) throw ValidationError("matmul_nt: inner dimensions disagree");
    const NodeId out = t_.push(av * bv.transpose());
    if (t_.recording_) {
        Tape* t = &t_;
        t_.backprop_.push_back([t, a, b, out] {
            const Eigen::MatrixXd& g = t->adjoint(out);
            t->adjoint(a).noalias() += g * t->value(b);
            t->adjoint(b).noalias() += g.transpose() * t->value(a);
        });
    }
    return out;
}

Tape::NodeId TapeOps::add(NodeId a, NodeId b) {
    require_same_shape(t_.value(a), t_.value(b), "add");
    const NodeId out = t_.push(t_.value(a) + t_.value(b));
    if (t_.recording_) {
        Tape* t = &t_;
        t_.backprop_.push_back([t, a, b, out] {
            const Eigen::MatrixXd& g = t->adjoint(out);
            t->adjoint(a) += g;
            t->adjoint(b) += g;
        });
    }
    return out;
}

Tape::NodeId TapeOps::subtract(NodeId a, NodeId b) {
    require_same_shape(t_.value(a), t_.value(b), "subtract");
    const NodeId out = t_.push(t_.value(a) - t_.value(b));
    if (t_.recording_) {
        Tape* t = &t_;
        t_.backprop_.push_back([t, a, b, out] {
            const Eigen::MatrixXd& g = t->adjoint(out);
            t->adjoint(a) += g;
            t->adjoint(b) -= g;
        });
    }
    return out;
}

Tape::NodeId TapeOps::scale(NodeId a, double s) {
    const NodeId out = t_.push(t_.value(a) * s);
    if (t_.recording_) {
        Tape* t = &t_;
        t_.backprop_.push_back([t, a, out, s] { t->adjoint(a) += t->adjoint(out) * s; });
    }
    return out;
}

Tape::NodeId TapeOps::add_row_broadcast(NodeId a, NodeId row) {
    const Eigen::MatrixXd& av = t_.value(a);
    const Eigen::MatrixXd& rv = t_.value(row);
    if (rv.rows() != 1 || rv.cols() != av.cols()) {
        throw ValidationError("add_row_broadcast: row must be 1 x cols(a)");
    }
    const NodeId out = t_.push(av.rowwise() + rv.row(0));
    if (t_.recording_) {
        Tape* t = &t_;
        t_.backprop_.push_back([t, a, row, out] {
            const Eigen::MatrixXd& g = t->adjoint(out);
            t->adjoint(a) += g;
            t->adjoint(row) += g.colwise().sum();
        });
    }
    return out;
}

Tape::NodeId TapeOps::slice_rows(NodeId a, std::size_t r0, std::size_t n) {
    const Eigen::MatrixXd& av = t_.value(a);
    if (r0 + n > static_cast<std::size_t>(av.rows())) {
        throw ValidationError("slice_rows: window exceeds matrix");
    }
    const NodeId out = t_.push(av.middleRows(static_cast<Eigen::Index>(r0), static_cast<Eigen::Index>(n)));
    if (t_.recording_) {
        Tape* t = &t_;
        t_.backprop_.push_back([t, a, out, r0, n] {
            t->adjoint(a).middleRows(static_cast<Eigen::Index>(r0), static_cast<Eigen::Index>(n)) +=
                t->adjoint(out);
        });
    }
    return out;
}

Tape::NodeId TapeOps::slice_cols(NodeId a, std::size_t c0, std::size_t n) {
    const Eigen::MatrixXd& av = t_.value(a);
    if (c0 + n > static_cast<std::size_t>(av.cols())) {
        throw ValidationError("slice_cols: window exceeds matrix");
    }
    const NodeId out = t_.push(av.middleCols(static_cast<Eigen::Index>(c0), static_cast<Eigen::Index>(n)));
    if (t_.recording_) {
        Tape* t = &t_;
        t_.backprop_.push_back([t, a, out, c0, n] {
            t->adjoint(a).middleCols(static_cast<Eigen::Index>(c0), static_cast<Eigen::Index>(n)) +=
                t->adjoint(out);
        });
    }
    return out;
}

Tape::NodeId TapeOps::concat_cols(const std::vector<NodeId>& parts) {
    if (parts.empty()) throw ValidationError("concat_cols: no parts");
    const Eigen::Index rows = t_.value(parts[0]).rows();
    Eigen::Index cols = 0;
    for (const NodeId p : parts) {
        if (t_.value(p).rows() != rows) throw ValidationError("concat_cols: row counts disagree");
        cols += t_.value(p).cols();
    }
    Eigen::MatrixXd v(rows, cols);
    Eigen::Index c = 0;
    for (const NodeId p : parts) {
        v.middleCols(c, t_.value(p).cols()) = t_.value(p);
        c += t_.value(p).cols();
    }
    const NodeId out = t_.push(std::move(v));
    if (t_.recording_) {
        Tape* t = &t_;
        std::vector<NodeId> ps = parts;
        t_.backprop_.push_back([t, ps, out] {
            const Eigen::MatrixXd& g = t->adjoint(out);
            Eigen::Index c = 0;
            for (const NodeId p : ps) {
                const Eigen::Index w = t->value(p).cols();
                t->adjoint(p) += g.middleCols(c, w);
                c += w;
            }
        });
    }
    return out;
}

Tape::NodeId TapeOps::gelu(NodeId a) {
    const Eigen::MatrixXd& x = t_.value(a);
    Eigen::MatrixXd y = x.unaryExpr([](double v) { return v * norm_cdf(v); });
    const NodeId out = t_.push(std::move(y));
    if (t_.recording_) {
        Tape* t = &t_;
        t_.backprop_.push_back([t, a, out] {
            const Eigen::MatrixXd& x = t->value(a);
            const Eigen::MatrixXd dydx =
                x.unaryExpr([](double v) { return norm_cdf(v) + v * norm_pdf(v); });
            t->adjoint(a).array() += t->adjoint(out).array() * dydx.array();
        });
    }
    return out;
}

Tape::NodeId TapeOps::layer_norm(NodeId x, NodeId gamma, NodeId beta, double eps) {
    const Eigen::MatrixXd& xv = t_.value(x);
    const Eigen::MatrixXd& gv = t_.value(gamma);
    const Eigen::MatrixXd& bv = t_.value(beta);
    if (gv.rows() != 1 || bv.rows() != 1 || gv.cols() != xv.cols() || bv.cols() != xv.cols()) {
        throw ValidationError("layer_norm: gamma/beta must be 1 x cols(x)");
    }
    const Eigen::Index rows = xv.rows(), cols = xv.cols();
    Eigen::MatrixXd xhat(rows, cols);
    Eigen::VectorXd inv_std(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const double mean = xv.row(i).mean();
        const double var = (xv.row(i).array() - mean).square().mean();
        inv_std(i) = 1.0 / std::sqrt(var + eps);
        xhat.row(i) = (xv.row(i).array() - mean) * inv_std(i);
    }
    Eigen::MatrixXd y = (xhat.array().rowwise() * gv.row(0).array()).rowwise() + bv.row(0).array();
    const NodeId out = t_.push(std::move(y));
    if (t_.recording_) {
        Tape* t = &t_;
        // xhat and inv_std are captured by value: recomputing them in the
        // backward pass would be cheaper on memory but costs a second pass.
        t_.backprop_.push_back([t, x, gamma, beta, out, xhat, inv_std] {
            const Eigen::MatrixXd& g = t->adjoint(out);
            const Eigen::MatrixXd& gv = t->value(gamma);
            t->adjoint(beta) += g.colwise().sum();
            t->adjoint(gamma) += (g.array() * xhat.array()).colwise().sum().matrix();
            const Eigen::Index rows = g.rows(), cols = g.cols();
            Eigen::MatrixXd dxhat = g.array().rowwise() * gv.row(0).array();
            Eigen::MatrixXd dx(rows, cols);
            for (Eigen::Index i = 0; i < rows; ++i) {
                const double m1 = dxhat.row(i).mean();
                const double m2 = (dxhat.row(i).array() * xhat.row(i).array()).mean();
                dx.row(i) =
                    (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2) * inv_std(i);
            }
            t->adjoint(x) += dx;
        });
    }
    return out;
}

Tape::NodeId TapeOps::causal_softmax(NodeId scores) {
    const Eigen::MatrixXd& s = t_.value(scores);
    if (s.rows() != s.cols()) throw ValidationError("causal_softmax: scores must be square (T x T)");
    const Eigen::Index n = s.rows();
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double m = s.row(i).head(i + 1).maxCoeff();
        double z = 0.0;
        for (Eigen::Index j = 0; j <= i; ++j) {
            p(i, j) = std::exp(s(i, j) - m);
            z += p(i, j);
        }
        p.row(i).head(i + 1) /= z;
    }
    const NodeId out = t_.push(std::move(p));
    if (t_.recording_) {
        Tape* t = &t_;
        t_.backprop_.push_back([t, scores, out] {
            const Eigen::MatrixXd& p = t->value(out);
            const Eigen::MatrixXd& g = t->adjoint(out);
            const Eigen::Index n = p.rows();
            Eigen::MatrixXd ds(n, n);
            for (Eigen::Index i = 0; i < n; ++i) {
                const double dot = (g.row(i).head(i + 1).array() * p.row(i).head(i + 1).array()).sum();
                ds.row(i) = (g.row(i).array() - dot) * p.row(i).array();
            }
            t->adjoint(scores) += ds;
        });
    }
    return out;
}

Tape::NodeId TapeOps::dropout(NodeId a, double rate, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) throw ValidationError("dropout rate must be in [0, 1)");
    if (rate == 0.0) return a;
    const Eigen::MatrixXd& av = t_.value(a);
    const double keep = 1.0 - rate;
    Eigen::MatrixXd mask(av.rows(), av.cols());
    for (Eigen::Index i = 0; i < av.rows(); ++i) {
        for (Eigen::Index j = 0; j < av.cols(); ++j) {
            mask(i, j) = rng.uniform() < keep ? 1.0 / keep : 0.0;
        }
    }
    const NodeId out = t_.push(av.cwiseProduct(mask));
    if (t_.recording_) {
        Tape* t = &t_;
        t_.backprop_.push_back([t, a, out, mask] {
            t->adjoint(a).array() += t->adjoint(out).array() * mask.array();
        });
    }
    return out;
}

Tape::NodeId TapeOps::masked_mse(NodeId pred, const Eigen::MatrixXd& target,
                                 const std::vector<bool>& row_mask) {
    const Eigen::MatrixXd& pv = t_.value(pred);
    require_same_shape(pv, target, "masked_mse");
    if (row_mask.size() != static_cast<std::size_t>(pv.rows())) {
        throw ValidationError("masked_mse: mask length must equal rows");
    }
    std::size_t active = 0;
    for (const bool m : row_mask) active += m ? 1 : 0;
    if (active == 0) throw ValidationError("masked_mse: mask selects no rows");

    const double denom = static_cast<double>(active) * static_cast<double>(pv.cols());
    double sum = 0.0;
    for (Eigen::Index i = 0; i < pv.rows(); ++i) {
        if (!row_mask[static_cast<std::size_t>(i)]) continue;
        sum += (pv.row(i) - target.row(i)).squaredNorm();
    }
    Eigen::MatrixXd loss(1, 1);
    loss(0, 0) = sum / denom;
    const NodeId out = t_.push(std::move(loss));
    if (t_.recording_) {
        Tape* t = &t_;
        t_.backprop_.push_back([t, pred, out, target, row_mask, denom] {
            const double g = t->adjoint(out)(0, 0);
            Eigen::MatrixXd& dp = t->adjoint(pred);
            const Eigen::MatrixXd& pv = t->value(pred);
            for (Eigen::Index i = 0; i < pv.rows(); ++i) {
                if (!row_mask[static_cast<std::size_t>(i)]) continue;
                dp.row(i) += (2.0 * g / denom) * (pv.row(i) - target.row(i));
            }
        });
    }
    return out;
}

double masked_mse_value(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target,
                        const std::vector<bool>& row_mask) {
    Tape tape(false);
    TapeOps ops(tape);
    const Tape::NodeId p = tape.constant(pred);
    return tape.value(ops.masked_mse(p, target, row_mask))(0, 0);
}

}  // namespace whisker
