#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <vector>

#include "whisker/rng.hpp"

namespace whisker {

// Reverse-mode automatic differentiation over dense double matrices.
//
// A Tape is the arena for one forward pass: every op appends a node holding
// the op's value, and (while recording) a closure that scatters the node's
// adjoint back onto its inputs. backward() seeds the loss adjoint and runs
// the closures last-to-first, then flushes parameter adjoints into the
// gradient buffers registered alongside each parameter node.
//
// Column convention: a sequence activation is (T x features), one row per
// time step; weight matrices are (in x out) so a linear layer is X*W + b.
class Tape {
public:
    using NodeId = std::size_t;

    explicit Tape(bool recording = true) : recording_(recording) {}

    bool recording() const { return recording_; }
    std::size_t size() const { return values_.size(); }

    // Value with no adjoint flow (inputs, labels, masks).
    NodeId constant(Eigen::MatrixXd value);

    // Trainable leaf. grad_sink, when non-null, accumulates (+=) this node's
    // adjoint on backward(); it must outlive the tape and match the shape.
    NodeId parameter(const Eigen::MatrixXd& value, Eigen::MatrixXd* grad_sink);

    const Eigen::MatrixXd& value(NodeId id) const { return values_[id]; }

    // Adjoint of a node after backward(); zero matrix if none reached it.
    Eigen::MatrixXd gradient(NodeId id) const;

    // Seeds d(loss)/d(loss) = seed for a 1x1 loss node and propagates. The
    // seed is how batch averaging enters: per-sequence tapes backward with
    // seed 1/batch_size so parameter sinks end up holding the batch mean.
    void backward(NodeId loss, double seed = 1.0);

private:
    friend class TapeOps;

    NodeId push(Eigen::MatrixXd value);
    Eigen::MatrixXd& adjoint(NodeId id);

    bool recording_;
    std::vector<Eigen::MatrixXd> values_;
    std::vector<Eigen::MatrixXd> adjoints_;       // sized during backward()
    std::vector<std::function<void()>> backprop_;  // one per recorded op
    std::vector<std::pair<NodeId, Eigen::MatrixXd*>> sinks_;
};

// Graph-building ops. Each returns the id of the freshly appended node.
class TapeOps {
public:
    explicit TapeOps(Tape& tape) : t_(tape) {}

    using NodeId = Tape::NodeId;

    NodeId matmul(NodeId a, NodeId b);     // A * B
    NodeId matmul_nt(NodeId a, NodeId b);  // A * B^T (saves a transpose node)
    NodeId add(NodeId a, NodeId b);        // same shape
    NodeId subtract(NodeId a, NodeId b);
    NodeId scale(NodeId a, double s);

    // A + ones * row; row is 1 x cols (a bias).
    NodeId add_row_broadcast(NodeId a, NodeId row);

    // Rows [r0, r0+n) of a; the backward scatters into that row window.
    NodeId slice_rows(NodeId a, std::size_t r0, std::size_t n);
    NodeId slice_cols(NodeId a, std::size_t c0, std::size_t n);
    NodeId concat_cols(const std::vector<NodeId>& parts);

    // Exact GELU: y = x * Phi(x), dy/dx = Phi(x) + x * phi(x).
    NodeId gelu(NodeId a);

    // Per-row normalization over columns, then the affine gamma/beta
    // (each 1 x cols): y = (x - mean) / sqrt(var + eps) .* gamma + beta.
    NodeId layer_norm(NodeId x, NodeId gamma, NodeId beta, double eps = 1e-5);

    // Row-wise softmax over a square (T x T) score matrix where row i only
    // attends to columns 0..i; masked entries come out exactly zero.
    NodeId causal_softmax(NodeId scores);

    // Inverted dropout: keep with probability 1-rate, scale kept entries by
    // 1/(1-rate). The mask is drawn from rng in row-major order. rate = 0 is
    // the identity (no rng draws).
    NodeId dropout(NodeId a, double rate, Rng& rng);

    // Mean of (pred - target)^2 over the masked rows and all columns,
    // as a 1x1 node. Throws ValidationError when the mask is all-false or
    // shapes disagree. target is a constant (no adjoint).
    NodeId masked_mse(NodeId pred, const Eigen::MatrixXd& target, const std::vector<bool>& row_mask);

private:
    Tape& t_;
};

// The same masked mean-squared error as TapeOps::masked_mse, as a plain
// function for callers that only need the number.
double masked_mse_value(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target,
                        const std::vector<bool>& row_mask);

}  // namespace whisker
