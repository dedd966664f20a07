#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "whisker/autodiff.hpp"
#include "whisker/geometry.hpp"
#include "whisker/rng.hpp"
#include "whisker/signal.hpp"

namespace whisker {

// Causal transformer decoder: the base-moment history goes in, a contact
// position estimate per step comes out. Prediction at step i sees signals
// up to and including step i, never later ones.
//
// Architecture: 2-layer signal encoder (input -> encoder_hidden -> d_model,
// GELU between), learned positional embeddings, then n_layers pre-norm
// blocks of causally masked self-attention + feed-forward, a final layer
// norm, and a linear head to the contact coordinates.
struct WhiskerNetConfig {
    int input_dim = 2;        // moment channels
    int output_dim = 2;       // contact x, y
    int encoder_hidden = 64;
    int d_model = 128;
    int n_layers = 6;
    int n_heads = 8;
    int ffn_hidden = 512;
    double dropout = 0.1;
    int max_len = 256;

    int head_dim() const { return d_model / n_heads; }

    // Throws ValidationError: sizes positive, n_heads divides d_model,
    // dropout in [0, 1).
    void validate() const;
};

// The full-size network above is the reference configuration; this trimmed
// one trains in minutes on a laptop core and is the default for desk-scale
// runs.
WhiskerNetConfig desk_model_config();

// Small enough that finite-difference gradient sweeps over every parameter
// stay cheap; used by tests and CI.
WhiskerNetConfig tiny_model_config();

struct NamedTensor {
    std::string name;
    Eigen::MatrixXd value;
};

// Flat, ordered parameter store plus the input/target standardization
// learned from the training split (applied inside forward / undone in
// predictions, and persisted with the weights).
struct ModelParams {
    WhiskerNetConfig config;
    std::vector<NamedTensor> tensors;
    Vec2 input_mean{0.0, 0.0};
    Vec2 input_scale{1.0, 1.0};
    Vec2 target_mean{0.0, 0.0};
    Vec2 target_scale{1.0, 1.0};

    std::size_t index_of(const std::string& name) const;  // throws ValidationError
    const Eigen::MatrixXd& tensor(const std::string& name) const;
};

// Deterministic initialization: Glorot-uniform weights, zero biases, unit
// layer-norm gains, small-normal positional embeddings.
ModelParams init_params(const WhiskerNetConfig& config, std::uint64_t seed);

// One zeroed gradient buffer per tensor, in tensor order.
std::vector<Eigen::MatrixXd> make_gradient_buffers(const ModelParams& params);

// Builds the forward graph for one sequence on the tape and returns the
// node holding the (T x output_dim) predictions in standardized target
// units. signal is (T x input_dim) raw moments. grads, when non-null, must
// come from make_gradient_buffers and receives parameter adjoints on
// backward. train enables dropout (which then draws from dropout_rng).
// Throws ValidationError on shape mismatch, SolverError naming the layer if
// an activation goes non-finite.
Tape::NodeId forward_tape(Tape& tape, const ModelParams& params,
                          std::vector<Eigen::MatrixXd>* grads, const Eigen::MatrixXd& signal,
                          bool train, Rng* dropout_rng);

// Eval-mode forward: dropout off, no gradient bookkeeping, deterministic.
// Returns predictions mapped back to millimetres.
Eigen::MatrixXd forward_eval(const ModelParams& params, const Eigen::MatrixXd& signal);

struct TrainConfig {
    int batch_size = 64;
    double learning_rate = 3e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int epochs = 100;
    int early_stop_patience = 10;  // epochs without validation improvement
    std::uint64_t seed = 0;

    void validate() const;
};

struct EpochLoss {
    int epoch = 0;          // 1-based
    double train_mse = 0.0; // standardized target units
    double val_mse = 0.0;
};

struct TrainResult {
    ModelParams params;              // best-validation checkpoint
    std::vector<EpochLoss> history;
    int best_epoch = 0;
    bool diverged = false;           // loss went non-finite; params hold the last good checkpoint
};

// Adam with bias correction over shuffled batches of whole sequences.
// Deterministic for a fixed seed: batch order, dropout masks, and update
// order are all seeded. Only in-contact steps contribute to the loss.
// Throws ValidationError on an empty train split.
TrainResult train_whiskernet(const DatasetSplit& data, const WhiskerNetConfig& config,
                             const TrainConfig& train_config);

// A contact estimate for one 5 Hz step of a sweep, in the whisker-base
// frame.
struct TrailPoint {
    std::size_t step = 0;
    Vec2 position{0.0, 0.0};
};

// Runs the model over a moment sequence and keeps the steps whose moment
// magnitude reaches activity_threshold (the no-contact gate). Sequences
// longer than max_len are handled with a sliding window (width max_len,
// stride 1): each step past the first window is predicted from the window
// ending at that step.
std::vector<TrailPoint> predict_sweep(const ModelParams& params,
                                      const std::vector<Vec2>& moments,
                                      double activity_threshold = 0.05);

// Weights file: 8-byte magic "WSKRNET1", a JSON header (schema version,
// config, standardization stats, tensor directory), then the tensors as
// little-endian doubles in directory order. Byte-identical for identical
// params.
void save_weights(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_weights(const std::filesystem::path& path);

// CSV with header epoch,train_mse,val_mse.
void save_loss_history(const std::vector<EpochLoss>& history, const std::filesystem::path& path);

}  // namespace whisker
