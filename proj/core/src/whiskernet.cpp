#include "whisker/whiskernet.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "whisker/errors.hpp"

namespace whisker {

namespace {

using Json = nlohmann::ordered_json;

constexpr char kWeightsMagic[8] = {'W', 'S', 'K', 'R', 'N', 'E', 'T', '1'};
constexpr int kWeightsSchema = 1;

static_assert(std::endian::native == std::endian::little,
              "weights files are little-endian; add byte swapping before porting");

void check_finite(const Eigen::MatrixXd& m, const std::string& where) {
    if (!m.allFinite()) {
        throw SolverError("whiskernet forward: non-finite activation in " + where,
                          std::numeric_limits<double>::quiet_NaN());
    }
}

double glorot_limit(Eigen::Index fan_in, Eigen::Index fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace

void WhiskerNetConfig::validate() const {
    if (input_dim != 2) throw ValidationError("model config: input_dim must be 2 (moment channels)");
    if (output_dim != 2) throw ValidationError("model config: output_dim must be 2 (contact x, y)");
    if (encoder_hidden < 1) throw ValidationError("model config: encoder_hidden must be positive");
    if (d_model < 1) throw ValidationError("model config: d_model must be positive");
    if (n_layers < 1) throw ValidationError("model config: n_layers must be positive");
    if (n_heads < 1) throw ValidationError("model config: n_heads must be positive");
    if (ffn_hidden < 1) throw ValidationError("model config: ffn_hidden must be positive");
    if (max_len < 1) throw ValidationError("model config: max_len must be positive");
    if (d_model % n_heads != 0) throw ValidationError("model config: n_heads must divide d_model");
    if (dropout < 0.0 || dropout >= 1.0) throw ValidationError("model config: dropout must be in [0, 1)");
}

WhiskerNetConfig desk_model_config() {
    WhiskerNetConfig cfg;
    cfg.encoder_hidden = 32;
    cfg.d_model = 64;
    cfg.n_layers = 4;
    cfg.n_heads = 4;
    cfg.ffn_hidden = 256;
    return cfg;
}

WhiskerNetConfig tiny_model_config() {
    WhiskerNetConfig cfg;
    cfg.encoder_hidden = 8;
    cfg.d_model = 16;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.ffn_hidden = 32;
    cfg.max_len = 64;
    return cfg;
}

std::size_t ModelParams::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        if (tensors[i].name == name) return i;
    }
    throw ValidationError("model params: no tensor named " + name);
}

const Eigen::MatrixXd& ModelParams::tensor(const std::string& name) const {
    return tensors[index_of(name)].value;
}

ModelParams init_params(const WhiskerNetConfig& config, std::uint64_t seed) {
    config.validate();
    ModelParams params;
    params.config = config;
    Rng rng(mix_seed(seed, "init"));

    auto weight = [&](const std::string& name, Eigen::Index rows, Eigen::Index cols) {
        const double a = glorot_limit(rows, cols);
        Eigen::MatrixXd w(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i) {
            for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = rng.uniform(-a, a);
        }
        params.tensors.push_back({name, std::move(w)});
    };
    auto fill = [&](const std::string& name, Eigen::Index rows, Eigen::Index cols, double v) {
        params.tensors.push_back({name, Eigen::MatrixXd::Constant(rows, cols, v)});
    };

    weight("encoder.l1.w", config.input_dim, config.encoder_hidden);
    fill("encoder.l1.b", 1, config.encoder_hidden, 0.0);
    weight("encoder.l2.w", config.encoder_hidden, config.d_model);
    fill("encoder.l2.b", 1, config.d_model, 0.0);

    Eigen::MatrixXd pe(config.max_len, config.d_model);
    for (Eigen::Index i = 0; i < pe.rows(); ++i) {
        for (Eigen::Index j = 0; j < pe.cols(); ++j) pe(i, j) = rng.gaussian(0.0, 0.02);
    }
    params.tensors.push_back({"pos_embedding", std::move(pe)});

    for (int l = 0; l < config.n_layers; ++l) {
        const std::string b = "block" + std::to_string(l) + ".";
        fill(b + "ln1.gamma", 1, config.d_model, 1.0);
        fill(b + "ln1.beta", 1, config.d_model, 0.0);
        weight(b + "attn.wq", config.d_model, config.d_model);
        fill(b + "attn.bq", 1, config.d_model, 0.0);
        weight(b + "attn.wk", config.d_model, config.d_model);
        fill(b + "attn.bk", 1, config.d_model, 0.0);
        weight(b + "attn.wv", config.d_model, config.d_model);
        fill(b + "attn.bv", 1, config.d_model, 0.0);
        weight(b + "attn.wo", config.d_model, config.d_model);
        fill(b + "attn.bo", 1, config.d_model, 0.0);
        fill(b + "ln2.gamma", 1, config.d_model, 1.0);
        fill(b + "ln2.beta", 1, config.d_model, 0.0);
        weight(b + "ffn.w1", config.d_model, config.ffn_hidden);
        fill(b + "ffn.b1", 1, config.ffn_hidden, 0.0);
        weight(b + "ffn.w2", config.ffn_hidden, config.d_model);
        fill(b + "ffn.b2", 1, config.d_model, 0.0);
    }

    fill("final_ln.gamma", 1, config.d_model, 1.0);
    fill("final_ln.beta", 1, config.d_model, 0.0);
    weight("head.w", config.d_model, config.output_dim);
    fill("head.b", 1, config.output_dim, 0.0);
    return params;
}

std::vector<Eigen::MatrixXd> make_gradient_buffers(const ModelParams& params) {
    std::vector<Eigen::MatrixXd> grads;
    grads.reserve(params.tensors.size());
    for (const NamedTensor& t : params.tensors) {
        grads.push_back(Eigen::MatrixXd::Zero(t.value.rows(), t.value.cols()));
    }
    return grads;
}

Tape::NodeId forward_tape(Tape& tape, const ModelParams& params,
                          std::vector<Eigen::MatrixXd>* grads, const Eigen::MatrixXd& signal,
                          bool train, Rng* dropout_rng) {
    const WhiskerNetConfig& cfg = params.config;
    cfg.validate();
    if (signal.cols() != cfg.input_dim) {
        throw ValidationError("whiskernet forward: signal has " + std::to_string(signal.cols()) +
                              " channels, config expects " + std::to_string(cfg.input_dim));
    }
    const Eigen::Index T = signal.rows();
    if (T < 1) throw ValidationError("whiskernet forward: empty sequence");
    if (T > cfg.max_len) {
        throw ValidationError("whiskernet forward: sequence length " + std::to_string(T) +
                              " exceeds max_len " + std::to_string(cfg.max_len));
    }
    const bool use_dropout = train && cfg.dropout > 0.0;
    if (use_dropout && dropout_rng == nullptr) {
        throw ValidationError("whiskernet forward: train mode with dropout needs an rng");
    }
    check_finite(signal, "input");

    TapeOps ops(tape);
    auto P = [&](const std::string& name) {
        const std::size_t idx = params.index_of(name);
        return tape.parameter(params.tensors[idx].value, grads ? &(*grads)[idx] : nullptr);
    };
    auto drop = [&](Tape::NodeId x) {
        return use_dropout ? ops.dropout(x, cfg.dropout, *dropout_rng) : x;
    };

    Eigen::MatrixXd standardized = signal;
    for (int c = 0; c < cfg.input_dim; ++c) {
        standardized.col(c) = (standardized.col(c).array() - params.input_mean(c)) / params.input_scale(c);
    }
    Tape::NodeId h = tape.constant(std::move(standardized));

    h = ops.gelu(ops.add_row_broadcast(ops.matmul(h, P("encoder.l1.w")), P("encoder.l1.b")));
    h = ops.add_row_broadcast(ops.matmul(h, P("encoder.l2.w")), P("encoder.l2.b"));
    h = ops.add(h, ops.slice_rows(P("pos_embedding"), 0, static_cast<std::size_t>(T)));
    h = drop(h);
    check_finite(tape.value(h), "encoder");

    const int dh = cfg.head_dim();
    const double attn_scale = 1.0 / std::sqrt(static_cast<double>(dh));
    for (int l = 0; l < cfg.n_layers; ++l) {
        const std::string b = "block" + std::to_string(l) + ".";

        Tape::NodeId x1 = ops.layer_norm(h, P(b + "ln1.gamma"), P(b + "ln1.beta"));
        Tape::NodeId q = ops.add_row_broadcast(ops.matmul(x1, P(b + "attn.wq")), P(b + "attn.bq"));
        Tape::NodeId k = ops.add_row_broadcast(ops.matmul(x1, P(b + "attn.wk")), P(b + "attn.bk"));
        Tape::NodeId v = ops.add_row_broadcast(ops.matmul(x1, P(b + "attn.wv")), P(b + "attn.bv"));

        std::vector<Tape::NodeId> heads;
        heads.reserve(cfg.n_heads);
        for (int hh = 0; hh < cfg.n_heads; ++hh) {
            const std::size_t c0 = static_cast<std::size_t>(hh) * static_cast<std::size_t>(dh);
            Tape::NodeId qh = ops.slice_cols(q, c0, dh);
            Tape::NodeId kh = ops.slice_cols(k, c0, dh);
            Tape::NodeId vh = ops.slice_cols(v, c0, dh);
            Tape::NodeId probs = ops.causal_softmax(ops.scale(ops.matmul_nt(qh, kh), attn_scale));
            heads.push_back(ops.matmul(probs, vh));
        }
        Tape::NodeId attn = ops.concat_cols(heads);
        attn = ops.add_row_broadcast(ops.matmul(attn, P(b + "attn.wo")), P(b + "attn.bo"));
        h = ops.add(h, drop(attn));

        Tape::NodeId x2 = ops.layer_norm(h, P(b + "ln2.gamma"), P(b + "ln2.beta"));
        Tape::NodeId f = ops.gelu(ops.add_row_broadcast(ops.matmul(x2, P(b + "ffn.w1")), P(b + "ffn.b1")));
        f = ops.add_row_broadcast(ops.matmul(f, P(b + "ffn.w2")), P(b + "ffn.b2"));
        h = ops.add(h, drop(f));
        check_finite(tape.value(h), "block" + std::to_string(l));
    }

    Tape::NodeId y = ops.layer_norm(h, P("final_ln.gamma"), P("final_ln.beta"));
    y = ops.add_row_broadcast(ops.matmul(y, P("head.w")), P("head.b"));
    check_finite(tape.value(y), "head");
    return y;
}

Eigen::MatrixXd forward_eval(const ModelParams& params, const Eigen::MatrixXd& signal) {
    Tape tape(false);
    const Tape::NodeId out = forward_tape(tape, params, nullptr, signal, false, nullptr);
    Eigen::MatrixXd pred = tape.value(out);
    for (int c = 0; c < params.config.output_dim; ++c) {
        pred.col(c) = pred.col(c).array() * params.target_scale(c) + params.target_mean(c);
    }
    return pred;
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw ValidationError("train config: batch_size must be positive");
    if (learning_rate < 0.0) throw ValidationError("train config: learning_rate must be >= 0");
    if (adam_beta1 < 0.0 || adam_beta1 >= 1.0) throw ValidationError("train config: adam_beta1 must be in [0, 1)");
    if (adam_beta2 < 0.0 || adam_beta2 >= 1.0) throw ValidationError("train config: adam_beta2 must be in [0, 1)");
    if (adam_eps <= 0.0) throw ValidationError("train config: adam_eps must be positive");
    if (epochs < 1) throw ValidationError("train config: epochs must be positive");
    if (early_stop_patience < 1) throw ValidationError("train config: early_stop_patience must be positive");
}

namespace {

// One training sequence in matrix form, targets already standardized.
struct PreparedSequence {
    Eigen::MatrixXd x;          // T x input_dim, raw moments
    Eigen::MatrixXd y;          // T x output_dim, standardized contact
    std::vector<bool> mask;     // in-contact rows
    bool has_contact = false;
};

PreparedSequence prepare(const SignalSequence& seq, int input_dim, int output_dim) {
    const std::size_t n = seq.samples.size();
    PreparedSequence p;
    p.x.resize(n, input_dim);
    p.y.resize(n, output_dim);
    p.mask.resize(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        const ContactSample& s = seq.samples[i];
        p.x(i, 0) = s.moment.x();
        p.x(i, 1) = s.moment.y();
        p.y(i, 0) = s.contact_pos.x();
        p.y(i, 1) = s.contact_pos.y();
        p.mask[i] = s.in_contact;
        p.has_contact = p.has_contact || s.in_contact;
    }
    return p;
}

double masked_sequence_loss(const ModelParams& params, const PreparedSequence& seq) {
    Tape tape(false);
    TapeOps ops(tape);
    const Tape::NodeId pred = forward_tape(tape, params, nullptr, seq.x, false, nullptr);
    return tape.value(ops.masked_mse(pred, seq.y, seq.mask))(0, 0);
}

}  // namespace

TrainResult train_whiskernet(const DatasetSplit& data, const WhiskerNetConfig& config,
                             const TrainConfig& train_config) {
    config.validate();
    train_config.validate();
    if (data.train.empty()) throw ValidationError("train: empty train split");

    std::vector<PreparedSequence> train_seqs;
    for (const SignalSequence& s : data.train) {
        if (s.samples.empty()) continue;
        if (static_cast<int>(s.samples.size()) > config.max_len) {
            throw ValidationError("train: sequence longer than max_len (" +
                                  std::to_string(s.samples.size()) + " > " +
                                  std::to_string(config.max_len) + ")");
        }
        PreparedSequence p = prepare(s, config.input_dim, config.output_dim);
        if (p.has_contact) train_seqs.push_back(std::move(p));
    }
    if (train_seqs.empty()) throw ValidationError("train: no training sequence has contact samples");

    // Standardization: input stats over every sample, target stats over
    // in-contact samples only (the sentinel rows never reach the loss).
    Eigen::Vector2d in_sum = Eigen::Vector2d::Zero(), in_sq = Eigen::Vector2d::Zero();
    Eigen::Vector2d tg_sum = Eigen::Vector2d::Zero(), tg_sq = Eigen::Vector2d::Zero();
    std::size_t n_in = 0, n_tg = 0;
    for (const PreparedSequence& p : train_seqs) {
        for (Eigen::Index i = 0; i < p.x.rows(); ++i) {
            in_sum += p.x.row(i).transpose();
            in_sq += p.x.row(i).transpose().cwiseAbs2();
            ++n_in;
            if (p.mask[static_cast<std::size_t>(i)]) {
                tg_sum += p.y.row(i).transpose();
                tg_sq += p.y.row(i).transpose().cwiseAbs2();
                ++n_tg;
            }
        }
    }
    auto finish_stats = [](const Eigen::Vector2d& sum, const Eigen::Vector2d& sq, std::size_t n,
                           Vec2& mean, Vec2& scale) {
        mean = sum / static_cast<double>(n);
        for (int c = 0; c < 2; ++c) {
            const double var = sq(c) / static_cast<double>(n) - mean(c) * mean(c);
            const double sd = std::sqrt(std::max(var, 0.0));
            scale(c) = sd > 1e-9 ? sd : 1.0;
        }
    };

    ModelParams params = init_params(config, train_config.seed);
    finish_stats(in_sum, in_sq, n_in, params.input_mean, params.input_scale);
    finish_stats(tg_sum, tg_sq, n_tg, params.target_mean, params.target_scale);

    for (PreparedSequence& p : train_seqs) {
        for (int c = 0; c < 2; ++c) {
            p.y.col(c) = (p.y.col(c).array() - params.target_mean(c)) / params.target_scale(c);
        }
    }
    std::vector<PreparedSequence> val_seqs;
    for (const SignalSequence& s : data.validation) {
        if (s.samples.empty()) continue;
        PreparedSequence p = prepare(s, config.input_dim, config.output_dim);
        if (!p.has_contact) continue;
        for (int c = 0; c < 2; ++c) {
            p.y.col(c) = (p.y.col(c).array() - params.target_mean(c)) / params.target_scale(c);
        }
        val_seqs.push_back(std::move(p));
    }

    std::vector<Eigen::MatrixXd> grads = make_gradient_buffers(params);
    std::vector<Eigen::MatrixXd> adam_m, adam_v;
    adam_m.reserve(grads.size());
    adam_v.reserve(grads.size());
    for (const Eigen::MatrixXd& g : grads) {
        adam_m.push_back(Eigen::MatrixXd::Zero(g.rows(), g.cols()));
        adam_v.push_back(Eigen::MatrixXd::Zero(g.rows(), g.cols()));
    }

    Rng order_rng(mix_seed(train_config.seed, "order"));
    Rng dropout_rng(mix_seed(train_config.seed, "dropout"));

    TrainResult result;
    result.params = params;
    double best_val = std::numeric_limits<double>::infinity();
    int since_best = 0;
    long adam_t = 0;

    std::vector<std::size_t> order(train_seqs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 1; epoch <= train_config.epochs; ++epoch) {
        order_rng.shuffle(order);
        double epoch_loss_sum = 0.0;
        bool finite = true;

        for (std::size_t b0 = 0; b0 < order.size() && finite; b0 += train_config.batch_size) {
            const std::size_t b1 = std::min(order.size(), b0 + train_config.batch_size);
            const double inv_batch = 1.0 / static_cast<double>(b1 - b0);
            for (Eigen::MatrixXd& g : grads) g.setZero();

            double batch_loss = 0.0;
            for (std::size_t bi = b0; bi < b1; ++bi) {
                const PreparedSequence& seq = train_seqs[order[bi]];
                Tape tape(true);
                TapeOps ops(tape);
                const Tape::NodeId pred =
                    forward_tape(tape, params, &grads, seq.x, true, &dropout_rng);
                const Tape::NodeId loss = ops.masked_mse(pred, seq.y, seq.mask);
                tape.backward(loss, inv_batch);
                batch_loss += tape.value(loss)(0, 0) * inv_batch;
            }
            if (!std::isfinite(batch_loss)) {
                finite = false;
                break;
            }
            epoch_loss_sum += batch_loss * static_cast<double>(b1 - b0);

            ++adam_t;
            const double bc1 = 1.0 - std::pow(train_config.adam_beta1, static_cast<double>(adam_t));
            const double bc2 = 1.0 - std::pow(train_config.adam_beta2, static_cast<double>(adam_t));
            for (std::size_t i = 0; i < grads.size(); ++i) {
                adam_m[i] = train_config.adam_beta1 * adam_m[i] + (1.0 - train_config.adam_beta1) * grads[i];
                adam_v[i] = train_config.adam_beta2 * adam_v[i] +
                            (1.0 - train_config.adam_beta2) * grads[i].cwiseAbs2();
                params.tensors[i].value.array() -=
                    train_config.learning_rate * (adam_m[i].array() / bc1) /
                    ((adam_v[i].array() / bc2).sqrt() + train_config.adam_eps);
            }
        }

        if (!finite) {
            result.diverged = true;
            break;
        }

        const double train_mse = epoch_loss_sum / static_cast<double>(train_seqs.size());
        double val_mse = train_mse;
        if (!val_seqs.empty()) {
            double sum = 0.0;
            for (const PreparedSequence& seq : val_seqs) sum += masked_sequence_loss(params, seq);
            val_mse = sum / static_cast<double>(val_seqs.size());
        }
        result.history.push_back({epoch, train_mse, val_mse});
        if (!std::isfinite(val_mse)) {
            result.diverged = true;
            break;
        }

        if (val_mse < best_val) {
            best_val = val_mse;
            result.params = params;
            result.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= train_config.early_stop_patience) {
            break;
        }
    }
    return result;
}

std::vector<TrailPoint> predict_sweep(const ModelParams& params, const std::vector<Vec2>& moments,
                                      double activity_threshold) {
    const std::size_t T = moments.size();
    std::vector<TrailPoint> trail;
    if (T == 0) return trail;

    std::vector<bool> gated(T);
    bool any = false;
    for (std::size_t i = 0; i < T; ++i) {
        gated[i] = moments[i].norm() >= activity_threshold;
        any = any || gated[i];
    }
    if (!any) return trail;

    Eigen::MatrixXd signal(T, 2);
    for (std::size_t i = 0; i < T; ++i) signal.row(i) = moments[i].transpose();

    const std::size_t window = static_cast<std::size_t>(params.config.max_len);
    Eigen::MatrixXd pred(T, params.config.output_dim);
    if (T <= window) {
        pred = forward_eval(params, signal);
    } else {
        pred.topRows(window) = forward_eval(params, signal.topRows(window));
        for (std::size_t end = window; end < T; ++end) {
            const Eigen::MatrixXd w =
                forward_eval(params, signal.middleRows(end - window + 1, window));
            pred.row(end) = w.row(window - 1);
        }
    }

    for (std::size_t i = 0; i < T; ++i) {
        if (gated[i]) trail.push_back({i, Vec2(pred(i, 0), pred(i, 1))});
    }
    return trail;
}

namespace {

Json config_to_json(const WhiskerNetConfig& cfg) {
    Json j;
    j["input_dim"] = cfg.input_dim;
    j["output_dim"] = cfg.output_dim;
    j["encoder_hidden"] = cfg.encoder_hidden;
    j["d_model"] = cfg.d_model;
    j["n_layers"] = cfg.n_layers;
    j["n_heads"] = cfg.n_heads;
    j["ffn_hidden"] = cfg.ffn_hidden;
    j["dropout"] = cfg.dropout;
    j["max_len"] = cfg.max_len;
    return j;
}

WhiskerNetConfig config_from_json(const Json& j) {
    WhiskerNetConfig cfg;
    cfg.input_dim = j.at("input_dim").get<int>();
    cfg.output_dim = j.at("output_dim").get<int>();
    cfg.encoder_hidden = j.at("encoder_hidden").get<int>();
    cfg.d_model = j.at("d_model").get<int>();
    cfg.n_layers = j.at("n_layers").get<int>();
    cfg.n_heads = j.at("n_heads").get<int>();
    cfg.ffn_hidden = j.at("ffn_hidden").get<int>();
    cfg.dropout = j.at("dropout").get<double>();
    cfg.max_len = j.at("max_len").get<int>();
    cfg.validate();
    return cfg;
}

Json vec2_to_json(const Vec2& v) { return Json::array({v.x(), v.y()}); }

Vec2 vec2_from_json(const Json& j) {
    if (!j.is_array() || j.size() != 2) throw ValidationError("weights header: expected a 2-vector");
    return Vec2(j[0].get<double>(), j[1].get<double>());
}

}  // namespace

void save_weights(const ModelParams& params, const std::filesystem::path& path) {
    Json header;
    header["schema"] = kWeightsSchema;
    header["config"] = config_to_json(params.config);
    Json norm;
    norm["input_mean"] = vec2_to_json(params.input_mean);
    norm["input_scale"] = vec2_to_json(params.input_scale);
    norm["target_mean"] = vec2_to_json(params.target_mean);
    norm["target_scale"] = vec2_to_json(params.target_scale);
    header["normalization"] = norm;
    Json dir = Json::array();
    for (const NamedTensor& t : params.tensors) {
        Json entry;
        entry["name"] = t.name;
        entry["rows"] = t.value.rows();
        entry["cols"] = t.value.cols();
        dir.push_back(entry);
    }
    header["tensors"] = dir;
    const std::string header_text = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open weights file for writing: " + path.string());
    out.write(kWeightsMagic, sizeof(kWeightsMagic));
    const std::uint64_t len = header_text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    for (const NamedTensor& t : params.tensors) {
        for (Eigen::Index i = 0; i < t.value.rows(); ++i) {
            for (Eigen::Index j = 0; j < t.value.cols(); ++j) {
                const double v = t.value(i, j);
                out.write(reinterpret_cast<const char*>(&v), sizeof(v));
            }
        }
    }
    if (!out) throw IoError("failed writing weights file: " + path.string());
}

ModelParams load_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open weights file: " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kWeightsMagic, sizeof(magic)) != 0) {
        throw IoError("not a weights file (bad magic): " + path.string());
    }
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!in || len > (1ull << 20)) throw IoError("weights header length corrupt: " + path.string());
    std::string header_text(len, '\0');
    in.read(header_text.data(), static_cast<std::streamsize>(len));
    if (!in) throw IoError("weights header truncated: " + path.string());

    Json header;
    try {
        header = Json::parse(header_text);
    } catch (const Json::exception& e) {
        throw IoError("weights header is not valid JSON: " + std::string(e.what()));
    }
    try {
        if (header.at("schema").get<int>() != kWeightsSchema) {
            throw ValidationError("weights schema version mismatch");
        }
        ModelParams params;
        params.config = config_from_json(header.at("config"));
        const Json& norm = header.at("normalization");
        params.input_mean = vec2_from_json(norm.at("input_mean"));
        params.input_scale = vec2_from_json(norm.at("input_scale"));
        params.target_mean = vec2_from_json(norm.at("target_mean"));
        params.target_scale = vec2_from_json(norm.at("target_scale"));
        for (const Json& entry : header.at("tensors")) {
            NamedTensor t;
            t.name = entry.at("name").get<std::string>();
            const Eigen::Index rows = entry.at("rows").get<Eigen::Index>();
            const Eigen::Index cols = entry.at("cols").get<Eigen::Index>();
            if (rows < 1 || cols < 1) throw ValidationError("weights tensor shape corrupt: " + t.name);
            t.value.resize(rows, cols);
            for (Eigen::Index i = 0; i < rows; ++i) {
                for (Eigen::Index j = 0; j < cols; ++j) {
                    double v = 0.0;
                    in.read(reinterpret_cast<char*>(&v), sizeof(v));
                    t.value(i, j) = v;
                }
            }
            if (!in) throw IoError("weights data truncated at tensor " + t.name);
            params.tensors.push_back(std::move(t));
        }

        // The directory must spell out exactly the tensor set the config
        // implies, in canonical order.
        const ModelParams expected = init_params(params.config, 0);
        if (expected.tensors.size() != params.tensors.size()) {
            throw ValidationError("weights tensor directory does not match the config");
        }
        for (std::size_t i = 0; i < expected.tensors.size(); ++i) {
            if (expected.tensors[i].name != params.tensors[i].name ||
                expected.tensors[i].value.rows() != params.tensors[i].value.rows() ||
                expected.tensors[i].value.cols() != params.tensors[i].value.cols()) {
                throw ValidationError("weights tensor directory does not match the config at " +
                                      params.tensors[i].name);
            }
        }
        return params;
    } catch (const Json::exception& e) {
        throw IoError("weights header malformed: " + std::string(e.what()));
    }
}

void save_loss_history(const std::vector<EpochLoss>& history, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open loss history file for writing: " + path.string());
    out << "epoch,train_mse,val_mse\n";
    char buf[128];
    for (const EpochLoss& e : history) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", e.epoch, e.train_mse, e.val_mse);
        out << buf;
    }
    if (!out) throw IoError("failed writing loss history: " + path.string());
}

}  // namespace whisker
