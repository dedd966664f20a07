#include "whisker/config.hpp"

#include <fstream>
#include <sstream>

#include "json_util.hpp"
#include "whisker/errors.hpp"

namespace whisker {

namespace {

using jsonu::Json;
using jsonu::dump_vec2;
using jsonu::read_field;

// All config errors carry the "config" domain prefix.
struct StrictObject : jsonu::StrictObject {
    StrictObject(const Json& j, const std::string& path) : jsonu::StrictObject(j, path, "config") {}
};

Vec2 parse_vec2(const Json& j, const std::string& path) {
    return jsonu::parse_vec2(j, path, "config");
}

// --- per-struct serializers, key order fixed by construction ---

Json dump_whisker(const WhiskerSpec& w) {
    Json j;
    j["total_length"] = w.total_length;
    j["diameter"] = w.diameter;
    j["distal_arc_radius"] = w.distal_arc_radius;
    j["distal_arc_length"] = w.distal_arc_length;
    j["n_segments"] = w.n_segments;
    j["flexural_rigidity"] = w.flexural_rigidity;
    return j;
}

WhiskerSpec parse_whisker(const Json& j, const std::string& path) {
    WhiskerSpec w;
    StrictObject o(j, path);
    read_field(o, "total_length", w.total_length);
    read_field(o, "diameter", w.diameter);
    read_field(o, "distal_arc_radius", w.distal_arc_radius);
    read_field(o, "distal_arc_length", w.distal_arc_length);
    read_field(o, "n_segments", w.n_segments);
    read_field(o, "flexural_rigidity", w.flexural_rigidity);
    o.finish();
    return w;
}

Json dump_shape(const ShapeSpec& s) {
    Json j;
    j["kind"] = s.kind;
    j["name"] = s.name;
    j["a"] = s.a;
    j["b"] = s.b;
    j["c"] = s.c;
    j["seed"] = s.seed;
    j["n_vertices"] = s.n_vertices;
    return j;
}

ShapeSpec parse_shape(const Json& j, const std::string& path) {
    ShapeSpec s;
    StrictObject o(j, path);
    read_field(o, "kind", s.kind);
    read_field(o, "name", s.name);
    read_field(o, "a", s.a);
    read_field(o, "b", s.b);
    read_field(o, "c", s.c);
    read_field(o, "seed", s.seed);
    read_field(o, "n_vertices", s.n_vertices);
    o.finish();
    return s;
}

Json dump_datagen(const DatagenConfig& d) {
    Json j;
    j["sweeps_per_object"] = d.sweeps_per_object;
    Json traj;
    traj["sim_rate"] = d.trajectory.sim_rate;
    traj["speed_min"] = d.trajectory.speed_min;
    traj["speed_max"] = d.trajectory.speed_max;
    traj["accel_limit"] = d.trajectory.accel_limit;
    j["trajectory"] = traj;
    Json filt;
    filt["moment_max"] = d.filter.moment_max;
    filt["jump_max"] = d.filter.jump_max;
    j["filter"] = filt;
    j["auto_moment_max"] = d.auto_moment_max;
    Json aug;
    aug["k_max"] = d.augment.k_max;
    aug["noise_sigma"] = d.augment.noise_sigma;
    aug["max_length"] = d.augment.max_length;
    j["augment"] = aug;
    Json pl;
    pl["standoff_min"] = d.placement.standoff_min;
    pl["standoff_max"] = d.placement.standoff_max;
    pl["entry_min"] = d.placement.entry_min;
    pl["entry_max"] = d.placement.entry_max;
    pl["max_retries"] = d.placement.max_retries;
    j["placement"] = pl;
    j["trail_margin"] = d.trail_margin;
    j["train_ratio"] = d.train_ratio;
    return j;
}

DatagenConfig parse_datagen(const Json& j, const std::string& path) {
    DatagenConfig d;
    StrictObject o(j, path);
    read_field(o, "sweeps_per_object", d.sweeps_per_object);
    if (const Json* t = o.get("trajectory")) {
        StrictObject ot(*t, o.child_path("trajectory"));
        read_field(ot, "sim_rate", d.trajectory.sim_rate);
        read_field(ot, "speed_min", d.trajectory.speed_min);
        read_field(ot, "speed_max", d.trajectory.speed_max);
        read_field(ot, "accel_limit", d.trajectory.accel_limit);
        ot.finish();
    }
    if (const Json* f = o.get("filter")) {
        StrictObject of(*f, o.child_path("filter"));
        read_field(of, "moment_max", d.filter.moment_max);
        read_field(of, "jump_max", d.filter.jump_max);
        of.finish();
    }
    read_field(o, "auto_moment_max", d.auto_moment_max);
    if (const Json* a = o.get("augment")) {
        StrictObject oa(*a, o.child_path("augment"));
        read_field(oa, "k_max", d.augment.k_max);
        read_field(oa, "noise_sigma", d.augment.noise_sigma);
        read_field(oa, "max_length", d.augment.max_length);
        oa.finish();
    }
    if (const Json* p = o.get("placement")) {
        StrictObject op(*p, o.child_path("placement"));
        read_field(op, "standoff_min", d.placement.standoff_min);
        read_field(op, "standoff_max", d.placement.standoff_max);
        read_field(op, "entry_min", d.placement.entry_min);
        read_field(op, "entry_max", d.placement.entry_max);
        read_field(op, "max_retries", d.placement.max_retries);
        op.finish();
    }
    read_field(o, "trail_margin", d.trail_margin);
    read_field(o, "train_ratio", d.train_ratio);
    o.finish();
    return d;
}

Json dump_surrogate(const SurrogateSensorModel& s) {
    Json j;
    j["coupling"] = Json::array({Json::array({s.coupling(0, 0), s.coupling(0, 1)}),
                                 Json::array({s.coupling(1, 0), s.coupling(1, 1)})});
    j["cubic_coeff"] = dump_vec2(s.cubic_coeff);
    j["noise_sigma"] = s.noise_sigma;
    return j;
}

SurrogateSensorModel parse_surrogate(const Json& j, const std::string& path) {
    SurrogateSensorModel s;
    StrictObject o(j, path);
    if (const Json* c = o.get("coupling")) {
        if (!c->is_array() || c->size() != 2) {
            throw ValidationError("config: " + o.child_path("coupling") + " must be a 2x2 matrix");
        }
        for (int r = 0; r < 2; ++r) {
            const Vec2 row = parse_vec2((*c)[r], o.child_path("coupling"));
            s.coupling(r, 0) = row.x();
            s.coupling(r, 1) = row.y();
        }
    }
    if (const Json* c = o.get("cubic_coeff")) s.cubic_coeff = parse_vec2(*c, o.child_path("cubic_coeff"));
    read_field(o, "noise_sigma", s.noise_sigma);
    o.finish();
    return s;
}

Json dump_calibration(const CalibrationConfig& c) {
    Json j;
    Json rig;
    rig["n_trajectories"] = c.rig.n_trajectories;
    rig["points_per_traj"] = c.rig.points_per_traj;
    rig["frac_min"] = c.rig.frac_min;
    rig["frac_max"] = c.rig.frac_max;
    rig["max_depth_mm"] = c.rig.max_depth_mm;
    j["rig"] = rig;
    j["radius"] = c.radius;
    j["noise_variance"] = c.noise_variance;
    Json pre;
    pre["smoothing_window"] = c.preprocess.smoothing_window;
    pre["activity_threshold"] = c.preprocess.activity_threshold;
    j["preprocess"] = pre;
    return j;
}

CalibrationConfig parse_calibration(const Json& j, const std::string& path) {
    CalibrationConfig c;
    StrictObject o(j, path);
    if (const Json* r = o.get("rig")) {
        StrictObject orr(*r, o.child_path("rig"));
        read_field(orr, "n_trajectories", c.rig.n_trajectories);
        read_field(orr, "points_per_traj", c.rig.points_per_traj);
        read_field(orr, "frac_min", c.rig.frac_min);
        read_field(orr, "frac_max", c.rig.frac_max);
        read_field(orr, "max_depth_mm", c.rig.max_depth_mm);
        orr.finish();
    }
    read_field(o, "radius", c.radius);
    read_field(o, "noise_variance", c.noise_variance);
    if (const Json* p = o.get("preprocess")) {
        StrictObject op(*p, o.child_path("preprocess"));
        read_field(op, "smoothing_window", c.preprocess.smoothing_window);
        read_field(op, "activity_threshold", c.preprocess.activity_threshold);
        op.finish();
    }
    o.finish();
    return c;
}

Json dump_model(const WhiskerNetConfig& m) {
    Json j;
    j["input_dim"] = m.input_dim;
    j["output_dim"] = m.output_dim;
    j["encoder_hidden"] = m.encoder_hidden;
    j["d_model"] = m.d_model;
    j["n_layers"] = m.n_layers;
    j["n_heads"] = m.n_heads;
    j["ffn_hidden"] = m.ffn_hidden;
    j["dropout"] = m.dropout;
    j["max_len"] = m.max_len;
    return j;
}

WhiskerNetConfig parse_model(const Json& j, const std::string& path) {
    WhiskerNetConfig m;
    StrictObject o(j, path);
    read_field(o, "input_dim", m.input_dim);
    read_field(o, "output_dim", m.output_dim);
    read_field(o, "encoder_hidden", m.encoder_hidden);
    read_field(o, "d_model", m.d_model);
    read_field(o, "n_layers", m.n_layers);
    read_field(o, "n_heads", m.n_heads);
    read_field(o, "ffn_hidden", m.ffn_hidden);
    read_field(o, "dropout", m.dropout);
    read_field(o, "max_len", m.max_len);
    o.finish();
    return m;
}

Json dump_train(const TrainConfig& t) {
    Json j;
    j["batch_size"] = t.batch_size;
    j["learning_rate"] = t.learning_rate;
    j["adam_beta1"] = t.adam_beta1;
    j["adam_beta2"] = t.adam_beta2;
    j["adam_eps"] = t.adam_eps;
    j["epochs"] = t.epochs;
    j["early_stop_patience"] = t.early_stop_patience;
    return j;
}

TrainConfig parse_train(const Json& j, const std::string& path) {
    TrainConfig t;
    StrictObject o(j, path);
    read_field(o, "batch_size", t.batch_size);
    read_field(o, "learning_rate", t.learning_rate);
    read_field(o, "adam_beta1", t.adam_beta1);
    read_field(o, "adam_beta2", t.adam_beta2);
    read_field(o, "adam_eps", t.adam_eps);
    read_field(o, "epochs", t.epochs);
    read_field(o, "early_stop_patience", t.early_stop_patience);
    o.finish();
    return t;
}

Json dump_eval(const EvalConfig& e) {
    Json j;
    j["sweeps_per_object"] = e.sweeps_per_object;
    j["ablation_speeds"] = e.ablation_speeds;
    j["ablation_sweeps"] = e.ablation_sweeps;
    j["activity_threshold"] = e.activity_threshold;
    return j;
}

EvalConfig parse_eval(const Json& j, const std::string& path) {
    EvalConfig e;
    StrictObject o(j, path);
    read_field(o, "sweeps_per_object", e.sweeps_per_object);
    read_field(o, "ablation_speeds", e.ablation_speeds);
    read_field(o, "ablation_sweeps", e.ablation_sweeps);
    read_field(o, "activity_threshold", e.activity_threshold);
    o.finish();
    return e;
}

ShapeSpec shape(const std::string& kind, const std::string& name, double a, double b = 0.0,
                double c = 0.0, std::uint64_t seed = 0) {
    ShapeSpec s;
    s.kind = kind;
    s.name = name;
    s.a = a;
    s.b = b;
    s.c = c;
    s.seed = seed;
    return s;
}

}  // namespace

void DatagenConfig::validate() const {
    if (sweeps_per_object < 1) throw ValidationError("datagen: sweeps_per_object must be positive");
    trajectory.validate();
    if (filter.moment_max <= 0.0 && !auto_moment_max) {
        throw ValidationError("datagen: filter.moment_max must be positive (or auto_moment_max set)");
    }
    if (filter.jump_max <= 0.0) throw ValidationError("datagen: filter.jump_max must be positive");
    augment.validate();
    placement.validate();
    if (trail_margin < 0.0) throw ValidationError("datagen: trail_margin must be >= 0");
    if (train_ratio <= 0.0 || train_ratio >= 1.0) {
        throw ValidationError("datagen: train_ratio must be inside (0, 1)");
    }
}

void CalibrationConfig::validate() const {
    rig.validate();
    if (radius < 0.0) throw ValidationError("calibration: radius must be >= 0 (0 selects the default)");
    if (noise_variance < 0.0) throw ValidationError("calibration: noise_variance must be >= 0");
    preprocess.validate();
}

void EvalConfig::validate() const {
    if (sweeps_per_object < 1) throw ValidationError("eval: sweeps_per_object must be positive");
    if (ablation_speeds.empty()) throw ValidationError("eval: ablation_speeds must not be empty");
    for (const double s : ablation_speeds) {
        if (s <= 0.0) throw ValidationError("eval: ablation speeds must be positive");
    }
    if (ablation_sweeps < 4) {
        throw ValidationError("eval: ablation_sweeps must be >= 4 (cell averages need support)");
    }
    if (activity_threshold < 0.0) throw ValidationError("eval: activity_threshold must be >= 0");
}

void RunConfig::validate() const {
    if (out_dir.empty()) throw ValidationError("config: out_dir must not be empty");
    whisker.validate();
    if (train_shapes.empty()) throw ValidationError("config: train_shapes must not be empty");
    for (const ShapeSpec& s : train_shapes) make_shape(s);  // construction validates
    for (const ShapeSpec& s : eval_shapes) make_shape(s);
    datagen.validate();
    surrogate.validate();
    calibration.validate();
    model.validate();
    train.validate();
    eval.validate();
}

RunConfig default_run_config() {
    RunConfig cfg;
    cfg.train_shapes = {
        shape("circle", "circle_r15", 15.0),
        shape("circle", "circle_r24", 24.0),
        shape("rectangle", "rect_40x18", 40.0, 18.0),
        shape("rectangle", "rect_24x24", 24.0, 24.0),
        shape("blob", "blob_18", 18.0, 0.0, 0.0, 7),
        shape("l_bracket", "bracket_36", 36.0, 36.0, 12.0),
    };
    cfg.eval_shapes = {
        shape("circle", "circle_r20", 20.0),
        shape("rectangle", "rect_30x15", 30.0, 15.0),
    };
    cfg.model = desk_model_config();
    return cfg;
}

void apply_paper_scale(RunConfig& cfg) {
    cfg.datagen.sweeps_per_object = 200;
    cfg.model = WhiskerNetConfig{};
}

std::string serialize_run_config(const RunConfig& cfg) {
    Json j;
    j["schema"] = kConfigSchemaVersion;
    j["seed"] = cfg.seed;
    j["out_dir"] = cfg.out_dir;
    j["whisker"] = dump_whisker(cfg.whisker);
    Json ts = Json::array();
    for (const ShapeSpec& s : cfg.train_shapes) ts.push_back(dump_shape(s));
    j["train_shapes"] = ts;
    Json es = Json::array();
    for (const ShapeSpec& s : cfg.eval_shapes) es.push_back(dump_shape(s));
    j["eval_shapes"] = es;
    j["datagen"] = dump_datagen(cfg.datagen);
    j["surrogate"] = dump_surrogate(cfg.surrogate);
    j["calibration"] = dump_calibration(cfg.calibration);
    j["model"] = dump_model(cfg.model);
    j["train"] = dump_train(cfg.train);
    j["eval"] = dump_eval(cfg.eval);
    return j.dump(2) + "\n";
}

RunConfig parse_run_config(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::exception& e) {
        throw ValidationError("config: not valid JSON: " + std::string(e.what()));
    }
    RunConfig cfg = RunConfig{};
    cfg.train_shapes.clear();
    cfg.eval_shapes.clear();

    StrictObject o(j, "config");
    const Json* schema = o.get("schema");
    if (schema == nullptr) throw ValidationError("config: missing schema version");
    if (!schema->is_number_integer() || schema->get<int>() != kConfigSchemaVersion) {
        throw ValidationError("config: unsupported schema version (expected " +
                              std::to_string(kConfigSchemaVersion) + ")");
    }
    read_field(o, "seed", cfg.seed);
    read_field(o, "out_dir", cfg.out_dir);
    if (const Json* w = o.get("whisker")) cfg.whisker = parse_whisker(*w, "config.whisker");
    if (const Json* t = o.get("train_shapes")) {
        if (!t->is_array()) throw ValidationError("config: train_shapes must be an array");
        for (std::size_t i = 0; i < t->size(); ++i) {
            cfg.train_shapes.push_back(
                parse_shape((*t)[i], "config.train_shapes[" + std::to_string(i) + "]"));
        }
    } else {
        cfg.train_shapes = default_run_config().train_shapes;
    }
    if (const Json* e = o.get("eval_shapes")) {
        if (!e->is_array()) throw ValidationError("config: eval_shapes must be an array");
        for (std::size_t i = 0; i < e->size(); ++i) {
            cfg.eval_shapes.push_back(
                parse_shape((*e)[i], "config.eval_shapes[" + std::to_string(i) + "]"));
        }
    } else {
        cfg.eval_shapes = default_run_config().eval_shapes;
    }
    if (const Json* d = o.get("datagen")) cfg.datagen = parse_datagen(*d, "config.datagen");
    if (const Json* s = o.get("surrogate")) cfg.surrogate = parse_surrogate(*s, "config.surrogate");
    if (const Json* c = o.get("calibration")) {
        cfg.calibration = parse_calibration(*c, "config.calibration");
    }
    if (const Json* m = o.get("model")) {
        cfg.model = parse_model(*m, "config.model");
    } else {
        cfg.model = desk_model_config();
    }
    if (const Json* t = o.get("train")) cfg.train = parse_train(*t, "config.train");
    if (const Json* e = o.get("eval")) cfg.eval = parse_eval(*e, "config.eval");
    o.finish();
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_run_config(ss.str());
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void save_run_config(const RunConfig& cfg, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open config file for writing: " + path.string());
    out << serialize_run_config(cfg);
    if (!out) throw IoError("failed writing config file: " + path.string());
}

}  // namespace whisker
