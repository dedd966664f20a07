#include "whisker/dataset_io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json_util.hpp"
#include "whisker/errors.hpp"

namespace whisker {

namespace {

using jsonu::Json;
using jsonu::StrictObject;
using jsonu::dump_vec2;
using jsonu::read_field;

constexpr const char* kTrainFile = "train.jsonl";
constexpr const char* kValidationFile = "validation.jsonl";
constexpr const char* kManifestFile = "manifest.json";

std::string to_hex(const unsigned char* digest, unsigned int len) {
    static const char* hex = "0123456789abcdef";
    std::string out(2 * len, '0');
    for (unsigned int i = 0; i < len; ++i) {
        out[2 * i] = hex[digest[i] >> 4];
        out[2 * i + 1] = hex[digest[i] & 0xf];
    }
    return out;
}

Json dump_sequence(const SignalSequence& s) {
    Json j;
    j["object"] = s.object_name;
    j["seed"] = s.seed;
    Json pl;
    pl["rotation"] = s.placement.rotation;
    pl["translation"] = dump_vec2(s.placement.translation);
    pl["standoff"] = s.placement.standoff;
    j["placement"] = pl;
    Json tr;
    tr["direction"] = dump_vec2(s.trajectory.direction);
    tr["initial_speed"] = s.trajectory.initial_speed;
    tr["duration"] = s.trajectory.duration;
    tr["sim_rate"] = s.trajectory.sim_rate;
    tr["acceleration"] = s.trajectory.acceleration_profile;
    j["trajectory"] = tr;
    Json samples = Json::array();
    for (const ContactSample& c : s.samples) {
        samples.push_back(Json::array({c.t, c.moment.x(), c.moment.y(), c.contact_pos.x(),
                                       c.contact_pos.y(), c.in_contact ? 1 : 0}));
    }
    j["samples"] = samples;
    return j;
}

SignalSequence parse_sequence(const Json& j, const std::string& where) {
    SignalSequence s;
    StrictObject o(j, "sequence", where);
    read_field(o, "object", s.object_name);
    read_field(o, "seed", s.seed);
    if (const Json* pl = o.get("placement")) {
        StrictObject op(*pl, o.child_path("placement"), where);
        read_field(op, "rotation", s.placement.rotation);
        if (const Json* t = op.get("translation")) {
            s.placement.translation = jsonu::parse_vec2(*t, op.child_path("translation"), where);
        }
        read_field(op, "standoff", s.placement.standoff);
        op.finish();
    }
    if (const Json* tr = o.get("trajectory")) {
        StrictObject ot(*tr, o.child_path("trajectory"), where);
        if (const Json* d = ot.get("direction")) {
            s.trajectory.direction = jsonu::parse_vec2(*d, ot.child_path("direction"), where);
        }
        read_field(ot, "initial_speed", s.trajectory.initial_speed);
        read_field(ot, "duration", s.trajectory.duration);
        read_field(ot, "sim_rate", s.trajectory.sim_rate);
        read_field(ot, "acceleration", s.trajectory.acceleration_profile);
        ot.finish();
    }
    const Json& samples = o.require("samples");
    if (!samples.is_array()) throw ValidationError(o.fail("samples", "must be an array"));
    s.samples.reserve(samples.size());
    for (const Json& e : samples) {
        if (!e.is_array() || e.size() != 6) {
            throw ValidationError(o.fail("samples", "entries must be [t, m0, m1, cx, cy, c]"));
        }
        for (const Json& v : e) {
            if (!v.is_number()) {
                throw ValidationError(o.fail("samples", "entries must hold numbers"));
            }
        }
        ContactSample c;
        c.t = e[0].get<double>();
        c.moment = Vec2(e[1].get<double>(), e[2].get<double>());
        c.contact_pos = Vec2(e[3].get<double>(), e[4].get<double>());
        const int flag = e[5].get<int>();
        if (flag != 0 && flag != 1) {
            throw ValidationError(o.fail("samples", "contact flag must be 0 or 1"));
        }
        c.in_contact = flag == 1;
        s.samples.push_back(c);
    }
    o.finish();
    return s;
}

std::string render_jsonl(const std::vector<SignalSequence>& sequences) {
    std::string out;
    for (const SignalSequence& s : sequences) {
        out += dump_sequence(s).dump();
        out += '\n';
    }
    return out;
}

std::vector<SignalSequence> parse_jsonl(const std::string& text, const std::string& file_name) {
    std::vector<SignalSequence> out;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = file_name + ":" + std::to_string(line_no);
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::exception& e) {
            throw ValidationError(where + ": not valid JSON: " + std::string(e.what()));
        }
        out.push_back(parse_sequence(j, where));
    }
    return out;
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing: " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Json dump_gpr_channel(const GPRModel& m) {
    Json j;
    Json inputs = Json::array();
    for (const Vec2& x : m.inputs) inputs.push_back(dump_vec2(x));
    j["inputs"] = inputs;
    j["targets"] = std::vector<double>(m.targets.data(), m.targets.data() + m.targets.size());
    j["radius"] = m.radius;
    j["noise_variance"] = m.noise_variance;
    j["alpha"] = std::vector<double>(m.alpha.data(), m.alpha.data() + m.alpha.size());
    return j;
}

GPRModel parse_gpr_channel(const Json& j, const std::string& path, const std::string& domain) {
    StrictObject o(j, path, domain);
    std::vector<Vec2> inputs;
    if (const Json* in = o.get("inputs")) {
        if (!in->is_array()) throw ValidationError(o.fail("inputs", "must be an array"));
        for (std::size_t i = 0; i < in->size(); ++i) {
            inputs.push_back(jsonu::parse_vec2(
                (*in)[i], o.child_path("inputs") + "[" + std::to_string(i) + "]", domain));
        }
    }
    std::vector<double> targets;
    std::vector<double> alpha;
    double radius = 0.0;
    double noise_variance = 0.0;
    read_field(o, "targets", targets);
    read_field(o, "radius", radius);
    read_field(o, "noise_variance", noise_variance);
    read_field(o, "alpha", alpha);
    o.finish();
    if (inputs.size() != targets.size() || inputs.size() != alpha.size()) {
        throw ValidationError(domain + ": " + path + " inputs/targets/alpha lengths disagree");
    }

    // Refit from the stored observations; the factorization is not worth
    // persisting when it can be rebuilt exactly.
    const Eigen::VectorXd t =
        Eigen::Map<const Eigen::VectorXd>(targets.data(), static_cast<Eigen::Index>(targets.size()));
    GPRModel model = fit_gpr(inputs, t, radius, noise_variance);

    // Cross-check against the stored solution so silent corruption of any
    // numeric field cannot come back as a plausible-looking model.
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        const double got = model.alpha[static_cast<Eigen::Index>(i)];
        const double want = alpha[i];
        const double scale = std::max({1.0, std::abs(got), std::abs(want)});
        if (std::abs(got - want) > 1e-6 * scale) {
            throw ValidationError(domain + ": " + path +
                                  " stored coefficients do not match the stored data");
        }
    }
    return model;
}

}  // namespace

int CorpusStats::total_rejected() const {
    int n = 0;
    for (const auto& [name, count] : rejected) n += count;
    return n;
}

std::string sha256_hex(const std::string& bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw IoError("SHA-256 digest failed");
    }
    return to_hex(digest.data(), len);
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(ctx);
        throw IoError("SHA-256 digest failed");
    }
    std::array<char, 1 << 16> buf;
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        const std::streamsize got = in.gcount();
        if (got > 0 && EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(got)) != 1) {
            EVP_MD_CTX_free(ctx);
            throw IoError("SHA-256 digest failed");
        }
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    const bool ok = EVP_DigestFinal_ex(ctx, digest.data(), &len) == 1;
    EVP_MD_CTX_free(ctx);
    if (!ok) throw IoError("SHA-256 digest failed");
    return to_hex(digest.data(), len);
}

void write_dataset(const std::filesystem::path& dir, const DatasetSplit& split,
                   const CorpusStats& stats, std::uint64_t seed,
                   const std::string& config_digest) {
    std::filesystem::create_directories(dir);
    const std::string train_bytes = render_jsonl(split.train);
    const std::string val_bytes = render_jsonl(split.validation);
    write_file(dir / kTrainFile, train_bytes);
    write_file(dir / kValidationFile, val_bytes);

    Json manifest;
    manifest["schema"] = kDatasetSchemaVersion;
    manifest["seed"] = seed;
    manifest["config_digest"] = config_digest;
    Json sweeps;
    sweeps["attempted"] = stats.attempted;
    sweeps["accepted"] = stats.accepted;
    Json rejected;
    for (const auto& [name, count] : stats.rejected) rejected[name] = count;
    sweeps["rejected"] = rejected;
    manifest["sweeps"] = sweeps;
    manifest["moment_max"] = stats.moment_max;
    Json files;
    Json train_entry;
    train_entry["sequences"] = split.train.size();
    train_entry["sha256"] = sha256_hex(train_bytes);
    files[kTrainFile] = train_entry;
    Json val_entry;
    val_entry["sequences"] = split.validation.size();
    val_entry["sha256"] = sha256_hex(val_bytes);
    files[kValidationFile] = val_entry;
    manifest["files"] = files;
    write_file(dir / kManifestFile, manifest.dump(2) + "\n");
}

LoadedDataset read_dataset(const std::filesystem::path& dir) {
    const std::filesystem::path manifest_path = dir / kManifestFile;
    const std::string manifest_bytes = read_file(manifest_path);
    Json j;
    try {
        j = Json::parse(manifest_bytes);
    } catch (const Json::exception& e) {
        throw ValidationError(manifest_path.string() + ": not valid JSON: " + std::string(e.what()));
    }

    const std::string domain = manifest_path.string();
    LoadedDataset out;
    StrictObject o(j, "manifest", domain);
    const Json& schema = o.require("schema");
    if (!schema.is_number_integer() || schema.get<int>() != kDatasetSchemaVersion) {
        throw ValidationError(domain + ": unsupported schema version (expected " +
                              std::to_string(kDatasetSchemaVersion) + ")");
    }
    read_field(o, "seed", out.seed);
    read_field(o, "config_digest", out.config_digest);
    std::size_t expect_train = 0;
    std::size_t expect_val = 0;
    std::string digest_train;
    std::string digest_val;
    {
        StrictObject sw(o.require("sweeps"), o.child_path("sweeps"), domain);
        read_field(sw, "attempted", out.stats.attempted);
        read_field(sw, "accepted", out.stats.accepted);
        if (const Json* rej = sw.get("rejected")) {
            StrictObject orj(*rej, sw.child_path("rejected"), domain);
            for (auto it = rej->begin(); it != rej->end(); ++it) {
                int count = 0;
                read_field(orj, it.key(), count);
                out.stats.rejected[it.key()] = count;
            }
            orj.finish();
        }
        sw.finish();
    }
    read_field(o, "moment_max", out.stats.moment_max);
    {
        StrictObject files(o.require("files"), o.child_path("files"), domain);
        const auto read_entry = [&](const char* name, std::size_t& count, std::string& digest) {
            StrictObject fe(files.require(name), files.child_path(name), domain);
            std::uint64_t n = 0;
            read_field(fe, "sequences", n);
            count = static_cast<std::size_t>(n);
            read_field(fe, "sha256", digest);
            fe.finish();
        };
        read_entry(kTrainFile, expect_train, digest_train);
        read_entry(kValidationFile, expect_val, digest_val);
        files.finish();
    }
    o.finish();

    const auto load_split = [&](const char* name, const std::string& digest, std::size_t expect) {
        const std::filesystem::path path = dir / name;
        const std::string bytes = read_file(path);
        if (sha256_hex(bytes) != digest) {
            throw IoError(path.string() + ": digest mismatch against the manifest");
        }
        std::vector<SignalSequence> sequences = parse_jsonl(bytes, path.string());
        if (sequences.size() != expect) {
            throw ValidationError(path.string() + ": expected " + std::to_string(expect) +
                                  " sequences, found " + std::to_string(sequences.size()));
        }
        return sequences;
    };
    out.split.train = load_split(kTrainFile, digest_train, expect_train);
    out.split.validation = load_split(kValidationFile, digest_val, expect_val);
    return out;
}

void write_calibration_pairs(const std::filesystem::path& path,
                             const std::vector<CalibrationPair>& pairs) {
    std::string bytes;
    for (const CalibrationPair& p : pairs) {
        Json j;
        j["wavelength"] = dump_vec2(p.wavelength);
        j["moment"] = dump_vec2(p.moment);
        bytes += j.dump();
        bytes += '\n';
    }
    write_file(path, bytes);
}

std::vector<CalibrationPair> read_calibration_pairs(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    std::vector<CalibrationPair> out;
    std::istringstream in(bytes);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::exception& e) {
            throw ValidationError(where + ": not valid JSON: " + std::string(e.what()));
        }
        StrictObject o(j, "pair", where);
        CalibrationPair p;
        p.wavelength = jsonu::parse_vec2(o.require("wavelength"), o.child_path("wavelength"), where);
        p.moment = jsonu::parse_vec2(o.require("moment"), o.child_path("moment"), where);
        o.finish();
        out.push_back(p);
    }
    return out;
}

void save_calibration_map(const CalibrationMap& map, const std::filesystem::path& path) {
    if (!map.channel[0].fitted() || !map.channel[1].fitted()) {
        throw ValidationError("calibration map must be fitted before saving");
    }
    Json j;
    j["schema"] = kCalibrationSchemaVersion;
    j["channels"] = Json::array({dump_gpr_channel(map.channel[0]), dump_gpr_channel(map.channel[1])});
    write_file(path, j.dump(2) + "\n");
}

CalibrationMap load_calibration_map(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    Json j;
    try {
        j = Json::parse(bytes);
    } catch (const Json::exception& e) {
        throw ValidationError(path.string() + ": not valid JSON: " + std::string(e.what()));
    }
    const std::string domain = path.string();
    StrictObject o(j, "calibration", domain);
    const Json& schema = o.require("schema");
    if (!schema.is_number_integer() || schema.get<int>() != kCalibrationSchemaVersion) {
        throw ValidationError(domain + ": unsupported schema version (expected " +
                              std::to_string(kCalibrationSchemaVersion) + ")");
    }
    const Json& channels = o.require("channels");
    if (!channels.is_array() || channels.size() != 2) {
        throw ValidationError(domain + ": calibration.channels must hold two channels");
    }
    CalibrationMap map;
    map.channel[0] = parse_gpr_channel(channels[0], "calibration.channels[0]", domain);
    map.channel[1] = parse_gpr_channel(channels[1], "calibration.channels[1]", domain);
    o.finish();
    return map;
}

}  // namespace whisker
