#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "whisker/gpr.hpp"
#include "whisker/signal.hpp"
#include "whisker/surrogate.hpp"

namespace whisker {

inline constexpr int kDatasetSchemaVersion = 1;
inline constexpr int kCalibrationSchemaVersion = 1;

// Lowercase hex SHA-256. The file variant streams, so large corpora are fine.
// Throws IoError if the file cannot be read.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

// Sweep accounting for one corpus run. `rejected` is keyed by reject-reason
// name and always carries every reason, zeros included, so manifests from
// different runs line up field by field.
struct CorpusStats {
    int attempted = 0;
    int accepted = 0;
    std::map<std::string, int> rejected;
    double moment_max = 0.0;  // resolved filter threshold, N·mm

    int total_rejected() const;
};

// Writes `dir/train.jsonl`, `dir/validation.jsonl`, and `dir/manifest.json`.
// Each JSONL line is one sequence (object, seed, placement, trajectory,
// samples); the manifest records the schema version, the master seed, the
// config digest, per-file SHA-256 digests and sequence counts, and the
// sweep tally. Output is deterministic: the same inputs produce the same
// bytes. Throws IoError on filesystem failure.
void write_dataset(const std::filesystem::path& dir, const DatasetSplit& split,
                   const CorpusStats& stats, std::uint64_t seed,
                   const std::string& config_digest);

struct LoadedDataset {
    DatasetSplit split;
    CorpusStats stats;
    std::uint64_t seed = 0;
    std::string config_digest;
};

// Reads a dataset directory back, verifying each file's digest against the
// manifest before parsing. Digest mismatches and malformed lines throw
// IoError / ValidationError naming the offending file (and line).
LoadedDataset read_dataset(const std::filesystem::path& dir);

// Calibration observations, one {wavelength, moment} record per line.
void write_calibration_pairs(const std::filesystem::path& path,
                             const std::vector<CalibrationPair>& pairs);
std::vector<CalibrationPair> read_calibration_pairs(const std::filesystem::path& path);

// Fitted wavelength->moment map as a single JSON document (per channel:
// inputs, targets, radius, noise variance, alpha). Loading refits the
// Gram factorization from the stored inputs and cross-checks the stored
// alpha, so a corrupted file cannot come back as a quietly wrong model.
void save_calibration_map(const CalibrationMap& map, const std::filesystem::path& path);
CalibrationMap load_calibration_map(const std::filesystem::path& path);

}  // namespace whisker
