#pragma once

#include <cstdint>
#include <string>

#include "whisker/config.hpp"
#include "whisker/dataset_io.hpp"

namespace whisker {

// One master seed fans out to fixed, named stage seeds so the stages stay
// independently reproducible: rerunning training never disturbs the corpus.
std::uint64_t stage_seed_datagen(std::uint64_t master);
std::uint64_t stage_seed_surrogate(std::uint64_t master);
std::uint64_t stage_seed_train(std::uint64_t master);
std::uint64_t stage_seed_eval(std::uint64_t master);

// The surrogate sensor with its run-specific noise seed in place.
SurrogateSensorModel seeded_surrogate(const RunConfig& cfg);

// The filter ceiling actually used for corpus generation. With
// auto_moment_max set, it is 5x the 95th percentile (nearest rank) of the
// calibration rig's moment magnitudes — far past anything a normal sweep
// produces; the configured value is the fallback when the rig cannot run.
double resolve_moment_max(const RunConfig& cfg);

// One sweep against a placed object, downsampled to 5 Hz. No augmentation:
// evaluation wants the unpadded sequence. Throws SolverError when any step
// fails to converge.
SignalSequence run_processed_sweep(const WhiskerSpec& spec, const PolyObject& object,
                                   const ScenePlacement& placement,
                                   const SweepTrajectory& trajectory,
                                   const std::string& object_name, std::uint64_t seed);

struct Corpus {
    DatasetSplit split;
    CorpusStats stats;
};

// Randomized sweeps over the training shapes: per-sweep placement and
// trajectory, equilibrium rollout, accept/reject filtering, 5 Hz
// downsampling, augmentation, and a seeded train/validation split. Sweep
// counts always reconcile: attempted == accepted + sum(rejected).
Corpus generate_corpus(const RunConfig& cfg);

}  // namespace whisker
