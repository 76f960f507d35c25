#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tasign/network.hpp"
#include "tasign/parallel.hpp"

namespace tasign {

/// Extract + normalize; finger input additionally gets its pressure channels zeroed.
TimeFunctionSet prepare_time_functions(const RawSignature& sig);

/// DTW pre-alignment of (enrolled, test) followed by tail truncation to max_len columns.
/// Pairs no longer than max_len pass through untouched.
AlignedPair align_pair(const TimeFunctionSet& enrolled, const TimeFunctionSet& test,
                       const std::vector<Channel>& cost_channels, int max_len);

/// Signatures of a development set with their normalized time functions.
struct TrainingCorpus {
  std::vector<ManifestEntry> entries;
  std::vector<TimeFunctionSet> time_functions;

  static TrainingCorpus from_manifest(const DatasetManifest& manifest, Exec exec = Exec::Parallel);
  static TrainingCorpus from_signatures(const std::vector<ManifestEntry>& entries,
                                        const std::vector<RawSignature>& sigs);
};

}  // namespace tasign

namespace tasign::net {

struct TrainConfig {
  int epochs = 20;
  int batch_size = 32;
  int max_len = 1500;
  std::uint64_t seed = 1;
  bool balance = true;
  double validation_fraction = 0.0;
  // Pairs drawn from the shuffled list each epoch; 0 uses all of them.
  int pairs_per_epoch = 0;
  std::vector<Channel> cost_channels = default_cost_channels();
  AdamHyper adam;

  /// Throws Configuration on out-of-range values.
  void validate() const;
};

/// Indices into a TrainingCorpus. Label 0 = same-writer genuine pair, 1 = impostor.
struct TrainingPair {
  int enrolled = 0;
  int test = 0;
  int label = 0;
  ComparisonKind kind = ComparisonKind::Genuine;

  friend bool operator==(const TrainingPair&, const TrainingPair&) = default;
};

struct PairSplit {
  std::vector<TrainingPair> train, validation;
  std::vector<std::string> validation_users;
};

/// Genuine-genuine pairs of every user plus impostor pairs split between skilled and
/// random forgeries; with `balance` the impostor count equals the genuine count.
PairSplit build_training_pairs(const TrainingCorpus& corpus, const TrainConfig& config);

struct BatchResult {
  ModelParams gradient;  // mean over the batch
  double loss_sum = 0.0;
};

/// Aligns and back-propagates every pair of a mini-batch. Per-pair gradients are reduced
/// in batch order, so Serial and Parallel return identical bits.
BatchResult batch_gradient(const ModelParams& params, const TrainingCorpus& corpus,
                           std::span<const TrainingPair> batch, const TrainConfig& config,
                           Exec exec = Exec::Parallel);

/// Sum of losses over `pairs` (forward only).
double pairs_loss(const ModelParams& params, const TrainingCorpus& corpus,
                  std::span<const TrainingPair> pairs, const TrainConfig& config,
                  Exec exec = Exec::Parallel);

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;  // NaN without a validation split
  std::size_t train_pairs = 0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochStats> history;
  std::size_t genuine_pairs = 0, impostor_pairs = 0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

TrainResult train(const TrainingCorpus& corpus, const TrainConfig& config,
                  Exec exec = Exec::Parallel, const EpochCallback& on_epoch = {});
TrainResult train(const DatasetManifest& manifest, const TrainConfig& config,
                  Exec exec = Exec::Parallel, const EpochCallback& on_epoch = {});

/// Key/value echo of a config, stored in checkpoints.
std::map<std::string, std::string> describe(const TrainConfig& config);

struct Checkpoint {
  ModelParams params;
  std::map<std::string, std::string> config;

  int max_len() const;
  std::vector<Channel> cost_channels() const;
};

/// Versioned binary container: magic, version, config text, then one named
/// (rows, cols, float64 data) record per parameter array.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tasign::net
