#pragma once

// Fine-tuning loop: per iteration, draw sampled-synonym labels and shadow
// negatives once for the batch, evaluate L_f, and apply an SGD step to the
// trainable parameters only.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ace/ace_loss.hpp"
#include "ace/embedding.hpp"
#include "ace/vocab.hpp"

namespace ace {

struct TrainConfig {
  std::size_t batch_size = 16;
  std::size_t epochs = 15;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double tau = 0.02;
  std::vector<int> m_per_level{11, 11};  // tree widths the vocabulary was built with (recorded only)
  LossFlags flags;
  double rand_weight = 1.0;
  std::uint64_t seed = 0;
  std::set<std::string> trainable{kVideoProjection, kTextProjection};
  std::size_t checkpoint_every = 0;  // iterations; 0 disables periodic checkpoints

  void validate() const;
  LossOptions loss_options() const { return {flags, tau, rand_weight}; }
};

/// Every key accepted in a train config file, in documentation order.
const std::vector<std::string>& train_config_keys();
std::string train_config_to_json(const TrainConfig& config);
/// Applies the keys present in `text` on top of `base`; unknown keys throw ConfigError.
TrainConfig train_config_from_json(std::string_view text, TrainConfig base = {});

/// Parses ablation switches: "all", "fixed-only", or a comma list of
/// "no-leaf", "no-shadow", "no-rand", "no-fixed".
LossFlags parse_flags(std::string_view text);
std::string format_flags(const LossFlags& flags);

struct IterationRecord {
  std::size_t iteration = 0;  // 1-based global count
  std::size_t epoch = 0;      // 0-based
  double l_fixed = 0.0;
  double l_rand = 0.0;
  double l_total = 0.0;

  friend bool operator==(const IterationRecord&, const IterationRecord&) = default;
};

std::string to_ndjson(const IterationRecord& record);

struct TrainState {
  std::vector<Parameter> parameters;
  Gradients velocity;
  std::size_t epoch = 0;
  std::size_t iteration = 0;
  std::size_t cursor = 0;            // position inside the current epoch's order
  std::vector<std::size_t> order;    // sample permutation for the current epoch
  Rng rng;
  std::vector<IterationRecord> history;
  std::string vocab_hash;
};

struct TrainOptions {
  std::ostream* metrics_log = nullptr;            // one NDJSON record per iteration
  std::optional<std::size_t> stop_after;          // stop once this many global iterations ran
  const TrainState* resume = nullptr;
  std::filesystem::path checkpoint_dir;           // used with checkpoint_every
  std::function<void(const TrainState&)> on_iteration;
};

/// Runs the loop until `config.epochs` complete (or `stop_after`). The
/// encoders are updated in place; the returned state snapshots them.
TrainState train(const TrainConfig& config, std::span<const VideoSample> data, const Vocabulary& vocab,
                 EncoderPair& encoders, const TrainOptions& options = {});

void save_checkpoint(const TrainState& state, const TrainConfig& config, const std::filesystem::path& path);
/// Throws ChecksumError on a corrupt file, VocabMismatch when the stored
/// vocabulary hash differs from `expected_vocab_hash` (if non-empty).
TrainState load_checkpoint(const std::filesystem::path& path, const std::string& expected_vocab_hash = {},
                           TrainConfig* config = nullptr);

/// Copies the snapshot's parameter values into the encoders by name.
void restore_parameters(const std::vector<Parameter>& snapshot, EncoderPair& encoders);

}  // namespace ace
