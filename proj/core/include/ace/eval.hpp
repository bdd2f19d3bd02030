#pragma once

// Similarity-argmax classification, accuracy / macro-F1, harmonic mean,
// the chance baseline, the base/novel split rule, and the synonym
// robustness test (SRT). Nothing here can draw shadow negatives.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ace/ace_loss.hpp"
#include "ace/embedding.hpp"
#include "ace/vocab.hpp"

namespace ace {

enum class EvalMode { kBase, kNovel };
enum class LabelRepresentation { kRoot, kSynonymRun };
enum class LabelSource { kGenerated, kFile };
enum class StdKind { kPopulation, kSample };
enum class SplitRounding { kFloor, kCeil };

struct EvalConfig {
  EvalMode mode = EvalMode::kNovel;
  LabelRepresentation representation = LabelRepresentation::kRoot;
  bool leaf_augment = true;
  std::size_t srt_runs = 10;
  std::uint64_t seed = 0;
  LabelSource source = LabelSource::kGenerated;
  std::filesystem::path label_table;  // used with LabelSource::kFile
  StdKind std_kind = StdKind::kPopulation;

  void validate() const;
};

const char* to_string(EvalMode mode);
const char* to_string(LabelRepresentation representation);
const char* to_string(LabelSource source);
const char* to_string(StdKind kind);
EvalMode parse_eval_mode(std::string_view s);
LabelRepresentation parse_representation(std::string_view s);

/// Class columns for a label universe; column i is resolved against the
/// tree of action i of `vocab`.
std::vector<LabelColumn> label_columns(const std::vector<ActionLabel>& labels, const Vocabulary& vocab,
                                       bool leaf_augment);

/// D x K matrix of mean normalized text embeddings, one column per class.
Eigen::MatrixXd column_bank(const std::vector<LabelColumn>& columns, const TextEncoder& text);

/// Index of the largest value; ties go to the lowest index. ConfigError on empty.
std::size_t argmax_lowest(std::span<const double> values);

std::size_t classify(const Embedding& video, const Eigen::MatrixXd& bank);

/// argmax over `universe` of S(video, a). Throws ConfigError on an empty universe.
std::size_t classify(const VideoSample& video, const std::vector<ActionLabel>& universe, const EncoderPair& encoders,
                     const Vocabulary& vocab, bool leaf_augment);

std::vector<std::size_t> classify_all(std::span<const VideoSample> samples, const Eigen::MatrixXd& bank,
                                      const VideoEncoder& video);

struct Metrics {
  double accuracy = 0.0;  // percent
  double macro_f1 = 0.0;  // percent

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

/// Top-1 accuracy and macro-F1 averaged over the classes present in `truth`.
/// EmptyEvalSet on empty input; SchemaError on a length or range problem.
Metrics metrics(std::span<const std::size_t> predictions, std::span<const std::size_t> truth, std::size_t class_count);

/// 2xy / (x + y), 0 when both are 0.
double harmonic_mean(double seen, double unseen);

/// Uniform guessing over C' classes whose test frequencies are `distribution`.
/// Per-class precision is the class frequency, recall 1/C'.
Metrics random_baseline(std::span<const double> distribution);
std::vector<double> label_distribution(std::span<const std::size_t> truth, std::size_t class_count);

struct BaseNovelSplit {
  std::vector<std::size_t> base;   // ascending
  std::vector<std::size_t> novel;  // ascending
};

/// The least-frequent-verb third of the classes becomes novel. Ties broken
/// by the class text. ConfigError below 3 classes.
BaseNovelSplit select_base_novel_split(const Vocabulary& vocab, const std::map<std::string, std::size_t>& verb_frequencies,
                                       SplitRounding rounding = SplitRounding::kFloor);

/// Plain evaluation with root labels (or leaf-augmented root columns).
Metrics evaluate(const EncoderPair& encoders, const Vocabulary& vocab, std::span<const VideoSample> samples,
                 bool leaf_augment);

using LabelSet = std::vector<ActionLabel>;

/// Run 1 holds the root labels; later runs draw each action's verb
/// independently from its first-order children under mt19937_64(seed).
std::vector<LabelSet> generate_label_sets(const Vocabulary& vocab, std::size_t runs, std::uint64_t seed);

/// CSV with header run,class_index,label. Every run in 1..runs must name
/// every class 0..C-1 exactly once, else LabelTableMismatch.
std::vector<LabelSet> load_label_table(const std::filesystem::path& path, const Vocabulary& vocab, std::size_t runs);
std::vector<LabelSet> parse_label_table(std::string_view text, const Vocabulary& vocab, std::size_t runs,
                                        const std::string& source = "<memory>");

struct SrtRun {
  std::size_t run = 0;  // 1-based
  LabelSet labels;
  Metrics metrics;
};

struct SrtReport {
  EvalConfig config;
  std::vector<SrtRun> runs;
  Metrics mean;
  Metrics std;
};

double mean_of(std::span<const double> values);
double std_of(std::span<const double> values, StdKind kind);

SrtReport srt(const EvalConfig& config, const EncoderPair& encoders, const Vocabulary& vocab,
              std::span<const VideoSample> test);
SrtReport srt(const EvalConfig& config, const EncoderPair& encoders, const Vocabulary& vocab,
              std::span<const VideoSample> test, const std::vector<LabelSet>& label_sets);

std::string srt_report_json(const SrtReport& report);
/// run,accuracy,macro_f1 rows, then "mean" and "std" rows.
std::string srt_summary_csv(const SrtReport& report);

}  // namespace ace
