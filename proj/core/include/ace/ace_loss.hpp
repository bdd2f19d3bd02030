#pragma once

// Leaf-averaged video-text similarity, the (C+1)-way classification
// probabilities with a per-sample shadow negative, and the fixed-label and
// randomized-synonym loss terms.

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ace/embedding.hpp"
#include "ace/vocab.hpp"

namespace ace {

struct LossFlags {
  bool leaf_augment = true;
  bool shadow_negatives = true;
  bool l_rand = true;
  bool l_fixed = true;

  friend bool operator==(const LossFlags&, const LossFlags&) = default;
};

struct LossOptions {
  LossFlags flags;
  double tau = 0.02;
  double rand_weight = 1.0;  // not part of the method; 1.0 weighs both terms equally
};

enum class ColumnSource { kRoot, kSampledSynonym, kShadowNegative, kQuery };

const char* to_string(ColumnSource source);

/// The label texts whose normalized embeddings are averaged to represent
/// one class column.
struct LabelColumn {
  ActionLabel label;
  std::vector<std::string> texts;
  ColumnSource source = ColumnSource::kRoot;
};

/// With leaf augmentation, the texts are "child object" for every child of
/// the label's verb node: looked up in the tree of action `owner` first, then
/// in any tree of `vocab`. A verb with no node entry (a leaf) and the
/// non-augmented mode both use the label text alone.
LabelColumn resolve_column(const ActionLabel& label, const Vocabulary& vocab, std::size_t owner, bool leaf_augment,
                           ColumnSource source);

/// Mean of the normalized text embeddings of the column's texts.
Eigen::VectorXd column_embedding(const LabelColumn& column, const TextEncoder& text);

/// S(I, a): average cosine between the video embedding and the column's
/// text embeddings, divided by tau.
double similarity(const Embedding& video, const ActionLabel& label, const Vocabulary& vocab, std::size_t owner,
                  bool leaf_augment, double tau, const TextEncoder& text);

struct SimilarityMatrix {
  Eigen::MatrixXd values;  // B x K
  double tau = 1.0;
  std::vector<ColumnSource> provenance;  // one per column
};

SimilarityMatrix similarity_matrix(const std::vector<Embedding>& videos, const std::vector<LabelColumn>& columns,
                                   const TextEncoder& text, double tau);

struct ClassProbabilities {
  std::vector<double> probs;  // one per class
  double shadow = 0.0;        // mass on the shadow column, 0 without one
};

/// Softmax over the class similarities; a shadow similarity enlarges the
/// normalizer only.
ClassProbabilities class_probabilities(std::span<const double> sims, std::optional<double> shadow_sim = std::nullopt);

/// Mean negative log ground-truth probability over the rows of `sims`.
/// `shadow_sims`, when given, holds one shadow similarity per row.
double loss_fixed(const SimilarityMatrix& sims, std::span<const std::size_t> targets,
                  const Eigen::VectorXd* shadow_sims = nullptr);
/// Same form as loss_fixed, evaluated on the sampled-synonym columns.
double loss_rand(const SimilarityMatrix& sims, std::span<const std::size_t> targets,
                 const Eigen::VectorXd* shadow_sims = nullptr);

struct LossBreakdown {
  double l_fixed = 0.0;
  double l_rand = 0.0;
  double l_total = 0.0;
  std::vector<double> fixed_log_probs;
  std::vector<double> rand_log_probs;
};

/// Label sets drawn once per iteration and shared by the whole batch.
struct IterationLabels {
  std::vector<ActionLabel> positives;  // empty when l_rand is off
  std::vector<ActionLabel> shadows;    // empty when shadow negatives are off
};

IterationLabels sample_iteration_labels(const Vocabulary& vocab, Rng& rng, const LossFlags& flags);

struct LossGradients {
  Gradients video;
  Gradients text;
};

LossGradients zero_loss_gradients(const EncoderPair& encoders);

/// Evaluates L_f on one batch for already-sampled labels. When `grads` is
/// given, accumulates parameter gradients for trainable parameters.
LossBreakdown compute_loss(std::span<const VideoSample> batch, const Vocabulary& vocab, const EncoderPair& encoders,
                           const IterationLabels& labels, const LossOptions& options, LossGradients* grads = nullptr);

/// Samples the iteration labels from `rng`, then calls compute_loss.
LossBreakdown total_loss(std::span<const VideoSample> batch, const Vocabulary& vocab, const EncoderPair& encoders,
                         Rng& rng, const LossOptions& options, LossGradients* grads = nullptr);

void validate(const LossOptions& options);

}  // namespace ace
