#include "ace/ace_loss.hpp"

#include <cmath>
#include <limits>
#include <unordered_map>

#include "ace/errors.hpp"

namespace ace {

const char* to_string(ColumnSource source) {
  switch (source) {
    case ColumnSource::kRoot: return "root";
    case ColumnSource::kSampledSynonym: return "sampled-synonym";
    case ColumnSource::kShadowNegative: return "shadow-negative";
    case ColumnSource::kQuery: return "query";
  }
  return "unknown";
}

void validate(const LossOptions& options) {
  if (!(options.tau > 0.0) || !std::isfinite(options.tau)) {
    throw Error(ErrorCode::kConfigError, "temperature must be positive");
  }
  if (!options.flags.l_fixed && !options.flags.l_rand) {
    throw Error(ErrorCode::kConfigError, "at least one of l_fixed and l_rand must be enabled");
  }
  if (!std::isfinite(options.rand_weight) || options.rand_weight < 0.0) {
    throw Error(ErrorCode::kConfigError, "rand_weight must be finite and non-negative");
  }
}

LabelColumn resolve_column(const ActionLabel& label, const Vocabulary& vocab, std::size_t owner, bool leaf_augment,
                           ColumnSource source) {
  LabelColumn col{label, {}, source};
  if (leaf_augment) {
    const std::vector<std::string>* kids = nullptr;
    if (owner < vocab.size()) kids = vocab.tree_for(owner).find_children(label.verb());
    if (kids == nullptr) kids = vocab.find_node_children(label.verb());
    if (kids != nullptr) {
      col.texts.reserve(kids->size());
      for (const auto& k : *kids) col.texts.push_back(label.with_verb(k).text());
      return col;
    }
  }
  col.texts.push_back(label.text());
  return col;
}

Eigen::VectorXd column_embedding(const LabelColumn& column, const TextEncoder& text) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(text.dim());
  for (const auto& t : column.texts) sum += text.encode(t).vector;
  return sum / static_cast<double>(column.texts.size());
}

double similarity(const Embedding& video, const ActionLabel& label, const Vocabulary& vocab, std::size_t owner,
                  bool leaf_augment, double tau, const TextEncoder& text) {
  if (!(tau > 0.0)) throw Error(ErrorCode::kConfigError, "temperature must be positive");
  const auto col = resolve_column(label, vocab, owner, leaf_augment, ColumnSource::kQuery);
  return video.vector.dot(column_embedding(col, text)) / tau;
}

SimilarityMatrix similarity_matrix(const std::vector<Embedding>& videos, const std::vector<LabelColumn>& columns,
                                   const TextEncoder& text, double tau) {
  if (!(tau > 0.0)) throw Error(ErrorCode::kConfigError, "temperature must be positive");
  const auto d = text.dim();
  Eigen::MatrixXd v(static_cast<Eigen::Index>(videos.size()), d);
  for (std::size_t n = 0; n < videos.size(); ++n) v.row(static_cast<Eigen::Index>(n)) = videos[n].vector.transpose();
  Eigen::MatrixXd u(static_cast<Eigen::Index>(columns.size()), d);
  SimilarityMatrix out;
  out.tau = tau;
  for (std::size_t k = 0; k < columns.size(); ++k) {
    u.row(static_cast<Eigen::Index>(k)) = column_embedding(columns[k], text).transpose();
    out.provenance.push_back(columns[k].source);
  }
  out.values = v * u.transpose() / tau;
  return out;
}

namespace {

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw Error(ErrorCode::kNumericsError, std::string("non-finite ") + what);
}

struct RowLoss {
  double log_prob = 0.0;
  ClassProbabilities probs;
};

RowLoss row_loss(std::span<const double> sims, std::size_t target, std::optional<double> shadow) {
  RowLoss r;
  r.probs = class_probabilities(sims, shadow);
  // log p_y = s_y - logsumexp, computed directly to avoid log(0).
  double m = shadow.value_or(-std::numeric_limits<double>::infinity());
  for (double s : sims) m = std::max(m, s);
  double z = 0.0;
  for (double s : sims) z += std::exp(s - m);
  if (shadow) z += std::exp(*shadow - m);
  r.log_prob = sims[target] - m - std::log(z);
  return r;
}

// Mean -log p over rows; optionally writes dL/dS (B x K) and dL/dshadow (B).
double classification_loss(const Eigen::MatrixXd& sims, std::span<const std::size_t> targets,
                           const Eigen::VectorXd* shadow, std::vector<double>* log_probs, Eigen::MatrixXd* d_sims,
                           Eigen::VectorXd* d_shadow) {
  const auto b = sims.rows();
  if (b == 0) throw Error(ErrorCode::kConfigError, "empty batch");
  if (static_cast<std::size_t>(b) != targets.size()) throw Error(ErrorCode::kShapeError, "targets/batch size mismatch");
  if (shadow && shadow->size() != b) throw Error(ErrorCode::kShapeError, "shadow similarities/batch size mismatch");
  if (d_sims) *d_sims = Eigen::MatrixXd::Zero(b, sims.cols());
  if (d_shadow) *d_shadow = Eigen::VectorXd::Zero(b);
  if (log_probs) log_probs->assign(static_cast<std::size_t>(b), 0.0);

  double total = 0.0;
  std::vector<double> row(static_cast<std::size_t>(sims.cols()));
  for (Eigen::Index n = 0; n < b; ++n) {
    const auto y = targets[static_cast<std::size_t>(n)];
    if (y >= row.size()) throw Error(ErrorCode::kConfigError, "label index " + std::to_string(y) + " out of range");
    for (Eigen::Index k = 0; k < sims.cols(); ++k) row[static_cast<std::size_t>(k)] = sims(n, k);
    std::optional<double> sh;
    if (shadow) sh = (*shadow)(n);
    const auto r = row_loss(row, y, sh);
    require_finite(r.log_prob, "log-probability");
    total -= r.log_prob;
    if (log_probs) (*log_probs)[static_cast<std::size_t>(n)] = r.log_prob;
    if (d_sims) {
      for (Eigen::Index k = 0; k < sims.cols(); ++k) (*d_sims)(n, k) = r.probs.probs[static_cast<std::size_t>(k)] / b;
      (*d_sims)(n, static_cast<Eigen::Index>(y)) -= 1.0 / b;
    }
    if (d_shadow) (*d_shadow)(n) = r.probs.shadow / b;
  }
  return total / b;
}

}  // namespace

ClassProbabilities class_probabilities(std::span<const double> sims, std::optional<double> shadow_sim) {
  if (sims.empty()) throw Error(ErrorCode::kConfigError, "no classes");
  double m = -std::numeric_limits<double>::infinity();
  for (double s : sims) {
    require_finite(s, "similarity");
    m = std::max(m, s);
  }
  if (shadow_sim) {
    require_finite(*shadow_sim, "shadow similarity");
    m = std::max(m, *shadow_sim);
  }
  ClassProbabilities out;
  out.probs.reserve(sims.size());
  double z = 0.0;
  for (double s : sims) {
    out.probs.push_back(std::exp(s - m));
    z += out.probs.back();
  }
  if (shadow_sim) {
    out.shadow = std::exp(*shadow_sim - m);
    z += out.shadow;
  }
  for (auto& p : out.probs) p /= z;
  out.shadow /= z;
  return out;
}

double loss_fixed(const SimilarityMatrix& sims, std::span<const std::size_t> targets,
                  const Eigen::VectorXd* shadow_sims) {
  return classification_loss(sims.values, targets, shadow_sims, nullptr, nullptr, nullptr);
}

double loss_rand(const SimilarityMatrix& sims, std::span<const std::size_t> targets,
                 const Eigen::VectorXd* shadow_sims) {
  return classification_loss(sims.values, targets, shadow_sims, nullptr, nullptr, nullptr);
}

IterationLabels sample_iteration_labels(const Vocabulary& vocab, Rng& rng, const LossFlags& flags) {
  IterationLabels labels;
  if (flags.l_rand) labels.positives = sample_positive_labels(vocab, rng);
  if (flags.shadow_negatives) labels.shadows = sample_shadow_negatives(vocab, rng);
  return labels;
}

LossGradients zero_loss_gradients(const EncoderPair& encoders) {
  return {zero_gradients(encoders.video->parameters()), zero_gradients(encoders.text->parameters())};
}

namespace {

// Columns reference rows of a per-call table of unique label texts, so each
// distinct text is encoded once.
class TextTable {
 public:
  std::vector<std::size_t> add(const LabelColumn& col) {
    std::vector<std::size_t> ids;
    ids.reserve(col.texts.size());
    for (const auto& t : col.texts) {
      auto [it, inserted] = index_.try_emplace(t, texts_.size());
      if (inserted) texts_.push_back(t);
      ids.push_back(it->second);
    }
    return ids;
  }
  const std::vector<std::string>& texts() const { return texts_; }

 private:
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::string> texts_;
};

struct ColumnBlock {
  std::vector<std::vector<std::size_t>> members;  // text ids per column
  Eigen::MatrixXd means;                          // K x D
};

}  // namespace

LossBreakdown compute_loss(std::span<const VideoSample> batch, const Vocabulary& vocab, const EncoderPair& encoders,
                           const IterationLabels& labels, const LossOptions& options, LossGradients* grads) {
  validate(options);
  const auto& flags = options.flags;
  const std::size_t c = vocab.size();
  const auto b = static_cast<Eigen::Index>(batch.size());
  if (b == 0) throw Error(ErrorCode::kConfigError, "empty batch");
  if (flags.l_rand && labels.positives.size() != c) {
    throw Error(ErrorCode::kConfigError, "sampled positive labels do not cover every class");
  }
  if (flags.shadow_negatives && labels.shadows.size() != c) {
    throw Error(ErrorCode::kConfigError, "sampled shadow negatives do not cover every class");
  }

  std::vector<std::size_t> targets;
  targets.reserve(batch.size());
  for (const auto& s : batch) {
    if (s.label_index >= c) {
      throw Error(ErrorCode::kConfigError, "clip '" + s.clip_id + "' label " + std::to_string(s.label_index) +
                                               " outside [0, " + std::to_string(c) + ")");
    }
    targets.push_back(s.label_index);
  }

  const auto d = encoders.video->dim();
  Eigen::MatrixXd video(b, d);
  for (Eigen::Index n = 0; n < b; ++n) video.row(n) = encoders.video->encode(batch[static_cast<std::size_t>(n)]).vector.transpose();

  TextTable table;
  auto make_block = [&](auto&& label_of, ColumnSource source) {
    ColumnBlock block;
    for (std::size_t i = 0; i < c; ++i) {
      block.members.push_back(table.add(resolve_column(label_of(i), vocab, i, flags.leaf_augment, source)));
    }
    return block;
  };
  std::optional<ColumnBlock> fixed, rand, shadow;
  if (flags.l_fixed) fixed = make_block([&](std::size_t i) { return vocab.action(i); }, ColumnSource::kRoot);
  if (flags.l_rand) rand = make_block([&](std::size_t i) { return labels.positives[i]; }, ColumnSource::kSampledSynonym);
  if (flags.shadow_negatives) {
    shadow = make_block([&](std::size_t i) { return labels.shadows[i]; }, ColumnSource::kShadowNegative);
  }

  const auto& texts = table.texts();
  Eigen::MatrixXd text_emb(static_cast<Eigen::Index>(texts.size()), d);
  for (std::size_t t = 0; t < texts.size(); ++t) {
    text_emb.row(static_cast<Eigen::Index>(t)) = encoders.text->encode(texts[t]).vector.transpose();
  }
  for (auto* block : {&fixed, &rand, &shadow}) {
    if (!*block) continue;
    auto& blk = **block;
    blk.means = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(c), d);
    for (std::size_t k = 0; k < c; ++k) {
      for (auto t : blk.members[k]) blk.means.row(static_cast<Eigen::Index>(k)) += text_emb.row(static_cast<Eigen::Index>(t));
      blk.means.row(static_cast<Eigen::Index>(k)) /= static_cast<double>(blk.members[k].size());
    }
  }

  const double tau = options.tau;
  Eigen::VectorXd shadow_sims;
  if (shadow) {
    shadow_sims.resize(b);
    for (Eigen::Index n = 0; n < b; ++n) {
      shadow_sims(n) = video.row(n).dot(shadow->means.row(static_cast<Eigen::Index>(targets[static_cast<std::size_t>(n)]))) / tau;
    }
  }
  const Eigen::VectorXd* shadow_ptr = shadow ? &shadow_sims : nullptr;

  LossBreakdown out;
  Eigen::MatrixXd d_video = Eigen::MatrixXd::Zero(b, d);
  Eigen::MatrixXd d_text = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(texts.size()), d);
  Eigen::VectorXd d_shadow_total = Eigen::VectorXd::Zero(b);

  auto run_term = [&](const ColumnBlock& blk, double weight, std::vector<double>& log_probs) {
    const Eigen::MatrixXd sims = video * blk.means.transpose() / tau;
    Eigen::MatrixXd d_sims;
    Eigen::VectorXd d_shadow;
    const double value = classification_loss(sims, targets, shadow_ptr, &log_probs, grads ? &d_sims : nullptr,
                                             grads && shadow ? &d_shadow : nullptr);
    if (grads) {
      d_sims *= weight / tau;
      d_video.noalias() += d_sims * blk.means;
      const Eigen::MatrixXd d_means = d_sims.transpose() * video;  // K x D
      for (std::size_t k = 0; k < c; ++k) {
        const double share = 1.0 / static_cast<double>(blk.members[k].size());
        for (auto t : blk.members[k]) d_text.row(static_cast<Eigen::Index>(t)) += share * d_means.row(static_cast<Eigen::Index>(k));
      }
      if (shadow) d_shadow_total += weight * d_shadow;
    }
    return value;
  };

  if (fixed) out.l_fixed = run_term(*fixed, 1.0, out.fixed_log_probs);
  if (rand) out.l_rand = run_term(*rand, options.rand_weight, out.rand_log_probs);
  out.l_total = out.l_fixed + options.rand_weight * out.l_rand;
  require_finite(out.l_total, "loss");

  if (grads) {
    if (shadow) {
      for (Eigen::Index n = 0; n < b; ++n) {
        const auto y = static_cast<Eigen::Index>(targets[static_cast<std::size_t>(n)]);
        const double g = d_shadow_total(n) / tau;
        d_video.row(n) += g * shadow->means.row(y);
        const auto& members = shadow->members[static_cast<std::size_t>(y)];
        const double share = g / static_cast<double>(members.size());
        for (auto t : members) d_text.row(static_cast<Eigen::Index>(t)) += share * video.row(n);
      }
    }
    for (Eigen::Index n = 0; n < b; ++n) {
      encoders.video->backward(batch[static_cast<std::size_t>(n)], d_video.row(n).transpose(), grads->video);
    }
    for (std::size_t t = 0; t < texts.size(); ++t) {
      encoders.text->backward(texts[t], d_text.row(static_cast<Eigen::Index>(t)).transpose(), grads->text);
    }
  }
  return out;
}

LossBreakdown total_loss(std::span<const VideoSample> batch, const Vocabulary& vocab, const EncoderPair& encoders,
                         Rng& rng, const LossOptions& options, LossGradients* grads) {
  validate(options);
  const auto labels = sample_iteration_labels(vocab, rng, options.flags);
  return compute_loss(batch, vocab, encoders, labels, options, grads);
}

}  // namespace ace
