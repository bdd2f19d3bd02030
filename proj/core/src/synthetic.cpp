#include "ace/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>
#include <unordered_map>

#include "ace/errors.hpp"

namespace ace {

namespace {

// Pronounceable, unique, lowercase pseudo-words whose hash buckets do not
// collide with any previously issued token.
class TokenNamer {
 public:
  explicit TokenNamer(std::size_t buckets) : buckets_(buckets) {}

  std::string fresh() {
    for (;;) {
      std::string name = spell(next_++);
      if (used_.insert(HashedBagTextEncoder::bucket(name, buckets_)).second) return name;
    }
  }

 private:
  static std::string spell(std::size_t i) {
    static constexpr std::string_view kConsonants = "bdfgklmnprstvz";
    static constexpr std::string_view kVowels = "aeiou";
    const std::size_t base = kConsonants.size() * kVowels.size();
    std::size_t x = i + base;  // at least two syllables
    std::string s;
    while (x > 0) {
      const std::size_t syl = x % base;
      s.insert(0, {kConsonants[syl / kVowels.size()], kVowels[syl % kVowels.size()]});
      x /= base;
    }
    return s;
  }

  std::size_t buckets_;
  std::size_t next_ = 0;
  std::set<std::size_t> used_;
};

Eigen::VectorXd gaussian(Rng& rng, std::size_t n, double scale) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = scale * nd(rng);
  return v;
}

Eigen::VectorXd unit(Rng& rng, std::size_t n) {
  Eigen::VectorXd v = gaussian(rng, n, 1.0);
  return v / v.norm();
}

void validate(const SyntheticConfig& c) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kConfigError, msg); };
  if (!(c.noise_sigma >= 0.0)) fail("noise sigma must be >= 0");
  if (c.base_classes < 2 || c.novel_classes < 2) fail("need at least 2 base and 2 novel classes");
  if (c.samples_per_class == 0 || c.test_samples_per_class == 0 || c.frames == 0) fail("sample counts must be positive");
  if (c.verb_dim == 0 || c.object_dim == 0 || c.objects == 0) fail("latent sizes must be positive");
  if (c.novel_objects > c.objects) fail("novel_objects cannot exceed objects");
  if (c.m_per_level.empty()) fail("m_per_level must name at least one level");
  for (int m : c.m_per_level) {
    if (m < 1) fail("every tree level needs at least one child");
  }
  if (c.embedding_dim == 0) fail("embedding_dim must be positive");
  if (c.root_noise < 0 || c.synonym_noise < 0 || c.second_order_noise < 0 || c.text_distortion < 0 ||
      c.lexical_noise < 0 || c.lexical_leak < 0) {
    fail("noise scales must be >= 0");
  }
}

}  // namespace

SyntheticData generate_synthetic_dataset(const SyntheticConfig& config) {
  validate(config);
  Rng rng(config.seed);
  const std::size_t concepts = config.base_classes + config.novel_classes;
  const std::size_t feat = config.verb_dim + config.object_dim;
  const double vscale = 1.0 / std::sqrt(static_cast<double>(config.verb_dim));
  const std::size_t lex = config.lexical_dim;
  const std::size_t width = config.verb_dim + lex + config.object_dim;  // token row
  TokenNamer namer(config.hash_buckets);

  std::vector<Eigen::VectorXd> object_latent;
  std::vector<std::string> object_name;
  for (std::size_t j = 0; j < config.objects; ++j) {
    object_latent.push_back(unit(rng, config.object_dim));
    object_name.push_back(namer.fresh());
  }

  std::unordered_map<std::string, Eigen::VectorXd> verb_latent;
  std::unordered_map<std::string, Eigen::VectorXd> lexical;
  std::vector<std::string> verb_order;  // creation order, for a seed-stable table fill
  auto add_verb = [&](const std::string& name, Eigen::VectorXd latent) {
    verb_latent[name] = std::move(latent);
    lexical[name] = gaussian(rng, lex, config.lexical_noise / std::sqrt(static_cast<double>(std::max<std::size_t>(lex, 1))));
    verb_order.push_back(name);
  };
  std::vector<Eigen::VectorXd> concept_latent;
  std::vector<ActionLabel> actions;
  Vocabulary::TreeMap trees;
  std::vector<std::size_t> object_of;
  const int depth = static_cast<int>(config.m_per_level.size());

  for (std::size_t k = 0; k < concepts; ++k) {
    concept_latent.push_back(unit(rng, config.verb_dim));
    const std::string root = namer.fresh();
    add_verb(root, concept_latent[k] + gaussian(rng, config.verb_dim, config.root_noise * vscale));

    std::vector<SynonymTree::Entry> entries;
    std::vector<std::string> level{root};
    std::set<std::string> has_entry;
    for (int l = 0; l < depth; ++l) {
      std::vector<std::string> next;
      for (const auto& node : level) {
        if (!has_entry.insert(node).second) continue;
        std::vector<std::string> kids;
        for (int s = 0; s + 1 < config.m_per_level[static_cast<std::size_t>(l)]; ++s) {
          const std::string syn = namer.fresh();
          const Eigen::VectorXd& anchor = l == 0 ? concept_latent[k] : verb_latent.at(node);
          const double spread = l == 0 ? config.synonym_noise : config.second_order_noise;
          add_verb(syn, anchor + gaussian(rng, config.verb_dim, spread * vscale));
          kids.push_back(syn);
          next.push_back(syn);
        }
        kids.push_back(node);
        entries.emplace_back(node, std::move(kids));
      }
      level = std::move(next);
    }
    trees.try_emplace(root, SynonymTree(root, std::move(entries), depth));
    const bool novel = k >= config.base_classes && config.novel_objects > 0;
    object_of.push_back(novel ? (k - config.base_classes) % config.novel_objects : k % config.objects);
    actions.emplace_back(root, object_name[object_of.back()]);
  }

  // Pretrained toy encoders.
  // Orthonormal columns when D >= F, orthonormal rows otherwise (the shared
  // space is then too narrow to keep every feature).
  const std::size_t tall = std::max(config.embedding_dim, feat);
  const std::size_t narrow = std::min(config.embedding_dim, feat);
  Eigen::MatrixXd gauss(static_cast<Eigen::Index>(tall), static_cast<Eigen::Index>(narrow));
  for (Eigen::Index c = 0; c < gauss.cols(); ++c) gauss.col(c) = gaussian(rng, tall, 1.0);
  Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(gauss).householderQ() *
                      Eigen::MatrixXd::Identity(gauss.rows(), gauss.cols());
  if (config.embedding_dim < feat) q.transposeInPlace();
  Eigen::MatrixXd distortion(static_cast<Eigen::Index>(feat), static_cast<Eigen::Index>(feat));
  for (Eigen::Index c = 0; c < distortion.cols(); ++c) {
    distortion.col(c) = gaussian(rng, feat, config.text_distortion / std::sqrt(static_cast<double>(feat)));
  }
  const Eigen::MatrixXd aligned = q * (Eigen::MatrixXd::Identity(distortion.rows(), distortion.cols()) + distortion);
  const auto vd = static_cast<Eigen::Index>(config.verb_dim);
  const auto od = static_cast<Eigen::Index>(config.object_dim);
  const auto ld = static_cast<Eigen::Index>(lex);
  Eigen::MatrixXd text_proj(static_cast<Eigen::Index>(config.embedding_dim), static_cast<Eigen::Index>(width));
  text_proj.leftCols(vd) = aligned.leftCols(vd);
  text_proj.rightCols(od) = aligned.rightCols(od);
  for (Eigen::Index c = 0; c < ld; ++c) {
    text_proj.col(vd + c) = gaussian(rng, config.embedding_dim,
                                     config.lexical_leak / std::sqrt(static_cast<double>(config.embedding_dim)));
  }

  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(config.hash_buckets), static_cast<Eigen::Index>(width));
  for (const auto& token : verb_order) {
    auto row = table.row(static_cast<Eigen::Index>(HashedBagTextEncoder::bucket(token, config.hash_buckets)));
    row.head(vd) = verb_latent.at(token).transpose();
    if (ld > 0) row.segment(vd, ld) = lexical.at(token).transpose();
  }
  for (std::size_t j = 0; j < config.objects; ++j) {
    table.row(static_cast<Eigen::Index>(HashedBagTextEncoder::bucket(object_name[j], config.hash_buckets)))
        .tail(od) = object_latent[j].transpose();
  }

  std::vector<Parameter> pretrained{
      {kVideoProjection, q, true},
      {kTextTokenTable, std::move(table), false},
      {kTextProjection, text_proj, true},
  };

  // Clips.
  FeatureTensor features;
  features.frames = config.frames;
  features.dim = feat;
  std::vector<std::pair<std::size_t, Split>> clips;  // (class, split)
  for (std::size_t k = 0; k < config.base_classes; ++k) {
    for (std::size_t n = 0; n < config.samples_per_class; ++n) clips.emplace_back(k, Split::kTrain);
  }
  for (std::size_t k = 0; k < concepts; ++k) {
    for (std::size_t n = 0; n < config.test_samples_per_class; ++n) clips.emplace_back(k, Split::kTest);
  }
  features.rows = clips.size();
  features.data.reserve(features.rows * features.frames * features.dim);

  std::normal_distribution<double> noise(0.0, 1.0);
  Vocabulary vocab(std::move(actions), std::move(trees));
  SplitManifest manifest;
  manifest.dataset_id = "synthetic-" + std::to_string(config.seed);
  for (std::size_t k = 0; k < config.base_classes; ++k) manifest.base_classes.push_back(k);
  for (std::size_t k = config.base_classes; k < concepts; ++k) manifest.novel_classes.push_back(k);

  std::vector<ClipRecord> records;
  for (std::size_t row = 0; row < clips.size(); ++row) {
    const auto [k, split] = clips[row];
    Eigen::VectorXd proto(static_cast<Eigen::Index>(feat));
    proto << concept_latent[k], object_latent[object_of[k]];
    for (std::size_t f = 0; f < config.frames; ++f) {
      for (Eigen::Index d = 0; d < proto.size(); ++d) {
        features.data.push_back(static_cast<float>(proto(d) + config.noise_sigma * noise(rng)));
      }
    }
    char id[32];
    std::snprintf(id, sizeof(id), "clip-%05zu", row);
    const auto& action = vocab.action(k);
    records.push_back({id, row, k, action.verb(), action.object(), split, manifest.dataset_id});
    (split == Split::kTrain ? manifest.train_clips : manifest.test_clips).push_back(id);
  }
  manifest.verb_frequencies = compute_verb_frequencies(records);

  return {Dataset{std::move(vocab), std::move(records), std::move(features), std::move(manifest)}, std::move(pretrained)};
}

}  // namespace ace
