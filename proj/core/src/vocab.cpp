#include "ace/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "ace/errors.hpp"

namespace ace {

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) tokens.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return tokens;
}

std::string canonical_phrase(std::string_view s) {
  std::string out;
  for (const auto& tok : tokenize(to_lower(s))) {
    if (!out.empty()) out.push_back(' ');
    out += tok;
  }
  return out;
}

ActionLabel::ActionLabel(std::string_view verb, std::string_view object)
    : verb_(canonical_phrase(verb)), object_(canonical_phrase(object)) {
  if (verb_.empty()) throw Error(ErrorCode::kMalformedLabel, "empty verb");
  if (object_.empty()) throw Error(ErrorCode::kMalformedLabel, "empty object for verb '" + verb_ + "'");
}

ActionLabel decompose(const LabelRecord& record, const PhrasalLexicon& lexicon) {
  if (!record.verb.empty() || !record.object.empty()) return ActionLabel(record.verb, record.object);

  const auto tokens = tokenize(to_lower(record.raw));
  if (tokens.empty()) throw Error(ErrorCode::kMalformedLabel, "empty label string");

  std::size_t verb_len = 1;
  for (const auto& phrase : lexicon) {
    const auto ptoks = tokenize(to_lower(phrase));
    if (ptoks.size() <= verb_len || ptoks.size() > tokens.size()) continue;
    if (std::equal(ptoks.begin(), ptoks.end(), tokens.begin())) verb_len = ptoks.size();
  }
  if (verb_len >= tokens.size()) {
    throw Error(ErrorCode::kMalformedLabel, "no object after verb in '" + record.raw + "'");
  }
  std::string verb, object;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto& dst = i < verb_len ? verb : object;
    if (!dst.empty()) dst.push_back(' ');
    dst += tokens[i];
  }
  return ActionLabel(verb, object);
}

ActionLabel decompose_with_object(std::string_view text, std::string_view object,
                                  const PhrasalLexicon& lexicon) {
  const std::string t = canonical_phrase(text);
  const std::string o = canonical_phrase(object);
  if (!o.empty() && t.size() > o.size() + 1 && t.ends_with(" " + o)) {
    return ActionLabel(t.substr(0, t.size() - o.size() - 1), o);
  }
  return decompose(LabelRecord{.raw = t}, lexicon);
}

// --- SynonymTree ---------------------------------------------------------

namespace {

const std::vector<std::string>* lookup(const std::vector<SynonymTree::Entry>& entries,
                                       std::string_view node) noexcept {
  for (const auto& [name, kids] : entries) {
    if (name == node) return &kids;
  }
  return nullptr;
}

struct Layout {
  std::vector<std::string> violations;
  std::vector<int> m_per_level;
};

Layout analyse(std::string_view root, const std::vector<SynonymTree::Entry>& entries, int depth) {
  Layout out;
  auto fail = [&](std::string msg) { out.violations.push_back(std::move(msg)); };
  const std::string tree_name = "tree '" + std::string(root) + "'";

  if (depth < 1) fail(tree_name + ": depth must be >= 1");
  if (root.empty()) fail("tree with empty root verb");
  if (canonical_phrase(root) != root) fail(tree_name + ": root verb is not lowercase/canonical");

  std::set<std::string, std::less<>> keys;
  for (const auto& [node, kids] : entries) {
    const std::string where = tree_name + ", node '" + node + "'";
    if (!keys.insert(node).second) fail(where + ": duplicate node entry");
    if (kids.empty()) fail(where + ": no children");
    std::set<std::string, std::less<>> seen;
    for (const auto& k : kids) {
      if (k.empty() || canonical_phrase(k) != k) fail(where + ": child '" + k + "' is not a lowercase verb token");
      if (!seen.insert(k).second) fail(where + ": duplicate child '" + k + "'");
    }
    if (!seen.contains(node)) fail(where + ": parent is not replicated among its children");
  }

  std::set<std::string, std::less<>> visited{std::string(root)};
  std::vector<std::string> level{std::string(root)};
  for (int l = 0; l < depth && !level.empty(); ++l) {
    std::vector<std::string> next;
    int count = -1;
    for (const auto& node : level) {
      const auto* kids = lookup(entries, node);
      if (kids == nullptr) {
        fail(tree_name + ": node '" + node + "' at level " + std::to_string(l) + " has no children entry");
        continue;
      }
      const int n = static_cast<int>(kids->size());
      if (count < 0) {
        count = n;
      } else if (n != count) {
        fail(tree_name + ": node '" + node + "' has " + std::to_string(n) + " children but level " +
             std::to_string(l + 1) + " uses " + std::to_string(count));
      }
      for (const auto& k : *kids) {
        if (visited.insert(k).second) next.push_back(k);
      }
    }
    if (count < 0 && !out.m_per_level.empty()) count = out.m_per_level.back();
    if (count >= 0) out.m_per_level.push_back(count);
    level = std::move(next);
  }
  // The replicated root shares the root's entry, so with a single first-order
  // child the second level repeats the first level's count.
  while (static_cast<int>(out.m_per_level.size()) < depth && !out.m_per_level.empty()) {
    out.m_per_level.push_back(out.m_per_level.back());
  }

  for (const auto& [node, kids] : entries) {
    (void)kids;
    if (!visited.contains(node)) fail(tree_name + ": entry '" + node + "' is not reachable from the root");
  }
  return out;
}

}  // namespace

std::vector<std::string> SynonymTree::check(std::string_view root, const std::vector<Entry>& entries, int depth) {
  return analyse(root, entries, depth).violations;
}

SynonymTree::SynonymTree(std::string root, std::vector<Entry> entries, int depth)
    : root_(std::move(root)), entries_(std::move(entries)), depth_(depth) {
  auto layout = analyse(root_, entries_, depth_);
  if (!layout.violations.empty()) {
    std::string msg = layout.violations.front();
    if (layout.violations.size() > 1) msg += " (+" + std::to_string(layout.violations.size() - 1) + " more)";
    throw Error(ErrorCode::kSchemaError, msg);
  }
  m_per_level_ = std::move(layout.m_per_level);
}

const std::vector<std::string>* SynonymTree::find_children(std::string_view node) const noexcept {
  return lookup(entries_, node);
}

const std::vector<std::string>& SynonymTree::children_of(std::string_view node) const {
  if (const auto* kids = find_children(node)) return *kids;
  throw Error(ErrorCode::kNodeNotFound, "'" + std::string(node) + "' in tree '" + root_ + "'");
}

std::vector<std::string> SynonymTree::nodes() const {
  std::vector<std::string> out{root_};
  std::set<std::string, std::less<>> seen{root_};
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (const auto* kids = find_children(out[i])) {
      for (const auto& k : *kids) {
        if (seen.insert(k).second) out.push_back(k);
      }
    }
  }
  return out;
}

const std::vector<std::string>& children_of(const SynonymTree& tree, std::string_view node) {
  return tree.children_of(node);
}

// --- Vocabulary ----------------------------------------------------------

namespace {

std::vector<std::string> compute_pool(const std::vector<ActionLabel>& actions, const Vocabulary::TreeMap& trees,
                                      std::size_t i) {
  const auto& own = trees.find(actions[i].verb())->second.first_order();
  std::set<std::string> pool;
  for (const auto& a : actions) {
    for (const auto& child : trees.find(a.verb())->second.first_order()) {
      if (std::find(own.begin(), own.end(), child) == own.end()) pool.insert(child);
    }
  }
  return {pool.begin(), pool.end()};
}

}  // namespace

Vocabulary::Vocabulary(std::vector<ActionLabel> actions, TreeMap trees)
    : actions_(std::move(actions)), trees_(std::move(trees)) {
  if (actions_.empty()) throw Error(ErrorCode::kSchemaError, "vocabulary has no actions");
  for (const auto& [verb, tree] : trees_) {
    if (verb != tree.root()) {
      throw Error(ErrorCode::kSchemaError, "tree keyed '" + verb + "' has root '" + tree.root() + "'");
    }
  }
  for (std::size_t i = 0; i < actions_.size(); ++i) {
    const auto& verb = actions_[i].verb();
    if (!trees_.contains(verb)) {
      throw Error(ErrorCode::kSchemaError, "action '" + actions_[i].text() + "' has no synonym tree");
    }
    auto [it, inserted] = verb_index_.try_emplace(verb);
    if (inserted) root_verbs_.push_back(verb);
    it->second.push_back(i);
  }
  if (trees_.size() != root_verbs_.size()) {
    for (const auto& [verb, tree] : trees_) {
      if (!verb_index_.contains(verb)) {
        throw Error(ErrorCode::kSchemaError, "tree '" + verb + "' does not belong to any action");
      }
    }
  }
  negative_pools_.reserve(actions_.size());
  for (std::size_t i = 0; i < actions_.size(); ++i) negative_pools_.push_back(compute_pool(actions_, trees_, i));
}

const SynonymTree& Vocabulary::tree(std::string_view verb) const {
  auto it = trees_.find(verb);
  if (it == trees_.end()) throw Error(ErrorCode::kNodeNotFound, "no tree rooted at '" + std::string(verb) + "'");
  return it->second;
}

const std::vector<std::size_t>& Vocabulary::actions_with_verb(std::string_view verb) const {
  auto it = verb_index_.find(verb);
  if (it == verb_index_.end()) throw Error(ErrorCode::kNodeNotFound, "no action with verb '" + std::string(verb) + "'");
  return it->second;
}

const std::vector<std::string>* Vocabulary::find_node_children(std::string_view node) const noexcept {
  for (const auto& verb : root_verbs_) {
    if (const auto* kids = trees_.find(verb)->second.find_children(node)) return kids;
  }
  return nullptr;
}

const std::vector<std::string>& Vocabulary::negative_pool(std::size_t action_index) const {
  const auto& pool = negative_pools_.at(action_index);
  if (pool.empty()) {
    throw Error(ErrorCode::kEmptyNegativePool,
                "no negative verbs for action '" + actions_[action_index].text() + "'");
  }
  return pool;
}

Vocabulary Vocabulary::subset(const std::vector<std::size_t>& indices) const {
  std::vector<ActionLabel> actions;
  TreeMap trees;
  for (auto i : indices) {
    actions.push_back(actions_.at(i));
    const auto& t = tree_for(i);
    trees.try_emplace(t.root(), t);
  }
  return Vocabulary(std::move(actions), std::move(trees));
}

void validate_for_training(const Vocabulary& vocab) {
  if (vocab.size() < 2) {
    throw Error(ErrorCode::kConfigError, "training vocabulary needs at least 2 actions, got " +
                                             std::to_string(vocab.size()));
  }
  for (std::size_t i = 0; i < vocab.size(); ++i) (void)vocab.negative_pool(i);
}

std::vector<std::string> negative_pool(const Vocabulary& vocab, std::size_t action_index) {
  if (action_index >= vocab.size()) {
    throw Error(ErrorCode::kConfigError, "action index " + std::to_string(action_index) + " out of range");
  }
  return vocab.negative_pool(action_index);
}

// --- sampling ------------------------------------------------------------

std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

std::vector<ActionLabel> sample_positive_labels(const Vocabulary& vocab, Rng& rng) {
  std::vector<ActionLabel> out = vocab.actions();
  for (const auto& verb : vocab.root_verbs()) {
    const auto& kids = vocab.tree(verb).first_order();
    const auto& drawn = kids[uniform_index(rng, kids.size())];
    for (auto i : vocab.actions_with_verb(verb)) out[i] = out[i].with_verb(drawn);
  }
  return out;
}

std::vector<ActionLabel> sample_positive_labels_independent(const Vocabulary& vocab, Rng& rng) {
  std::vector<ActionLabel> out;
  out.reserve(vocab.size());
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    const auto& kids = vocab.tree_for(i).first_order();
    out.push_back(vocab.action(i).with_verb(kids[uniform_index(rng, kids.size())]));
  }
  return out;
}

std::vector<ActionLabel> sample_shadow_negatives(const Vocabulary& vocab, Rng& rng) {
  std::vector<ActionLabel> out;
  out.reserve(vocab.size());
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    const auto& pool = vocab.negative_pool(i);
    out.push_back(vocab.action(i).with_verb(pool[uniform_index(rng, pool.size())]));
  }
  return out;
}

std::string ValidationReport::format() const {
  std::ostringstream os;
  for (const auto& v : violations) {
    os << file << ':';
    if (v.line > 0) os << v.line << ':';
    os << ' ' << v.message << '\n';
  }
  return os.str();
}

}  // namespace ace
