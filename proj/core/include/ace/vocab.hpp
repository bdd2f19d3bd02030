#pragma once

// Action labels, verb-synonym trees and the stochastic label sampling used
// by training (shared-root-verb positives, shadow negatives) and by the
// synonym robustness test (independent per-action positives).

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ace {

using Rng = std::mt19937_64;

inline constexpr int kDefaultTreeDepth = 2;

std::string to_lower(std::string_view s);
std::vector<std::string> tokenize(std::string_view s);
// Lowercases, trims and collapses internal whitespace to single spaces.
std::string canonical_phrase(std::string_view s);

/// A procedural action decomposed into verb and object, rendered as
/// "verb object". Both parts are canonical phrases (lowercase, single-spaced)
/// and non-empty; the verb may be phrasal ("lay down").
class ActionLabel {
 public:
  ActionLabel(std::string_view verb, std::string_view object);

  const std::string& verb() const noexcept { return verb_; }
  const std::string& object() const noexcept { return object_; }
  std::string text() const { return verb_ + " " + object_; }

  ActionLabel with_verb(std::string_view verb) const { return ActionLabel(verb, object_); }

  friend bool operator==(const ActionLabel&, const ActionLabel&) = default;
  friend auto operator<=>(const ActionLabel&, const ActionLabel&) = default;

 private:
  std::string verb_;
  std::string object_;
};

/// Either explicit verb/object fields, or a raw label string.
struct LabelRecord {
  std::string verb;
  std::string object;
  std::string raw;
};

using PhrasalLexicon = std::vector<std::string>;

/// Explicit fields win. A raw string is split after the longest phrasal verb
/// from `lexicon` that prefixes it, else after its first token.
ActionLabel decompose(const LabelRecord& record, const PhrasalLexicon& lexicon = {});

/// Splits `text` into a label whose object is `object` when the text ends
/// with it; otherwise falls back to decompose() on the raw text.
ActionLabel decompose_with_object(std::string_view text, std::string_view object,
                                  const PhrasalLexicon& lexicon = {});

/// Per-root-verb synonym tree. Each entry maps a node to its ordered
/// children, and every node's children include the node itself. The
/// replicated root at the first level shares the root's entry.
class SynonymTree {
 public:
  using Entry = std::pair<std::string, std::vector<std::string>>;

  SynonymTree(std::string root, std::vector<Entry> entries, int depth = kDefaultTreeDepth);

  /// Invariant violations for the given layout; empty when valid.
  static std::vector<std::string> check(std::string_view root, const std::vector<Entry>& entries,
                                        int depth = kDefaultTreeDepth);

  const std::string& root() const noexcept { return root_; }
  int depth() const noexcept { return depth_; }
  const std::vector<int>& m_per_level() const noexcept { return m_per_level_; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }

  /// Children of a node with an entry; throws NodeNotFound otherwise.
  const std::vector<std::string>& children_of(std::string_view node) const;
  const std::vector<std::string>* find_children(std::string_view node) const noexcept;
  const std::vector<std::string>& first_order() const { return children_of(root_); }

  /// Every distinct node name in the tree, breadth-first.
  std::vector<std::string> nodes() const;

  friend bool operator==(const SynonymTree&, const SynonymTree&) = default;

 private:
  std::string root_;
  std::vector<Entry> entries_;
  int depth_;
  std::vector<int> m_per_level_;
};

const std::vector<std::string>& children_of(const SynonymTree& tree, std::string_view node);

/// The C root actions of one label universe plus one tree per distinct verb.
class Vocabulary {
 public:
  using TreeMap = std::map<std::string, SynonymTree, std::less<>>;

  Vocabulary(std::vector<ActionLabel> actions, TreeMap trees);

  std::size_t size() const noexcept { return actions_.size(); }
  const std::vector<ActionLabel>& actions() const noexcept { return actions_; }
  const ActionLabel& action(std::size_t i) const { return actions_.at(i); }
  const TreeMap& trees() const noexcept { return trees_; }

  const SynonymTree& tree(std::string_view verb) const;
  const SynonymTree& tree_for(std::size_t action_index) const { return tree(actions_.at(action_index).verb()); }

  /// Distinct root verbs in order of first appearance.
  const std::vector<std::string>& root_verbs() const noexcept { return root_verbs_; }
  const std::vector<std::size_t>& actions_with_verb(std::string_view verb) const;

  /// Children of `node` in the first tree (in action order) that has an
  /// entry for it, or nullptr.
  const std::vector<std::string>* find_node_children(std::string_view node) const noexcept;

  const std::vector<std::string>& negative_pool(std::size_t action_index) const;

  Vocabulary subset(const std::vector<std::size_t>& indices) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.actions_ == b.actions_ && a.trees_ == b.trees_;
  }

 private:
  std::vector<ActionLabel> actions_;
  TreeMap trees_;
  std::vector<std::string> root_verbs_;
  std::map<std::string, std::vector<std::size_t>, std::less<>> verb_index_;
  std::vector<std::vector<std::string>> negative_pools_;
};

/// Training-time checks: C >= 2 and a non-empty negative pool for every action.
void validate_for_training(const Vocabulary& vocab);

/// Sorted union over all trees' first-order children minus the first-order
/// children of action i's own tree. Throws EmptyNegativePool when empty.
std::vector<std::string> negative_pool(const Vocabulary& vocab, std::size_t action_index);

std::size_t uniform_index(Rng& rng, std::size_t n);

/// One verb per distinct root verb, drawn uniformly from its first-order
/// children and shared by every action with that root verb.
std::vector<ActionLabel> sample_positive_labels(const Vocabulary& vocab, Rng& rng);

/// Test-time variant: each action draws its own verb.
std::vector<ActionLabel> sample_positive_labels_independent(const Vocabulary& vocab, Rng& rng);

/// For every action, a uniformly drawn verb from its negative pool paired
/// with the action's own object.
std::vector<ActionLabel> sample_shadow_negatives(const Vocabulary& vocab, Rng& rng);

// --- file formats --------------------------------------------------------

Vocabulary vocabulary_from_json(std::string_view text);
std::string vocabulary_to_json(const Vocabulary& vocab);
Vocabulary load_vocabulary(const std::filesystem::path& path);
void save_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path);
std::string vocabulary_hash(const Vocabulary& vocab);

/// Reads only the "actions" array of a vocabulary file; trees may be absent.
std::vector<ActionLabel> load_actions(const std::filesystem::path& path);

struct Violation {
  std::size_t line = 0;  // 1-based; 0 when unknown
  std::string message;
};

struct ValidationReport {
  std::string file;
  std::vector<Violation> violations;
  bool ok() const noexcept { return violations.empty(); }
  std::string format() const;
};

ValidationReport validate_vocabulary_text(std::string_view text, std::string file = "<memory>");
ValidationReport validate_vocabulary_file(const std::filesystem::path& path);

}  // namespace ace
