#include <fstream>
#include <set>
#include <sstream>

#include "ace/errors.hpp"
#include "ace/hash.hpp"
#include "ace/vocab.hpp"
#include "json.hpp"

namespace ace {

using json = nlohmann::ordered_json;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIngestError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json(std::string_view text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kSchemaError, what + ": " + e.what());
  }
}

ActionLabel action_from_json(const json& j) {
  if (!j.is_object() || !j.contains("verb") || !j.contains("object") || !j["verb"].is_string() ||
      !j["object"].is_string()) {
    throw Error(ErrorCode::kSchemaError, "action entries need string 'verb' and 'object' fields");
  }
  try {
    return ActionLabel(j["verb"].get<std::string>(), j["object"].get<std::string>());
  } catch (const Error& e) {
    throw Error(ErrorCode::kSchemaError, e.what());
  }
}

std::vector<ActionLabel> actions_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("actions") || !doc["actions"].is_array()) {
    throw Error(ErrorCode::kSchemaError, "vocabulary needs an 'actions' array");
  }
  std::vector<ActionLabel> actions;
  for (const auto& a : doc["actions"]) actions.push_back(action_from_json(a));
  return actions;
}

std::vector<SynonymTree::Entry> entries_from_json(const json& tree, const std::string& root) {
  if (!tree.is_object() || !tree.contains("children") || !tree["children"].is_object()) {
    throw Error(ErrorCode::kSchemaError, "tree '" + root + "' needs a 'children' object");
  }
  std::vector<SynonymTree::Entry> entries;
  for (const auto& [node, kids] : tree["children"].items()) {
    if (!kids.is_array()) throw Error(ErrorCode::kSchemaError, "tree '" + root + "', node '" + node + "': children must be an array");
    std::vector<std::string> list;
    for (const auto& k : kids) {
      if (!k.is_string()) throw Error(ErrorCode::kSchemaError, "tree '" + root + "', node '" + node + "': non-string child");
      list.push_back(k.get<std::string>());
    }
    entries.emplace_back(node, std::move(list));
  }
  return entries;
}

int depth_from_json(const json& tree) {
  if (tree.contains("depth")) {
    if (!tree["depth"].is_number_integer()) throw Error(ErrorCode::kSchemaError, "tree depth must be an integer");
    return tree["depth"].get<int>();
  }
  return kDefaultTreeDepth;
}

// Maps JSON paths back to approximate source lines by scanning for the
// quoted keys in order.
class LineLocator {
 public:
  explicit LineLocator(std::string_view text) : text_(text) {}

  std::size_t line_of(std::size_t pos) const {
    if (pos == std::string_view::npos) return 0;
    std::size_t line = 1;
    for (std::size_t i = 0; i < pos && i < text_.size(); ++i) line += text_[i] == '\n';
    return line;
  }

  std::size_t key_pos(std::initializer_list<std::string_view> keys) const {
    std::size_t pos = 0;
    for (auto k : keys) {
      const std::string quoted = "\"" + std::string(k) + "\"";
      pos = text_.find(quoted, pos);
      if (pos == std::string_view::npos) return pos;
      pos += quoted.size();
    }
    return pos;
  }

  std::size_t key_line(std::initializer_list<std::string_view> keys) const { return line_of(key_pos(keys)); }

  std::size_t array_item_line(std::string_view key, std::size_t index) const {
    std::size_t pos = key_pos({key});
    if (pos == std::string_view::npos) return 0;
    for (std::size_t i = 0; i <= index; ++i) {
      pos = text_.find('{', pos);
      if (pos == std::string_view::npos) return 0;
      if (i < index) pos = text_.find('}', pos);
    }
    return line_of(pos);
  }

 private:
  std::string_view text_;
};

}  // namespace

Vocabulary vocabulary_from_json(std::string_view text) {
  const json doc = parse_json(text, "vocabulary");
  auto actions = actions_from_json(doc);
  Vocabulary::TreeMap trees;
  if (doc.contains("trees")) {
    if (!doc["trees"].is_object()) throw Error(ErrorCode::kSchemaError, "'trees' must be an object");
    for (const auto& [root, tree] : doc["trees"].items()) {
      trees.try_emplace(root, SynonymTree(root, entries_from_json(tree, root), depth_from_json(tree)));
    }
  }
  return Vocabulary(std::move(actions), std::move(trees));
}

std::string vocabulary_to_json(const Vocabulary& vocab) {
  json doc;
  doc["actions"] = json::array();
  for (const auto& a : vocab.actions()) doc["actions"].push_back(json{{"verb", a.verb()}, {"object", a.object()}});
  json trees = json::object();
  for (const auto& verb : vocab.root_verbs()) {
    const auto& tree = vocab.tree(verb);
    json children = json::object();
    for (const auto& [node, kids] : tree.entries()) children[node] = kids;
    json t;
    if (tree.depth() != kDefaultTreeDepth) t["depth"] = tree.depth();
    t["children"] = std::move(children);
    trees[verb] = std::move(t);
  }
  doc["trees"] = std::move(trees);
  return doc.dump(2) + "\n";
}

Vocabulary load_vocabulary(const std::filesystem::path& path) {
  try {
    return vocabulary_from_json(read_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kIngestError) throw;
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void save_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIngestError, "cannot write " + path.string());
  out << vocabulary_to_json(vocab);
}

std::string vocabulary_hash(const Vocabulary& vocab) { return sha256_hex(vocabulary_to_json(vocab)); }

std::vector<ActionLabel> load_actions(const std::filesystem::path& path) {
  return actions_from_json(parse_json(read_file(path), path.string()));
}

ValidationReport validate_vocabulary_text(std::string_view text, std::string file) {
  ValidationReport report{std::move(file), {}};
  LineLocator where(text);
  auto add = [&](std::size_t line, std::string msg) { report.violations.push_back({line, std::move(msg)}); };

  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    add(where.line_of(e.byte > 0 ? e.byte - 1 : 0), std::string("JSON parse error: ") + e.what());
    return report;
  }
  if (!doc.is_object() || !doc.contains("actions") || !doc["actions"].is_array()) {
    add(1, "missing 'actions' array");
    return report;
  }

  std::vector<ActionLabel> actions;
  for (std::size_t i = 0; i < doc["actions"].size(); ++i) {
    try {
      actions.push_back(action_from_json(doc["actions"][i]));
    } catch (const Error& e) {
      add(where.array_item_line("actions", i), "actions[" + std::to_string(i) + "]: " + e.what());
    }
  }
  if (actions.size() < 2) add(where.key_line({"actions"}), "vocabulary needs at least 2 actions");

  Vocabulary::TreeMap trees;
  const bool has_trees = doc.contains("trees") && doc["trees"].is_object();
  if (!has_trees) add(1, "missing 'trees' object");
  if (has_trees) {
    for (const auto& [root, tree] : doc["trees"].items()) {
      const std::size_t tree_line = where.key_line({"trees", root});
      try {
        auto entries = entries_from_json(tree, root);
        const int depth = depth_from_json(tree);
        const auto problems = SynonymTree::check(root, entries, depth);
        for (const auto& p : problems) {
          std::size_t line = tree_line;
          for (const auto& [node, kids] : entries) {
            (void)kids;
            if (p.find("node '" + node + "'") != std::string::npos || p.find("entry '" + node + "'") != std::string::npos) {
              line = where.key_line({"trees", root, "children", node});
              break;
            }
          }
          add(line, p);
        }
        if (problems.empty()) trees.try_emplace(root, SynonymTree(root, std::move(entries), depth));
      } catch (const Error& e) {
        add(tree_line, e.what());
      }
    }
    std::set<std::string> verbs;
    for (std::size_t i = 0; i < actions.size(); ++i) {
      verbs.insert(actions[i].verb());
      if (!doc["trees"].contains(actions[i].verb())) {
        add(where.array_item_line("actions", i), "action '" + actions[i].text() + "' has no synonym tree");
      }
    }
    for (const auto& [root, tree] : doc["trees"].items()) {
      (void)tree;
      if (!verbs.contains(root)) add(where.key_line({"trees", root}), "tree '" + root + "' does not belong to any action");
    }
  }

  if (report.ok()) {
    Vocabulary vocab(std::move(actions), std::move(trees));
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      try {
        (void)vocab.negative_pool(i);
      } catch (const Error& e) {
        add(where.array_item_line("actions", i), e.what());
      }
    }
  }
  return report;
}

ValidationReport validate_vocabulary_file(const std::filesystem::path& path) {
  return validate_vocabulary_text(read_file(path), path.string());
}

}  // namespace ace
