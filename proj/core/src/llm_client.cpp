#include "ace/llm_client.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include "ace/errors.hpp"
#include "ace/hash.hpp"
#include "httplib.h"
#include "json.hpp"

namespace ace {

using json = nlohmann::ordered_json;

namespace {

// Placeholders: {m}, {noun} (synonym/synonyms), {action}, {hint}, {context}.
constexpr std::string_view kProceduralTemplate =
    "what are {m} {noun} of the action ({action}) during {hint}? please follow the constraints below:\n"
    "1- list each synonym in a new line without any numbering and period or commas.\n"
    "2- make sure the resulting sentences semantically and contextually make sense given the {context} context.\n"
    "3- start each line with a verb and all in small letters.\n"
    "4- use the same object and sentence structure as the query.\n"
    "5- if the verb is a phrasal verb like 'put down', then place the whole phrasal verb in the beginning of the "
    "sentence.\n"
    "6- if the query is a phrasal verb, then I encourage you to output phrasal verbs too, specially if the phrasal "
    "verb indicates some spatial information about the scene.\n";

const std::map<std::string, std::string_view, std::less<>>& templates() {
  static const std::map<std::string, std::string_view, std::less<>> t{
      {std::string(kDefaultTemplateId), kProceduralTemplate},
  };
  return t;
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size()) {
    s.replace(pos, from.size(), to);
  }
}

bool ends_with_phrase(const std::string& text, const std::string& tail) {
  return text.size() > tail.size() && text.ends_with(tail) && text[text.size() - tail.size() - 1] == ' ';
}

std::string strip_object(const std::string& label, const std::string& object) {
  if (!ends_with_phrase(label, object)) return {};
  return canonical_phrase(std::string_view(label).substr(0, label.size() - object.size()));
}

}  // namespace

std::vector<std::string> template_ids() {
  std::vector<std::string> ids;
  for (const auto& [id, _] : templates()) ids.push_back(id);
  return ids;
}

std::string render_prompt(const SynonymRequest& req) {
  const auto it = templates().find(req.template_id);
  if (it == templates().end()) throw Error(ErrorCode::kTemplateNotFound, "no prompt template '" + req.template_id + "'");
  if (req.m < 1) throw Error(ErrorCode::kConfigError, "synonym count must be >= 1");
  const std::string hint = canonical_phrase(req.domain_hint);
  const auto words = tokenize(hint);
  std::string out(it->second);
  replace_all(out, "{m}", std::to_string(req.m));
  replace_all(out, "{noun}", req.m == 1 ? "synonym" : "synonyms");
  replace_all(out, "{action}", req.action.text());
  replace_all(out, "{hint}", hint);
  replace_all(out, "{context}", words.empty() ? std::string("task") : words.back());
  if (!req.exclude.empty()) {
    out += "avoid these verbs:";
    for (std::size_t i = 0; i < req.exclude.size(); ++i) out += (i ? ", " : " ") + req.exclude[i];
    out += "\n";
  }
  return out;
}

std::string cache_key(const SynonymRequest& req) { return sha256_hex(render_prompt(req)); }

ParsedLines parse_synonym_lines(std::string_view content, const ActionLabel& action) {
  static const std::regex numbering(R"(^\s*(\d+\s*[.):-]|[-*•])\s*)");
  ParsedLines out;
  std::istringstream in{std::string(content)};
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (canonical_phrase(line).empty()) continue;
    std::string s = std::regex_replace(line, numbering, "", std::regex_constants::format_first_only);
    std::string cleaned;
    for (unsigned char c : s) {
      if (std::isalnum(c) || std::isspace(c) || c == '-' || c == '\'') cleaned += static_cast<char>(std::tolower(c));
    }
    // quotes around the whole line
    std::string t = canonical_phrase(cleaned);
    while (!t.empty() && (t.front() == '\'' || t.front() == '-')) t.erase(0, 1);
    while (!t.empty() && (t.back() == '\'' || t.back() == '-')) t.pop_back();
    t = canonical_phrase(t);
    if (t != canonical_phrase(line)) out.warnings.push_back("line " + std::to_string(n) + ": normalized '" + line + "' to '" + t + "'");
    const std::string verb = strip_object(t, action.object());
    if (verb.empty()) {
      throw Error(ErrorCode::kMalformedResponse,
                  "line " + std::to_string(n) + " '" + line + "' does not end with the object '" + action.object() + "'");
    }
    out.verbs.push_back(verb);
  }
  return out;
}

std::string chat_completion_content(std::string_view payload) {
  try {
    const auto j = json::parse(payload);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedResponse, std::string("not a chat-completions payload: ") + e.what());
  }
}

std::string make_chat_completion(std::string_view content) {
  json j;
  j["choices"] = json::array({json{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}}});
  return j.dump();
}

// --- HTTP ----------------------------------------------------------------

HttpConfig HttpConfig::from_env() {
  HttpConfig c;
  if (const char* v = std::getenv("ACE_LLM_URL")) c.url = v;
  if (const char* v = std::getenv("ACE_LLM_KEY")) c.api_key = v;
  if (const char* v = std::getenv("ACE_LLM_MODEL")) c.model = v;
  if (const char* v = std::getenv("ACE_LLM_TIMEOUT_S")) {
    try {
      c.timeout_s = std::stod(v);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kConfigError, std::string("ACE_LLM_TIMEOUT_S is not a number: ") + v);
    }
  }
  return c;
}

HttpChatTransport::HttpChatTransport(HttpConfig config) : config_(std::move(config)) {
  static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(config_.url, m, url)) {
    throw Error(ErrorCode::kConfigError, "service URL must look like http(s)://host[:port]/path, got '" + config_.url + "'");
  }
  scheme_host_ = m[1];
  path_ = m[2].matched ? std::string(m[2]) : std::string("/v1/chat/completions");
}

std::string HttpChatTransport::send(const std::string& prompt) {
  httplib::Client cli(scheme_host_);
  const auto secs = static_cast<time_t>(config_.timeout_s);
  const auto usecs = static_cast<time_t>((config_.timeout_s - static_cast<double>(secs)) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  if (!config_.api_key.empty()) cli.set_bearer_token_auth(config_.api_key);

  json body;
  body["model"] = config_.model;
  body["messages"] = json::array({json{{"role", "user"}, {"content", prompt}}});
  body["temperature"] = 0;
  auto res = cli.Post(path_, body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::kServiceUnavailable, scheme_host_ + ": " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::kServiceUnavailable, scheme_host_ + path_ + " answered HTTP " + std::to_string(res->status));
  }
  return res->body;
}

// --- cache ---------------------------------------------------------------

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
  std::ifstream in(dir_ / (key + ".txt"), std::ios::binary);
  if (!in) return std::nullopt;
  std::string meta;
  std::getline(in, meta);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ResponseCache::put(const std::string& key, const std::string& metadata_json, const std::string& raw) {
  std::lock_guard lock(mu_);
  const auto final_path = dir_ / (key + ".txt");
  const auto tmp = dir_ / (key + ".txt.tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorCode::kIngestError, "cannot write cache entry " + tmp.string());
    out << metadata_json << '\n' << raw;
  }
  std::filesystem::rename(tmp, final_path);
}

// --- offline -------------------------------------------------------------

void OfflineSynonymSource::add_verbs(std::string_view verb, std::vector<std::string> synonyms) {
  by_verb_.try_emplace(canonical_phrase(verb), std::move(synonyms));
}

void OfflineSynonymSource::add_labels(std::string_view label, std::vector<std::string> labels) {
  auto& dst = by_label_[canonical_phrase(label)];
  for (auto& l : labels) dst.push_back(canonical_phrase(l));
}

OfflineSynonymSource OfflineSynonymSource::from_vocabulary(const Vocabulary& vocab) {
  OfflineSynonymSource src;
  for (const auto& verb : vocab.root_verbs()) {
    for (const auto& [node, children] : vocab.tree(verb).entries()) {
      std::vector<std::string> syn;
      for (const auto& c : children) {
        if (c != node) syn.push_back(c);
      }
      src.add_verbs(node, std::move(syn));
    }
  }
  return src;
}

OfflineSynonymSource OfflineSynonymSource::from_srt_table(const std::filesystem::path& csv) {
  std::ifstream in(csv);
  if (!in) throw Error(ErrorCode::kIngestError, "cannot open " + csv.string());
  std::string line;
  std::getline(in, line);
  if (canonical_phrase(line) != "run,class_index,label") {
    throw Error(ErrorCode::kSchemaError, csv.string() + ": expected header run,class_index,label");
  }
  std::map<std::size_t, std::map<std::size_t, std::string>> by_class;  // class -> run -> label
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (canonical_phrase(line).empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string::npos) throw Error(ErrorCode::kSchemaError, csv.string() + ":" + std::to_string(n) + ": expected 3 fields");
    try {
      by_class[std::stoul(line.substr(c1 + 1, c2 - c1 - 1))][std::stoul(line.substr(0, c1))] = line.substr(c2 + 1);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kSchemaError, csv.string() + ":" + std::to_string(n) + ": bad run or class index");
    }
  }
  OfflineSynonymSource src;
  for (const auto& [cls, runs] : by_class) {
    const auto root = runs.find(1);
    if (root == runs.end()) throw Error(ErrorCode::kSchemaError, csv.string() + ": class " + std::to_string(cls) + " has no run 1");
    std::vector<std::string> labels;
    for (const auto& [run, label] : runs) {
      if (run != 1) labels.push_back(label);
    }
    src.add_labels(root->second, std::move(labels));
  }
  return src;
}

std::optional<std::vector<std::string>> OfflineSynonymSource::lookup(const ActionLabel& action) const {
  std::vector<std::string> verbs;
  if (auto it = by_label_.find(action.text()); it != by_label_.end()) {
    for (const auto& label : it->second) {
      if (auto v = strip_object(label, action.object()); !v.empty()) verbs.push_back(std::move(v));
    }
  } else if (auto jt = by_verb_.find(action.verb()); jt != by_verb_.end()) {
    verbs = jt->second;
  } else {
    return std::nullopt;
  }
  std::vector<std::string> out;
  std::set<std::string> seen{action.verb()};
  for (auto& v : verbs) {
    if (seen.insert(v).second) out.push_back(std::move(v));
  }
  return out;
}

// --- client --------------------------------------------------------------

SynonymClient::SynonymClient(ClientConfig config, ChatTransport* transport, const OfflineSynonymSource* offline)
    : config_(std::move(config)), transport_(transport), offline_(offline) {
  if (config_.max_retries < 0) throw Error(ErrorCode::kConfigError, "max_retries must be >= 0");
  if (config_.max_in_flight < 1) throw Error(ErrorCode::kConfigError, "max_in_flight must be >= 1");
  if (config_.max_requests_per_second < 0) throw Error(ErrorCode::kConfigError, "rate cap must be >= 0");
  if (!config_.cache_dir.empty()) cache_ = std::make_unique<ResponseCache>(config_.cache_dir);
}

void SynonymClient::throttle() {
  if (config_.max_requests_per_second <= 0) return;
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(rate_mu_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_slot_);
    next_slot_ = slot + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(1.0 / config_.max_requests_per_second));
  }
  std::this_thread::sleep_until(slot);
}

SynonymResponse SynonymClient::fetch(const SynonymRequest& req) {
  const std::string key = cache_key(req);
  if (cache_) {
    if (auto raw = cache_->get(key)) {
      try {
        auto parsed = parse_synonym_lines(chat_completion_content(*raw), req.action);
        if (parsed.verbs.size() == static_cast<std::size_t>(req.m)) {
          return {std::move(parsed.verbs), std::move(*raw), key, std::move(parsed.warnings), true};
        }
      } catch (const Error&) {
        // fall through and refresh the entry
      }
    }
  }

  if (config_.offline) {
    const auto found = offline_ ? offline_->lookup(req.action) : std::nullopt;
    if (!found) {
      throw Error(ErrorCode::kServiceUnavailable,
                  "offline mode: no cached response or file entry for '" + req.action.text() + "'");
    }
    SynonymResponse r;
    r.cache_key = key;
    for (const auto& v : *found) {
      if (r.lines.size() == static_cast<std::size_t>(req.m)) break;
      if (std::find(req.exclude.begin(), req.exclude.end(), v) != req.exclude.end()) continue;
      r.lines.push_back(v);
      r.raw += req.action.with_verb(v).text() + "\n";
    }
    if (r.lines.size() < static_cast<std::size_t>(req.m)) {
      r.warnings.push_back("offline entry for '" + req.action.text() + "' has " + std::to_string(r.lines.size()) +
                           " of " + std::to_string(req.m) + " requested synonyms");
    }
    return r;
  }
  return fetch_online(req, key);
}

SynonymResponse SynonymClient::fetch_online(const SynonymRequest& req, const std::string& key) {
  if (!transport_) throw Error(ErrorCode::kServiceUnavailable, "no service configured and no cached response");
  const std::string prompt = render_prompt(req);
  auto delay = config_.backoff;
  std::optional<Error> last;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0 && delay.count() > 0) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
    throttle();
    {
      std::lock_guard lock(count_mu_);
      ++network_calls_;
    }
    try {
      std::string raw = transport_->send(prompt);
      auto parsed = parse_synonym_lines(chat_completion_content(raw), req.action);
      if (parsed.verbs.size() != static_cast<std::size_t>(req.m)) {
        throw Error(ErrorCode::kMalformedResponse, "expected " + std::to_string(req.m) + " synonyms for '" +
                                                       req.action.text() + "', got " + std::to_string(parsed.verbs.size()));
      }
      if (cache_) {
        json meta;
        meta["key"] = key;
        meta["template"] = req.template_id;
        meta["action"] = req.action.text();
        meta["m"] = req.m;
        cache_->put(key, meta.dump(), raw);
      }
      return {std::move(parsed.verbs), std::move(raw), key, std::move(parsed.warnings), false};
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kMalformedResponse && e.code() != ErrorCode::kServiceUnavailable) throw;
      last = e;
    }
  }
  throw Error(last->code(), "giving up after " + std::to_string(config_.max_retries + 1) + " attempts: " + last->what());
}

namespace {

struct NodeJob {
  std::size_t tree = 0;
  std::string node;
  int want = 0;  // synonyms to request, parent excluded
  std::vector<std::string> synonyms;
  std::vector<std::string> warnings;
};

}  // namespace

Vocabulary::TreeMap SynonymClient::build_trees(const std::vector<ActionLabel>& actions, const std::vector<int>& m_per_level,
                                               const std::string& domain_hint, std::vector<std::string>* warnings) {
  if (m_per_level.empty()) throw Error(ErrorCode::kConfigError, "m_per_level must name at least one level");
  for (int m : m_per_level) {
    if (m < 1) throw Error(ErrorCode::kConfigError, "every tree level needs m >= 1");
  }
  std::vector<std::string> roots;
  std::vector<std::string> objects;
  for (const auto& a : actions) {
    if (std::find(roots.begin(), roots.end(), a.verb()) == roots.end()) {
      roots.push_back(a.verb());
      objects.push_back(a.object());
    }
  }

  std::vector<std::vector<SynonymTree::Entry>> entries(roots.size());
  std::vector<std::set<std::string>> has_entry(roots.size());
  std::vector<std::vector<std::string>> frontier(roots.size());
  for (std::size_t r = 0; r < roots.size(); ++r) frontier[r] = {roots[r]};

  auto run_job = [&](NodeJob& job) {
    SynonymRequest req{ActionLabel(job.node, objects[job.tree]), job.want, domain_hint, std::string(kDefaultTemplateId), {}};
    auto accept = [&](const SynonymResponse& resp) {
      for (const auto& w : resp.warnings) job.warnings.push_back(w);
      for (const auto& v : resp.lines) {
        if (static_cast<int>(job.synonyms.size()) == job.want) break;
        if (v == job.node || std::find(job.synonyms.begin(), job.synonyms.end(), v) != job.synonyms.end()) continue;
        job.synonyms.push_back(v);
      }
    };
    accept(fetch(req));
    if (static_cast<int>(job.synonyms.size()) < job.want) {
      req.exclude = job.synonyms;
      req.exclude.push_back(job.node);
      req.m = job.want - static_cast<int>(job.synonyms.size());
      accept(fetch(req));
      if (static_cast<int>(job.synonyms.size()) < job.want) {
        job.warnings.push_back("'" + job.node + "': only " + std::to_string(job.synonyms.size()) + " distinct synonyms of " +
                               std::to_string(job.want) + " after a re-fetch");
      }
    }
  };

  for (std::size_t level = 0; level < m_per_level.size(); ++level) {
    std::vector<NodeJob> jobs;
    for (std::size_t r = 0; r < roots.size(); ++r) {
      for (const auto& node : frontier[r]) {
        if (has_entry[r].insert(node).second) jobs.push_back({r, node, m_per_level[level] - 1, {}, {}});
      }
    }
    // Fixed worker count pulling jobs by index; results land by index so
    // the assembled trees do not depend on scheduling.
    std::vector<std::exception_ptr> errors(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i; (i = next.fetch_add(1)) < jobs.size();) {
        try {
          if (jobs[i].want > 0) run_job(jobs[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    const std::size_t workers = std::min(config_.max_in_flight, jobs.size());
    if (workers <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }

    // A short node shrinks its siblings so every level stays uniform.
    std::vector<std::size_t> keep(roots.size(), static_cast<std::size_t>(m_per_level[level] - 1));
    for (const auto& job : jobs) keep[job.tree] = std::min(keep[job.tree], job.synonyms.size());
    for (auto& f : frontier) f.clear();
    for (auto& job : jobs) {
      if (warnings) {
        for (auto& w : job.warnings) warnings->push_back(std::move(w));
      }
      if (job.synonyms.size() > keep[job.tree]) {
        if (warnings) warnings->push_back("'" + job.node + "': truncated to " + std::to_string(keep[job.tree]) +
                                          " synonyms to keep tree '" + roots[job.tree] + "' uniform");
        job.synonyms.resize(keep[job.tree]);
      }
      std::vector<std::string> children = job.synonyms;
      children.push_back(job.node);
      for (const auto& s : job.synonyms) frontier[job.tree].push_back(s);
      entries[job.tree].emplace_back(job.node, std::move(children));
    }
  }

  Vocabulary::TreeMap trees;
  for (std::size_t r = 0; r < roots.size(); ++r) {
    trees.try_emplace(roots[r], SynonymTree(roots[r], std::move(entries[r]), static_cast<int>(m_per_level.size())));
  }
  return trees;
}

}  // namespace ace
