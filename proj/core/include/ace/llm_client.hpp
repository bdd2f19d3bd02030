#pragma once

// Synonym generation through an OpenAI-style chat-completions endpoint, with
// a content-addressed response cache and an offline file-backed source.

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ace/vocab.hpp"

namespace ace {

inline constexpr std::string_view kDefaultTemplateId = "procedural-v1";

struct SynonymRequest {
  ActionLabel action;
  int m = 1;
  std::string domain_hint = "toy assembly";
  std::string template_id{kDefaultTemplateId};
  std::vector<std::string> exclude;  // verbs to steer away from on a re-fetch
};

struct SynonymResponse {
  std::vector<std::string> lines;  // verb phrases, object stripped
  std::string raw;
  std::string cache_key;
  std::vector<std::string> warnings;
  bool from_cache = false;
};

/// Throws TemplateNotFound for an unknown template id, ConfigError for m < 1.
std::string render_prompt(const SynonymRequest& request);
std::string cache_key(const SynonymRequest& request);
std::vector<std::string> template_ids();

struct ParsedLines {
  std::vector<std::string> verbs;
  std::vector<std::string> warnings;
};

/// One synonym per non-empty line. Lowercases, strips numbering and
/// punctuation (with a warning) and removes the action's object. A line
/// without that object, or with nothing left as a verb, is MalformedResponse.
ParsedLines parse_synonym_lines(std::string_view content, const ActionLabel& action);

/// choices[0].message.content of a chat-completions payload.
std::string chat_completion_content(std::string_view payload);
/// Minimal payload with `content` as the single choice (for doubles and fixtures).
std::string make_chat_completion(std::string_view content);

class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  /// Returns the raw response payload; throws ServiceUnavailable on
  /// network, HTTP or authentication failure.
  virtual std::string send(const std::string& prompt) = 0;
};

struct HttpConfig {
  std::string url;  // e.g. https://host/v1/chat/completions
  std::string api_key;
  std::string model = "gpt-4";
  double timeout_s = 60.0;

  /// ACE_LLM_URL, ACE_LLM_KEY, ACE_LLM_MODEL, ACE_LLM_TIMEOUT_S.
  static HttpConfig from_env();
};

class HttpChatTransport final : public ChatTransport {
 public:
  explicit HttpChatTransport(HttpConfig config);
  std::string send(const std::string& prompt) override;

 private:
  HttpConfig config_;
  std::string scheme_host_;
  std::string path_;
};

/// One file per key: "<key>.txt" holding a JSON metadata line, then the raw
/// payload. Writes go through a temp file and rename, one at a time.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<std::string> get(const std::string& key) const;
  void put(const std::string& key, const std::string& metadata_json, const std::string& raw);
  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  std::filesystem::path dir_;
  mutable std::mutex mu_;
};

/// Synonyms read from files instead of a service.
class OfflineSynonymSource {
 public:
  /// From a vocabulary tree file: a node's children minus the node itself.
  static OfflineSynonymSource from_vocabulary(const Vocabulary& vocab);
  /// From an SRT label table: run 1 holds the root label, later runs its
  /// synonym labels.
  static OfflineSynonymSource from_srt_table(const std::filesystem::path& csv);

  /// Synonym verbs keyed by node verb (any object).
  void add_verbs(std::string_view verb, std::vector<std::string> synonyms);
  /// Full synonym labels keyed by the root label text.
  void add_labels(std::string_view label, std::vector<std::string> labels);

  /// Label entries win over verb entries; labels not ending with the
  /// action's object are skipped. Duplicates and the verb itself are dropped.
  std::optional<std::vector<std::string>> lookup(const ActionLabel& action) const;
  bool empty() const noexcept { return by_verb_.empty() && by_label_.empty(); }

 private:
  std::map<std::string, std::vector<std::string>, std::less<>> by_verb_;
  std::map<std::string, std::vector<std::string>, std::less<>> by_label_;
};

struct ClientConfig {
  int max_retries = 3;
  std::chrono::milliseconds backoff{250};  // doubled after every failed attempt
  std::size_t max_in_flight = 4;
  double max_requests_per_second = 0.0;  // 0 = no cap
  bool offline = false;
  std::filesystem::path cache_dir;  // empty = no cache
};

class SynonymClient {
 public:
  /// `transport` may be null in offline mode; `offline` may be null.
  SynonymClient(ClientConfig config, ChatTransport* transport, const OfflineSynonymSource* offline = nullptr);

  SynonymResponse fetch(const SynonymRequest& request);

  /// First-order synonyms for every root verb, then second-order synonyms
  /// for every first-order node; the parent is appended locally to each
  /// child list. `m_per_level` counts children including the parent.
  Vocabulary::TreeMap build_trees(const std::vector<ActionLabel>& actions, const std::vector<int>& m_per_level,
                                  const std::string& domain_hint, std::vector<std::string>* warnings = nullptr);

  std::size_t network_calls() const noexcept { return network_calls_; }

 private:
  SynonymResponse fetch_online(const SynonymRequest& request, const std::string& key);
  void throttle();

  ClientConfig config_;
  ChatTransport* transport_;
  const OfflineSynonymSource* offline_;
  std::unique_ptr<ResponseCache> cache_;
  std::mutex rate_mu_;
  std::chrono::steady_clock::time_point next_slot_{};
  std::size_t network_calls_ = 0;
  std::mutex count_mu_;
};

}  // namespace ace
