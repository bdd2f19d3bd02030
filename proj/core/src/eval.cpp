#include "ace/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>

#include "ace/errors.hpp"
#include "json.hpp"

namespace ace {

using json = nlohmann::ordered_json;

void EvalConfig::validate() const {
  if (srt_runs < 1) throw Error(ErrorCode::kConfigError, "srt_runs must be >= 1");
  if (source == LabelSource::kFile && label_table.empty()) {
    throw Error(ErrorCode::kConfigError, "file label source needs a label table path");
  }
}

const char* to_string(EvalMode mode) { return mode == EvalMode::kBase ? "base" : "novel"; }
const char* to_string(LabelRepresentation r) { return r == LabelRepresentation::kRoot ? "root" : "synonym-run"; }
const char* to_string(LabelSource s) { return s == LabelSource::kGenerated ? "generated" : "file"; }
const char* to_string(StdKind k) { return k == StdKind::kPopulation ? "population" : "sample"; }

EvalMode parse_eval_mode(std::string_view s) {
  if (s == "base") return EvalMode::kBase;
  if (s == "novel") return EvalMode::kNovel;
  throw Error(ErrorCode::kConfigError, "mode must be base or novel, got '" + std::string(s) + "'");
}

LabelRepresentation parse_representation(std::string_view s) {
  if (s == "root") return LabelRepresentation::kRoot;
  if (s == "synonym-run") return LabelRepresentation::kSynonymRun;
  throw Error(ErrorCode::kConfigError, "labels must be root or synonym-run, got '" + std::string(s) + "'");
}

std::vector<LabelColumn> label_columns(const std::vector<ActionLabel>& labels, const Vocabulary& vocab,
                                       bool leaf_augment) {
  std::vector<LabelColumn> cols;
  cols.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool root = i < vocab.size() && labels[i] == vocab.action(i);
    cols.push_back(resolve_column(labels[i], vocab, std::min(i, vocab.size() - 1), leaf_augment,
                                  root ? ColumnSource::kRoot : ColumnSource::kQuery));
  }
  return cols;
}

Eigen::MatrixXd column_bank(const std::vector<LabelColumn>& columns, const TextEncoder& text) {
  Eigen::MatrixXd bank(text.dim(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) bank.col(static_cast<Eigen::Index>(k)) = column_embedding(columns[k], text);
  return bank;
}

std::size_t argmax_lowest(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::kConfigError, "argmax over an empty label universe");
  std::size_t best = 0;
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (values[k] > values[best]) best = k;
  }
  return best;
}

std::size_t classify(const Embedding& video, const Eigen::MatrixXd& bank) {
  const Eigen::VectorXd s = bank.transpose() * video.vector;
  return argmax_lowest({s.data(), static_cast<std::size_t>(s.size())});
}

std::size_t classify(const VideoSample& video, const std::vector<ActionLabel>& universe, const EncoderPair& encoders,
                     const Vocabulary& vocab, bool leaf_augment) {
  if (universe.empty()) throw Error(ErrorCode::kConfigError, "empty label universe");
  return classify(encoders.video->encode(video), column_bank(label_columns(universe, vocab, leaf_augment), *encoders.text));
}

std::vector<std::size_t> classify_all(std::span<const VideoSample> samples, const Eigen::MatrixXd& bank,
                                      const VideoEncoder& video) {
  if (bank.cols() == 0) throw Error(ErrorCode::kConfigError, "empty label universe");
  std::vector<std::size_t> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(classify(video.encode(s), bank));
  return out;
}

Metrics metrics(std::span<const std::size_t> pred, std::span<const std::size_t> truth, std::size_t class_count) {
  if (truth.empty()) throw Error(ErrorCode::kEmptyEvalSet, "no samples to score");
  if (pred.size() != truth.size()) {
    throw Error(ErrorCode::kSchemaError, std::to_string(pred.size()) + " predictions for " + std::to_string(truth.size()) + " labels");
  }
  std::vector<std::size_t> tp(class_count), predicted(class_count), actual(class_count);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (pred[i] >= class_count || truth[i] >= class_count) throw Error(ErrorCode::kSchemaError, "label outside [0, class_count)");
    ++predicted[pred[i]];
    ++actual[truth[i]];
    if (pred[i] == truth[i]) {
      ++tp[truth[i]];
      ++correct;
    }
  }
  double f1_sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < class_count; ++c) {
    if (actual[c] == 0) continue;
    ++present;
    if (tp[c] == 0) continue;
    const double p = static_cast<double>(tp[c]) / static_cast<double>(predicted[c]);
    const double r = static_cast<double>(tp[c]) / static_cast<double>(actual[c]);
    f1_sum += 2.0 * p * r / (p + r);
  }
  return {100.0 * static_cast<double>(correct) / static_cast<double>(truth.size()),
          100.0 * f1_sum / static_cast<double>(present)};
}

double harmonic_mean(double x, double y) {
  if (x < 0 || y < 0) throw Error(ErrorCode::kConfigError, "harmonic mean of negative values");
  if (x + y == 0.0) return 0.0;
  return 2.0 * x * y / (x + y);
}

std::vector<double> label_distribution(std::span<const std::size_t> truth, std::size_t class_count) {
  if (truth.empty()) throw Error(ErrorCode::kEmptyEvalSet, "no labels");
  std::vector<double> d(class_count, 0.0);
  for (auto t : truth) {
    if (t >= class_count) throw Error(ErrorCode::kSchemaError, "label outside [0, class_count)");
    d[t] += 1.0;
  }
  for (auto& v : d) v /= static_cast<double>(truth.size());
  return d;
}

Metrics random_baseline(std::span<const double> dist) {
  if (dist.empty()) throw Error(ErrorCode::kConfigError, "random baseline over zero classes");
  double total = 0.0;
  for (double p : dist) {
    if (!(p >= 0.0)) throw Error(ErrorCode::kConfigError, "label distribution has a negative entry");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorCode::kConfigError, "label distribution does not sum to 1");
  const double c = static_cast<double>(dist.size());
  const double recall = 1.0 / c;
  double f1 = 0.0;
  for (double p : dist) {
    if (p > 0.0) f1 += 2.0 * p * recall / (p + recall);
  }
  return {100.0 / c, 100.0 * f1 / c};
}

BaseNovelSplit select_base_novel_split(const Vocabulary& vocab, const std::map<std::string, std::size_t>& freq,
                                       SplitRounding rounding) {
  const std::size_t c = vocab.size();
  if (c < 3) throw Error(ErrorCode::kConfigError, "need at least 3 classes to split, got " + std::to_string(c));
  std::vector<std::size_t> order(c);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto count = [&](std::size_t i) {
    const auto it = freq.find(to_lower(vocab.action(i).verb()));
    return it == freq.end() ? std::size_t{0} : it->second;
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto fa = count(a), fb = count(b);
    if (fa != fb) return fa < fb;
    return vocab.action(a).text() < vocab.action(b).text();
  });
  const std::size_t k = rounding == SplitRounding::kFloor ? c / 3 : (c + 2) / 3;
  BaseNovelSplit s;
  s.novel.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  s.base.assign(order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
  std::sort(s.novel.begin(), s.novel.end());
  std::sort(s.base.begin(), s.base.end());
  return s;
}

namespace {

std::vector<std::size_t> truths(std::span<const VideoSample> samples, std::size_t class_count) {
  std::vector<std::size_t> t;
  t.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.label_index >= class_count) {
      throw Error(ErrorCode::kSchemaError, "clip '" + s.clip_id + "' label outside the evaluated classes");
    }
    t.push_back(s.label_index);
  }
  return t;
}

Metrics score(const EncoderPair& encoders, const Vocabulary& vocab, std::span<const VideoSample> samples,
              const LabelSet& labels, bool leaf_augment) {
  const auto truth = truths(samples, labels.size());
  if (truth.empty()) throw Error(ErrorCode::kEmptyEvalSet, "no test clips");
  const auto bank = column_bank(label_columns(labels, vocab, leaf_augment), *encoders.text);
  const auto pred = classify_all(samples, bank, *encoders.video);
  return metrics(pred, truth, labels.size());
}

}  // namespace

Metrics evaluate(const EncoderPair& encoders, const Vocabulary& vocab, std::span<const VideoSample> samples,
                 bool leaf_augment) {
  return score(encoders, vocab, samples, vocab.actions(), leaf_augment);
}

std::vector<LabelSet> generate_label_sets(const Vocabulary& vocab, std::size_t runs, std::uint64_t seed) {
  std::vector<LabelSet> sets;
  if (runs == 0) return sets;
  sets.push_back(vocab.actions());
  Rng rng(seed);
  for (std::size_t r = 1; r < runs; ++r) sets.push_back(sample_positive_labels_independent(vocab, rng));
  return sets;
}

std::vector<LabelSet> parse_label_table(std::string_view text, const Vocabulary& vocab, std::size_t runs,
                                        const std::string& source) {
  auto mismatch = [&](const std::string& msg) { throw Error(ErrorCode::kLabelTableMismatch, source + ": " + msg); };
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || canonical_phrase(line) != "run,class_index,label") {
    throw Error(ErrorCode::kSchemaError, source + ": expected header run,class_index,label");
  }
  const std::size_t c = vocab.size();
  std::vector<std::vector<std::optional<ActionLabel>>> cells;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (canonical_phrase(line).empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string::npos) throw Error(ErrorCode::kSchemaError, source + ":" + std::to_string(n) + ": expected 3 fields");
    std::size_t run = 0, cls = 0;
    try {
      run = std::stoul(line.substr(0, c1));
      cls = std::stoul(line.substr(c1 + 1, c2 - c1 - 1));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kSchemaError, source + ":" + std::to_string(n) + ": bad run or class index");
    }
    if (run < 1) throw Error(ErrorCode::kSchemaError, source + ":" + std::to_string(n) + ": runs are numbered from 1");
    if (cls >= c) mismatch("line " + std::to_string(n) + ": class " + std::to_string(cls) + " but the vocabulary has " + std::to_string(c));
    if (run > cells.size()) cells.resize(run, std::vector<std::optional<ActionLabel>>(c));
    auto& cell = cells[run - 1][cls];
    if (cell) mismatch("line " + std::to_string(n) + ": run " + std::to_string(run) + " names class " + std::to_string(cls) + " twice");
    cell = decompose_with_object(line.substr(c2 + 1), vocab.action(cls).object());
  }
  if (cells.size() < runs) mismatch("table has " + std::to_string(cells.size()) + " runs, " + std::to_string(runs) + " requested");
  std::vector<LabelSet> sets;
  for (std::size_t r = 0; r < runs; ++r) {
    LabelSet set;
    for (std::size_t k = 0; k < c; ++k) {
      if (!cells[r][k]) mismatch("run " + std::to_string(r + 1) + " lacks class " + std::to_string(k));
      set.push_back(*cells[r][k]);
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

std::vector<LabelSet> load_label_table(const std::filesystem::path& path, const Vocabulary& vocab, std::size_t runs) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIngestError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_label_table(ss.str(), vocab, runs, path.string());
}

double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(std::span<const double> v, StdKind kind) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(kind == StdKind::kPopulation ? v.size() : v.size() - 1));
}

SrtReport srt(const EvalConfig& config, const EncoderPair& encoders, const Vocabulary& vocab,
              std::span<const VideoSample> test) {
  config.validate();
  const auto sets = config.source == LabelSource::kFile ? load_label_table(config.label_table, vocab, config.srt_runs)
                                                        : generate_label_sets(vocab, config.srt_runs, config.seed);
  return srt(config, encoders, vocab, test, sets);
}

SrtReport srt(const EvalConfig& config, const EncoderPair& encoders, const Vocabulary& vocab,
              std::span<const VideoSample> test, const std::vector<LabelSet>& label_sets) {
  config.validate();
  if (label_sets.size() != config.srt_runs) {
    throw Error(ErrorCode::kLabelTableMismatch, std::to_string(label_sets.size()) + " label sets for " +
                                                    std::to_string(config.srt_runs) + " runs");
  }
  SrtReport report;
  report.config = config;
  std::vector<double> acc, f1;
  for (std::size_t r = 0; r < label_sets.size(); ++r) {
    if (label_sets[r].size() != vocab.size()) {
      throw Error(ErrorCode::kLabelTableMismatch, "run " + std::to_string(r + 1) + " has " +
                                                      std::to_string(label_sets[r].size()) + " labels for " +
                                                      std::to_string(vocab.size()) + " classes");
    }
    const auto m = score(encoders, vocab, test, label_sets[r], config.leaf_augment);
    report.runs.push_back({r + 1, label_sets[r], m});
    acc.push_back(m.accuracy);
    f1.push_back(m.macro_f1);
  }
  report.mean = {mean_of(acc), mean_of(f1)};
  report.std = {std_of(acc, config.std_kind), std_of(f1, config.std_kind)};
  return report;
}

std::string srt_report_json(const SrtReport& report) {
  json j;
  const auto& c = report.config;
  j["config"] = {{"mode", to_string(c.mode)},
                 {"labels", to_string(c.representation)},
                 {"leaf_augment", c.leaf_augment},
                 {"srt_runs", c.srt_runs},
                 {"seed", c.seed},
                 {"label_source", to_string(c.source)},
                 {"label_table", c.label_table.string()},
                 {"std", to_string(c.std_kind)}};
  json runs = json::array();
  for (const auto& r : report.runs) {
    json labels = json::array();
    for (const auto& l : r.labels) labels.push_back(l.text());
    runs.push_back({{"run", r.run}, {"labels", labels}, {"accuracy", r.metrics.accuracy}, {"macro_f1", r.metrics.macro_f1}});
  }
  j["runs"] = std::move(runs);
  j["mean"] = {{"accuracy", report.mean.accuracy}, {"macro_f1", report.mean.macro_f1}};
  j["std"] = {{"accuracy", report.std.accuracy}, {"macro_f1", report.std.macro_f1}};
  return j.dump(2) + "\n";
}

std::string srt_summary_csv(const SrtReport& report) {
  std::string out = "run,accuracy,macro_f1\n";
  char buf[96];
  auto row = [&](const std::string& name, const Metrics& m) {
    std::snprintf(buf, sizeof(buf), ",%.4f,%.4f\n", m.accuracy, m.macro_f1);
    out += name + buf;
  };
  for (const auto& r : report.runs) row(std::to_string(r.run), r.metrics);
  row("mean", report.mean);
  row("std", report.std);
  return out;
}

}  // namespace ace
