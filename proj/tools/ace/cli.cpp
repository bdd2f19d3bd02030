#include "cli.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "ace/dataset.hpp"
#include "ace/embedding.hpp"
#include "ace/errors.hpp"
#include "ace/eval.hpp"
#include "ace/llm_client.hpp"
#include "ace/projection.hpp"
#include "ace/synthetic.hpp"
#include "ace/trainer.hpp"
#include "ace/vocab.hpp"
#include "json.hpp"

namespace ace::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::kConfigError, msg); }

std::string dashed(std::string s) {
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = canonical_phrase(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

json convert(const std::string& key, const std::string& text, const json& like) {
  try {
    if (like.is_boolean()) {
      const auto v = to_lower(text);
      if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
      if (v == "false" || v == "0" || v == "no" || v == "off") return false;
      config_error(key + ": expected true or false, got '" + text + "'");
    }
    if (like.is_number_unsigned()) {
      if (!text.empty() && text[0] == '-') config_error(key + ": must be non-negative");
      return std::stoull(text);
    }
    if (like.is_number_integer()) return std::stoll(text);
    if (like.is_number_float()) return std::stod(text);
    if (like.is_array()) {
      json arr = json::array();
      const bool numeric = !like.empty() && like[0].is_number();
      for (const auto& item : split_list(text)) {
        if (numeric) arr.push_back(std::stoll(item));
        else arr.push_back(item);
      }
      return arr;
    }
  } catch (const std::logic_error&) {
    config_error(key + ": cannot parse '" + text + "'");
  }
  return text;
}

/// Config keys of one subcommand. Each key gets a --dashed-name flag; the
/// resolved value comes from the flag, else the config file, else the default.
class Keys {
 public:
  struct Spec {
    std::string name;
    json fallback;
    std::string help;
  };

  Keys(CLI::App* app, std::vector<Spec> specs) : app_(app), specs_(std::move(specs)) {
    app_->add_option("--config", config_path_, "JSON file of config keys (flags override it)");
    for (const auto& s : specs_) {
      app_->add_option("--" + dashed(s.name), raw_[s.name], s.help + " [config key: " + s.name + "; default " + s.fallback.dump() + "]");
    }
  }

  void resolve() {
    json file = json::object();
    if (!config_path_.empty()) {
      std::ifstream in(config_path_);
      if (!in) throw Error(ErrorCode::kIngestError, "cannot open config " + config_path_);
      try {
        file = json::parse(in);
      } catch (const json::parse_error& e) {
        config_error(config_path_ + ": " + e.what());
      }
      if (!file.is_object()) config_error(config_path_ + ": expected a JSON object");
      for (const auto& [k, _] : file.items()) {
        if (std::none_of(specs_.begin(), specs_.end(), [&](const Spec& s) { return s.name == k; })) {
          config_error(config_path_ + ": unknown config key '" + k + "'");
        }
      }
    }
    values_ = json::object();
    sources_ = json::object();
    for (const auto& s : specs_) {
      if (app_->count("--" + dashed(s.name)) > 0) {
        values_[s.name] = convert(s.name, raw_[s.name], s.fallback);
        sources_[s.name] = "flag";
      } else if (file.contains(s.name)) {
        values_[s.name] = file[s.name];
        sources_[s.name] = "file";
      } else {
        values_[s.name] = s.fallback;
        sources_[s.name] = "default";
      }
    }
  }

  template <typename T>
  T get(const std::string& key) const {
    try {
      return values_.at(key).get<T>();
    } catch (const json::exception& e) {
      config_error("config key '" + key + "': " + e.what());
    }
  }

  const json& values() const { return values_; }
  const json& sources() const { return sources_; }
  const std::string& config_path() const { return config_path_; }

 private:
  CLI::App* app_;
  std::vector<Spec> specs_;
  std::map<std::string, std::string> raw_;
  std::string config_path_;
  json values_;
  json sources_;
};

// Guards an output directory against concurrent runs.
class OutputLock {
 public:
  explicit OutputLock(const fs::path& dir) : path_(dir / ".ace.lock") {
    fs::create_directories(dir);
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
      if (errno == EEXIST) config_error("output directory " + dir.string() + " is locked by another run (" + path_.string() + ")");
      throw Error(ErrorCode::kIngestError, "cannot create " + path_.string() + ": " + std::strerror(errno));
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    (void)!::write(fd, pid.data(), pid.size());
    ::close(fd);
  }
  ~OutputLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  fs::path path_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIngestError, "cannot write " + path.string());
  out << text;
}

struct Manifest {
  std::string subcommand;
  const Keys* keys = nullptr;
  std::uint64_t seed = 0;
  json inputs = json::object();
  json outputs = json::array();
  json hashes = json::object();

  void write(const fs::path& path) const {
    json j;
    j["subcommand"] = subcommand;
    j["tool_version"] = kToolVersion;
    j["seed"] = seed;
    j["config"] = keys ? keys->values() : json::object();
    j["config_sources"] = keys ? keys->sources() : json::object();
    j["config_file"] = keys ? keys->config_path() : std::string();
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["hashes"] = hashes;
    write_text(path, j.dump(2) + "\n");
  }
};

EncoderPair load_encoders(const fs::path& params) {
  if (!fs::exists(params)) throw Error(ErrorCode::kIngestError, "missing parameter file " + params.string());
  return make_toy_encoders(load_parameters(params));
}

fs::path default_params(const fs::path& data) { return data / "pretrained.json"; }

void print_warnings(const std::vector<std::string>& warnings, std::ostream& err) {
  for (const auto& w : warnings) err << "warning: " << w << "\n";
}

// --- subcommands ---------------------------------------------------------

struct Ctx {
  std::ostream& out;
  std::ostream& err;
};

struct ValidateCmd {
  std::string vocab;
  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("validate", "Check a vocabulary file against every tree invariant");
    sub->add_option("--vocab", vocab, "vocabulary JSON")->required();
  }
  int run(Ctx& ctx) const {
    const auto report = validate_vocabulary_file(vocab);
    if (report.ok()) {
      ctx.out << vocab << ": ok\n";
      return 0;
    }
    ctx.out << report.format();
    return exit_status(ErrorCode::kSchemaError);
  }
};

struct BuildTreesCmd {
  std::string vocab, out;
  std::unique_ptr<Keys> keys;
  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("build-trees", "Generate synonym trees for the actions of a vocabulary");
    sub->add_option("--vocab", vocab, "vocabulary JSON (trees optional)")->required();
    sub->add_option("--out", out, "output vocabulary JSON")->required();
    keys = std::make_unique<Keys>(sub, std::vector<Keys::Spec>{
        {"m_level1", 11, "first-order children per root, parent included"},
        {"m_level2", 11, "second-order children per node, parent included (0 = one level)"},
        {"domain_hint", "toy assembly", "activity named in the prompt"},
        {"template", std::string(kDefaultTemplateId), "prompt template id"},
        {"offline", false, "never contact the service"},
        {"offline_file", "", "tree JSON or SRT label table answering offline requests"},
        {"cache_dir", "", "response cache directory"},
        {"max_in_flight", 4u, "concurrent requests"},
        {"rate", 0.0, "request cap per second (0 = none)"},
        {"retries", 3u, "retries after a malformed or failed response"},
    });
  }
  int run(Ctx& ctx) const {
    keys->resolve();
    const auto actions = load_actions(vocab);
    std::vector<int> m{keys->get<int>("m_level1")};
    if (const int m2 = keys->get<int>("m_level2"); m2 > 0) m.push_back(m2);
    if (keys->get<std::string>("template") != kDefaultTemplateId) {
      (void)render_prompt({actions.front(), 1, "", keys->get<std::string>("template"), {}});
    }

    ClientConfig cc;
    cc.offline = keys->get<bool>("offline");
    cc.cache_dir = keys->get<std::string>("cache_dir");
    cc.max_in_flight = keys->get<std::size_t>("max_in_flight");
    cc.max_requests_per_second = keys->get<double>("rate");
    cc.max_retries = keys->get<int>("retries");

    std::optional<OfflineSynonymSource> offline;
    if (const auto f = keys->get<std::string>("offline_file"); !f.empty()) {
      offline = fs::path(f).extension() == ".csv" ? OfflineSynonymSource::from_srt_table(f)
                                                   : OfflineSynonymSource::from_vocabulary(load_vocabulary(f));
    }
    std::unique_ptr<ChatTransport> transport;
    if (!cc.offline) {
      auto http = HttpConfig::from_env();
      if (!http.url.empty()) transport = std::make_unique<HttpChatTransport>(std::move(http));
    }

    const fs::path out_path(out);
    const fs::path out_dir = out_path.has_parent_path() ? out_path.parent_path() : fs::path(".");
    OutputLock lock(out_dir);
    SynonymClient client(cc, transport.get(), offline ? &*offline : nullptr);
    std::vector<std::string> warnings;
    auto trees = client.build_trees(actions, m, keys->get<std::string>("domain_hint"), &warnings);
    print_warnings(warnings, ctx.err);
    const Vocabulary result(actions, std::move(trees));
    const auto report = validate_vocabulary_text(vocabulary_to_json(result), out);
    save_vocabulary(result, out_path);
    if (!report.ok()) {
      ctx.err << report.format();
      return exit_status(ErrorCode::kSchemaError);
    }

    Manifest man{"build-trees", keys.get()};
    man.inputs["vocab"] = vocab;
    man.outputs.push_back(out);
    man.hashes["vocab"] = vocabulary_hash(result);
    man.hashes["network_calls"] = client.network_calls();
    man.write(out_path.string() + ".manifest.json");
    ctx.out << "wrote " << out << " (" << result.trees().size() << " trees, " << client.network_calls()
            << " service calls)\n";
    return 0;
  }
};

struct SynthCmd {
  std::string out;
  std::unique_ptr<Keys> keys;
  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("synth-data", "Write a synthetic dataset and matching pretrained toy encoders");
    sub->add_option("--out", out, "output dataset directory")->required();
    const SyntheticConfig d;
    keys = std::make_unique<Keys>(sub, std::vector<Keys::Spec>{
        {"base_classes", d.base_classes, "base (seen) classes"},
        {"novel_classes", d.novel_classes, "novel (unseen) classes"},
        {"samples_per_class", d.samples_per_class, "train clips per base class"},
        {"test_samples_per_class", d.test_samples_per_class, "test clips per class"},
        {"frames", d.frames, "frames per clip"},
        {"noise_sigma", d.noise_sigma, "per-frame feature noise"},
        {"verb_dim", d.verb_dim, "verb latent size"},
        {"object_dim", d.object_dim, "object latent size"},
        {"objects", d.objects, "shared objects"},
        {"novel_objects", d.novel_objects, "objects used by novel classes (0 = same pool)"},
        {"m_per_level", d.m_per_level, "tree widths, parent included"},
        {"root_noise", d.root_noise, "root token spread"},
        {"synonym_noise", d.synonym_noise, "first-order synonym spread"},
        {"second_order_noise", d.second_order_noise, "second-order synonym spread"},
        {"text_distortion", d.text_distortion, "pretrained text/video mismatch"},
        {"lexical_dim", d.lexical_dim, "surface-form part of each verb token"},
        {"lexical_noise", d.lexical_noise, "surface-form vector scale"},
        {"lexical_leak", d.lexical_leak, "pretrained text gain on surface form"},
        {"embedding_dim", d.embedding_dim, "shared embedding size"},
        {"hash_buckets", d.hash_buckets, "text token buckets"},
        {"seed", d.seed, "generator seed"},
    });
  }
  int run(Ctx& ctx) const {
    keys->resolve();
    SyntheticConfig c;
    c.base_classes = keys->get<std::size_t>("base_classes");
    c.novel_classes = keys->get<std::size_t>("novel_classes");
    c.samples_per_class = keys->get<std::size_t>("samples_per_class");
    c.test_samples_per_class = keys->get<std::size_t>("test_samples_per_class");
    c.frames = keys->get<std::size_t>("frames");
    c.noise_sigma = keys->get<double>("noise_sigma");
    c.verb_dim = keys->get<std::size_t>("verb_dim");
    c.object_dim = keys->get<std::size_t>("object_dim");
    c.objects = keys->get<std::size_t>("objects");
    c.novel_objects = keys->get<std::size_t>("novel_objects");
    c.m_per_level = keys->get<std::vector<int>>("m_per_level");
    c.root_noise = keys->get<double>("root_noise");
    c.synonym_noise = keys->get<double>("synonym_noise");
    c.second_order_noise = keys->get<double>("second_order_noise");
    c.text_distortion = keys->get<double>("text_distortion");
    c.lexical_dim = keys->get<std::size_t>("lexical_dim");
    c.lexical_noise = keys->get<double>("lexical_noise");
    c.lexical_leak = keys->get<double>("lexical_leak");
    c.embedding_dim = keys->get<std::size_t>("embedding_dim");
    c.hash_buckets = keys->get<std::size_t>("hash_buckets");
    c.seed = keys->get<std::uint64_t>("seed");

    const auto data = generate_synthetic_dataset(c);
    OutputLock lock(out);
    save_dataset(data.dataset, out);
    save_parameters(data.pretrained, default_params(out));
    Manifest man{"synth-data", keys.get(), c.seed};
    man.outputs = {out, default_params(out).string()};
    man.hashes["dataset"] = dataset_hash(out);
    man.hashes["vocab"] = vocabulary_hash(data.dataset.vocab);
    man.write(fs::path(out) / "run_manifest.json");
    ctx.out << "wrote " << out << " (" << data.dataset.records.size() << " clips, " << data.dataset.vocab.size()
            << " classes)\n";
    return 0;
  }
};

struct TrainCmd {
  std::string data, init, out, resume;
  std::size_t max_iterations = 0;
  std::unique_ptr<Keys> keys;
  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("train", "Fine-tune the toy encoders on the base classes");
    sub->add_option("--data", data, "dataset directory")->required();
    sub->add_option("--init", init, "initial parameters (default <data>/pretrained.json)");
    sub->add_option("--out", out, "output directory")->required();
    sub->add_option("--resume", resume, "checkpoint to resume from");
    sub->add_option("--max-iterations", max_iterations, "stop after this many global iterations (0 = run all epochs)");
    const json defaults = json::parse(train_config_to_json(TrainConfig{}));
    const std::map<std::string, std::string> help{
        {"batch_size", "clips per iteration"},
        {"epochs", "passes over the base training clips"},
        {"learning_rate", "SGD step size"},
        {"momentum", "SGD momentum"},
        {"tau", "softmax temperature"},
        {"m_per_level", "tree widths the vocabulary was built with"},
        {"flags", "all | fixed-only | comma list of no-leaf,no-shadow,no-rand,no-fixed"},
        {"rand_weight", "weight on the randomized-synonym term"},
        {"seed", "run seed (shuffling and label sampling)"},
        {"trainable", "comma list of parameter names to update"},
        {"checkpoint_every", "iterations between checkpoints (0 = final only)"},
    };
    std::vector<Keys::Spec> specs;
    for (const auto& k : train_config_keys()) specs.push_back({k, defaults.at(k), help.at(k)});
    keys = std::make_unique<Keys>(sub, std::move(specs));
  }
  int run(Ctx& ctx) const {
    keys->resolve();
    const TrainConfig config = train_config_from_json(keys->values().dump());
    config.validate();
    std::vector<std::string> warnings;
    const Dataset ds = load_dataset(data, &warnings);
    print_warnings(warnings, ctx.err);
    const Vocabulary vocab = ds.base_vocab();
    const auto samples = ds.samples(Split::kTrain, ClassGroup::kBase);
    const fs::path init_path = init.empty() ? default_params(data) : fs::path(init);
    EncoderPair enc = load_encoders(init_path);

    OutputLock lock(out);
    const fs::path out_dir(out);
    std::ofstream metrics(out_dir / "metrics.ndjson", std::ios::binary);
    TrainOptions opts;
    opts.metrics_log = &metrics;
    opts.checkpoint_dir = out_dir / "checkpoints";
    if (max_iterations > 0) opts.stop_after = max_iterations;
    std::optional<TrainState> resumed;
    if (!resume.empty()) {
      resumed = load_checkpoint(resume, vocabulary_hash(vocab));
      opts.resume = &*resumed;
    }
    const TrainState state = train(config, samples, vocab, enc, opts);
    save_parameters(state.parameters, out_dir / "params.json");
    save_checkpoint(state, config, out_dir / "final.ckpt");

    Manifest man{"train", keys.get(), config.seed};
    man.inputs = {{"data", data}, {"init", init_path.string()}, {"resume", resume}};
    man.outputs = {(out_dir / "params.json").string(), (out_dir / "metrics.ndjson").string(),
                   (out_dir / "final.ckpt").string()};
    man.hashes["dataset"] = dataset_hash(data);
    man.hashes["vocab"] = vocabulary_hash(vocab);
    man.write(out_dir / "run_manifest.json");
    const double last = state.history.empty() ? 0.0 : state.history.back().l_total;
    ctx.out << "trained " << state.iteration << " iterations over " << state.epoch << " epochs; last loss " << last << "\n";
    return 0;
  }
};

struct Split3 {
  Vocabulary vocab;
  std::vector<VideoSample> test;
};

Split3 eval_split(const std::string& data, EvalMode mode, std::ostream& err) {
  std::vector<std::string> warnings;
  const Dataset ds = load_dataset(data, &warnings);
  print_warnings(warnings, err);
  const auto group = mode == EvalMode::kBase ? ClassGroup::kBase : ClassGroup::kNovel;
  return {ds.group_vocab(group), ds.samples(Split::kTest, group)};
}

json metrics_json(const Metrics& m) { return {{"accuracy", m.accuracy}, {"macro_f1", m.macro_f1}}; }

struct EvalCmd {
  std::string data, params, out;
  std::unique_ptr<Keys> keys;
  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("eval", "Classify test clips of the base or novel classes");
    sub->add_option("--data", data, "dataset directory")->required();
    sub->add_option("--params", params, "encoder parameters (default <data>/pretrained.json)");
    sub->add_option("--out", out, "output directory")->required();
    keys = std::make_unique<Keys>(sub, std::vector<Keys::Spec>{
        {"mode", "novel", "base | novel"},
        {"labels", "root", "root | synonym-run (one independently sampled synonym set)"},
        {"leaf_augment", true, "average over tree children"},
        {"seed", 0u, "seed for synonym-run labels"},
    });
  }
  int run(Ctx& ctx) const {
    keys->resolve();
    const auto mode = parse_eval_mode(keys->get<std::string>("mode"));
    const auto repr = parse_representation(keys->get<std::string>("labels"));
    const bool leaf = keys->get<bool>("leaf_augment");
    const auto seed = keys->get<std::uint64_t>("seed");
    const auto split = eval_split(data, mode, ctx.err);
    const fs::path params_path = params.empty() ? default_params(data) : fs::path(params);
    const EncoderPair enc = load_encoders(params_path);

    const LabelSet labels = repr == LabelRepresentation::kRoot ? split.vocab.actions()
                                                               : generate_label_sets(split.vocab, 2, seed)[1];
    EvalConfig ec;
    ec.mode = mode;
    ec.representation = repr;
    ec.leaf_augment = leaf;
    ec.srt_runs = 1;
    ec.seed = seed;
    const auto report = srt(ec, enc, split.vocab, split.test, {labels});
    std::vector<std::size_t> truth;
    for (const auto& s : split.test) truth.push_back(s.label_index);
    const auto chance = random_baseline(label_distribution(truth, split.vocab.size()));

    OutputLock lock(out);
    json j;
    j["mode"] = to_string(mode);
    j["labels"] = to_string(repr);
    j["leaf_augment"] = leaf;
    j["classes"] = json::array();
    for (const auto& l : labels) j["classes"].push_back(l.text());
    j["test_clips"] = split.test.size();
    j["metrics"] = metrics_json(report.runs.front().metrics);
    j["random_baseline"] = metrics_json(chance);
    const fs::path out_file = fs::path(out) / "eval.json";
    write_text(out_file, j.dump(2) + "\n");

    Manifest man{"eval", keys.get(), seed};
    man.inputs = {{"data", data}, {"params", params_path.string()}};
    man.outputs = {out_file.string()};
    man.hashes["dataset"] = dataset_hash(data);
    man.hashes["vocab"] = vocabulary_hash(split.vocab);
    man.write(fs::path(out) / "run_manifest.json");
    const auto& m = report.runs.front().metrics;
    ctx.out << to_string(mode) << " acc " << m.accuracy << " macro-F1 " << m.macro_f1 << "\n";
    return 0;
  }
};

struct SrtCmd {
  std::string data, params, out;
  std::unique_ptr<Keys> keys;
  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("srt", "Synonym robustness test over repeated label sets");
    sub->add_option("--data", data, "dataset directory")->required();
    sub->add_option("--params", params, "encoder parameters (default <data>/pretrained.json)");
    sub->add_option("--out", out, "output directory")->required();
    keys = std::make_unique<Keys>(sub, std::vector<Keys::Spec>{
        {"labels", "", "label table CSV (run,class_index,label); empty = generate from trees"},
        {"runs", 10u, "number of runs"},
        {"seed", 0u, "seed for generated label sets"},
        {"mode", "novel", "base | novel"},
        {"leaf_augment", true, "average over tree children"},
        {"std", "population", "population | sample"},
    });
  }
  int run(Ctx& ctx) const {
    keys->resolve();
    EvalConfig ec;
    ec.mode = parse_eval_mode(keys->get<std::string>("mode"));
    ec.representation = LabelRepresentation::kSynonymRun;
    ec.leaf_augment = keys->get<bool>("leaf_augment");
    ec.srt_runs = keys->get<std::size_t>("runs");
    ec.seed = keys->get<std::uint64_t>("seed");
    ec.label_table = keys->get<std::string>("labels");
    ec.source = ec.label_table.empty() ? LabelSource::kGenerated : LabelSource::kFile;
    const auto kind = keys->get<std::string>("std");
    if (kind != "population" && kind != "sample") config_error("std must be population or sample");
    ec.std_kind = kind == "sample" ? StdKind::kSample : StdKind::kPopulation;

    const auto split = eval_split(data, ec.mode, ctx.err);
    const fs::path params_path = params.empty() ? default_params(data) : fs::path(params);
    const EncoderPair enc = load_encoders(params_path);
    const auto report = srt(ec, enc, split.vocab, split.test);

    OutputLock lock(out);
    const fs::path dir(out);
    write_text(dir / "srt_report.json", srt_report_json(report));
    write_text(dir / "srt_summary.csv", srt_summary_csv(report));
    Manifest man{"srt", keys.get(), ec.seed};
    man.inputs = {{"data", data}, {"params", params_path.string()}, {"labels", ec.label_table.string()}};
    man.outputs = {(dir / "srt_report.json").string(), (dir / "srt_summary.csv").string()};
    man.hashes["dataset"] = dataset_hash(data);
    man.hashes["vocab"] = vocabulary_hash(split.vocab);
    man.write(dir / "run_manifest.json");
    ctx.out << "SRT acc " << report.mean.accuracy << " +- " << report.std.accuracy << ", macro-F1 "
            << report.mean.macro_f1 << " +- " << report.std.macro_f1 << " over " << report.runs.size() << " runs\n";
    return 0;
  }
};

struct ProjectionCmd {
  std::string data, vocab, params, out;
  std::unique_ptr<Keys> keys;
  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("export-projection", "2-D projection of every tree label's text embedding");
    auto* d = sub->add_option("--data", data, "dataset directory (uses its full vocabulary)");
    auto* v = sub->add_option("--vocab", vocab, "vocabulary JSON");
    d->excludes(v);
    sub->add_option("--params", params, "encoder parameters (default <data>/pretrained.json)");
    sub->add_option("--out", out, "output CSV (label,group,x,y)")->required();
    keys = std::make_unique<Keys>(sub, std::vector<Keys::Spec>{{"reducer", "pca", "projection method"}});
  }
  int run(Ctx& ctx) const {
    keys->resolve();
    if (data.empty() && vocab.empty()) config_error("export-projection needs --data or --vocab");
    const Vocabulary v = vocab.empty() ? load_dataset(data).vocab : load_vocabulary(vocab);
    if (params.empty() && data.empty()) config_error("export-projection with --vocab needs --params");
    const fs::path params_path = params.empty() ? default_params(data) : fs::path(params);
    const EncoderPair enc = load_encoders(params_path);
    auto reducer = make_reducer(keys->get<std::string>("reducer"));
    const auto rows = project_concepts(v, *enc.text, *reducer);

    const fs::path out_path(out);
    OutputLock lock(out_path.has_parent_path() ? out_path.parent_path() : fs::path("."));
    write_text(out_path, projection_csv(rows));
    Manifest man{"export-projection", keys.get()};
    man.inputs = {{"data", data}, {"vocab", vocab}, {"params", params_path.string()}};
    man.outputs = {out};
    man.hashes["vocab"] = vocabulary_hash(v);
    man.write(out_path.string() + ".manifest.json");
    ctx.out << "wrote " << rows.size() << " points to " << out << "\n";
    return 0;
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"ace: synonym-tree fine-tuning, evaluation and SRT for video-text models", "ace"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  app.get_formatter()->column_width(36);

  ValidateCmd validate;
  BuildTreesCmd build;
  SynthCmd synth;
  TrainCmd train_cmd;
  EvalCmd eval_cmd;
  SrtCmd srt_cmd;
  ProjectionCmd projection;
  validate.add(app);
  build.add(app);
  synth.add(app);
  train_cmd.add(app);
  eval_cmd.add(app);
  srt_cmd.add(app);
  projection.add(app);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  Ctx ctx{out, err};
  try {
    if (app.got_subcommand("validate")) return validate.run(ctx);
    if (app.got_subcommand("build-trees")) return build.run(ctx);
    if (app.got_subcommand("synth-data")) return synth.run(ctx);
    if (app.got_subcommand("train")) return train_cmd.run(ctx);
    if (app.got_subcommand("eval")) return eval_cmd.run(ctx);
    if (app.got_subcommand("srt")) return srt_cmd.run(ctx);
    if (app.got_subcommand("export-projection")) return projection.run(ctx);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_status(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace ace::cli
