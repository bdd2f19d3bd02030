#include "ace/trainer.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "ace/errors.hpp"
#include "ace/hash.hpp"
#include "json.hpp"

namespace ace {

using json = nlohmann::ordered_json;

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kConfigError, msg); };
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (epochs < 1) fail("epochs must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must be in [0, 1)");
  if (m_per_level.empty()) fail("m_per_level must not be empty");
  for (int m : m_per_level) {
    if (m < 1) fail("m_per_level entries must be >= 1");
  }
  if (trainable.empty()) fail("no trainable parameters selected");
  ace::validate(loss_options());
}

const std::vector<std::string>& train_config_keys() {
  static const std::vector<std::string> keys{
      "batch_size", "epochs",      "learning_rate", "momentum",  "tau",
      "m_per_level", "flags",      "rand_weight",   "seed",      "trainable",
      "checkpoint_every",
  };
  return keys;
}

LossFlags parse_flags(std::string_view text) {
  LossFlags f;
  std::string s(text);
  if (s.empty() || s == "all") return f;
  if (s == "fixed-only") return {false, false, false, true};
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = canonical_phrase(item);
    if (item == "no-leaf") f.leaf_augment = false;
    else if (item == "no-shadow") f.shadow_negatives = false;
    else if (item == "no-rand") f.l_rand = false;
    else if (item == "no-fixed") f.l_fixed = false;
    else if (item != "all" && !item.empty()) throw Error(ErrorCode::kConfigError, "unknown flag '" + item + "'");
  }
  return f;
}

std::string format_flags(const LossFlags& f) {
  if (f == LossFlags{}) return "all";
  if (f == LossFlags{false, false, false, true}) return "fixed-only";
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (on) return;
    if (!out.empty()) out += ",";
    out += name;
  };
  add(f.leaf_augment, "no-leaf");
  add(f.shadow_negatives, "no-shadow");
  add(f.l_rand, "no-rand");
  add(f.l_fixed, "no-fixed");
  return out;
}

std::string train_config_to_json(const TrainConfig& c) {
  json j;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["learning_rate"] = c.learning_rate;
  j["momentum"] = c.momentum;
  j["tau"] = c.tau;
  j["m_per_level"] = c.m_per_level;
  j["flags"] = format_flags(c.flags);
  j["rand_weight"] = c.rand_weight;
  j["seed"] = c.seed;
  j["trainable"] = std::vector<std::string>(c.trainable.begin(), c.trainable.end());
  j["checkpoint_every"] = c.checkpoint_every;
  return j.dump(2);
}

TrainConfig train_config_from_json(std::string_view text, TrainConfig c) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfigError, std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kConfigError, "config must be a JSON object");
  const auto& keys = train_config_keys();
  try {
    for (const auto& [key, value] : j.items()) {
      if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
        throw Error(ErrorCode::kConfigError, "unknown config key '" + key + "'");
      }
      if (key == "batch_size") c.batch_size = value.get<std::size_t>();
      else if (key == "epochs") c.epochs = value.get<std::size_t>();
      else if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "momentum") c.momentum = value.get<double>();
      else if (key == "tau") c.tau = value.get<double>();
      else if (key == "m_per_level") c.m_per_level = value.get<std::vector<int>>();
      else if (key == "flags") c.flags = parse_flags(value.get<std::string>());
      else if (key == "rand_weight") c.rand_weight = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "trainable") {
        const auto names = value.get<std::vector<std::string>>();
        c.trainable = {names.begin(), names.end()};
      } else if (key == "checkpoint_every") c.checkpoint_every = value.get<std::size_t>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfigError, std::string("config: ") + e.what());
  }
  return c;
}

std::string to_ndjson(const IterationRecord& r) {
  json j;
  j["iteration"] = r.iteration;
  j["epoch"] = r.epoch;
  j["l_fixed"] = r.l_fixed;
  j["l_rand"] = r.l_rand;
  j["l_total"] = r.l_total;
  return j.dump();
}

void restore_parameters(const std::vector<Parameter>& snapshot, EncoderPair& encoders) {
  for (auto* params : {&encoders.video->parameters(), &encoders.text->parameters()}) {
    for (auto& p : *params) {
      auto it = std::find_if(snapshot.begin(), snapshot.end(), [&](const Parameter& s) { return s.name == p.name; });
      if (it == snapshot.end()) throw Error(ErrorCode::kSchemaError, "snapshot lacks parameter '" + p.name + "'");
      if (it->value.rows() != p.value.rows() || it->value.cols() != p.value.cols()) {
        throw Error(ErrorCode::kShapeError, "parameter '" + p.name + "' shape differs from snapshot");
      }
      p.value = it->value;
    }
  }
}

namespace {

std::string describe_batch(std::span<const VideoSample> batch, const IterationLabels& labels) {
  std::ostringstream os;
  os << "batch clips:";
  for (const auto& s : batch) os << ' ' << s.clip_id << "(y=" << s.label_index << ')';
  os << "; sampled positives:";
  for (const auto& a : labels.positives) os << " '" << a.text() << "'";
  os << "; shadow negatives:";
  for (const auto& a : labels.shadows) os << " '" << a.text() << "'";
  return os.str();
}

void shuffle(std::vector<std::size_t>& order, Rng& rng) {
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
}

}  // namespace

TrainState train(const TrainConfig& config, std::span<const VideoSample> data, const Vocabulary& vocab,
                 EncoderPair& encoders, const TrainOptions& options) {
  config.validate();
  validate_for_training(vocab);
  if (data.empty()) throw Error(ErrorCode::kConfigError, "no training samples");
  for (const auto& s : data) {
    if (s.label_index >= vocab.size()) {
      throw Error(ErrorCode::kSchemaError, "clip '" + s.clip_id + "' label " + std::to_string(s.label_index) +
                                               " outside [0, " + std::to_string(vocab.size()) + ")");
    }
  }
  encoders.set_trainable(config.trainable);

  TrainState state;
  const std::string vhash = vocabulary_hash(vocab);
  if (options.resume) {
    state = *options.resume;
    if (!state.vocab_hash.empty() && state.vocab_hash != vhash) {
      throw Error(ErrorCode::kVocabMismatch, "checkpoint was trained on a different vocabulary");
    }
    restore_parameters(state.parameters, encoders);
    if (state.order.size() != data.size() && state.cursor != 0) {
      throw Error(ErrorCode::kConfigError, "resume data size differs from the checkpointed epoch order");
    }
  } else {
    state.rng.seed(config.seed);
    state.vocab_hash = vhash;
  }

  LossGradients velocity = zero_loss_gradients(encoders);
  if (!state.velocity.empty()) {
    const std::size_t nv = velocity.video.size();
    if (state.velocity.size() != nv + velocity.text.size()) throw Error(ErrorCode::kSchemaError, "checkpoint velocity mismatch");
    for (std::size_t i = 0; i < state.velocity.size(); ++i) (i < nv ? velocity.video[i] : velocity.text[i - nv]) = state.velocity[i];
  }

  const auto loss_opts = config.loss_options();
  auto snapshot = [&] {
    state.parameters = all_parameters(encoders);
    state.velocity = velocity.video;
    state.velocity.insert(state.velocity.end(), velocity.text.begin(), velocity.text.end());
  };
  auto step = [&](std::vector<Parameter>& params, Gradients& grads, Gradients& vel) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!params[i].trainable) continue;
      vel[i] = config.momentum * vel[i] + grads[i];
      params[i].value -= config.learning_rate * vel[i];
    }
  };

  std::vector<VideoSample> batch;
  while (state.epoch < config.epochs) {
    if (state.cursor == 0) {
      state.order.resize(data.size());
      std::iota(state.order.begin(), state.order.end(), std::size_t{0});
      shuffle(state.order, state.rng);
    }
    while (state.cursor < state.order.size()) {
      if (options.stop_after && state.iteration >= *options.stop_after) {
        snapshot();
        return state;
      }
      const std::size_t end = std::min(state.cursor + config.batch_size, state.order.size());
      batch.clear();
      for (std::size_t i = state.cursor; i < end; ++i) batch.push_back(data[state.order[i]]);

      const auto labels = sample_iteration_labels(vocab, state.rng, config.flags);
      LossGradients grads = zero_loss_gradients(encoders);
      LossBreakdown loss;
      try {
        loss = compute_loss(batch, vocab, encoders, labels, loss_opts, &grads);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kNumericsError && e.code() != ErrorCode::kNormalizationError) throw;
        throw Error(ErrorCode::kNumericsError, "iteration " + std::to_string(state.iteration + 1) + ": " + e.what() +
                                                   "; " + describe_batch(batch, labels));
      }
      step(encoders.video->parameters(), grads.video, velocity.video);
      step(encoders.text->parameters(), grads.text, velocity.text);

      state.cursor = end;
      ++state.iteration;
      IterationRecord rec{state.iteration, state.epoch, loss.l_fixed, loss.l_rand, loss.l_total};
      state.history.push_back(rec);
      if (options.metrics_log) *options.metrics_log << to_ndjson(rec) << '\n';
      if (state.cursor == state.order.size()) {
        state.cursor = 0;
        ++state.epoch;
      }
      if (options.on_iteration || (config.checkpoint_every > 0 && state.iteration % config.checkpoint_every == 0 &&
                                   !options.checkpoint_dir.empty())) {
        snapshot();
        if (options.on_iteration) options.on_iteration(state);
        if (config.checkpoint_every > 0 && state.iteration % config.checkpoint_every == 0 && !options.checkpoint_dir.empty()) {
          std::filesystem::create_directories(options.checkpoint_dir);
          save_checkpoint(state, config,
                          options.checkpoint_dir / ("checkpoint-" + std::to_string(state.iteration) + ".ckpt"));
        }
      }
      if (state.cursor == 0) break;
    }
  }
  snapshot();
  return state;
}

// --- checkpoints ---------------------------------------------------------

namespace {

constexpr std::string_view kCheckpointHeader = "ACE-CHECKPOINT v1 sha256=";

}  // namespace

void save_checkpoint(const TrainState& state, const TrainConfig& config, const std::filesystem::path& path) {
  json j;
  j["config"] = json::parse(train_config_to_json(config));
  j["vocab_hash"] = state.vocab_hash;
  j["epoch"] = state.epoch;
  j["iteration"] = state.iteration;
  j["cursor"] = state.cursor;
  j["order"] = state.order;
  std::ostringstream rng;
  rng << state.rng;
  j["rng"] = rng.str();
  j["parameters"] = json::parse(parameters_to_json(state.parameters));
  std::vector<Parameter> vel;
  for (std::size_t i = 0; i < state.velocity.size(); ++i) vel.push_back({"velocity." + std::to_string(i), state.velocity[i], true});
  j["velocity"] = json::parse(parameters_to_json(vel));
  json hist = json::array();
  for (const auto& r : state.history) hist.push_back({r.iteration, r.epoch, r.l_fixed, r.l_rand, r.l_total});
  j["history"] = std::move(hist);

  const std::string body = j.dump();
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorCode::kIngestError, "cannot write " + tmp.string());
    out << kCheckpointHeader << sha256_hex(body) << '\n' << body;
  }
  std::filesystem::rename(tmp, path);
}

TrainState load_checkpoint(const std::filesystem::path& path, const std::string& expected_vocab_hash,
                           TrainConfig* config) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIngestError, "cannot open " + path.string());
  std::string header;
  std::getline(in, header);
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string body = ss.str();
  if (!header.starts_with(kCheckpointHeader) || header.substr(kCheckpointHeader.size()) != sha256_hex(body)) {
    throw Error(ErrorCode::kChecksumError, path.string() + ": checksum mismatch or bad header");
  }
  TrainState state;
  try {
    const json j = json::parse(body);
    state.vocab_hash = j.at("vocab_hash").get<std::string>();
    if (!expected_vocab_hash.empty() && state.vocab_hash != expected_vocab_hash) {
      throw Error(ErrorCode::kVocabMismatch, path.string() + " was trained on a different vocabulary");
    }
    state.epoch = j.at("epoch").get<std::size_t>();
    state.iteration = j.at("iteration").get<std::size_t>();
    state.cursor = j.at("cursor").get<std::size_t>();
    state.order = j.at("order").get<std::vector<std::size_t>>();
    std::istringstream rng(j.at("rng").get<std::string>());
    rng >> state.rng;
    state.parameters = parameters_from_json(j.at("parameters").dump());
    for (auto& v : parameters_from_json(j.at("velocity").dump())) state.velocity.push_back(std::move(v.value));
    for (const auto& r : j.at("history")) {
      state.history.push_back({r[0].get<std::size_t>(), r[1].get<std::size_t>(), r[2].get<double>(), r[3].get<double>(),
                               r[4].get<double>()});
    }
    if (config) *config = train_config_from_json(j.at("config").dump());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kChecksumError, path.string() + ": " + e.what());
  }
  return state;
}

}  // namespace ace
