#include "ace/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "ace/errors.hpp"
#include "ace/hash.hpp"
#include "json.hpp"

namespace ace {

using json = nlohmann::ordered_json;

namespace {

constexpr const char* kFeaturesFile = "features.bin";
constexpr const char* kLabelsFile = "labels.csv";
constexpr const char* kVocabFile = "vocab.json";
constexpr const char* kManifestFile = "manifest.json";

template <typename T>
void put_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw Error(ErrorCode::kIngestError, "truncated features file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIngestError, "missing or unreadable " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIngestError, "cannot write " + path.string());
  out << text;
}

std::string manifest_to_json(const SplitManifest& m) {
  json doc;
  doc["dataset_id"] = m.dataset_id;
  doc["base_classes"] = m.base_classes;
  doc["novel_classes"] = m.novel_classes;
  doc["train_clips"] = m.train_clips;
  doc["test_clips"] = m.test_clips;
  json freq = json::object();
  for (const auto& [verb, n] : m.verb_frequencies) freq[verb] = n;
  doc["verb_frequencies"] = std::move(freq);
  return doc.dump(2) + "\n";
}

SplitManifest manifest_from_json(std::string_view text) {
  try {
    const json doc = json::parse(text);
    SplitManifest m;
    m.dataset_id = doc.value("dataset_id", "");
    m.base_classes = doc.at("base_classes").get<std::vector<std::size_t>>();
    m.novel_classes = doc.at("novel_classes").get<std::vector<std::size_t>>();
    m.train_clips = doc.at("train_clips").get<std::vector<std::string>>();
    m.test_clips = doc.at("test_clips").get<std::vector<std::string>>();
    if (doc.contains("verb_frequencies")) {
      for (const auto& [verb, n] : doc["verb_frequencies"].items()) m.verb_frequencies[verb] = n.get<std::size_t>();
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaError, std::string("manifest: ") + e.what());
  }
}

std::string labels_to_csv(const std::vector<ClipRecord>& records) {
  std::string out = "clip_id,label_index\n";
  for (const auto& r : records) out += r.clip_id + "," + std::to_string(r.label_index) + "\n";
  return out;
}

std::vector<std::pair<std::string, std::size_t>> labels_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "clip_id,label_index") throw Error(ErrorCode::kSchemaError, "labels.csv: expected header 'clip_id,label_index'");
  std::vector<std::pair<std::string, std::size_t>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || comma == 0) {
      throw Error(ErrorCode::kSchemaError, "labels.csv:" + std::to_string(lineno) + ": malformed row");
    }
    const std::string idx = line.substr(comma + 1);
    if (idx.empty() || !std::all_of(idx.begin(), idx.end(), [](unsigned char ch) { return std::isdigit(ch); })) {
      throw Error(ErrorCode::kSchemaError, "labels.csv:" + std::to_string(lineno) + ": bad label index '" + idx + "'");
    }
    rows.emplace_back(line.substr(0, comma), std::stoul(idx));
  }
  return rows;
}

}  // namespace

Eigen::MatrixXd FeatureTensor::clip(std::size_t row) const {
  if (row >= rows) throw Error(ErrorCode::kShapeError, "feature row " + std::to_string(row) + " out of range");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(dim));
  const float* base = data.data() + row * frames * dim;
  for (std::uint64_t f = 0; f < frames; ++f) {
    for (std::uint64_t k = 0; k < dim; ++k) m(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(k)) = base[f * dim + k];
  }
  return m;
}

void write_features(const FeatureTensor& features, const std::filesystem::path& path) {
  if (features.data.size() != features.rows * features.frames * features.dim) {
    throw Error(ErrorCode::kShapeError, "feature tensor data does not match its shape");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIngestError, "cannot write " + path.string());
  out.write(kFeatureMagic, sizeof(kFeatureMagic));
  put_le<std::uint32_t>(out, kFeatureVersion);
  put_le<std::uint32_t>(out, 0);
  put_le<std::uint64_t>(out, features.rows);
  put_le<std::uint64_t>(out, features.frames);
  put_le<std::uint64_t>(out, features.dim);
  for (float v : features.data) put_le<float>(out, v);
}

FeatureTensor read_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIngestError, "missing or unreadable " + path.string());
  char magic[sizeof(kFeatureMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kFeatureMagic, sizeof(magic)) != 0) {
    throw Error(ErrorCode::kIngestError, path.string() + ": bad magic");
  }
  const auto version = get_le<std::uint32_t>(in);
  if (version != kFeatureVersion) throw Error(ErrorCode::kIngestError, path.string() + ": unsupported version " + std::to_string(version));
  (void)get_le<std::uint32_t>(in);
  FeatureTensor t;
  t.rows = get_le<std::uint64_t>(in);
  t.frames = get_le<std::uint64_t>(in);
  t.dim = get_le<std::uint64_t>(in);
  const std::uint64_t n = t.rows * t.frames * t.dim;
  t.data.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) t.data[i] = get_le<float>(in);
  if (in.peek() != std::char_traits<char>::eof()) throw Error(ErrorCode::kIngestError, path.string() + ": trailing bytes");
  return t;
}

std::map<std::string, std::size_t> compute_verb_frequencies(std::span<const ClipRecord> records) {
  std::map<std::string, std::size_t> freq;
  for (const auto& r : records) {
    if (r.split == Split::kTrain) ++freq[to_lower(r.verb)];
  }
  return freq;
}

std::vector<VideoSample> Dataset::samples(Split split, ClassGroup group) const {
  const auto& classes = group == ClassGroup::kBase ? manifest.base_classes : manifest.novel_classes;
  std::unordered_map<std::size_t, std::size_t> local;
  for (std::size_t i = 0; i < classes.size(); ++i) local.emplace(classes[i], i);
  std::vector<VideoSample> out;
  for (const auto& r : records) {
    if (r.split != split) continue;
    auto it = local.find(r.label_index);
    if (it == local.end()) continue;
    out.push_back({features.clip(r.row), it->second, r.clip_id});
  }
  return out;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& root) {
  std::filesystem::create_directories(root);
  write_features(dataset.features, root / kFeaturesFile);
  write_text(root / kLabelsFile, labels_to_csv(dataset.records));
  save_vocabulary(dataset.vocab, root / kVocabFile);
  write_text(root / kManifestFile, manifest_to_json(dataset.manifest));
}

Dataset load_dataset(const std::filesystem::path& root, std::vector<std::string>* warnings) {
  for (const char* f : {kFeaturesFile, kLabelsFile, kVocabFile, kManifestFile}) {
    if (!std::filesystem::exists(root / f)) throw Error(ErrorCode::kIngestError, "dataset is missing " + (root / f).string());
  }
  auto features = read_features(root / kFeaturesFile);
  auto vocab = load_vocabulary(root / kVocabFile);
  auto manifest = manifest_from_json(read_text(root / kManifestFile));
  const auto labels = labels_from_csv(read_text(root / kLabelsFile));

  if (labels.size() != features.rows) {
    throw Error(ErrorCode::kSchemaError, "labels.csv has " + std::to_string(labels.size()) + " rows but features.bin has " +
                                             std::to_string(features.rows));
  }

  auto check_classes = [&](const std::vector<std::size_t>& classes, const char* what) {
    std::set<std::size_t> seen;
    for (auto c : classes) {
      if (c >= vocab.size()) throw Error(ErrorCode::kSchemaError, std::string(what) + " class " + std::to_string(c) + " out of range");
      if (!seen.insert(c).second) throw Error(ErrorCode::kSchemaError, std::string(what) + " class " + std::to_string(c) + " repeated");
    }
    return seen;
  };
  const auto base = check_classes(manifest.base_classes, "base");
  const auto novel = check_classes(manifest.novel_classes, "novel");
  for (auto c : base) {
    if (novel.contains(c)) {
      throw Error(ErrorCode::kSchemaError, "class " + std::to_string(c) + " ('" + vocab.action(c).text() +
                                               "') is in both base and novel sets");
    }
  }

  std::unordered_map<std::string, Split> split_of;
  for (const auto& id : manifest.train_clips) split_of.emplace(id, Split::kTrain);
  for (const auto& id : manifest.test_clips) {
    if (!split_of.emplace(id, Split::kTest).second) throw Error(ErrorCode::kSchemaError, "clip '" + id + "' is in both splits");
  }

  Dataset ds{std::move(vocab), {}, std::move(features), std::move(manifest)};
  std::set<std::string> ids;
  for (std::size_t row = 0; row < labels.size(); ++row) {
    const auto& [id, label] = labels[row];
    if (!ids.insert(id).second) throw Error(ErrorCode::kSchemaError, "duplicate clip id '" + id + "'");
    if (label >= ds.vocab.size()) {
      throw Error(ErrorCode::kSchemaError, "clip '" + id + "' references unknown action " + std::to_string(label));
    }
    auto it = split_of.find(id);
    if (it == split_of.end()) throw Error(ErrorCode::kSchemaError, "clip '" + id + "' is not assigned to a split");
    if (it->second == Split::kTest && !base.contains(label) && !novel.contains(label)) {
      throw Error(ErrorCode::kSchemaError, "test clip '" + id + "' has a class outside base and novel sets");
    }
    const auto& action = ds.vocab.action(label);
    ds.records.push_back({id, row, label, action.verb(), action.object(), it->second, ds.manifest.dataset_id});
  }
  if (split_of.size() != ids.size()) throw Error(ErrorCode::kSchemaError, "manifest lists clips missing from labels.csv");

  if (compute_verb_frequencies(ds.records) != ds.manifest.verb_frequencies && warnings) {
    warnings->push_back("StaleManifest: verb frequencies differ from the training clips");
  }
  return ds;
}

std::string dataset_hash(const std::filesystem::path& root) {
  std::string all;
  for (const char* f : {kFeaturesFile, kLabelsFile, kVocabFile, kManifestFile}) all += sha256_hex(read_text(root / f));
  return sha256_hex(all);
}

}  // namespace ace
