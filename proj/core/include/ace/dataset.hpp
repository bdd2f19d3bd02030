#pragma once

// On-disk dataset layout (one directory):
//   features.bin   float32 clip features with a self-describing header
//   labels.csv     clip_id,label_index   (index into vocab.json actions)
//   vocab.json     full vocabulary (base and novel actions with trees)
//   manifest.json  base/novel class lists, clip splits, verb frequencies

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ace/embedding.hpp"
#include "ace/vocab.hpp"

namespace ace {

enum class Split { kTrain, kTest };
enum class ClassGroup { kBase, kNovel };

struct FeatureTensor {
  std::uint64_t rows = 0;
  std::uint64_t frames = 0;
  std::uint64_t dim = 0;
  std::vector<float> data;  // rows x frames x dim, row-major

  Eigen::MatrixXd clip(std::size_t row) const;
  friend bool operator==(const FeatureTensor&, const FeatureTensor&) = default;
};

inline constexpr char kFeatureMagic[8] = {'A', 'C', 'E', 'F', 'E', 'A', 'T', '\0'};
inline constexpr std::uint32_t kFeatureVersion = 1;

void write_features(const FeatureTensor& features, const std::filesystem::path& path);
FeatureTensor read_features(const std::filesystem::path& path);

struct ClipRecord {
  std::string clip_id;
  std::size_t row = 0;  // position in features.bin
  std::size_t label_index = 0;
  std::string verb;
  std::string object;
  Split split = Split::kTrain;
  std::string dataset_id;
};

struct SplitManifest {
  std::string dataset_id;
  std::vector<std::size_t> base_classes;
  std::vector<std::size_t> novel_classes;
  std::vector<std::string> train_clips;
  std::vector<std::string> test_clips;
  std::map<std::string, std::size_t> verb_frequencies;

  friend bool operator==(const SplitManifest&, const SplitManifest&) = default;
};

/// Root-verb occurrence counts over train-split clips (lowercased verbs).
std::map<std::string, std::size_t> compute_verb_frequencies(std::span<const ClipRecord> records);

struct Dataset {
  Vocabulary vocab;
  std::vector<ClipRecord> records;
  FeatureTensor features;
  SplitManifest manifest;

  Vocabulary base_vocab() const { return vocab.subset(manifest.base_classes); }
  Vocabulary novel_vocab() const { return vocab.subset(manifest.novel_classes); }
  Vocabulary group_vocab(ClassGroup group) const { return group == ClassGroup::kBase ? base_vocab() : novel_vocab(); }

  /// Clips of `split` whose class is in `group`, labelled with the class's
  /// position in that group's class list.
  std::vector<VideoSample> samples(Split split, ClassGroup group) const;
};

/// Validates every cross-file invariant. A recomputed verb-frequency table
/// that disagrees with the manifest is reported as a StaleManifest warning.
Dataset load_dataset(const std::filesystem::path& root, std::vector<std::string>* warnings = nullptr);
void save_dataset(const Dataset& dataset, const std::filesystem::path& root);

/// SHA-256 over the four dataset files.
std::string dataset_hash(const std::filesystem::path& root);

}  // namespace ace
