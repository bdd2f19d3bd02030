#pragma once

// Synthetic concept world for desk-scale runs. Every action concept owns a
// latent verb vector. Its root verb and synonyms are tokens whose embeddings
// are [concept part ; lexical part ; 0]: the concept part scatters around the
// latent, the lexical part is a per-token surface-form vector that clips
// never show. Objects are shared between concepts and embed as [0 ; 0 ; o].
// Clip features are [verb latent ; object latent] plus Gaussian noise per
// frame. The "pretrained" text projection is a distorted copy of the video
// projection that also leaks the lexical part into the shared space, so a
// label's wording moves its embedding.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ace/dataset.hpp"
#include "ace/embedding.hpp"

namespace ace {

struct SyntheticConfig {
  std::size_t base_classes = 10;
  std::size_t novel_classes = 5;
  std::size_t samples_per_class = 50;       // train clips per base class
  std::size_t test_samples_per_class = 60;  // test clips per base and novel class
  std::size_t frames = 4;
  double noise_sigma = 0.8;  // per-frame feature noise

  std::size_t verb_dim = 12;
  std::size_t object_dim = 6;
  std::size_t objects = 2;  // shared object pool; class k uses object k % objects
  std::size_t novel_objects = 0;  // if > 0, novel class j uses object j % novel_objects instead
  std::vector<int> m_per_level{4, 4};

  double root_noise = 0.2;          // root verb token spread around the concept latent
  double synonym_noise = 0.3;       // first-order synonyms
  double second_order_noise = 0.3;  // second-order synonyms, relative to their parent
  double text_distortion = 1.0;     // pretrained text projection = video projection * (I + distortion)
  std::size_t lexical_dim = 16;     // surface-form part of each verb token
  double lexical_noise = 1.0;       // norm scale of a token's lexical vector
  double lexical_leak = 2.0;        // gain of the pretrained text projection on the lexical part

  std::size_t embedding_dim = 32;
  std::size_t hash_buckets = 4096;
  std::uint64_t seed = 7;
};

struct SyntheticData {
  Dataset dataset;                       // base classes first, then novel
  std::vector<Parameter> pretrained;     // toy encoder weights
};

/// Deterministic under `config.seed`. Throws ConfigError for sigma < 0,
/// fewer than 2 base or novel classes, or an empty tree level. An
/// embedding_dim below verb_dim + object_dim is allowed; the projection then
/// has orthonormal rows instead of columns.
SyntheticData generate_synthetic_dataset(const SyntheticConfig& config);

}  // namespace ace
