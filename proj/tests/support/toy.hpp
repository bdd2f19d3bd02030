#pragma once

// Small vocabularies and encoders for tests. Everything is built from an
// explicit seed so failures can be replayed.

#include <Eigen/Dense>

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "ace/embedding.hpp"
#include "ace/vocab.hpp"

namespace ace::testing {

// Verbs are "v<k>", first-order children "v<k>s<j>" and second-order
// children "v<k>s<j>t<l>". Objects are "o<k % objects>". m1/m2 count the
// parent node.
Vocabulary toy_vocab(std::size_t classes, int m1, int m2, std::size_t objects = 0);

// Same, but classes 2i and 2i+1 share root verb v<i> (with distinct objects).
Vocabulary shared_verb_vocab(std::size_t verbs, int m1, int m2);

// Random toy encoders: frames x feature_dim clips, hashed text with `buckets`
// rows of width `token_dim`.
EncoderPair random_encoders(std::mt19937_64& rng, Eigen::Index dim, Eigen::Index feature_dim, std::size_t buckets,
                            Eigen::Index token_dim);

std::vector<VideoSample> random_batch(std::mt19937_64& rng, std::size_t n, std::size_t classes, Eigen::Index frames,
                                      Eigen::Index feature_dim);

double gaussian(std::mt19937_64& rng);

}  // namespace ace::testing
