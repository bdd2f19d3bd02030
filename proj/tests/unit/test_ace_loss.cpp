#include "doctest.h"

#include <cmath>

#include "ace/ace_loss.hpp"
#include "ace/errors.hpp"
#include "oracle.hpp"
#include "toy.hpp"

using namespace ace;

namespace {

// Two-dimensional world: token "a" -> e1, "b" -> e2, "c" -> (0.5, sqrt(.75)),
// object token "o" -> 0. Buckets are checked to be distinct.
EncoderPair plane() {
  const std::size_t buckets = 4096;
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(buckets, 2);
  auto row = [&](const char* t) { return static_cast<Eigen::Index>(HashedBagTextEncoder::bucket(t, buckets)); };
  REQUIRE(std::set<Eigen::Index>{row("a"), row("b"), row("c"), row("o")}.size() == 4);
  table.row(row("a")) << 1, 0;
  table.row(row("b")) << 0, 1;
  table.row(row("c")) << 0.5, std::sqrt(0.75);
  std::vector<Parameter> params{{kVideoProjection, Eigen::MatrixXd::Identity(2, 2), true},
                                {kTextTokenTable, table, false},
                                {kTextProjection, Eigen::MatrixXd::Identity(2, 2), true}};
  return make_toy_encoders(params);
}

Vocabulary plane_vocab() {
  Vocabulary::TreeMap trees;
  trees.emplace("a", SynonymTree("a", {{"a", {"b", "a"}}}, 1));
  trees.emplace("c", SynonymTree("c", {{"c", {"c"}}}, 1));
  return Vocabulary({ActionLabel("a", "o"), ActionLabel("c", "o")}, trees);
}

Embedding e1() { return normalize(Eigen::Vector2d(1, 0)); }

}  // namespace

TEST_CASE("similarity") {
  const auto enc = plane();
  const auto v = plane_vocab();
  // children of a: b (0,1) and a (1,0)
  CHECK(similarity(e1(), ActionLabel("a", "o"), v, 0, true, 0.02, *enc.text) == doctest::Approx(25.0).epsilon(1e-12));
  // all children equal to the video embedding
  Vocabulary::TreeMap same;
  same.emplace("a", SynonymTree("a", {{"a", {"a"}}}, 1));
  same.emplace("c", SynonymTree("c", {{"c", {"c"}}}, 1));
  const Vocabulary sv({ActionLabel("a", "o"), ActionLabel("c", "o")}, same);
  CHECK(similarity(e1(), ActionLabel("a", "o"), sv, 0, true, 0.02, *enc.text) == doctest::Approx(50.0).epsilon(1e-12));
  // no augmentation, cosine 0.5, tau 0.5
  CHECK(similarity(e1(), ActionLabel("c", "o"), v, 1, false, 0.5, *enc.text) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(similarity(e1(), ActionLabel("a", "o"), v, 0, true, 0.0, *enc.text), Error);
}

TEST_CASE("column resolution") {
  const auto v = testing::toy_vocab(2, 3, 2);
  auto col = resolve_column(ActionLabel("v0", "o0"), v, 0, true, ColumnSource::kRoot);
  CHECK(col.texts == std::vector<std::string>{"v0s1 o0", "v0s2 o0", "v0 o0"});
  // a first-order node resolves to its own second-order children
  col = resolve_column(ActionLabel("v0s1", "o0"), v, 0, true, ColumnSource::kSampledSynonym);
  CHECK(col.texts == std::vector<std::string>{"v0s1t1 o0", "v0s1 o0"});
  // shadow verbs come from other trees
  col = resolve_column(ActionLabel("v1s2", "o0"), v, 0, true, ColumnSource::kShadowNegative);
  CHECK(col.texts == std::vector<std::string>{"v1s2t1 o0", "v1s2 o0"});
  // leaves and the plain mode use the label alone
  CHECK(resolve_column(ActionLabel("v0s1t1", "o0"), v, 0, true, ColumnSource::kQuery).texts ==
        std::vector<std::string>{"v0s1t1 o0"});
  CHECK(resolve_column(ActionLabel("v0", "o0"), v, 0, false, ColumnSource::kRoot).texts ==
        std::vector<std::string>{"v0 o0"});
}

TEST_CASE("class probabilities") {
  const std::vector<double> s{2.0, 0.0};
  const auto p = class_probabilities(s);
  CHECK(p.probs[0] == doctest::Approx(std::exp(2.0) / (std::exp(2.0) + 1)).epsilon(1e-14));
  CHECK(p.probs[0] == doctest::Approx(0.88080).epsilon(1e-5));
  CHECK(p.shadow == 0.0);

  const std::vector<double> flat(4, 3.0);
  for (double q : class_probabilities(flat).probs) CHECK(q == doctest::Approx(0.25).epsilon(1e-14));
  const auto with = class_probabilities(flat, 3.0);
  for (double q : with.probs) CHECK(q == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(with.shadow == doctest::Approx(0.2).epsilon(1e-14));

  // large similarities stay finite
  const std::vector<double> big{1e4, 0.0};
  CHECK(std::isfinite(class_probabilities(big).probs[1]));
}

TEST_CASE("loss_fixed values") {
  SimilarityMatrix m;
  m.values.resize(1, 2);
  m.values << 2.0, 0.0;
  const std::vector<std::size_t> y{0};
  CHECK(loss_fixed(m, y) == doctest::Approx(-std::log(std::exp(2.0) / (std::exp(2.0) + 1))).epsilon(1e-13));
  CHECK(loss_fixed(m, y) == doctest::Approx(0.12693).epsilon(1e-4));

  m.values << 50.0, 0.0;
  CHECK(loss_fixed(m, y) < 1e-9);

  m.values = Eigen::MatrixXd::Constant(3, 5, 0.7);
  const std::vector<std::size_t> y3{0, 4, 2};
  CHECK(loss_fixed(m, y3) == doctest::Approx(std::log(5.0)).epsilon(1e-13));
  const Eigen::VectorXd shadow = Eigen::VectorXd::Constant(3, 0.7);
  CHECK(loss_fixed(m, y3, &shadow) == doctest::Approx(std::log(6.0)).epsilon(1e-13));
  CHECK(loss_rand(m, y3, &shadow) == loss_fixed(m, y3, &shadow));
}

TEST_CASE("degenerate trees make both terms equal") {
  std::mt19937_64 gen(8);
  const auto v = testing::toy_vocab(3, 1, 0);
  auto enc = testing::random_encoders(gen, 4, 3, 64, 3);
  const auto batch = testing::random_batch(gen, 4, 3, 2, 3);
  Rng rng(1);
  LossOptions o;
  o.flags.shadow_negatives = false;
  const auto l = total_loss(batch, v, enc, rng, o);
  CHECK(std::abs(l.l_rand - l.l_fixed) < 1e-12);
}

TEST_CASE("flags") {
  std::mt19937_64 gen(9);
  const auto v = testing::toy_vocab(3, 3, 2);
  auto enc = testing::random_encoders(gen, 4, 3, 64, 3);
  const auto batch = testing::random_batch(gen, 4, 3, 2, 3);

  LossOptions all;
  Rng r1(2);
  const auto full = total_loss(batch, v, enc, r1, all);
  CHECK(full.l_total == full.l_fixed + full.l_rand);

  LossOptions norand;
  norand.flags.l_rand = false;
  Rng r2(2);
  auto g = zero_loss_gradients(enc);
  const auto nr = total_loss(batch, v, enc, r2, norand, &g);
  CHECK(nr.l_rand == 0.0);
  CHECK(nr.rand_log_probs.empty());
  CHECK(nr.l_total == nr.l_fixed);

  // no shadow, no rand: plain softmax over the root columns
  LossOptions plain;
  plain.flags = {false, false, false, true};
  Rng r3(2);
  const auto p = total_loss(batch, v, enc, r3, plain);
  double expect = 0;
  for (const auto& s : batch) {
    std::vector<double> row;
    for (std::size_t k = 0; k < v.size(); ++k) row.push_back(similarity(enc.video->encode(s), v.action(k), v, k, false, plain.tau, *enc.text));
    expect -= std::log(class_probabilities(row).probs[s.label_index]);
  }
  CHECK(p.l_fixed == doctest::Approx(expect / 4).epsilon(1e-12));
}

TEST_CASE("loss matches the oracle") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 gen(seed);
    const auto v = testing::toy_vocab(2 + seed % 3, 1 + static_cast<int>(seed % 3), 2, 2);
    auto enc = testing::random_encoders(gen, 5, 4, 128, 4);
    const auto batch = testing::random_batch(gen, 1 + seed % 4, v.size(), 3, 4);
    LossOptions o;
    o.tau = 0.1;
    Rng rng(seed);
    const auto labels = sample_iteration_labels(v, rng, o.flags);
    const auto got = compute_loss(batch, v, enc, labels, o);
    const auto want = oracle::loss(batch, v, enc, labels, o);
    CHECK(got.l_fixed == doctest::Approx(want.l_fixed).epsilon(1e-10));
    CHECK(got.l_rand == doctest::Approx(want.l_rand).epsilon(1e-10));
  }
}

TEST_CASE("loss input errors") {
  std::mt19937_64 gen(10);
  const auto v = testing::toy_vocab(3, 2, 2);
  auto enc = testing::random_encoders(gen, 4, 3, 64, 3);
  auto batch = testing::random_batch(gen, 2, 3, 2, 3);
  Rng rng(1);
  LossOptions o;
  o.tau = 0;
  CHECK_THROWS_AS(total_loss(batch, v, enc, rng, o), Error);
  o.tau = 0.02;
  batch[0].label_index = 7;
  CHECK_THROWS_AS(total_loss(batch, v, enc, rng, o), Error);
  CHECK_THROWS_AS(total_loss(std::span<const VideoSample>{}, v, enc, rng, o), Error);
}
