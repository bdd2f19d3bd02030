// Prints one PASS/FAIL line per acceptance criterion. With --criterion N
// only that one runs; the exit status is nonzero if any printed line FAILs.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ace/ace_loss.hpp"
#include "ace/errors.hpp"
#include "ace/eval.hpp"
#include "ace/synthetic.hpp"
#include "ace/trainer.hpp"
#include "gradcheck.hpp"
#include "oracle.hpp"
#include "stats.hpp"
#include "toy.hpp"

#ifndef ACE_TABLES_DIR
#error "ACE_TABLES_DIR must point at the label-table fixtures"
#endif

using namespace ace;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// --- 1 -------------------------------------------------------------------

struct HmCell {
  const char* dataset;
  const char* method;
  const char* metric;
  double seen, unseen, hm;
};

// Seen / unseen / HM triples of the default-label comparison tables.
const std::vector<HmCell>& hm_cells() {
  static const std::vector<HmCell> cells = {
      {"ATA", "ViFi (ft)", "acc", 93.1, 33.5, 49.3},   {"ATA", "ViFi (ft)", "F1", 94.2, 25.4, 40.0},
      {"ATA", "ViFi (pr)", "acc", 88.5, 41.1, 56.1},   {"ATA", "ViFi (pr)", "F1", 91.2, 29.0, 44.0},
      {"ATA", "BIKE", "acc", 93.0, 29.8, 45.1},        {"ATA", "BIKE", "F1", 92.2, 18.8, 31.2},
      {"ATA", "Text4Vis", "acc", 93.5, 38.7, 54.7},    {"ATA", "Text4Vis", "F1", 95.0, 30.4, 46.1},
      {"ATA", "ProcVLR", "acc", 89.8, 37.1, 52.5},     {"ATA", "ProcVLR", "F1", 90.1, 31.3, 46.4},
      {"ATA", "ACE", "acc", 90.0, 60.8, 72.6},         {"ATA", "ACE", "F1", 91.7, 47.3, 62.4},
      {"IKEA", "ViFi (ft)", "acc", 78.7, 44.3, 56.7},  {"IKEA", "ViFi (ft)", "F1", 61.0, 29.6, 39.9},
      {"IKEA", "ViFi (pr)", "acc", 73.8, 36.1, 48.5},  {"IKEA", "ViFi (pr)", "F1", 56.3, 20.5, 30.1},
      {"IKEA", "BIKE", "acc", 77.2, 36.5, 52.2},       {"IKEA", "BIKE", "F1", 63.7, 31.3, 43.3},
      {"IKEA", "Text4Vis", "acc", 87.6, 39.3, 54.3},   {"IKEA", "Text4Vis", "F1", 71.6, 39.4, 50.8},
      {"IKEA", "ProcVLR", "acc", 82.3, 37.0, 51.0},    {"IKEA", "ProcVLR", "F1", 62.5, 30.3, 40.8},
      {"IKEA", "ACE", "acc", 82.8, 54.5, 65.7},        {"IKEA", "ACE", "F1", 63.9, 45.5, 53.2},
      {"GTEA", "ViFi (ft)", "acc", 75.9, 27.5, 40.4},  {"GTEA", "ViFi (ft)", "F1", 72.8, 21.1, 32.7},
      {"GTEA", "ViFi (pr)", "acc", 58.4, 25.6, 35.6},  {"GTEA", "ViFi (pr)", "F1", 50.2, 13.1, 20.8},
      {"GTEA", "BIKE", "acc", 63.8, 50.0, 56.1},       {"GTEA", "BIKE", "F1", 62.5, 33.9, 43.9},
      {"GTEA", "Text4Vis", "acc", 82.2, 63.8, 71.8},   {"GTEA", "Text4Vis", "F1", 81.3, 47.4, 59.8},
      {"GTEA", "ProcVLR", "acc", 68.0, 50.3, 57.8},    {"GTEA", "ProcVLR", "F1", 64.2, 36.1, 46.2},
      {"GTEA", "ACE", "acc", 85.1, 67.2, 75.1},        {"GTEA", "ACE", "F1", 84.4, 41.0, 55.2},
  };
  return cells;
}

Outcome criterion_hm() {
  // The table prints seen/unseen to one decimal, so each input is only known
  // to +-0.05. HM is increasing in both arguments, so the reachable HM values
  // form [HM(lo, lo), HM(hi, hi)]; the printed HM must lie within 0.05 of it.
  Outcome o;
  std::size_t exact = 0, ok = 0;
  std::vector<std::string> bad;
  for (const auto& c : hm_cells()) {
    const double h = harmonic_mean(c.seen, c.unseen);
    const double lo = harmonic_mean(c.seen - 0.05, c.unseen - 0.05);
    const double hi = harmonic_mean(c.seen + 0.05, c.unseen + 0.05);
    exact += std::abs(h - c.hm) <= 0.05;
    if (c.hm >= lo - 0.05 && c.hm <= hi + 0.05) {
      ++ok;
    } else {
      bad.push_back(fmt("%s %s %s: HM(%.1f, %.1f) = %.3f vs %.1f", c.dataset, c.method, c.metric, c.seen, c.unseen, h, c.hm));
    }
  }
  o.pass = bad.empty();
  o.detail = fmt("%zu/%zu cells within 0.05 (%zu with unrounded inputs)", ok, hm_cells().size(), exact);
  for (const auto& b : bad) o.detail += "; " + b;
  return o;
}

// --- 2 -------------------------------------------------------------------

Outcome criterion_random_baseline() {
  Outcome o;
  const std::pair<const char*, std::size_t> sets[] = {{"ATA", 5}, {"IKEA", 10}, {"GTEA", 4}};
  const double want[] = {20.0, 10.0, 25.0};
  std::mt19937_64 rng(0);
  for (std::size_t i = 0; i < 3; ++i) {
    // any test label distribution over the C' novel classes
    std::vector<std::size_t> truth;
    for (std::size_t k = 0; k < sets[i].second; ++k) truth.insert(truth.end(), 1 + rng() % 30, k);
    const auto acc = random_baseline(label_distribution(truth, sets[i].second)).accuracy;
    const bool hit = std::abs(acc - want[i]) < 1e-12;
    o.pass &= hit;
    o.detail += fmt("%s%s %.4f", i ? ", " : "", sets[i].first, acc);
  }
  return o;
}

// --- 3 -------------------------------------------------------------------

// Every text embeds to the same unit vector, so every similarity is equal.
EncoderPair flat_encoders(std::mt19937_64& rng, Eigen::Index d) {
  auto enc = testing::random_encoders(rng, d, 3, 64, 3);
  auto& table = enc.text->parameters()[0].value;
  const Eigen::RowVectorXd row = table.row(0);
  for (Eigen::Index r = 0; r < table.rows(); ++r) table.row(r) = row;
  return enc;
}

Outcome criterion_loss_identities() {
  Outcome o;
  // (a) one child per tree, no shadow: the randomized term is the fixed one
  double worst_a = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    std::mt19937_64 gen(s);
    const auto v = testing::toy_vocab(2 + s % 3, 1, 0, 1 + s % 2);
    auto enc = testing::random_encoders(gen, 2 + static_cast<Eigen::Index>(s % 7), 3, 64, 3);
    const auto batch = testing::random_batch(gen, 1 + s % 4, v.size(), 2, 3);
    LossOptions opt;
    opt.flags.shadow_negatives = false;
    opt.flags.leaf_augment = s % 2 == 0;
    opt.tau = 0.02 + 0.1 * static_cast<double>(s % 5);
    Rng rng(s);
    const auto l = total_loss(batch, v, enc, rng, opt);
    worst_a = std::max(worst_a, std::abs(l.l_rand - l.l_fixed));
  }
  // (b) uniform similarities
  double worst_b = 0;
  for (std::uint64_t s = 0; s < 30; ++s) {
    std::mt19937_64 gen(100 + s);
    const std::size_t c = 2 + s % 4;
    const auto v = testing::toy_vocab(c, 3, 2, 2);
    auto enc = flat_encoders(gen, 4);
    const auto batch = testing::random_batch(gen, 1 + s % 4, c, 2, 3);
    for (bool shadow : {false, true}) {
      LossOptions opt;
      opt.flags.shadow_negatives = shadow;
      Rng rng(s);
      const auto l = total_loss(batch, v, enc, rng, opt);
      const double want = std::log(static_cast<double>(c + (shadow ? 1 : 0)));
      worst_b = std::max({worst_b, std::abs(l.l_fixed - want), std::abs(l.l_rand - want)});
    }
  }
  // (c) brute-force oracle on random toy instances and flag sets
  double worst_c = 0;
  std::size_t cases = 0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    std::mt19937_64 gen(1000 + s);
    const std::size_t c = 2 + gen() % 3;                       // C <= 4
    const int m1 = 1 + static_cast<int>(gen() % 3);            // M <= 3
    const int m2 = 1 + static_cast<int>(gen() % 3);
    const std::size_t b = 1 + gen() % 4;                       // B <= 4
    const auto d = static_cast<Eigen::Index>(2 + gen() % 7);   // D <= 8
    const auto v = gen() % 2 ? testing::toy_vocab(c, m1, m2, 1 + gen() % c) : testing::shared_verb_vocab(2, m1, m2);
    auto enc = testing::random_encoders(gen, d, 3, 256, 4);
    const auto batch = testing::random_batch(gen, b, v.size(), 1 + static_cast<Eigen::Index>(gen() % 3), 3);
    LossOptions opt;
    const auto bits = gen() % 16;
    opt.flags = {bool(bits & 1), bool(bits & 2), bool(bits & 4), bool(bits & 8)};
    if (!opt.flags.l_fixed && !opt.flags.l_rand) opt.flags.l_fixed = true;
    opt.tau = std::uniform_real_distribution<double>(0.02, 1.0)(gen);
    opt.rand_weight = 1.0;
    Rng r1(s), r2(s);
    const auto got = total_loss(batch, v, enc, r1, opt);
    const auto labels = sample_iteration_labels(v, r2, opt.flags);
    const auto want = oracle::loss(batch, v, enc, labels, opt);
    worst_c = std::max({worst_c, std::abs(got.l_total - want.l_total), std::abs(got.l_fixed - want.l_fixed),
                        std::abs(got.l_rand - want.l_rand)});
    ++cases;
  }
  o.pass = worst_a <= 1e-12 && worst_b <= 1e-9 && worst_c <= 1e-9;
  o.detail = fmt("(a) max |l_rand - l_fixed| %.2e; (b) max |l - ln C| %.2e; (c) max oracle gap %.2e over %zu seeds",
                 worst_a, worst_b, worst_c, cases);
  return o;
}

// --- 4 -------------------------------------------------------------------

Outcome criterion_gradients() {
  Outcome o;
  double worst = 0;
  std::size_t entries = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto g = testing::gradient_check(s);
    worst = std::max(worst, g.max_rel_error);
    entries += g.entries;
  }
  o.pass = worst < 1e-4;
  o.detail = fmt("max relative error %.2e over 50 instances, %zu parameter entries", worst, entries);
  return o;
}

// --- 5 -------------------------------------------------------------------

std::vector<std::string> pool_by_hand(const Vocabulary& v, std::size_t i) {
  std::set<std::string> others, own;
  for (const auto& k : v.tree_for(i).first_order()) own.insert(k);
  for (std::size_t j = 0; j < v.size(); ++j) {
    if (v.action(j).verb() == v.action(i).verb()) continue;
    for (const auto& k : v.tree_for(j).first_order()) others.insert(k);
  }
  std::vector<std::string> out;
  for (const auto& k : others)
    if (!own.count(k)) out.push_back(k);
  return out;
}

Outcome criterion_sampling() {
  Outcome o;
  // uniformity per tree, positives and shadows
  Vocabulary::TreeMap trees;
  auto flat_tree = [](const std::string& root, int m) {
    std::vector<std::string> kids;
    for (int j = 1; j < m; ++j) kids.push_back(root + "s" + std::to_string(j));
    kids.push_back(root);
    return SynonymTree(root, {{root, kids}}, 1);
  };
  trees.emplace("a", flat_tree("a", 5));
  trees.emplace("b", flat_tree("b", 3));
  trees.emplace("c", flat_tree("c", 7));
  const Vocabulary v({ActionLabel("a", "x"), ActionLabel("b", "y"), ActionLabel("c", "z")}, trees);
  const int draws = 10000;
  double min_p = 1.0;
  std::size_t pool_violations = 0, object_violations = 0;
  {
    Rng rng(2024);
    std::vector<std::map<std::string, std::size_t>> pos(3), neg(3);
    for (int n = 0; n < draws; ++n) {
      const auto p = sample_positive_labels(v, rng);
      const auto s = sample_shadow_negatives(v, rng);
      for (std::size_t i = 0; i < 3; ++i) {
        pos[i][p[i].verb()]++;
        neg[i][s[i].verb()]++;
        const auto pool = pool_by_hand(v, i);
        pool_violations += std::find(pool.begin(), pool.end(), s[i].verb()) == pool.end();
        object_violations += s[i].object() != v.action(i).object();
      }
    }
    for (std::size_t i = 0; i < 3; ++i) {
      const auto& kids = v.tree_for(i).first_order();
      std::vector<std::size_t> pc, nc;
      for (const auto& k : kids) pc.push_back(pos[i][k]);
      for (const auto& k : pool_by_hand(v, i)) nc.push_back(neg[i][k]);
      o.pass &= pos[i].size() == kids.size() && neg[i].size() == nc.size();
      min_p = std::min({min_p, testing::uniform_chi_square_p(pc), testing::uniform_chi_square_p(nc)});
    }
  }
  o.pass &= min_p >= 0.01 && pool_violations == 0 && object_violations == 0;

  // shared root verbs share the draw
  std::size_t coupling_violations = 0;
  {
    const auto sv = testing::shared_verb_vocab(3, 4, 2);
    Rng rng(7);
    for (int n = 0; n < draws; ++n) {
      const auto p = sample_positive_labels(sv, rng);
      for (std::size_t i = 0; i + 1 < p.size(); i += 2) coupling_violations += p[i].verb() != p[i + 1].verb();
    }
  }
  o.pass &= coupling_violations == 0;

  // distinct positive sets over 100 iterations against the full enumeration
  std::size_t enum_cases = 0, enum_fail = 0;
  for (int m0 = 1; m0 <= 3; ++m0) {
    for (int m1 = 1; m1 <= 3; ++m1) {
      Vocabulary::TreeMap t;
      t.emplace("p", flat_tree("p", m0));
      t.emplace("q", flat_tree("q", m1));
      const Vocabulary ev({ActionLabel("p", "x"), ActionLabel("q", "y"), ActionLabel("p", "z")}, t);
      std::set<std::vector<ActionLabel>> all;
      for (const auto& a : ev.tree("p").first_order())
        for (const auto& b : ev.tree("q").first_order())
          all.insert({ActionLabel(a, "x"), ActionLabel(b, "y"), ActionLabel(a, "z")});
      Rng rng(static_cast<std::uint64_t>(31 * m0 + m1));
      std::set<std::vector<ActionLabel>> seen;
      for (int it = 0; it < 100; ++it) seen.insert(sample_positive_labels(ev, rng));
      const bool subset = std::includes(all.begin(), all.end(), seen.begin(), seen.end());
      const auto bound = static_cast<std::size_t>(m0 * m1);
      enum_fail += !(subset && all.size() == bound && seen.size() == bound);
      ++enum_cases;
    }
  }
  o.pass &= enum_fail == 0;
  o.detail = fmt("min chi-square p %.3f over %d draws; pool violations %zu; object violations %zu; "
                 "coupling violations %zu; enumeration mismatches %zu/%zu",
                 min_p, draws, pool_violations, object_violations, coupling_violations, enum_fail, enum_cases);
  return o;
}

// --- 6 -------------------------------------------------------------------

struct VariantResult {
  double mean = 0, std = 0;
};

Outcome criterion_synthetic() {
  // Mean of the per-seed SRT mean and std over a fixed list of world seeds.
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8};
  const std::vector<std::string> variants{"all", "fixed-only", "no-leaf", "no-shadow", "no-rand", "no-fixed"};
  std::map<std::string, VariantResult> r;
  for (auto seed : seeds) {
    SyntheticConfig sc;
    sc.seed = seed;
    const auto data = generate_synthetic_dataset(sc);
    const auto& ds = data.dataset;
    const auto train_set = ds.samples(Split::kTrain, ClassGroup::kBase);
    const auto test = ds.samples(Split::kTest, ClassGroup::kNovel);
    const auto base = ds.base_vocab();
    const auto novel = ds.novel_vocab();
    for (const auto& name : variants) {
      auto enc = make_toy_encoders(data.pretrained);
      TrainConfig tc;
      tc.seed = seed * 101;
      tc.flags = parse_flags(name);
      train(tc, train_set, base, enc);
      EvalConfig ec;
      ec.seed = seed * 7 + 3;
      ec.leaf_augment = tc.flags.leaf_augment;
      const auto rep = srt(ec, enc, novel, test);
      r[name].mean += rep.mean.accuracy / static_cast<double>(seeds.size());
      r[name].std += rep.std.accuracy / static_cast<double>(seeds.size());
    }
  }
  Outcome o;
  const auto& full = r["all"];
  const auto& fixed = r["fixed-only"];
  const bool baseline_band = fixed.mean >= 40.0 && fixed.mean <= 70.0;
  const bool beats = full.mean > fixed.mean && full.std < fixed.std;
  o.pass = baseline_band && beats;
  o.detail = fmt("all %.2f+-%.2f, fixed-only %.2f+-%.2f (band %s, full better %s)", full.mean, full.std, fixed.mean,
                 fixed.std, baseline_band ? "ok" : "MISS", beats ? "yes" : "NO");
  for (const char* name : {"no-leaf", "no-shadow", "no-rand", "no-fixed"}) {
    const bool ok = r[name].mean <= full.mean;
    o.pass &= ok;
    o.detail += fmt("; %s %.2f+-%.2f %s", name, r[name].mean, r[name].std, ok ? "<= all" : "> all");
  }
  return o;
}

// --- 7 -------------------------------------------------------------------

// Vocabulary for a label table: the object of a class is the longest common
// word suffix of its labels, each class's tree holds every verb seen for it.
Vocabulary vocab_from_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  std::map<std::size_t, std::vector<std::vector<std::string>>> labels;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string run, idx, text;
    std::getline(ss, run, ',');
    std::getline(ss, idx, ',');
    std::getline(ss, text);
    labels[std::stoul(idx)].push_back(tokenize(text));
  }
  std::vector<ActionLabel> actions;
  std::map<std::string, std::vector<std::string>> verbs;
  for (const auto& [k, ls] : labels) {
    std::size_t common = ls[0].size() - 1;
    for (const auto& l : ls) {
      std::size_t n = 0;
      while (n < common && n < l.size() - 1 && l[l.size() - 1 - n] == ls[0][ls[0].size() - 1 - n]) ++n;
      common = n;
    }
    auto join = [](auto b, auto e) {
      std::string s;
      for (auto it = b; it != e; ++it) s += (s.empty() ? "" : " ") + *it;
      return s;
    };
    const auto& root = ls[0];
    actions.emplace_back(join(root.begin(), root.end() - static_cast<long>(common)),
                         join(root.end() - static_cast<long>(common), root.end()));
    auto& kids = verbs[actions.back().verb()];
    for (const auto& l : ls) {
      const auto verb = join(l.begin(), l.end() - static_cast<long>(common));
      if (verb != actions.back().verb() && std::find(kids.begin(), kids.end(), verb) == kids.end()) kids.push_back(verb);
    }
  }
  Vocabulary::TreeMap trees;
  for (auto& [verb, kids] : verbs) {
    kids.push_back(verb);
    trees.emplace(verb, SynonymTree(verb, {{verb, kids}}, 1));
  }
  return Vocabulary(actions, trees);
}

Outcome criterion_srt() {
  Outcome o;
  SyntheticConfig sc;
  sc.seed = 3;
  const auto data = generate_synthetic_dataset(sc);
  const auto enc = make_toy_encoders(data.pretrained);
  const auto novel = data.dataset.novel_vocab();
  const auto test = data.dataset.samples(Split::kTest, ClassGroup::kNovel);
  EvalConfig ec;
  ec.seed = 99;
  const auto a = srt(ec, enc, novel, test);
  const auto b = srt(ec, enc, novel, test);
  bool same_labels = a.runs.size() == b.runs.size();
  for (std::size_t r = 0; same_labels && r < a.runs.size(); ++r) same_labels = a.runs[r].labels == b.runs[r].labels;
  const bool same_report = srt_report_json(a) == srt_report_json(b) && srt_summary_csv(a) == srt_summary_csv(b);
  o.pass = same_labels && same_report && a.runs.size() == 10;
  o.detail = fmt("equal-seed label sets %s, reports %s", same_labels ? "identical" : "DIFFER", same_report ? "identical" : "DIFFER");

  const std::pair<const char*, std::size_t> tables[] = {{"ata_srt.csv", 5}, {"ikea_srt.csv", 10}, {"gtea_srt.csv", 4}};
  for (const auto& [file, classes] : tables) {
    const auto path = std::filesystem::path(ACE_TABLES_DIR) / file;
    std::string msg;
    try {
      const auto v = vocab_from_table(path);
      const auto sets = load_label_table(path, v, 10);
      std::size_t rows = 0;
      for (const auto& s : sets) rows += s.size();
      const bool ok = v.size() == classes && sets.size() == 10 && rows == 10 * classes;
      o.pass &= ok;
      msg = fmt("%s %zux%zu", file, sets.size(), v.size());
    } catch (const std::exception& e) {
      o.pass = false;
      msg = std::string(file) + " error: " + e.what();
    }
    o.detail += "; " + msg;
  }
  return o;
}

// --- 8 -------------------------------------------------------------------

Outcome criterion_metric_oracle() {
  Outcome o;
  std::mt19937_64 rng(8);
  std::size_t mismatches = 0, with_empty = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t k = 1 + rng() % 8;
    const std::size_t n = 1 + rng() % 40;
    std::vector<std::size_t> p(n), t(n);
    // bias predictions so some classes are never predicted
    const std::size_t pred_span = 1 + rng() % k;
    for (std::size_t j = 0; j < n; ++j) {
      t[j] = rng() % k;
      p[j] = rng() % 3 == 0 ? t[j] : rng() % pred_span;
    }
    std::set<std::size_t> predicted(p.begin(), p.end()), present(t.begin(), t.end());
    with_empty += std::any_of(present.begin(), present.end(), [&](std::size_t c) { return !predicted.count(c); });
    const auto got = metrics(p, t, k);
    const auto want = oracle::confusion_scores(p, t, k);
    mismatches += std::abs(got.accuracy - want.accuracy) > 1e-9 || std::abs(got.macro_f1 - want.macro_f1) > 1e-9;
  }
  o.pass = mismatches == 0 && with_empty > 0;
  o.detail = fmt("%zu mismatches over 1000 cases (%zu with a never-predicted class)", mismatches, with_empty);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"harmonic mean table cells", criterion_hm},
      {"random baseline accuracy", criterion_random_baseline},
      {"loss identities and oracle", criterion_loss_identities},
      {"gradient check", criterion_gradients},
      {"sampling contracts", criterion_sampling},
      {"synthetic benefit", criterion_synthetic},
      {"srt determinism and label tables", criterion_srt},
      {"metric oracle", criterion_metric_oracle},
  };
  int only = 0;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0) only = std::atoi(argv[i + 1]);
  }
  if (only < 0 || only > static_cast<int>(criteria.size())) {
    std::fprintf(stderr, "--criterion must be 1..%zu\n", criteria.size());
    return 2;
  }
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only != 0 && static_cast<int>(i + 1) != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %zu %s: %s [%.2fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
