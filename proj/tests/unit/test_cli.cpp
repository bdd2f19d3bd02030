#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ace/trainer.hpp"
#include "ace/vocab.hpp"
#include "cli.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result ace_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = ace::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const char* name) {
  auto p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("train help lists every config key") {
  const auto r = ace_run({"train", "--help"});
  CHECK(r.code == 0);
  for (const auto& key : ace::train_config_keys()) {
    CHECK_MESSAGE(r.out.find("[config key: " + key + ";") != std::string::npos, key);
  }
}

TEST_CASE("synth-data help lists every generator key") {
  const auto r = ace_run({"synth-data", "--help"});
  CHECK(r.code == 0);
  for (const char* key : {"base_classes", "novel_classes", "samples_per_class", "test_samples_per_class", "frames",
                          "noise_sigma", "verb_dim", "object_dim", "objects", "novel_objects", "m_per_level",
                          "root_noise", "synonym_noise", "second_order_noise", "text_distortion", "lexical_dim",
                          "lexical_noise", "lexical_leak", "embedding_dim", "hash_buckets", "seed"}) {
    CHECK_MESSAGE(r.out.find(std::string("[config key: ") + key + ";") != std::string::npos, key);
  }
}

TEST_CASE("usage errors") {
  CHECK(ace_run({}).code == 2);
  CHECK(ace_run({"build-trees", "--out", "x.json"}).code == 2);
  CHECK(ace_run({"frobnicate"}).code == 2);
  CHECK(ace_run({"--version"}).code == 0);
}

TEST_CASE("validate exit codes") {
  const auto dir = scratch("ace_cli_validate");
  const auto good = dir / "good.json";
  const auto bad = dir / "bad.json";
  {
    std::ofstream(good) << R"({"actions": [{"verb": "spin", "object": "block"}, {"verb": "hammer", "object": "pin"}],
 "trees": {"spin": {"children": {"spin": ["rotate", "spin"]}, "depth": 1},
           "hammer": {"children": {"hammer": ["pound", "hammer"]}, "depth": 1}}})";
    std::ofstream(bad) << R"({"actions": [{"verb": "spin", "object": "block"}, {"verb": "hammer", "object": "pin"}],
 "trees": {"spin": {"children": {"spin": ["rotate"]}, "depth": 1}}})";
  }
  CHECK(ace_run({"validate", "--vocab", good.string()}).code == 0);
  const auto r = ace_run({"validate", "--vocab", bad.string()});
  CHECK(r.code == 3);
  CHECK(r.out.find("bad.json:") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("offline build-trees") {
  const auto dir = scratch("ace_cli_build");
  const auto roots = dir / "roots.json";
  {
    std::ofstream(roots) << R"({"actions": [{"verb": "drop", "object": "item"}, {"verb": "hammer", "object": "pin"},
 {"verb": "spin", "object": "block"}]})";
  }
  const std::string table = std::string(ACE_TABLES_DIR) + "/ata_srt.csv";
  const auto out = dir / "trees" / "vocab.json";
  auto r = ace_run({"build-trees", "--vocab", roots.string(), "--out", out.string(), "--offline", "true",
                    "--offline-file", table, "--m-level1", "4", "--m-level2", "0"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto v = ace::load_vocabulary(out);
  CHECK(v.tree("drop").first_order().size() == 4);
  const auto man = json::parse(slurp(out.string() + ".manifest.json"));
  CHECK(man["hashes"]["network_calls"] == 0);
  CHECK(man["config_sources"]["m_level1"] == "flag");
  CHECK(man["config_sources"]["domain_hint"] == "default");

  // no offline answers at all: a service error
  r = ace_run({"build-trees", "--vocab", roots.string(), "--out", (dir / "x" / "v.json").string(), "--offline", "true"});
  CHECK(r.code == 5);
  fs::remove_all(dir);
}

TEST_CASE("pipeline") {
  const auto dir = scratch("ace_cli_pipeline");
  const auto data = (dir / "data").string();
  auto r = ace_run({"synth-data", "--out", data, "--samples-per-class", "8", "--test-samples-per-class", "4",
                    "--base-classes", "4", "--novel-classes", "3", "--seed", "2"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(fs::exists(fs::path(data) / "pretrained.json"));
  CHECK(fs::exists(fs::path(data) / "run_manifest.json"));

  const auto cfg = dir / "train.json";
  std::ofstream(cfg) << R"({"epochs": 2, "tau": 0.05, "batch_size": 4})";
  const auto run1 = (dir / "run1").string();
  r = ace_run({"train", "--data", data, "--out", run1, "--config", cfg.string(), "--tau", "0.1", "--flags",
               "no-shadow", "--checkpoint-every", "2"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto man = json::parse(slurp(fs::path(run1) / "run_manifest.json"));
  CHECK(man["config"]["tau"] == 0.1);
  CHECK(man["config_sources"]["tau"] == "flag");
  CHECK(man["config"]["epochs"] == 2);
  CHECK(man["config_sources"]["epochs"] == "file");
  CHECK(man["config_sources"]["momentum"] == "default");
  CHECK(man["config"]["flags"] == "no-shadow");
  CHECK(man["hashes"]["dataset"].get<std::string>().size() == 64);
  CHECK(fs::exists(fs::path(run1) / "params.json"));
  CHECK(fs::exists(fs::path(run1) / "final.ckpt"));
  CHECK(fs::exists(fs::path(run1) / "checkpoints" / "checkpoint-2.ckpt"));
  CHECK_FALSE(fs::exists(fs::path(run1) / ".ace.lock"));
  std::istringstream log(slurp(fs::path(run1) / "metrics.ndjson"));
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) ++lines;
  CHECK(lines == 16);  // 4 classes x 8 clips / batch 4, two epochs

  const auto params = (fs::path(run1) / "params.json").string();
  r = ace_run({"eval", "--data", data, "--params", params, "--out", (dir / "eval").string(), "--mode", "base",
               "--labels", "root"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto ev = json::parse(slurp(dir / "eval" / "eval.json"));
  CHECK(ev["mode"] == "base");
  CHECK(ev["classes"].size() == 4);
  CHECK(ev["random_baseline"]["accuracy"] == doctest::Approx(25.0));

  r = ace_run({"srt", "--data", data, "--params", params, "--out", (dir / "srt_a").string(), "--runs", "4", "--seed", "3"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  r = ace_run({"srt", "--data", data, "--params", params, "--out", (dir / "srt_b").string(), "--runs", "4", "--seed", "3"});
  REQUIRE(r.code == 0);
  CHECK(slurp(dir / "srt_a" / "srt_report.json") == slurp(dir / "srt_b" / "srt_report.json"));
  CHECK(slurp(dir / "srt_a" / "srt_summary.csv") == slurp(dir / "srt_b" / "srt_summary.csv"));

  r = ace_run({"export-projection", "--data", data, "--params", params, "--out", (dir / "proj" / "p.csv").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(slurp(dir / "proj" / "p.csv").rfind("label,group,x,y\n", 0) == 0);

  // resume from the periodic checkpoint
  r = ace_run({"train", "--data", data, "--out", (dir / "run2").string(), "--config", cfg.string(), "--tau", "0.1",
               "--flags", "no-shadow", "--resume", (fs::path(run1) / "checkpoints" / "checkpoint-2.ckpt").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(slurp(fs::path(run1) / "params.json") == slurp(dir / "run2" / "params.json"));

  // a held lock refuses the run
  std::ofstream(fs::path(run1) / ".ace.lock") << "1\n";
  r = ace_run({"train", "--data", data, "--out", run1, "--config", cfg.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("locked") != std::string::npos);

  // bad config files and values
  std::ofstream(dir / "typo.json") << R"({"epoch": 2})";
  CHECK(ace_run({"train", "--data", data, "--out", (dir / "r3").string(), "--config", (dir / "typo.json").string()}).code == 2);
  CHECK(ace_run({"train", "--data", data, "--out", (dir / "r4").string(), "--epochs", "0"}).code == 2);
  CHECK(ace_run({"train", "--data", data, "--out", (dir / "r5").string(), "--flags", "no-fun"}).code == 2);
  CHECK(ace_run({"train", "--data", (dir / "missing").string(), "--out", (dir / "r6").string()}).code == 3);
  CHECK(ace_run({"srt", "--data", data, "--out", (dir / "r7").string(), "--labels", (dir / "missing.csv").string()}).code == 3);
  fs::remove_all(dir);
}
