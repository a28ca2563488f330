#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "cli.h"
#include "test_support.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
  int code = 0;
  std::string out, err;
};

RunResult Run(std::vector<std::string> args) {
  std::ostringstream out, err;
  args.insert(args.begin(), "prunekit");
  RunResult r;
  r.code = prunekit::cli::Run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string Slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path Scratch(const std::string &name) {
  fs::path p = fs::temp_directory_path() / ("prunekit_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<std::string> TrainArgs(const fs::path &dir, const std::string &model,
                                   std::vector<std::string> extra = {}) {
  std::vector<std::string> args = {"train",
                                   "--judgments", testdata::Path("judgments.jsonl"),
                                   "--lm-corpus", testdata::Path("lm_corpus.txt"),
                                   "--out-dir", dir.string(),
                                   "--model-out", (dir / model).string(),
                                   "--seed", "1"};
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

// Full model trained once for the tests that only consume it.
const fs::path &FullModel() {
  static const fs::path model = [] {
    fs::path dir = Scratch("shared");
    RunResult r = Run(TrainArgs(dir, "full.json"));
    REQUIRE(r.code == 0);
    return dir / "full.json";
  }();
  return model;
}

}  // namespace

TEST_CASE("train writes a model and the cross-validation table") {
  fs::path dir = Scratch("train");
  RunResult r = Run(TrainArgs(dir, "a.json"));
  REQUIRE(r.code == 0);
  REQUIRE(fs::exists(dir / "a.json"));
  json report = json::parse(Slurp(dir / "train_report.json"));
  CHECK(report["cv"].size() == 6);
  CHECK(report["converged"] == true);
  json model = json::parse(Slurp(dir / "a.json"));
  CHECK(model["metadata"]["config_hash"] == report["config_hash"]);

  SUBCASE("byte-identical across runs") {
    REQUIRE(Run(TrainArgs(dir, "b.json")).code == 0);
    CHECK(Slurp(dir / "a.json") == Slurp(dir / "b.json"));
  }
  SUBCASE("worker ablation has no worker weights") {
    REQUIRE(Run(TrainArgs(dir, "nw.json", {"--ablate", "worker"})).code == 0);
    json nw = json::parse(Slurp(dir / "nw.json"));
    CHECK(nw["metadata"]["variant"] == "no-worker");
    for (const auto &[name, w] : nw["weights"].items()) CHECK(name.rfind("worker:", 0) != 0);
    bool any_worker = false;
    for (const auto &[name, w] : model["weights"].items()) any_worker |= name.rfind("worker:", 0) == 0;
    CHECK(any_worker);
  }
}

TEST_CASE("evaluate reports every model against the first") {
  fs::path dir = Scratch("eval");
  RunResult r = Run({"evaluate", "--judgments", testdata::Path("judgments.jsonl"),
                     "--lm-corpus", testdata::Path("lm_corpus.txt"), "--model",
                     FullModel().string(), "--model", FullModel().string(), "--resamples",
                     "200", "--out-dir", dir.string(), "--json"});
  REQUIRE(r.code == 0);
  json report = json::parse(r.out);
  CHECK(report == json::parse(Slurp(dir / "evaluate_report.json")));
  REQUIRE(report["models"].size() == 2);
  CHECK(report["models"][0]["model"] != report["models"][1]["model"]);
  CHECK(report["models"][1]["auc"] == report["models"][0]["auc"]);
  CHECK(report["models"][1]["p_vs_first"].get<double>() == 1.0);
  CHECK(report["models"][0]["auc"].get<double>() > 0.5);
  CHECK(report["worker_worker"]["agreement"].get<double>() > 0.0);
}

TEST_CASE("compress is deterministic and reports infeasible budgets") {
  fs::path a = Scratch("compress_a"), b = Scratch("compress_b");
  auto args = [&](const fs::path &dir, const std::string &budget) {
    return std::vector<std::string>{"compress", "--model", FullModel().string(), "--conllu",
                                    testdata::Path("news.conllu"), "--lm-corpus",
                                    testdata::Path("lm_corpus.txt"), "--budget", budget,
                                    "--samples", "200", "--out-dir", dir.string()};
  };
  REQUIRE(Run(args(a, "84")).code == 0);
  REQUIRE(Run(args(b, "84")).code == 0);
  CHECK(Slurp(a / "candidates.jsonl") == Slurp(b / "candidates.jsonl"));
  CHECK(Slurp(a / "scatter.csv") == Slurp(b / "scatter.csv"));
  json report = json::parse(Slurp(a / "compress_report.json"));
  CHECK(report["best"]["char_length"].get<int>() <= 84);
  CHECK(Run(args(a, "3")).code == prunekit::cli::kExitInfeasible);
}

TEST_CASE("exit codes") {
  fs::path dir = Scratch("codes");
  CHECK(Run({"no-such-command"}).code == prunekit::cli::kExitInvalidInput);
  CHECK(Run({"verify-split", "--judgments", "/nonexistent.jsonl"}).code ==
        prunekit::cli::kExitInvalidInput);
  std::ofstream(dir / "treebank.conllu") << Slurp(testdata::Path("treebank.conllu"));
  {
    std::ofstream bad(dir / "overlap.jsonl");
    bad << "{\"pair_id\":\"a\",\"sentence_id\":\"s000\",\"conllu_ref\":\"treebank.conllu#s000\","
           "\"pruned_vertex\":3,\"worker_id\":\"w1\",\"label\":1,\"split\":\"train\"}\n"
           "{\"pair_id\":\"a\",\"sentence_id\":\"s000\",\"conllu_ref\":\"treebank.conllu#s000\","
           "\"pruned_vertex\":3,\"worker_id\":\"w2\",\"label\":0,\"split\":\"test\"}\n";
  }
  CHECK(Run({"verify-split", "--judgments", (dir / "overlap.jsonl").string(), "--out-dir",
             dir.string()})
            .code == prunekit::cli::kExitIntegrity);
  CHECK(Run({"verify-split", "--judgments", testdata::Path("judgments.jsonl"), "--out-dir",
             dir.string()})
            .code == prunekit::cli::kExitOk);
  {
    std::ofstream bad(dir / "schema.jsonl");
    bad << "{\"pair_id\":\"a\"}\n";
  }
  CHECK(Run({"ingest", "--judgments", (dir / "schema.jsonl").string(), "--out-dir",
             dir.string()})
            .code == prunekit::cli::kExitInvalidInput);
}

TEST_CASE("config file sections set subcommand options") {
  fs::path dir = Scratch("config");
  std::ofstream(dir / "run.toml") << "[agreement]\nsplit = \"test\"\nout-dir = \""
                                  << dir.string() << "\"\n";
  RunResult r = Run({"--config", (dir / "run.toml").string(), "agreement", "--judgments",
                     testdata::Path("judgments.jsonl")});
  REQUIRE(r.code == 0);
  json report = json::parse(Slurp(dir / "agreement_report.json"));
  CHECK(report["split"] == "test");
}
