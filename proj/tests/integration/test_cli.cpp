// Drives the real binary through its subcommands and checks exit codes,
// artifacts, and determinism. The binary path arrives via DFD_BIN.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "dfd/metrics.hpp"
#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

std::string binary() {
  const char* env = std::getenv("DFD_BIN");
  REQUIRE_MESSAGE(env != nullptr, "DFD_BIN must point at the dfd binary");
  return env;
}

fs::path work_root() {
  static const fs::path root = [] {
    auto p = fs::temp_directory_path() / "dfd_cli_tests";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

struct RunResult {
  int exit_code = -1;
  std::string stderr_text;
};

RunResult run(const std::string& args) {
  const auto err_file = work_root() / "stderr.txt";
  const std::string cmd = binary() + " " + args + " 2>" + err_file.string();
  const int raw = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream f(err_file);
  r.stderr_text.assign((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::trunc);
  f << text;
}

const char* kCorpusSpec = R"({
  "seed": 11,
  "out_dir": "data",
  "min_duration_s": 0.5,
  "max_duration_s": 0.8,
  "splits": {
    "train": {"bonafide": 10, "A_comb": 5, "B_bandlimit": 5},
    "eval": {"bonafide": 5, "A_comb": 3, "B_bandlimit": 2},
    "pool": {"bonafide": 8, "C_vocoder_buzz": 8}
  }
})";

const char* kTrainConfig = R"({
  "seed": 5,
  "output_dir": "run",
  "threads": 2,
  "dataset": {"manifest": "data/manifest.jsonl"},
  "model": {"embed_dim": 32, "depth": 1, "n_heads": 2, "max_tokens": 128},
  "train": {"epochs": 2, "batch": 8, "lr": 0.001, "eval_every": 1},
  "augment": {"lowres_fraction": 0.1}
})";

}  // namespace

TEST_CASE("corpus command: success, idempotence, and failure modes") {
  const auto dir = work_root() / "corpus";
  fs::create_directories(dir);
  spit(dir / "spec.json", kCorpusSpec);

  CHECK(run("corpus " + (dir / "spec.json").string() + " --threads 2").exit_code == 0);
  CHECK(fs::exists(dir / "data/manifest.jsonl"));
  const auto manifest_bytes = slurp(dir / "data/manifest.jsonl");
  const auto wav_bytes = slurp(dir / "data/train/bonafide_00000.wav");

  // Re-running the same spec rewrites identical bytes.
  CHECK(run("corpus " + (dir / "spec.json").string()).exit_code == 0);
  CHECK(slurp(dir / "data/manifest.jsonl") == manifest_bytes);
  CHECK(slurp(dir / "data/train/bonafide_00000.wav") == wav_bytes);

  // Unknown key in the spec: usage error.
  spit(dir / "bad.json", R"({"seed": 1, "out_dir": "x", "splitz": {}})");
  CHECK(run("corpus " + (dir / "bad.json").string()).exit_code == 1);

  // Unwritable output: runtime error naming the path.
  spit(dir / "unwritable.json",
       R"({"seed": 1, "out_dir": "/proc/nope/data", "splits": {"train": {"bonafide": 1}}})");
  const auto r = run("corpus " + (dir / "unwritable.json").string());
  CHECK(r.exit_code == 2);
  CHECK(r.stderr_text.find("/proc/nope") != std::string::npos);
}

TEST_CASE("train, eval, embed, and continual round trip") {
  const auto dir = work_root() / "pipeline";
  fs::create_directories(dir);
  spit(dir / "spec.json", kCorpusSpec);
  REQUIRE(run("corpus " + (dir / "spec.json").string() + " --threads 2").exit_code == 0);

  spit(dir / "exp.json", kTrainConfig);
  const std::string cd = "cd " + dir.string() + " && ";

  // std::system runs from the test cwd; use absolute paths in config instead.
  std::string config = kTrainConfig;
  auto patch = [&](const std::string& from, const std::string& to) {
    const auto at = config.find(from);
    REQUIRE(at != std::string::npos);
    config.replace(at, from.size(), to);
  };
  patch("\"run\"", "\"" + (dir / "run").string() + "\"");
  patch("\"data/manifest.jsonl\"", "\"" + (dir / "data/manifest.jsonl").string() + "\"");
  spit(dir / "exp.json", config);

  REQUIRE(run("train --config " + (dir / "exp.json").string()).exit_code == 0);
  CHECK(fs::exists(dir / "run/model.ckpt"));
  CHECK(fs::exists(dir / "run/train_log.jsonl"));

  // Training log is JSONL with loss and holdout metrics.
  {
    std::ifstream log(dir / "run/train_log.jsonl");
    std::string line;
    size_t rows = 0;
    while (std::getline(log, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      CHECK(j.contains("mean_loss"));
      CHECK(j.contains("holdout_eer"));
      ++rows;
    }
    CHECK(rows == 2);
  }

  // Determinism at the artifact level: an identical config + seed into a
  // fresh directory reproduces the checkpoint bit-for-bit.
  std::string config2 = config;
  const auto at = config2.find((dir / "run").string());
  config2.replace(at, (dir / "run").string().size(), (dir / "run_b").string());
  spit(dir / "exp_b.json", config2);
  REQUIRE(run("train --config " + (dir / "exp_b.json").string()).exit_code == 0);
  CHECK(slurp(dir / "run/model.ckpt") == slurp(dir / "run_b/model.ckpt"));

  // Resume continues from the checkpoint instead of starting over.
  REQUIRE(run("train --config " + (dir / "exp_b.json").string() + " --resume " +
              (dir / "run/model.ckpt").string())
              .exit_code == 0);
  {
    std::ifstream fresh_log(dir / "run/train_log.jsonl");
    std::ifstream resumed_log(dir / "run_b/train_log.jsonl");
    std::string line;
    double fresh_first = 1e9, resumed_first = 1e9;
    if (std::getline(fresh_log, line))
      fresh_first = nlohmann::json::parse(line).at("mean_loss").get<double>();
    if (std::getline(resumed_log, line))
      resumed_first = nlohmann::json::parse(line).at("mean_loss").get<double>();
    CHECK(resumed_first <= fresh_first);
  }

  // Eval: scores + report; the CSV re-feeds to the metrics module bitwise.
  REQUIRE(run("eval --checkpoint " + (dir / "run/model.ckpt").string() + " --manifest " +
              (dir / "data/manifest.jsonl").string() + " --split eval --out " +
              (dir / "eval_out").string())
              .exit_code == 0);
  {
    const auto scores = dfd::read_scores_csv((dir / "eval_out/scores.csv").string());
    const auto report = nlohmann::json::parse(slurp(dir / "eval_out/report.json"));
    CHECK(report.at("runs")[0].at("eer").get<double>() == dfd::eer(scores).eer);
    CHECK(report.at("runs")[0].at("auc").get<double>() == dfd::auc(scores));
  }

  // Embeddings: header carries the model width.
  REQUIRE(run("embed --checkpoint " + (dir / "run/model.ckpt").string() + " --manifest " +
              (dir / "data/manifest.jsonl").string() + " --split pool --out " +
              (dir / "pool.csv").string())
              .exit_code == 0);
  {
    std::ifstream f(dir / "pool.csv");
    std::string header;
    REQUIRE(std::getline(f, header));
    size_t cols = 0;
    for (char c : header)
      if (c == ',') ++cols;
    CHECK(cols == 32);
    std::string first_row;
    REQUIRE(std::getline(f, first_row));
    CHECK(first_row.find("pool/") == 0);
  }

  // Continual: both modes write their state; the seed manifests match; the
  // comparison table appears once both exist.
  std::string cont = R"({
    "seed": 5,
    "output_dir": "OUT",
    "threads": 2,
    "model": {"embed_dim": 32, "depth": 1, "n_heads": 2, "max_tokens": 128},
    "continual": {
      "base_checkpoint": "CKPT",
      "pool_manifest": "MANIFEST",
      "eval_manifest": "MANIFEST",
      "seed_fraction": 0.2,
      "accumulate_fraction": 0.5,
      "confidence_low": 0.4,
      "confidence_high": 0.6,
      "gbm": {"n_trees": 20},
      "finetune": {"epochs": 1, "lr": 0.0002, "batch": 8, "eval_every": 0}
    }
  })";
  auto patch2 = [&](const std::string& from, const std::string& to) {
    const auto pos = cont.find(from);
    REQUIRE(pos != std::string::npos);
    cont.replace(pos, from.size(), to);
  };
  patch2("OUT", (dir / "run").string());
  patch2("CKPT", (dir / "run/model.ckpt").string());
  patch2("MANIFEST", (dir / "data/manifest.jsonl").string());
  patch2("MANIFEST", (dir / "data/manifest.jsonl").string());
  spit(dir / "cont.json", cont);

  REQUIRE(run("continual --config " + (dir / "cont.json").string() + " --mode supervised")
              .exit_code == 0);
  REQUIRE(run("continual --config " + (dir / "cont.json").string() + " --mode ours")
              .exit_code == 0);
  CHECK(slurp(dir / "run/continual/ours/seed_manifest.jsonl") ==
        slurp(dir / "run/continual/supervised/seed_manifest.jsonl"));
  CHECK(fs::exists(dir / "run/continual/ours/plugin.json"));
  CHECK(fs::exists(dir / "run/continual/ours/pseudo_labels.jsonl"));
  const auto cycle =
      nlohmann::json::parse(slurp(dir / "run/continual/ours/cycle_report.json"));
  CHECK(cycle.contains("pseudo_precision"));
  const auto table = slurp(dir / "run/continual/comparison.txt");
  CHECK(table.find("baseline") != std::string::npos);
  CHECK(table.find("supervised") != std::string::npos);
  CHECK(table.find("ours") != std::string::npos);
  CHECK(table.find("baseline") < table.find("supervised"));
  CHECK(table.find("supervised") < table.find("ours"));
}

TEST_CASE("usage errors exit with code 1 and name the problem") {
  CHECK(run("no_such_command").exit_code == 1);

  const auto dir = work_root() / "usage";
  fs::create_directories(dir);

  // Config missing the manifest field.
  spit(dir / "no_manifest.json", R"({"seed": 1, "output_dir": "out"})");
  const auto r = run("train --config " + (dir / "no_manifest.json").string());
  CHECK(r.exit_code == 1);
  CHECK(r.stderr_text.find("dataset.manifest") != std::string::npos);

  // Unknown key anywhere in the config.
  spit(dir / "typo.json",
       R"({"seed": 1, "output_dir": "out", "dataset": {"manifestt": "x"}})");
  const auto r2 = run("train --config " + (dir / "typo.json").string());
  CHECK(r2.exit_code == 1);
  CHECK(r2.stderr_text.find("manifestt") != std::string::npos);

  // Missing checkpoint for eval.
  const auto r3 = run("eval --checkpoint /nonexistent.ckpt --manifest /nonexistent.jsonl");
  CHECK(r3.exit_code == 1);
}
