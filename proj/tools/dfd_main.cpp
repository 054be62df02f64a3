// dfd: synthetic-corpus generation, detector training, evaluation, embedding
// export, and continual-learning cycles, driven by one declarative config.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>

#include "CLI11.hpp"
#include "dfd/checkpoint.hpp"
#include "dfd/continual.hpp"
#include "dfd/corpus.hpp"
#include "dfd/error.hpp"
#include "dfd/experiment.hpp"
#include "dfd/kernels.hpp"
#include "dfd/manifest.hpp"
#include "dfd/metrics.hpp"
#include "dfd/pipeline.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace dfd;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

// Commands validate everything first (no side effects), then execute.
// Validation failures are usage errors; execution failures are runtime.
int guarded(const std::function<void()>& validate, const std::function<void()>& execute) {
  try {
    validate();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    execute();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(Errc::unwritable_path, "cannot create directory: " + dir);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) fail(Errc::unwritable_path, "cannot write: " + path);
  f << text;
  if (!f.flush()) fail(Errc::unwritable_path, "write failed: " + path);
}

std::vector<ManifestEntry> load_split_checked(const std::string& manifest_path,
                                              const std::string& split, bool need_both) {
  const auto entries = filter_split(read_manifest(manifest_path), split);
  if (entries.empty())
    fail(Errc::bad_config, "manifest " + manifest_path + " has no '" + split + "' entries");
  if (need_both) {
    bool fake = false, bona = false;
    for (const auto& e : entries) (e.label == 1 ? fake : bona) = true;
    if (!fake || !bona)
      fail(Errc::single_class,
           "split '" + split + "' of " + manifest_path + " needs both classes");
  }
  return entries;
}

int cmd_corpus(const std::string& spec_path, int threads) {
  CorpusSpec spec;
  return guarded(
      [&] {
        spec = CorpusSpec::from_json_file(spec_path);
        // out_dir is relative to the spec file, like every other config path.
        const auto parent = fs::path(spec_path).parent_path();
        if (!fs::path(spec.out_dir).is_absolute() && !parent.empty())
          spec.out_dir = (parent / spec.out_dir).string();
        spec.validate();
      },
      [&] {
        const auto entries = make_dataset(spec, threads);
        std::cout << "wrote " << entries.size() << " clips under " << spec.out_dir << "\n";
      });
}

int cmd_train(const std::string& config_path, const std::string& resume_path, int threads_flag) {
  ExperimentConfig cfg;
  std::vector<ManifestEntry> train_entries, eval_entries;
  Checkpoint resume;
  bool resuming = false;

  return guarded(
      [&] {
        cfg = ExperimentConfig::load(config_path, ExperimentConfig::Need::train_data);
        if (threads_flag > 0) {
          cfg.threads = threads_flag;
          cfg.train.threads = threads_flag;
        }
        train_entries = load_split_checked(cfg.train_manifest, cfg.train_split, true);
        eval_entries = filter_split(read_manifest(cfg.train_manifest), cfg.eval_split);
        if (!resume_path.empty()) {
          resume = load_checkpoint(resume_path);
          require_config_match(resume, cfg.model);
          resuming = true;
        }
      },
      [&] {
        ensure_dir(cfg.output_dir);
        const std::string base_dir = manifest_dir(cfg.train_manifest);
        const Rng root(cfg.seed);

        const auto items = prepare_items(train_entries, base_dir, cfg.frontend,
                                         &cfg.augment, root.derive("augment/waveform"),
                                         cfg.threads);
        std::vector<TrainItem> holdout;
        if (!eval_entries.empty() && cfg.train.eval_every > 0)
          holdout = prepare_items(eval_entries, base_dir, cfg.frontend, nullptr, root,
                                  cfg.threads);

        TrainLog log;
        ModelParams params =
            resuming
                ? finetune(resume.params, items, cfg.train, cfg.augment, &log,
                           holdout.empty() ? nullptr : &holdout)
                : train(items, cfg.model, cfg.train, cfg.augment, &log,
                        holdout.empty() ? nullptr : &holdout);

        const std::string ckpt_path = (fs::path(cfg.output_dir) / "model.ckpt").string();
        save_checkpoint({params, cfg.frontend}, ckpt_path);

        std::string log_lines;
        for (const auto& e : log.epochs) {
          nlohmann::json row = {{"epoch", e.epoch}, {"mean_loss", e.mean_loss}};
          if (e.holdout_eer >= 0.0) {
            row["holdout_eer"] = e.holdout_eer;
            row["holdout_auc"] = e.holdout_auc;
          }
          log_lines += row.dump() + "\n";
        }
        write_text((fs::path(cfg.output_dir) / "train_log.jsonl").string(), log_lines);
        write_text((fs::path(cfg.output_dir) / "policy.json").string(),
                   augment_policy_to_json(cfg.augment).dump(2) + "\n");

        if (!log.epochs.empty())
          std::cout << "final mean loss " << log.epochs.back().mean_loss << "\n";
        std::cout << "checkpoint: " << ckpt_path << "\n";
      });
}

int cmd_eval(const std::string& ckpt_path, const std::string& manifest_path,
             const std::string& split, const std::string& out_dir, int threads) {
  Checkpoint ckpt;
  std::vector<ManifestEntry> entries;
  return guarded(
      [&] {
        ckpt = load_checkpoint(ckpt_path);
        entries = load_split_checked(manifest_path, split, true);
      },
      [&] {
        ensure_dir(out_dir);
        const auto items = prepare_items(entries, manifest_dir(manifest_path), ckpt.frontend,
                                         nullptr, Rng(0), threads);
        const auto scores = score_set_for(items, ckpt.params, threads);
        write_scores_csv(scores, (fs::path(out_dir) / "scores.csv").string());
        const auto run = compute_run(split, scores);
        write_text((fs::path(out_dir) / "report.json").string(),
                   report_json({run}).dump(2) + "\n");
        std::cout << report_table({run});
      });
}

int cmd_embed(const std::string& ckpt_path, const std::string& manifest_path,
              const std::string& split, const std::string& out_path, int threads) {
  Checkpoint ckpt;
  std::vector<ManifestEntry> entries;
  return guarded(
      [&] {
        ckpt = load_checkpoint(ckpt_path);
        entries = load_split_checked(manifest_path, split, false);
      },
      [&] {
        const auto items = prepare_items(entries, manifest_dir(manifest_path), ckpt.frontend,
                                         nullptr, Rng(0), threads);
        const Mat emb = embed_items(items, ckpt.params, threads);
        std::ofstream f(out_path, std::ios::trunc);
        if (!f) fail(Errc::unwritable_path, "cannot write: " + out_path);
        f << "id";
        for (size_t c = 0; c < emb.cols(); ++c) f << ",e" << c;
        f << "\n";
        char buf[64];
        for (size_t i = 0; i < emb.rows(); ++i) {
          f << items[i].id;
          for (size_t c = 0; c < emb.cols(); ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", emb(i, c));
            f << ',' << buf;
          }
          f << "\n";
        }
        if (!f.flush()) fail(Errc::unwritable_path, "write failed: " + out_path);
        std::cout << "wrote " << emb.rows() << " x " << emb.cols() << " embeddings to "
                  << out_path << "\n";
      });
}

void write_cycle_state(const std::string& dir, const CycleResult& result, const Pool& pool,
                       const Checkpoint& base, const FrontendConfig& fc) {
  ensure_dir(dir);

  std::vector<ManifestEntry> seed_entries;
  for (size_t i = 0; i < result.seed.indices.size(); ++i)
    seed_entries.push_back({pool.id(result.seed.indices[i]), result.seed.labels[i], "-",
                            "seed"});
  write_manifest(seed_entries, (fs::path(dir) / "seed_manifest.jsonl").string());

  std::string pseudo_lines;
  for (const auto& p : result.pseudo) {
    const nlohmann::json row = {{"path", pool.id(p.pool_index)},
                                {"label", p.label == 1 ? "fake" : "bonafide"},
                                {"confidence", p.confidence},
                                {"provenance", "pseudo"}};
    pseudo_lines += row.dump() + "\n";
  }
  write_text((fs::path(dir) / "pseudo_labels.jsonl").string(), pseudo_lines);

  if (!result.plugin.trees.empty())
    write_text((fs::path(dir) / "plugin.json").string(), result.plugin.to_json().dump(2) + "\n");

  save_checkpoint(base, (fs::path(dir) / "before.ckpt").string());
  save_checkpoint({result.params, fc}, (fs::path(dir) / "after.ckpt").string());
  write_text((fs::path(dir) / "cycle_report.json").string(),
             result.report.to_json().dump(2) + "\n");
}

// Table with Baseline / Supervised / Ours rows once both mode reports exist.
void maybe_write_comparison(const std::string& continual_dir) {
  const auto ours_path = fs::path(continual_dir) / "ours" / "cycle_report.json";
  const auto sup_path = fs::path(continual_dir) / "supervised" / "cycle_report.json";
  if (!fs::exists(ours_path) || !fs::exists(sup_path)) return;

  auto load = [](const fs::path& p) {
    std::ifstream f(p);
    nlohmann::json j;
    f >> j;
    return j;
  };
  const auto ours = load(ours_path);
  const auto sup = load(sup_path);

  char buf[128];
  std::string table;
  std::snprintf(buf, sizeof(buf), "%-12s  %8s  %8s\n", "approach", "EER%", "AUC%");
  table += buf;
  auto row = [&](const char* name, const nlohmann::json& metrics) {
    std::snprintf(buf, sizeof(buf), "%-12s  %8.2f  %8.2f\n", name,
                  100.0 * metrics.at("eer").get<double>(),
                  100.0 * metrics.at("auc").get<double>());
    table += buf;
  };
  row("baseline", ours.at("before"));
  row("supervised", sup.at("after"));
  row("ours", ours.at("after"));

  const nlohmann::json summary = {{"baseline", ours.at("before")},
                                  {"supervised", sup.at("after")},
                                  {"ours", ours.at("after")}};
  write_text((fs::path(continual_dir) / "comparison.json").string(), summary.dump(2) + "\n");
  write_text((fs::path(continual_dir) / "comparison.txt").string(), table);
  std::cout << table;
}

int cmd_continual(const std::string& config_path, const std::string& mode, int threads_flag) {
  ExperimentConfig cfg;
  Checkpoint base;
  std::vector<ManifestEntry> pool_entries, eval_entries;
  return guarded(
      [&] {
        if (mode != "ours" && mode != "supervised")
          fail(Errc::invalid_argument, "--mode must be ours or supervised");
        cfg = ExperimentConfig::load(config_path, ExperimentConfig::Need::continual_data);
        if (threads_flag > 0) {
          cfg.threads = threads_flag;
          cfg.continual.finetune_hyper.threads = threads_flag;
        }
        base = load_checkpoint(cfg.base_checkpoint);
        require_config_match(base, cfg.model);
        pool_entries = load_split_checked(cfg.pool_manifest, "pool", true);
        eval_entries = load_split_checked(cfg.continual_eval_manifest, "eval", true);
      },
      [&] {
        ensure_dir(cfg.output_dir);
        Pool pool(pool_entries, manifest_dir(cfg.pool_manifest));
        const auto eval_items =
            prepare_items(eval_entries, manifest_dir(cfg.continual_eval_manifest),
                          base.frontend, nullptr, Rng(0), cfg.threads);

        AugmentPolicy finetune_policy = cfg.augment;
        finetune_policy.waveform_stage = false;  // pool features are fixed

        const auto result =
            mode == "ours"
                ? run_cycle(base.params, base.frontend, pool, eval_items, cfg.continual,
                            finetune_policy, cfg.threads)
                : baseline_finetune(base.params, base.frontend, pool, eval_items,
                                    cfg.continual, finetune_policy, cfg.threads);

        const std::string continual_dir = (fs::path(cfg.output_dir) / "continual").string();
        write_cycle_state((fs::path(continual_dir) / mode).string(), result, pool, base,
                          base.frontend);
        std::cout << "mode " << mode << ": eval EER " << 100.0 * result.report.before.eer
                  << "% -> " << 100.0 * result.report.after.eer << "%\n";
        maybe_write_comparison(continual_dir);
      });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"audio deepfake detector: corpus, training, eval, embeddings, continual updates"};
  app.require_subcommand(1);
  app.fallthrough();  // accept --threads after the subcommand name
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = auto)");

  std::string corpus_spec;
  auto* corpus = app.add_subcommand("corpus", "generate a synthetic dataset from a spec file");
  corpus->add_option("spec", corpus_spec, "corpus spec JSON")->required();

  std::string train_config, resume_path;
  auto* train = app.add_subcommand("train", "train a detector from a config");
  train->add_option("--config", train_config, "experiment config JSON")->required();
  train->add_option("--resume", resume_path, "checkpoint to continue from");

  std::string eval_ckpt, eval_manifest, eval_split = "eval", eval_out = ".";
  auto* eval = app.add_subcommand("eval", "score a manifest split and report EER/AUC");
  eval->add_option("--checkpoint", eval_ckpt)->required();
  eval->add_option("--manifest", eval_manifest)->required();
  eval->add_option("--split", eval_split, "manifest split (default eval)");
  eval->add_option("--out", eval_out, "output directory (default .)");

  std::string embed_ckpt, embed_manifest, embed_split = "eval", embed_out = "embeddings.csv";
  auto* embed = app.add_subcommand("embed", "export per-clip embeddings as CSV");
  embed->add_option("--checkpoint", embed_ckpt)->required();
  embed->add_option("--manifest", embed_manifest)->required();
  embed->add_option("--split", embed_split, "manifest split (default eval)");
  embed->add_option("--out", embed_out, "output CSV path");

  std::string cont_config, cont_mode;
  auto* cont = app.add_subcommand("continual", "run one model-update cycle");
  cont->add_option("--config", cont_config)->required();
  cont->add_option("--mode", cont_mode, "ours | supervised")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (corpus->parsed()) return cmd_corpus(corpus_spec, threads);
  if (train->parsed()) return cmd_train(train_config, resume_path, threads);
  if (eval->parsed()) return cmd_eval(eval_ckpt, eval_manifest, eval_split, eval_out, threads);
  if (embed->parsed()) return cmd_embed(embed_ckpt, embed_manifest, embed_split, embed_out, threads);
  if (cont->parsed()) return cmd_continual(cont_config, cont_mode, threads);
  return kExitUsage;
}
