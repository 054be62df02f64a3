#include "dfd/experiment.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "dfd/error.hpp"

namespace dfd {

namespace {

void reject_unknown(const nlohmann::json& obj, const std::set<std::string>& known,
                    const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (known.find(key) == known.end())
      fail(Errc::bad_config, "unknown key '" + key + "' in " + where);
  }
}

void parse_frontend(const nlohmann::json& j, FrontendConfig& c) {
  reject_unknown(j, {"win_ms", "hop_ms", "n_mels", "n_fft", "fmin", "fmax", "log_floor"},
                 "frontend");
  c.win_ms = j.value("win_ms", c.win_ms);
  c.hop_ms = j.value("hop_ms", c.hop_ms);
  c.n_mels = j.value("n_mels", c.n_mels);
  c.n_fft = j.value("n_fft", c.n_fft);
  c.fmin = j.value("fmin", c.fmin);
  c.fmax = j.value("fmax", c.fmax);
  c.log_floor = j.value("log_floor", c.log_floor);
}

void parse_model(const nlohmann::json& j, ModelConfig& c) {
  // n_mels is not accepted here; the model always follows the frontend.
  reject_unknown(j,
                 {"patch_freq", "patch_time", "embed_dim", "depth", "n_heads", "mlp_ratio",
                  "max_tokens"},
                 "model");
  c.patch_freq = j.value("patch_freq", c.patch_freq);
  c.patch_time = j.value("patch_time", c.patch_time);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.depth = j.value("depth", c.depth);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.mlp_ratio = j.value("mlp_ratio", c.mlp_ratio);
  c.max_tokens = j.value("max_tokens", c.max_tokens);
}

void parse_augment(const nlohmann::json& j, AugmentPolicy& p) {
  reject_unknown(j,
                 {"mixup_alpha", "mixup_mode", "mixup_fixed_lambda", "specaug_max_time",
                  "specaug_max_freq", "lowres_fraction", "bandpass_low", "bandpass_high",
                  "waveform_stage", "spectrogram_stage"},
                 "augment");
  p.mixup_alpha = j.value("mixup_alpha", p.mixup_alpha);
  if (j.contains("mixup_mode")) {
    const std::string mode = j.at("mixup_mode").get<std::string>();
    if (mode == "beta")
      p.mixup_mode = MixupMode::beta;
    else if (mode == "fixed")
      p.mixup_mode = MixupMode::fixed;
    else if (mode == "off")
      p.mixup_mode = MixupMode::off;
    else
      fail(Errc::bad_config, "augment.mixup_mode must be beta/fixed/off, got " + mode);
  }
  p.mixup_fixed_lambda = j.value("mixup_fixed_lambda", p.mixup_fixed_lambda);
  p.specaug_max_time = j.value("specaug_max_time", p.specaug_max_time);
  p.specaug_max_freq = j.value("specaug_max_freq", p.specaug_max_freq);
  p.lowres_fraction = j.value("lowres_fraction", p.lowres_fraction);
  p.bandpass_low = j.value("bandpass_low", p.bandpass_low);
  p.bandpass_high = j.value("bandpass_high", p.bandpass_high);
  p.waveform_stage = j.value("waveform_stage", p.waveform_stage);
  p.spectrogram_stage = j.value("spectrogram_stage", p.spectrogram_stage);
}

void parse_train(const nlohmann::json& j, TrainHyper& h, const std::string& where) {
  reject_unknown(j, {"lr", "batch", "epochs", "optimizer", "eval_every"}, where);
  h.lr = j.value("lr", h.lr);
  h.batch = j.value("batch", h.batch);
  h.epochs = j.value("epochs", h.epochs);
  h.eval_every = j.value("eval_every", h.eval_every);
  if (j.contains("optimizer")) {
    const std::string opt = j.at("optimizer").get<std::string>();
    if (opt == "adam")
      h.optimizer = Optimizer::adam;
    else if (opt == "sgd")
      h.optimizer = Optimizer::sgd;
    else
      fail(Errc::bad_config, where + ".optimizer must be adam or sgd, got " + opt);
  }
}

void parse_gbm(const nlohmann::json& j, GBMConfig& c) {
  reject_unknown(j,
                 {"n_trees", "max_depth", "learning_rate", "l2_reg", "min_split_gain",
                  "min_child_hessian"},
                 "continual.gbm");
  c.n_trees = j.value("n_trees", c.n_trees);
  c.max_depth = j.value("max_depth", c.max_depth);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.l2_reg = j.value("l2_reg", c.l2_reg);
  c.min_split_gain = j.value("min_split_gain", c.min_split_gain);
  c.min_child_hessian = j.value("min_child_hessian", c.min_child_hessian);
}

void parse_continual(const nlohmann::json& j, ExperimentConfig& cfg) {
  reject_unknown(j,
                 {"base_checkpoint", "pool_manifest", "eval_manifest", "seed_fraction",
                  "accumulate_fraction", "confidence_low", "confidence_high",
                  "min_seed_per_class", "gbm", "finetune"},
                 "continual");
  cfg.base_checkpoint = j.value("base_checkpoint", cfg.base_checkpoint);
  cfg.pool_manifest = j.value("pool_manifest", cfg.pool_manifest);
  cfg.continual_eval_manifest = j.value("eval_manifest", cfg.continual_eval_manifest);
  auto& c = cfg.continual;
  c.seed_fraction = j.value("seed_fraction", c.seed_fraction);
  c.accumulate_fraction = j.value("accumulate_fraction", c.accumulate_fraction);
  c.confidence_low = j.value("confidence_low", c.confidence_low);
  c.confidence_high = j.value("confidence_high", c.confidence_high);
  c.min_seed_per_class = j.value("min_seed_per_class", c.min_seed_per_class);
  if (j.contains("gbm")) parse_gbm(j.at("gbm"), c.gbm);
  if (j.contains("finetune")) parse_train(j.at("finetune"), c.finetune_hyper, "continual.finetune");
}

void require_file(const std::string& path, const std::string& what) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec))
    fail(Errc::bad_config, what + " does not exist: " + path);
}

}  // namespace

std::string ExperimentConfig::resolve(const std::string& rel) const {
  if (rel.empty()) return rel;
  const std::filesystem::path p(rel);
  if (p.is_absolute()) return rel;
  return (std::filesystem::path(config_dir) / p).string();
}

ExperimentConfig ExperimentConfig::load(const std::string& path, Need need) {
  std::ifstream f(path);
  if (!f) fail(Errc::file_missing, "cannot open config: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::bad_config, "config is not valid JSON: " + std::string(e.what()));
  }
  if (!j.is_object()) fail(Errc::bad_config, "config root must be an object");

  reject_unknown(j,
                 {"seed", "output_dir", "threads", "dataset", "frontend", "model", "augment",
                  "train", "continual"},
                 "config root");

  ExperimentConfig cfg;
  {
    auto parent = std::filesystem::path(path).parent_path();
    cfg.config_dir = parent.empty() ? std::string(".") : parent.string();
  }

  if (!j.contains("seed")) fail(Errc::bad_config, "config is missing 'seed'");
  cfg.seed = j.at("seed").get<uint64_t>();
  if (!j.contains("output_dir")) fail(Errc::bad_config, "config is missing 'output_dir'");
  cfg.output_dir = cfg.resolve(j.at("output_dir").get<std::string>());
  cfg.threads = j.value("threads", 0);

  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    reject_unknown(d, {"manifest", "train_split", "eval_split"}, "dataset");
    cfg.train_manifest = d.value("manifest", "");
    cfg.train_split = d.value("train_split", cfg.train_split);
    cfg.eval_split = d.value("eval_split", cfg.eval_split);
  }
  if (j.contains("frontend")) parse_frontend(j.at("frontend"), cfg.frontend);
  if (j.contains("model")) parse_model(j.at("model"), cfg.model);
  if (j.contains("augment")) parse_augment(j.at("augment"), cfg.augment);
  if (j.contains("train")) parse_train(j.at("train"), cfg.train, "train");
  if (j.contains("continual")) parse_continual(j.at("continual"), cfg);

  // Seeds fan out from the one experiment seed.
  cfg.train.seed = cfg.seed;
  cfg.continual.seed = cfg.seed;
  cfg.continual.finetune_hyper.threads = cfg.threads;
  cfg.train.threads = cfg.threads;

  // Structural validation before anything runs.
  cfg.model.n_mels = cfg.frontend.n_mels;
  cfg.model.validate();
  cfg.frontend.validate(kPipelineRate);
  cfg.augment.validate();
  cfg.train.validate();

  if (need == Need::train_data) {
    if (cfg.train_manifest.empty())
      fail(Errc::bad_config, "config is missing 'dataset.manifest'");
    cfg.train_manifest = cfg.resolve(cfg.train_manifest);
    require_file(cfg.train_manifest, "dataset.manifest");
  } else if (need == Need::continual_data) {
    cfg.continual.validate();
    if (cfg.base_checkpoint.empty())
      fail(Errc::bad_config, "config is missing 'continual.base_checkpoint'");
    if (cfg.pool_manifest.empty())
      fail(Errc::bad_config, "config is missing 'continual.pool_manifest'");
    if (cfg.continual_eval_manifest.empty())
      fail(Errc::bad_config, "config is missing 'continual.eval_manifest'");
    cfg.base_checkpoint = cfg.resolve(cfg.base_checkpoint);
    cfg.pool_manifest = cfg.resolve(cfg.pool_manifest);
    cfg.continual_eval_manifest = cfg.resolve(cfg.continual_eval_manifest);
    require_file(cfg.base_checkpoint, "continual.base_checkpoint");
    require_file(cfg.pool_manifest, "continual.pool_manifest");
    require_file(cfg.continual_eval_manifest, "continual.eval_manifest");
  }
  return cfg;
}

nlohmann::json augment_policy_to_json(const AugmentPolicy& p) {
  const char* mode = p.mixup_mode == MixupMode::beta    ? "beta"
                     : p.mixup_mode == MixupMode::fixed ? "fixed"
                                                        : "off";
  return {{"mixup_alpha", p.mixup_alpha},
          {"mixup_mode", mode},
          {"mixup_fixed_lambda", p.mixup_fixed_lambda},
          {"specaug_max_time", p.specaug_max_time},
          {"specaug_max_freq", p.specaug_max_freq},
          {"lowres_fraction", p.lowres_fraction},
          {"bandpass_low", p.bandpass_low},
          {"bandpass_high", p.bandpass_high},
          {"waveform_stage", p.waveform_stage},
          {"spectrogram_stage", p.spectrogram_stage}};
}

}  // namespace dfd
