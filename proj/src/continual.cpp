#include "dfd/continual.hpp"

#include <algorithm>
#include <cmath>

#include "dfd/error.hpp"
#include "dfd/frontend.hpp"
#include "dfd/parallel.hpp"

namespace dfd {

void ContinualConfig::validate() const {
  if (!(seed_fraction > 0.0 && seed_fraction < accumulate_fraction && accumulate_fraction <= 1.0))
    fail(Errc::bad_config, "need 0 < seed_fraction < accumulate_fraction <= 1");
  // Equal bars are allowed: (0.5, 0.5) makes every item eligible.
  if (!(confidence_low >= 0.0 && confidence_low <= confidence_high && confidence_high <= 1.0))
    fail(Errc::bad_config, "need 0 <= confidence_low <= confidence_high <= 1");
  if (min_seed_per_class < 1) fail(Errc::bad_config, "min_seed_per_class must be >= 1");
  gbm.validate();
}

Pool::Pool(std::vector<ManifestEntry> entries, std::string base_dir)
    : entries_(std::move(entries)), taken_(entries_.size(), false),
      base_dir_(std::move(base_dir)) {
  if (entries_.empty()) fail(Errc::empty_input, "pool is empty");
  bool fake = false, bona = false;
  for (const auto& e : entries_) (e.label == 1 ? fake : bona) = true;
  if (!fake || !bona)
    fail(Errc::single_class, "pool ground truth must contain both classes");
}

size_t Pool::untaken_count() const {
  size_t n = 0;
  for (bool t : taken_)
    if (!t) ++n;
  return n;
}

std::vector<ManifestEntry> Pool::unlabeled_entries() const {
  std::vector<ManifestEntry> out = entries_;
  for (auto& e : out) e.label = 0;  // the unlabeled view carries no truth
  return out;
}

size_t Pool::SeedSet::fake_count() const {
  size_t n = 0;
  for (int l : labels)
    if (l == 1) ++n;
  return n;
}

Pool::SeedSet Pool::select_seed(const ContinualConfig& cfg, Rng& rng) {
  cfg.validate();
  const size_t n = entries_.size();
  const size_t per_class = static_cast<size_t>(cfg.min_seed_per_class);
  size_t k = std::max(static_cast<size_t>(std::llround(cfg.seed_fraction * static_cast<double>(n))),
                      2 * per_class);
  if (k > n) fail(Errc::invalid_argument, "pool too small for the requested seed size");

  std::vector<size_t> fakes, bonas;
  for (size_t i = 0; i < n; ++i) (entries_[i].label == 1 ? fakes : bonas).push_back(i);
  if (fakes.size() < per_class || bonas.size() < per_class)
    fail(Errc::invalid_argument, "pool too small to satisfy the per-class minimum");

  auto shuffle = [&rng](std::vector<size_t>& v) {
    for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.uniform_int(i)]);
  };
  shuffle(fakes);
  shuffle(bonas);

  SeedSet seed;
  std::vector<bool> chosen(n, false);
  for (size_t i = 0; i < per_class; ++i) {
    chosen[fakes[i]] = true;
    chosen[bonas[i]] = true;
  }
  // Remaining draws are uniform over everything not yet chosen.
  std::vector<size_t> rest;
  rest.reserve(n - 2 * per_class);
  for (size_t i = 0; i < n; ++i)
    if (!chosen[i]) rest.push_back(i);
  shuffle(rest);
  const size_t extra = k - 2 * per_class;
  for (size_t i = 0; i < extra && i < rest.size(); ++i) chosen[rest[i]] = true;

  for (size_t i = 0; i < n; ++i) {
    if (!chosen[i]) continue;
    seed.indices.push_back(i);
    seed.labels.push_back(entries_[i].label);
    taken_[i] = true;
  }
  return seed;
}

double Pool::pseudo_precision(const std::vector<PseudoItem>& items) const {
  if (items.empty()) return -1.0;
  size_t hits = 0;
  for (const auto& item : items)
    if (entries_[item.pool_index].label == item.label) ++hits;
  return static_cast<double>(hits) / static_cast<double>(items.size());
}

PoolFeatures compute_pool_features(const Pool& pool, const ModelParams& params,
                                   const FrontendConfig& fc, int threads,
                                   bool with_embeddings) {
  const auto entries = pool.unlabeled_entries();
  PoolFeatures features;
  features.mels.resize(entries.size());
  parallel_for(entries.size(), threads, [&](size_t i) {
    features.mels[i] = compute_logmel(load_clip_16k(pool.base_dir(), entries[i]), fc);
  });
  if (with_embeddings) {
    features.embeddings = Mat(entries.size(), static_cast<size_t>(params.config.embed_dim));
    parallel_for(entries.size(), threads, [&](size_t i) {
      const auto emb = embedding(features.mels[i], params);
      std::copy(emb.begin(), emb.end(), features.embeddings.row(i));
    });
  }
  return features;
}

TrainedGBM train_plugin(const PoolFeatures& features, const Pool::SeedSet& seed,
                        const ContinualConfig& cfg) {
  if (seed.indices.empty()) fail(Errc::empty_input, "seed set is empty");
  Mat x(seed.indices.size(), features.embeddings.cols());
  for (size_t i = 0; i < seed.indices.size(); ++i)
    std::copy(features.embeddings.row(seed.indices[i]),
              features.embeddings.row(seed.indices[i]) + features.embeddings.cols(), x.row(i));
  return train_gbm(x, seed.labels, cfg.gbm);
}

std::vector<PseudoItem> pseudo_label(const TrainedGBM& plugin, const PoolFeatures& features,
                                     const Pool& pool, const ContinualConfig& cfg) {
  const size_t target = static_cast<size_t>(
      std::llround(cfg.accumulate_fraction * static_cast<double>(pool.size())));

  std::vector<PseudoItem> candidates;
  for (size_t i = 0; i < pool.size(); ++i) {
    if (pool.is_taken(i)) continue;
    const double c =
        plugin.predict_proba(features.embeddings.row(i), features.embeddings.cols());
    if (c >= cfg.confidence_high)
      candidates.push_back({i, 1, c});
    else if (c <= cfg.confidence_low)
      candidates.push_back({i, 0, c});
  }
  std::sort(candidates.begin(), candidates.end(), [](const PseudoItem& a, const PseudoItem& b) {
    const double da = std::fabs(a.confidence - 0.5);
    const double db = std::fabs(b.confidence - 0.5);
    if (da != db) return da > db;
    return a.pool_index < b.pool_index;  // deterministic tie order
  });
  if (candidates.size() > target) candidates.resize(target);
  return candidates;
}

nlohmann::json CycleReport::to_json() const {
  auto run = [](const RunMetrics& r) {
    return nlohmann::json{{"eer", r.eer},
                          {"eer_threshold", r.eer_threshold},
                          {"auc", r.auc},
                          {"accuracy", r.accuracy}};
  };
  return {{"mode", mode},
          {"pool_size", pool_size},
          {"seed_size", seed_size},
          {"seed_fake", seed_fake},
          {"seed_bona", seed_bona},
          {"pseudo_target", pseudo_target},
          {"pseudo_collected", pseudo_collected},
          {"pseudo_precision", pseudo_precision},
          {"finetune_skipped", finetune_skipped},
          {"before", run(before)},
          {"after", run(after)}};
}

namespace {

std::vector<TrainItem> finetune_items(const PoolFeatures& features, const Pool& pool,
                                      const Pool::SeedSet& seed,
                                      const std::vector<PseudoItem>& pseudo) {
  std::vector<TrainItem> items;
  items.reserve(seed.indices.size() + pseudo.size());
  for (size_t i = 0; i < seed.indices.size(); ++i) {
    TrainItem item;
    item.mel = features.mels[seed.indices[i]];
    item.label = seed.labels[i];
    item.id = pool.id(seed.indices[i]);
    items.push_back(std::move(item));
  }
  for (const auto& p : pseudo) {
    TrainItem item;
    item.mel = features.mels[p.pool_index];
    item.label = p.label;
    item.id = pool.id(p.pool_index);
    items.push_back(std::move(item));
  }
  return items;
}

CycleResult run_mode(bool use_plugin, const ModelParams& params, const FrontendConfig& fc,
                     Pool& pool, const std::vector<TrainItem>& eval_items,
                     const ContinualConfig& cfg, const AugmentPolicy& finetune_policy,
                     int threads, const PoolFeatures* cached_features) {
  cfg.validate();
  CycleResult result;
  result.report.mode = use_plugin ? "ours" : "supervised";
  result.report.pool_size = pool.size();

  PoolFeatures local_features;
  const PoolFeatures* features = cached_features;
  if (!features) {
    local_features = compute_pool_features(pool, params, fc, threads, use_plugin);
    features = &local_features;
  }

  Rng seed_rng = Rng(cfg.seed).derive("continual/seed");
  result.seed = pool.select_seed(cfg, seed_rng);
  result.report.seed_size = result.seed.indices.size();
  result.report.seed_fake = result.seed.fake_count();
  result.report.seed_bona = result.report.seed_size - result.report.seed_fake;
  result.report.pseudo_target = static_cast<size_t>(
      std::llround(cfg.accumulate_fraction * static_cast<double>(pool.size())));

  if (use_plugin) {
    result.plugin = train_plugin(*features, result.seed, cfg);
    result.pseudo = pseudo_label(result.plugin, *features, pool, cfg);
    result.report.pseudo_collected = result.pseudo.size();
    result.report.pseudo_precision = pool.pseudo_precision(result.pseudo);
  }

  result.report.before = compute_run("before", score_set_for(eval_items, params, threads));

  const bool no_candidates_left = pool.untaken_count() == 0;
  if (use_plugin && result.pseudo.empty() && !no_candidates_left) {
    // Nothing cleared the confidence bars; updating on the seed alone is the
    // supervised arm's job, so report and leave the model untouched.
    result.report.finetune_skipped = true;
    result.params = params;
  } else {
    TrainHyper hyper = cfg.finetune_hyper;
    hyper.seed = Rng(cfg.seed).derive("continual/finetune").seed();
    const auto items = finetune_items(*features, pool, result.seed, result.pseudo);
    result.params = finetune(params, items, hyper, finetune_policy);
  }

  result.report.after = compute_run("after", score_set_for(eval_items, result.params, threads));
  return result;
}

}  // namespace

CycleResult run_cycle(const ModelParams& params, const FrontendConfig& fc, Pool& pool,
                      const std::vector<TrainItem>& eval_items, const ContinualConfig& cfg,
                      const AugmentPolicy& finetune_policy, int threads,
                      const PoolFeatures* cached_features) {
  return run_mode(true, params, fc, pool, eval_items, cfg, finetune_policy, threads,
                  cached_features);
}

CycleResult baseline_finetune(const ModelParams& params, const FrontendConfig& fc, Pool& pool,
                              const std::vector<TrainItem>& eval_items,
                              const ContinualConfig& cfg, const AugmentPolicy& finetune_policy,
                              int threads, const PoolFeatures* cached_features) {
  return run_mode(false, params, fc, pool, eval_items, cfg, finetune_policy, threads,
                  cached_features);
}

}  // namespace dfd
