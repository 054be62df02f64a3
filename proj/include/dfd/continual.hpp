#pragma once

#include <string>
#include <vector>

#include "dfd/gbdt.hpp"
#include "dfd/manifest.hpp"
#include "dfd/metrics.hpp"
#include "dfd/pipeline.hpp"
#include "dfd/train.hpp"
#include "json.hpp"

namespace dfd {

// The model-updating loop for a new fake type: a tiny labeled seed trains a
// boosted-tree detector on frozen embeddings, the detector pseudo-labels an
// unlabeled pool, and the confident subset fine-tunes the main model.
struct ContinualConfig {
  double seed_fraction = 0.001;       // labeled share of the pool
  double accumulate_fraction = 0.05;  // pseudo-label target share
  double confidence_low = 0.1;        // <= low -> pseudo bonafide
  double confidence_high = 0.9;       // >= high -> pseudo fake
  int min_seed_per_class = 1;
  GBMConfig gbm;
  TrainHyper finetune_hyper;
  uint64_t seed = 0;

  void validate() const;
};

// Unlabeled view over manifest rows. Ground truth stays private: it is
// consulted only by select_seed (stratification + seed labels) and by the
// precision reporting helper, never by pseudo-labeling.
class Pool {
 public:
  Pool(std::vector<ManifestEntry> entries, std::string base_dir);

  size_t size() const { return entries_.size(); }
  const std::string& id(size_t i) const { return entries_[i].path; }
  const std::string& base_dir() const { return base_dir_; }
  bool is_taken(size_t i) const { return taken_[i]; }
  size_t untaken_count() const;

  // Feature loading needs paths but not labels.
  std::vector<ManifestEntry> unlabeled_entries() const;

  struct SeedSet {
    std::vector<size_t> indices;
    std::vector<int> labels;
    size_t fake_count() const;
  };

  // k = max(round(seed_fraction * size), 2 * min_seed_per_class) items drawn
  // uniformly with >= min_seed_per_class per class; the selected items leave
  // the unlabeled view.
  SeedSet select_seed(const ContinualConfig& cfg, Rng& rng);

  // Share of pseudo labels that match the hidden truth (evaluation readout).
  double pseudo_precision(const std::vector<struct PseudoItem>& items) const;

 private:
  std::vector<ManifestEntry> entries_;
  std::vector<bool> taken_;
  std::string base_dir_;
};

struct PseudoItem {
  size_t pool_index = 0;
  int label = 0;          // hard pseudo label
  double confidence = 0.0;  // plugin p_fake
};

// Pool features under a frozen model; reusable across cycle seeds.
struct PoolFeatures {
  std::vector<MelSpectrogram> mels;
  Mat embeddings;  // n x d; empty when skipped
};
PoolFeatures compute_pool_features(const Pool& pool, const ModelParams& params,
                                   const FrontendConfig& fc, int threads,
                                   bool with_embeddings = true);

// Boosted trees over the seed items' embeddings.
TrainedGBM train_plugin(const PoolFeatures& features, const Pool::SeedSet& seed,
                        const ContinualConfig& cfg);

// Scores every untaken pool item with the plugin and keeps confident ones
// (>= high as fake, <= low as bonafide), most confident first, until
// round(accumulate_fraction * pool_size) items are collected. Pure function
// of embeddings + plugin; ground truth is never consulted.
std::vector<PseudoItem> pseudo_label(const TrainedGBM& plugin, const PoolFeatures& features,
                                     const Pool& pool, const ContinualConfig& cfg);

struct CycleReport {
  std::string mode;  // "ours" or "supervised"
  size_t pool_size = 0;
  size_t seed_size = 0;
  size_t seed_fake = 0;
  size_t seed_bona = 0;
  size_t pseudo_target = 0;
  size_t pseudo_collected = 0;
  double pseudo_precision = -1.0;  // -1 when not applicable
  bool finetune_skipped = false;
  RunMetrics before;
  RunMetrics after;

  nlohmann::json to_json() const;
};

struct CycleResult {
  ModelParams params;
  CycleReport report;
  Pool::SeedSet seed;
  std::vector<PseudoItem> pseudo;
  TrainedGBM plugin;
};

// Full plugin cycle: select seed -> train plugin -> pseudo-label -> fine-tune
// on seed + pseudo items -> score eval before/after. If no pseudo item
// clears the confidence bars while unlabeled candidates remain, fine-tuning
// is skipped and reported; if the seed consumed the whole pool the cycle
// degenerates to supervised fine-tuning on the seed.
CycleResult run_cycle(const ModelParams& params, const FrontendConfig& fc, Pool& pool,
                      const std::vector<TrainItem>& eval_items, const ContinualConfig& cfg,
                      const AugmentPolicy& finetune_policy, int threads,
                      const PoolFeatures* cached_features = nullptr);

// The comparison arm: direct fine-tuning on the same seed, no plugin, no
// pseudo labels. Shares the seed-selection stream with run_cycle so both
// modes see the identical seed for a given cfg.seed.
CycleResult baseline_finetune(const ModelParams& params, const FrontendConfig& fc, Pool& pool,
                              const std::vector<TrainItem>& eval_items,
                              const ContinualConfig& cfg, const AugmentPolicy& finetune_policy,
                              int threads, const PoolFeatures* cached_features = nullptr);

}  // namespace dfd
