#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dfd/augment.hpp"
#include "dfd/model.hpp"

namespace dfd {

enum class Optimizer { sgd, adam };

struct TrainHyper {
  double lr = 1e-3;
  int batch = 16;
  int epochs = 10;
  Optimizer optimizer = Optimizer::adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  uint64_t seed = 0;
  int threads = 0;      // 0 = auto
  int eval_every = 1;   // epochs between held-out metric rows; 0 disables

  void validate() const;
};

struct TrainItem {
  MelSpectrogram mel;
  double label = 0.0;  // 1 = fake
  std::string id;
};

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  double holdout_eer = -1.0;  // -1 when not evaluated
  double holdout_auc = -1.0;
};

struct TrainLog {
  std::vector<EpochStats> epochs;
};

// Trains from scratch: initializes parameters from hyper.seed, computes the
// input-normalization statistics over `data`, then runs finetune_params.
// Requires both classes in `data`.
ModelParams train(const std::vector<TrainItem>& data, const ModelConfig& config,
                  const TrainHyper& hyper, const AugmentPolicy& policy,
                  TrainLog* log = nullptr, const std::vector<TrainItem>* holdout = nullptr);

// Continues training from existing parameters. Normalization statistics are
// kept as stored (they belong to the original training corpus). epochs == 0
// returns the input unchanged.
ModelParams finetune(const ModelParams& start, const std::vector<TrainItem>& data,
                     const TrainHyper& hyper, const AugmentPolicy& policy,
                     TrainLog* log = nullptr,
                     const std::vector<TrainItem>* holdout = nullptr);

// Mean and population stddev over all spectrogram cells; the scale forwarded
// inputs are normalized by.
std::pair<double, double> input_stats(const std::vector<TrainItem>& data);

// Per-clip fake probabilities (softmax over the head), slot-parallel.
std::vector<double> score_items(const std::vector<TrainItem>& items, const ModelParams& params,
                                int threads);

}  // namespace dfd
