#pragma once

#include <string>

#include "dfd/augment.hpp"
#include "dfd/continual.hpp"
#include "dfd/frontend.hpp"
#include "dfd/model.hpp"
#include "dfd/train.hpp"
#include "json.hpp"

namespace dfd {

// One declarative document per experiment. All randomness fans out from the
// single top-level seed; relative paths resolve against the config file's
// directory. Unknown keys are rejected so typos fail loudly instead of
// silently running defaults.
struct ExperimentConfig {
  uint64_t seed = 0;
  std::string output_dir;
  int threads = 0;

  std::string train_manifest;
  std::string train_split = "train";
  std::string eval_split = "eval";

  FrontendConfig frontend;
  ModelConfig model;
  AugmentPolicy augment;
  TrainHyper train;

  ContinualConfig continual;
  std::string base_checkpoint;  // continual command input
  std::string pool_manifest;
  std::string continual_eval_manifest;

  std::string config_dir;  // directory the config was loaded from

  enum class Need { train_data, continual_data, none };

  static ExperimentConfig load(const std::string& path, Need need);

  // Path resolution relative to the config file.
  std::string resolve(const std::string& rel) const;
};

nlohmann::json augment_policy_to_json(const AugmentPolicy& p);

}  // namespace dfd
