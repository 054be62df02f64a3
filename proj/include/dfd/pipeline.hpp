#pragma once

#include <string>
#include <vector>

#include "dfd/augment.hpp"
#include "dfd/manifest.hpp"
#include "dfd/metrics.hpp"
#include "dfd/train.hpp"

namespace dfd {

// Reads a manifest entry's WAV and resamples to the canonical pipeline rate.
AudioClip load_clip_16k(const std::string& base_dir, const ManifestEntry& entry);

// Manifest rows -> training items: load, optional waveform-stage
// augmentation (policy null to skip), log-mel features. Items keep the
// manifest order; ids are the relative paths.
std::vector<TrainItem> prepare_items(const std::vector<ManifestEntry>& entries,
                                     const std::string& base_dir, const FrontendConfig& fc,
                                     const AugmentPolicy* waveform_policy, const Rng& rng,
                                     int threads);

// Scores prepared items with the model; entry ids and labels carry over.
ScoreSet score_set_for(const std::vector<TrainItem>& items, const ModelParams& params,
                       int threads);

// Per-item CLS embeddings, one row each.
Mat embed_items(const std::vector<TrainItem>& items, const ModelParams& params, int threads);

}  // namespace dfd
