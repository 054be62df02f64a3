#include "dfd/pipeline.hpp"

#include <filesystem>

#include "dfd/frontend.hpp"
#include "dfd/parallel.hpp"

namespace dfd {

AudioClip load_clip_16k(const std::string& base_dir, const ManifestEntry& entry) {
  const auto path = (std::filesystem::path(base_dir) / entry.path).string();
  AudioClip clip = read_wav(path);
  if (clip.sample_rate != kPipelineRate) clip = resample(clip, kPipelineRate);
  return clip;
}

std::vector<TrainItem> prepare_items(const std::vector<ManifestEntry>& entries,
                                     const std::string& base_dir, const FrontendConfig& fc,
                                     const AugmentPolicy* waveform_policy, const Rng& rng,
                                     int threads) {
  std::vector<AudioClip> clips(entries.size());
  parallel_for(entries.size(), threads,
               [&](size_t i) { clips[i] = load_clip_16k(base_dir, entries[i]); });
  if (waveform_policy && waveform_policy->waveform_stage)
    apply_waveform_policy(clips, *waveform_policy, rng);

  std::vector<TrainItem> items(entries.size());
  parallel_for(entries.size(), threads, [&](size_t i) {
    items[i].mel = compute_logmel(clips[i], fc);
    items[i].label = entries[i].label;
    items[i].id = entries[i].path;
  });
  return items;
}

ScoreSet score_set_for(const std::vector<TrainItem>& items, const ModelParams& params,
                       int threads) {
  const auto scores = score_items(items, params, threads);
  ScoreSet set;
  set.entries.reserve(items.size());
  for (size_t i = 0; i < items.size(); ++i)
    set.entries.push_back({items[i].id, scores[i], items[i].label >= 0.5 ? 1 : 0});
  return set;
}

Mat embed_items(const std::vector<TrainItem>& items, const ModelParams& params, int threads) {
  Mat out(items.size(), static_cast<size_t>(params.config.embed_dim));
  parallel_for(items.size(), threads, [&](size_t i) {
    const auto emb = embedding(items[i].mel, params);
    std::copy(emb.begin(), emb.end(), out.row(i));
  });
  return out;
}

}  // namespace dfd
