#include "dfd/train.hpp"

#include <algorithm>
#include <cmath>

#include "dfd/error.hpp"
#include "dfd/kernels.hpp"
#include "dfd/metrics.hpp"
#include "dfd/parallel.hpp"

namespace dfd {

void TrainHyper::validate() const {
  if (!(lr >= 0.0)) fail(Errc::bad_config, "lr must be >= 0");
  if (batch < 1) fail(Errc::bad_config, "batch must be >= 1");
  if (epochs < 0) fail(Errc::bad_config, "epochs must be >= 0");
  if (eval_every < 0) fail(Errc::bad_config, "eval_every must be >= 0");
}

std::pair<double, double> input_stats(const std::vector<TrainItem>& data) {
  double sum = 0.0, sum_sq = 0.0;
  size_t count = 0;
  for (const auto& item : data) {
    const double* v = item.mel.values.data();
    for (size_t i = 0; i < item.mel.values.size(); ++i) {
      sum += v[i];
      sum_sq += v[i] * v[i];
    }
    count += item.mel.values.size();
  }
  if (count == 0) fail(Errc::empty_input, "no spectrogram cells to normalize over");
  const double mean = sum / static_cast<double>(count);
  const double var = std::max(sum_sq / static_cast<double>(count) - mean * mean, 0.0);
  return {mean, std::max(std::sqrt(var), 1e-6)};
}

std::vector<double> score_items(const std::vector<TrainItem>& items, const ModelParams& params,
                                int threads) {
  std::vector<double> scores(items.size(), 0.0);
  parallel_for(items.size(), threads, [&](size_t i) {
    const auto res = forward(items[i].mel, params);
    scores[i] = softmax2(res.logits)[1];
  });
  return scores;
}

namespace {

struct AdamState {
  std::vector<double> m, v;
  int64_t t = 0;
};

void require_both_classes(const std::vector<TrainItem>& data) {
  bool pos = false, neg = false;
  for (const auto& item : data) (item.label >= 0.5 ? pos : neg) = true;
  if (!pos || !neg) fail(Errc::single_class, "training data must contain both classes");
}

double holdout_metric(const std::vector<TrainItem>& holdout, const ModelParams& params,
                      int threads, double* auc_out) {
  const auto scores = score_items(holdout, params, threads);
  ScoreSet s;
  for (size_t i = 0; i < holdout.size(); ++i)
    s.entries.push_back({holdout[i].id.empty() ? std::to_string(i) : holdout[i].id,
                         scores[i], holdout[i].label >= 0.5 ? 1 : 0});
  *auc_out = auc(s);
  return eer(s).eer;
}

ModelParams run_training(ModelParams params, const std::vector<TrainItem>& data,
                         const TrainHyper& hyper, const AugmentPolicy& policy, TrainLog* log,
                         const std::vector<TrainItem>* holdout) {
  hyper.validate();
  policy.validate();
  require_both_classes(data);
  params.check_finite();

  const size_t n = data.size();
  const size_t batch_size = static_cast<size_t>(hyper.batch);
  const Rng root(hyper.seed);

  // One gradient shadow per in-flight item: items are processed in parallel
  // but reduced in index order, so results do not depend on the thread count.
  const size_t slots = std::min(batch_size, n);
  std::vector<ModelParams> grad_slots;
  grad_slots.reserve(slots);
  for (size_t i = 0; i < slots; ++i) grad_slots.push_back(ModelParams::zeros(params.config));
  ModelParams grad_total = ModelParams::zeros(params.config);

  AdamState adam;
  const auto param_refs = tensor_refs(params);
  if (hyper.optimizer == Optimizer::adam) {
    size_t total = 0;
    for (const auto& r : param_refs) total += r.size;
    adam.m.assign(total, 0.0);
    adam.v.assign(total, 0.0);
  }

  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    Rng shuffle_rng = root.derive("train/shuffle", static_cast<uint64_t>(epoch));
    for (size_t i = n; i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);

    double epoch_loss = 0.0;
    size_t n_batches = 0;
    for (size_t start = 0; start < n; start += batch_size, ++n_batches) {
      const size_t count = std::min(batch_size, n - start);

      // Spectrogram-stage augmentation on copies of this batch.
      std::vector<SpecBatchItem> batch(count);
      for (size_t i = 0; i < count; ++i) {
        batch[i].mel = data[order[start + i]].mel;
        batch[i].label = SoftLabel{data[order[start + i]].label};
      }
      apply_spectrogram_policy(
          batch, policy,
          root.derive("train/augment",
                      static_cast<uint64_t>(epoch) * 1000003ULL + n_batches));

      std::vector<double> losses(count, 0.0);
      parallel_for(count, hyper.threads, [&](size_t i) {
        auto refs = tensor_refs(grad_slots[i]);
        for (auto& r : refs) std::fill(r.data, r.data + r.size, 0.0);
        Trace trace;
        forward(batch[i].mel, params, &trace);
        losses[i] = soft_ce_loss(trace.logits, batch[i].label.p_fake);
        backward(trace, params, batch[i].label.p_fake, grad_slots[i]);
      });

      for (size_t i = 0; i < count; ++i) epoch_loss += losses[i];

      // Ordered reduction, then one optimizer step on the mean gradient.
      auto total_refs = tensor_refs(grad_total);
      for (auto& r : total_refs) std::fill(r.data, r.data + r.size, 0.0);
      for (size_t i = 0; i < count; ++i) {
        const auto slot_refs = tensor_refs(grad_slots[i]);
        for (size_t t = 0; t < total_refs.size(); ++t)
          kernels::axpy(1.0, slot_refs[t].data, total_refs[t].data, total_refs[t].size);
      }
      const double inv_count = 1.0 / static_cast<double>(count);
      for (auto& r : total_refs) kernels::scale(inv_count, r.data, r.size);

      if (hyper.optimizer == Optimizer::sgd) {
        for (size_t t = 0; t < param_refs.size(); ++t)
          kernels::axpy(-hyper.lr, total_refs[t].data, param_refs[t].data,
                        param_refs[t].size);
      } else {
        ++adam.t;
        const double bc1 = 1.0 - std::pow(hyper.adam_beta1, static_cast<double>(adam.t));
        const double bc2 = 1.0 - std::pow(hyper.adam_beta2, static_cast<double>(adam.t));
        size_t offset = 0;
        for (size_t t = 0; t < param_refs.size(); ++t) {
          double* m = adam.m.data() + offset;
          double* v = adam.v.data() + offset;
          const double* g = total_refs[t].data;
          double* w = param_refs[t].data;
          for (size_t i = 0; i < param_refs[t].size; ++i) {
            m[i] = hyper.adam_beta1 * m[i] + (1.0 - hyper.adam_beta1) * g[i];
            v[i] = hyper.adam_beta2 * v[i] + (1.0 - hyper.adam_beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            w[i] -= hyper.lr * m_hat / (std::sqrt(v_hat) + hyper.adam_eps);
          }
          offset += param_refs[t].size;
        }
      }
    }

    if (log) {
      EpochStats stats;
      stats.epoch = epoch;
      stats.mean_loss = epoch_loss / static_cast<double>(n);
      if (holdout && !holdout->empty() && hyper.eval_every > 0 &&
          (epoch + 1) % hyper.eval_every == 0) {
        stats.holdout_eer =
            holdout_metric(*holdout, params, hyper.threads, &stats.holdout_auc);
      }
      log->epochs.push_back(stats);
    }
  }
  return params;
}

}  // namespace

ModelParams train(const std::vector<TrainItem>& data, const ModelConfig& config,
                  const TrainHyper& hyper, const AugmentPolicy& policy, TrainLog* log,
                  const std::vector<TrainItem>* holdout) {
  config.validate();
  require_both_classes(data);
  Rng init_rng = Rng(hyper.seed).derive("model/init");
  ModelParams params = ModelParams::init(config, init_rng);
  const auto stats = input_stats(data);
  params.input_mean = stats.first;
  params.input_std = stats.second;
  return run_training(std::move(params), data, hyper, policy, log, holdout);
}

ModelParams finetune(const ModelParams& start, const std::vector<TrainItem>& data,
                     const TrainHyper& hyper, const AugmentPolicy& policy, TrainLog* log,
                     const std::vector<TrainItem>* holdout) {
  if (hyper.epochs == 0) return start;
  return run_training(start, data, hyper, policy, log, holdout);
}

}  // namespace dfd
