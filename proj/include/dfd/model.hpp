#pragma once

#include <array>
#include <string>
#include <vector>

#include "dfd/frontend.hpp"
#include "dfd/mat.hpp"
#include "dfd/rng.hpp"

namespace dfd {

// Patch-based spectrogram transformer. 16x16 non-overlapping patches, a CLS
// token carrying the clip representation, pre-layernorm encoder blocks, and a
// two-class head read off the CLS position.
struct ModelConfig {
  int patch_freq = 16;
  int patch_time = 16;
  int embed_dim = 64;   // transformer width d
  int depth = 2;        // encoder blocks
  int n_heads = 4;
  int mlp_ratio = 4;
  int n_classes = 2;
  int max_tokens = 512;  // positional table capacity
  int n_mels = 128;

  void validate() const;
  int patch_dim() const { return patch_freq * patch_time; }
  int head_dim() const { return embed_dim / n_heads; }
  int mlp_hidden() const { return embed_dim * mlp_ratio; }
};

struct BlockParams {
  std::vector<double> ln1_gamma, ln1_beta;
  Mat wq, wk, wv, wo;  // d x d
  std::vector<double> bq, bk, bv, bo;
  std::vector<double> ln2_gamma, ln2_beta;
  Mat w1;  // d x hidden
  std::vector<double> b1;
  Mat w2;  // hidden x d
  std::vector<double> b2;
};

struct ModelParams {
  ModelConfig config;
  Mat patch_proj;                  // patch_dim x d
  std::vector<double> patch_bias;  // d
  std::vector<double> cls;         // d
  Mat pos;                         // max_tokens x d
  std::vector<BlockParams> blocks;
  std::vector<double> lnf_gamma, lnf_beta;
  Mat head_w;                    // d x n_classes
  std::vector<double> head_b;    // n_classes
  double input_mean = 0.0;       // spectrogram normalization, set at training
  double input_std = 1.0;

  // Truncated-normal(0.02) weights, zero biases and CLS, unit layernorm.
  static ModelParams init(const ModelConfig& config, Rng& rng);
  static ModelParams zeros(const ModelConfig& config);

  void check_finite() const;
};

// Uniform tensor traversal (optimizer, checkpoints, gradient checks). The
// order is fixed and part of the checkpoint format.
struct TensorRef {
  std::string name;
  double* data;
  size_t size;
};
std::vector<TensorRef> tensor_refs(ModelParams& p);

// Splits the (n_mels x n_frames) grid into patch_freq x patch_time blocks,
// padding the time axis up to a multiple of patch_time with pad_value.
// Patches are enumerated with the frequency band as the slow axis and time
// position as the fast axis; each patch is flattened row-major (frequency
// rows, time columns) to patch_dim values. Returns n_patches x patch_dim.
Mat patchify(const Mat& values, const ModelConfig& config, double pad_value);

size_t patch_count(size_t n_frames, const ModelConfig& config);

// Everything backward() needs, captured during forward().
struct BlockTrace {
  Mat x_in;                    // T x d
  Mat ln1_norm;                // normalized rows before gamma/beta
  std::vector<double> ln1_rstd;
  Mat a;                       // ln1 output
  Mat q, k, v;                 // T x d
  std::vector<Mat> attn;       // per head, T x T row-stochastic
  Mat attn_out;                // heads concatenated, before wo
  Mat x_mid;                   // after attention residual
  Mat ln2_norm;
  std::vector<double> ln2_rstd;
  Mat m;                       // ln2 output
  Mat h1;                      // pre-GELU
  Mat g;                       // GELU(h1)
};

struct Trace {
  Mat patches;     // what the projection saw
  size_t n_tokens = 0;
  Mat x0;          // token sequence entering block 0
  std::vector<BlockTrace> blocks;
  Mat lnf_norm;
  std::vector<double> lnf_rstd;
  std::vector<double> embedding;  // final CLS state = head input
  std::array<double, 2> logits{};
};

struct ForwardResult {
  std::array<double, 2> logits{};
  std::vector<double> embedding;  // d values
};

ForwardResult forward(const MelSpectrogram& s, const ModelParams& p, Trace* trace = nullptr);

// Same pipeline entered after patch extraction; lets tests permute patches.
ForwardResult forward_patches(const Mat& patches, const ModelParams& p, Trace* trace = nullptr);

std::vector<double> embedding(const MelSpectrogram& s, const ModelParams& p);

// Soft-target cross entropy, y = target probability of class fake (index 1).
double soft_ce_loss(const std::array<double, 2>& logits, double y);
std::array<double, 2> soft_ce_loss_grad(const std::array<double, 2>& logits, double y);

// Accumulates d loss / d params into `grads` for one traced example.
void backward(const Trace& trace, const ModelParams& p, double y, ModelParams& grads);

std::array<double, 2> softmax2(const std::array<double, 2>& logits);

}  // namespace dfd
