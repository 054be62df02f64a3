#include "dfd/model.hpp"

#include <algorithm>
#include <cmath>

#include "dfd/error.hpp"
#include "dfd/kernels.hpp"

namespace dfd {

namespace k = dfd::kernels;

void ModelConfig::validate() const {
  if (patch_freq < 1 || patch_time < 1) fail(Errc::bad_config, "patch dims must be >= 1");
  if (embed_dim < 1) fail(Errc::bad_config, "embed_dim must be >= 1");
  if (depth < 1) fail(Errc::bad_config, "depth must be >= 1");
  if (n_heads < 1 || embed_dim % n_heads != 0)
    fail(Errc::bad_config, "embed_dim must be divisible by n_heads");
  if (mlp_ratio < 1) fail(Errc::bad_config, "mlp_ratio must be >= 1");
  if (n_classes != 2) fail(Errc::bad_config, "this detector is binary (n_classes == 2)");
  if (max_tokens < 2) fail(Errc::bad_config, "max_tokens must cover CLS plus patches");
  if (n_mels < 1 || n_mels % patch_freq != 0)
    fail(Errc::bad_config, "patch_freq must divide n_mels");
}

ModelParams ModelParams::zeros(const ModelConfig& config) {
  config.validate();
  const size_t d = static_cast<size_t>(config.embed_dim);
  const size_t hidden = static_cast<size_t>(config.mlp_hidden());
  ModelParams p;
  p.config = config;
  p.patch_proj = Mat(static_cast<size_t>(config.patch_dim()), d);
  p.patch_bias.assign(d, 0.0);
  p.cls.assign(d, 0.0);
  p.pos = Mat(static_cast<size_t>(config.max_tokens), d);
  p.blocks.resize(static_cast<size_t>(config.depth));
  for (auto& b : p.blocks) {
    b.ln1_gamma.assign(d, 0.0);
    b.ln1_beta.assign(d, 0.0);
    b.wq = Mat(d, d);
    b.wk = Mat(d, d);
    b.wv = Mat(d, d);
    b.wo = Mat(d, d);
    b.bq.assign(d, 0.0);
    b.bk.assign(d, 0.0);
    b.bv.assign(d, 0.0);
    b.bo.assign(d, 0.0);
    b.ln2_gamma.assign(d, 0.0);
    b.ln2_beta.assign(d, 0.0);
    b.w1 = Mat(d, hidden);
    b.b1.assign(hidden, 0.0);
    b.w2 = Mat(hidden, d);
    b.b2.assign(d, 0.0);
  }
  p.lnf_gamma.assign(d, 0.0);
  p.lnf_beta.assign(d, 0.0);
  p.head_w = Mat(d, static_cast<size_t>(config.n_classes));
  p.head_b.assign(static_cast<size_t>(config.n_classes), 0.0);
  return p;
}

ModelParams ModelParams::init(const ModelConfig& config, Rng& rng) {
  ModelParams p = zeros(config);
  constexpr double kStd = 0.02;
  auto fill_tn = [&](Mat& m) {
    for (size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.truncated_normal(kStd);
  };
  fill_tn(p.patch_proj);
  fill_tn(p.pos);
  for (auto& b : p.blocks) {
    std::fill(b.ln1_gamma.begin(), b.ln1_gamma.end(), 1.0);
    std::fill(b.ln2_gamma.begin(), b.ln2_gamma.end(), 1.0);
    fill_tn(b.wq);
    fill_tn(b.wk);
    fill_tn(b.wv);
    fill_tn(b.wo);
    fill_tn(b.w1);
    fill_tn(b.w2);
  }
  std::fill(p.lnf_gamma.begin(), p.lnf_gamma.end(), 1.0);
  fill_tn(p.head_w);
  return p;
}

std::vector<TensorRef> tensor_refs(ModelParams& p) {
  std::vector<TensorRef> refs;
  auto add_mat = [&](const std::string& name, Mat& m) {
    refs.push_back({name, m.data(), m.size()});
  };
  auto add_vec = [&](const std::string& name, std::vector<double>& v) {
    refs.push_back({name, v.data(), v.size()});
  };
  add_mat("patch_proj", p.patch_proj);
  add_vec("patch_bias", p.patch_bias);
  add_vec("cls", p.cls);
  add_mat("pos", p.pos);
  for (size_t i = 0; i < p.blocks.size(); ++i) {
    const std::string b = "block" + std::to_string(i) + ".";
    auto& blk = p.blocks[i];
    add_vec(b + "ln1_gamma", blk.ln1_gamma);
    add_vec(b + "ln1_beta", blk.ln1_beta);
    add_mat(b + "wq", blk.wq);
    add_vec(b + "bq", blk.bq);
    add_mat(b + "wk", blk.wk);
    add_vec(b + "bk", blk.bk);
    add_mat(b + "wv", blk.wv);
    add_vec(b + "bv", blk.bv);
    add_mat(b + "wo", blk.wo);
    add_vec(b + "bo", blk.bo);
    add_vec(b + "ln2_gamma", blk.ln2_gamma);
    add_vec(b + "ln2_beta", blk.ln2_beta);
    add_mat(b + "w1", blk.w1);
    add_vec(b + "b1", blk.b1);
    add_mat(b + "w2", blk.w2);
    add_vec(b + "b2", blk.b2);
  }
  add_vec("lnf_gamma", p.lnf_gamma);
  add_vec("lnf_beta", p.lnf_beta);
  add_mat("head_w", p.head_w);
  add_vec("head_b", p.head_b);
  return refs;
}

void ModelParams::check_finite() const {
  auto& self = const_cast<ModelParams&>(*this);
  for (const auto& ref : tensor_refs(self))
    for (size_t i = 0; i < ref.size; ++i)
      if (!std::isfinite(ref.data[i]))
        fail(Errc::invalid_argument, "non-finite value in tensor " + ref.name);
}

size_t patch_count(size_t n_frames, const ModelConfig& config) {
  const size_t freq_patches = static_cast<size_t>(config.n_mels / config.patch_freq);
  const size_t time_patches =
      (n_frames + static_cast<size_t>(config.patch_time) - 1) /
      static_cast<size_t>(config.patch_time);
  return freq_patches * time_patches;
}

Mat patchify(const Mat& values, const ModelConfig& config, double pad_value) {
  if (values.rows() != static_cast<size_t>(config.n_mels))
    fail(Errc::shape_mismatch, "expected " + std::to_string(config.n_mels) +
                                   " mel rows, got " + std::to_string(values.rows()));
  const size_t pf = static_cast<size_t>(config.patch_freq);
  const size_t pt = static_cast<size_t>(config.patch_time);
  const size_t freq_patches = values.rows() / pf;
  const size_t time_patches = (values.cols() + pt - 1) / pt;

  Mat patches(freq_patches * time_patches, pf * pt);
  for (size_t fp = 0; fp < freq_patches; ++fp) {
    for (size_t tp = 0; tp < time_patches; ++tp) {
      double* out = patches.row(fp * time_patches + tp);
      for (size_t r = 0; r < pf; ++r) {
        for (size_t c = 0; c < pt; ++c) {
          const size_t col = tp * pt + c;
          out[r * pt + c] = col < values.cols() ? values(fp * pf + r, col) : pad_value;
        }
      }
    }
  }
  return patches;
}

namespace {

constexpr double kLnEps = 1e-5;

// Per-row layernorm; writes normalized rows and 1/std, then out = gamma*x̂+beta.
void layernorm_forward(const Mat& x, const std::vector<double>& gamma,
                       const std::vector<double>& beta, Mat& norm,
                       std::vector<double>& rstd, Mat& out) {
  const size_t rows = x.rows(), d = x.cols();
  norm = Mat(rows, d);
  out = Mat(rows, d);
  rstd.assign(rows, 0.0);
  for (size_t r = 0; r < rows; ++r) {
    const double* xr = x.row(r);
    const double mean = k::vsum(xr, d) / static_cast<double>(d);
    double var = 0.0;
    for (size_t i = 0; i < d; ++i) {
      const double c = xr[i] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double r_std = 1.0 / std::sqrt(var + kLnEps);
    rstd[r] = r_std;
    double* nr = norm.row(r);
    double* yr = out.row(r);
    for (size_t i = 0; i < d; ++i) {
      nr[i] = (xr[i] - mean) * r_std;
      yr[i] = gamma[i] * nr[i] + beta[i];
    }
  }
}

// dx for one row given dy; also accumulates dgamma/dbeta.
void layernorm_backward_row(const double* dy, const double* norm_row, double rstd,
                            const std::vector<double>& gamma, double* dx,
                            std::vector<double>& dgamma, std::vector<double>& dbeta) {
  const size_t d = gamma.size();
  double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
  for (size_t i = 0; i < d; ++i) {
    const double dxhat = dy[i] * gamma[i];
    mean_dxhat += dxhat;
    mean_dxhat_xhat += dxhat * norm_row[i];
    dgamma[i] += dy[i] * norm_row[i];
    dbeta[i] += dy[i];
  }
  mean_dxhat /= static_cast<double>(d);
  mean_dxhat_xhat /= static_cast<double>(d);
  for (size_t i = 0; i < d; ++i) {
    const double dxhat = dy[i] * gamma[i];
    dx[i] = rstd * (dxhat - mean_dxhat - norm_row[i] * mean_dxhat_xhat);
  }
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return cdf + x * pdf;
}

// y = x * w + bias for row-major x (rows x in_dim), w (in_dim x out_dim).
void linear_forward(const Mat& x, const Mat& w, const std::vector<double>& bias, Mat& y) {
  y = Mat(x.rows(), w.cols());
  k::matmul_nn(x.data(), x.cols(), w.data(), w.cols(), y.data(), y.cols(), x.rows(),
               x.cols(), w.cols());
  for (size_t r = 0; r < y.rows(); ++r) {
    double* yr = y.row(r);
    for (size_t c = 0; c < y.cols(); ++c) yr[c] += bias[c];
  }
}

void add_colsum(const Mat& dy, std::vector<double>& dbias) {
  for (size_t r = 0; r < dy.rows(); ++r) {
    const double* row = dy.row(r);
    for (size_t c = 0; c < dy.cols(); ++c) dbias[c] += row[c];
  }
}

void softmax_rows(Mat& m) {
  for (size_t r = 0; r < m.rows(); ++r) {
    double* row = m.row(r);
    const double mx = k::vmax(row, m.cols());
    double sum = 0.0;
    for (size_t c = 0; c < m.cols(); ++c) {
      row[c] = std::exp(row[c] - mx);
      sum += row[c];
    }
    const double inv = 1.0 / sum;
    k::scale(inv, row, m.cols());
  }
}

}  // namespace

std::array<double, 2> softmax2(const std::array<double, 2>& logits) {
  const double mx = std::max(logits[0], logits[1]);
  const double e0 = std::exp(logits[0] - mx);
  const double e1 = std::exp(logits[1] - mx);
  return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

double soft_ce_loss(const std::array<double, 2>& logits, double y) {
  const auto p = softmax2(logits);
  const double p0 = std::max(p[0], 1e-30);
  const double p1 = std::max(p[1], 1e-30);
  return -(y * std::log(p1) + (1.0 - y) * std::log(p0));
}

std::array<double, 2> soft_ce_loss_grad(const std::array<double, 2>& logits, double y) {
  const auto p = softmax2(logits);
  return {p[0] - (1.0 - y), p[1] - y};
}

ForwardResult forward_patches(const Mat& patches, const ModelParams& p, Trace* trace) {
  const ModelConfig& cfg = p.config;
  const size_t d = static_cast<size_t>(cfg.embed_dim);
  const size_t n_patches = patches.rows();
  const size_t n_tokens = n_patches + 1;
  if (n_tokens > static_cast<size_t>(cfg.max_tokens))
    fail(Errc::token_overflow, std::to_string(n_tokens) + " tokens exceed the positional table (" +
                                   std::to_string(cfg.max_tokens) + ")");

  Trace local;
  Trace& tr = trace ? *trace : local;
  tr.patches = patches;
  tr.n_tokens = n_tokens;

  // Project patches, prepend CLS, add positions.
  Mat x(n_tokens, d);
  if (n_patches > 0)
    k::matmul_nn(patches.data(), patches.cols(), p.patch_proj.data(), p.patch_proj.cols(),
                 x.row(1), d, n_patches, patches.cols(), d);
  for (size_t i = 0; i < d; ++i) x(0, i) = p.cls[i] + p.pos(0, i);
  for (size_t t = 1; t < n_tokens; ++t) {
    double* row = x.row(t);
    const double* pos = p.pos.row(t);
    for (size_t i = 0; i < d; ++i) row[i] += p.patch_bias[i] + pos[i];
  }
  tr.x0 = x;

  const size_t n_heads = static_cast<size_t>(cfg.n_heads);
  const size_t dh = static_cast<size_t>(cfg.head_dim());
  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  tr.blocks.clear();
  tr.blocks.resize(p.blocks.size());
  for (size_t bi = 0; bi < p.blocks.size(); ++bi) {
    const BlockParams& blk = p.blocks[bi];
    BlockTrace& bt = tr.blocks[bi];
    bt.x_in = x;

    layernorm_forward(x, blk.ln1_gamma, blk.ln1_beta, bt.ln1_norm, bt.ln1_rstd, bt.a);
    linear_forward(bt.a, blk.wq, blk.bq, bt.q);
    linear_forward(bt.a, blk.wk, blk.bk, bt.k);
    linear_forward(bt.a, blk.wv, blk.bv, bt.v);

    bt.attn.assign(n_heads, Mat());
    bt.attn_out = Mat(n_tokens, d);
    for (size_t h = 0; h < n_heads; ++h) {
      const size_t off = h * dh;
      Mat& probs = bt.attn[h];
      probs = Mat(n_tokens, n_tokens);
      k::matmul_nt(bt.q.data() + off, d, bt.k.data() + off, d, probs.data(), n_tokens,
                   n_tokens, dh, n_tokens);
      k::scale(attn_scale, probs.data(), probs.size());
      softmax_rows(probs);
      k::matmul_nn(probs.data(), n_tokens, bt.v.data() + off, d, bt.attn_out.data() + off,
                   d, n_tokens, n_tokens, dh);
    }

    Mat attn_proj;
    linear_forward(bt.attn_out, blk.wo, blk.bo, attn_proj);
    for (size_t i = 0; i < x.size(); ++i) x.data()[i] += attn_proj.data()[i];
    bt.x_mid = x;

    layernorm_forward(x, blk.ln2_gamma, blk.ln2_beta, bt.ln2_norm, bt.ln2_rstd, bt.m);
    linear_forward(bt.m, blk.w1, blk.b1, bt.h1);
    bt.g = Mat(bt.h1.rows(), bt.h1.cols());
    for (size_t i = 0; i < bt.h1.size(); ++i) bt.g.data()[i] = gelu(bt.h1.data()[i]);
    Mat h2;
    linear_forward(bt.g, blk.w2, blk.b2, h2);
    for (size_t i = 0; i < x.size(); ++i) x.data()[i] += h2.data()[i];
  }

  Mat lnf_out;
  layernorm_forward(x, p.lnf_gamma, p.lnf_beta, tr.lnf_norm, tr.lnf_rstd, lnf_out);
  tr.embedding.assign(lnf_out.row(0), lnf_out.row(0) + d);

  ForwardResult res;
  res.embedding = tr.embedding;
  for (int c = 0; c < 2; ++c) {
    double acc = p.head_b[static_cast<size_t>(c)];
    for (size_t i = 0; i < d; ++i)
      acc += tr.embedding[i] * p.head_w(i, static_cast<size_t>(c));
    res.logits[static_cast<size_t>(c)] = acc;
  }
  tr.logits = res.logits;
  return res;
}

ForwardResult forward(const MelSpectrogram& s, const ModelParams& p, Trace* trace) {
  const ModelConfig& cfg = p.config;
  // Normalize with the training-corpus statistics, then patchify; padding uses
  // the normalized silence value so padded cells look like silence.
  const double inv_std = 1.0 / p.input_std;
  Mat normed(s.values.rows(), s.values.cols());
  for (size_t i = 0; i < s.values.size(); ++i)
    normed.data()[i] = (s.values.data()[i] - p.input_mean) * inv_std;
  const double pad_value = (std::log(s.config.log_floor) - p.input_mean) * inv_std;
  const Mat patches = patchify(normed, cfg, pad_value);
  return forward_patches(patches, p, trace);
}

std::vector<double> embedding(const MelSpectrogram& s, const ModelParams& p) {
  return forward(s, p).embedding;
}

void backward(const Trace& tr, const ModelParams& p, double y, ModelParams& grads) {
  const ModelConfig& cfg = p.config;
  const size_t d = static_cast<size_t>(cfg.embed_dim);
  const size_t n_tokens = tr.n_tokens;
  const size_t n_heads = static_cast<size_t>(cfg.n_heads);
  const size_t dh = static_cast<size_t>(cfg.head_dim());
  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  const auto dlogits = soft_ce_loss_grad(tr.logits, y);

  // Head; gradient reaches only the CLS row of the final layernorm.
  std::vector<double> d_emb(d, 0.0);
  for (size_t i = 0; i < d; ++i) {
    for (size_t c = 0; c < 2; ++c) {
      grads.head_w(i, c) += tr.embedding[i] * dlogits[c];
      d_emb[i] += dlogits[c] * p.head_w(i, c);
    }
  }
  grads.head_b[0] += dlogits[0];
  grads.head_b[1] += dlogits[1];

  Mat dx(n_tokens, d, 0.0);
  layernorm_backward_row(d_emb.data(), tr.lnf_norm.row(0), tr.lnf_rstd[0], p.lnf_gamma,
                         dx.row(0), grads.lnf_gamma, grads.lnf_beta);

  for (size_t bi = p.blocks.size(); bi-- > 0;) {
    const BlockParams& blk = p.blocks[bi];
    const BlockTrace& bt = tr.blocks[bi];
    BlockParams& gblk = grads.blocks[bi];

    // MLP sub-block backward. dx currently holds the block-output gradient.
    Mat dh2 = dx;  // residual: d x_out w.r.t. the MLP branch
    k::matmul_tn_acc(bt.g.data(), bt.g.cols(), dh2.data(), dh2.cols(), gblk.w2.data(),
                     gblk.w2.cols(), bt.g.cols(), n_tokens, d);
    add_colsum(dh2, gblk.b2);

    Mat dg(n_tokens, bt.g.cols());
    k::matmul_nt(dh2.data(), d, blk.w2.data(), blk.w2.cols(), dg.data(), dg.cols(),
                 n_tokens, d, bt.g.cols());
    for (size_t i = 0; i < dg.size(); ++i)
      dg.data()[i] *= gelu_grad(bt.h1.data()[i]);  // now d h1

    k::matmul_tn_acc(bt.m.data(), bt.m.cols(), dg.data(), dg.cols(), gblk.w1.data(),
                     gblk.w1.cols(), bt.m.cols(), n_tokens, dg.cols());
    add_colsum(dg, gblk.b1);

    Mat dm(n_tokens, d);
    k::matmul_nt(dg.data(), dg.cols(), blk.w1.data(), blk.w1.cols(), dm.data(), d,
                 n_tokens, dg.cols(), d);

    for (size_t r = 0; r < n_tokens; ++r) {
      std::vector<double> row(d);
      layernorm_backward_row(dm.row(r), bt.ln2_norm.row(r), bt.ln2_rstd[r], blk.ln2_gamma,
                             row.data(), gblk.ln2_gamma, gblk.ln2_beta);
      k::axpy(1.0, row.data(), dx.row(r), d);  // add LN path to the residual path
    }

    // Attention sub-block backward; dx now holds d x_mid.
    Mat d_attn_proj = dx;
    k::matmul_tn_acc(bt.attn_out.data(), d, d_attn_proj.data(), d, gblk.wo.data(), d, d,
                     n_tokens, d);
    add_colsum(d_attn_proj, gblk.bo);

    Mat d_attn_out(n_tokens, d);
    k::matmul_nt(d_attn_proj.data(), d, blk.wo.data(), d, d_attn_out.data(), d, n_tokens,
                 d, d);

    Mat dq(n_tokens, d, 0.0), dk(n_tokens, d, 0.0), dv(n_tokens, d, 0.0);
    for (size_t h = 0; h < n_heads; ++h) {
      const size_t off = h * dh;
      const Mat& probs = bt.attn[h];

      // dV_h = P^T dO_h
      k::matmul_tn_acc(probs.data(), n_tokens, d_attn_out.data() + off, d, dv.data() + off,
                       d, n_tokens, n_tokens, dh);

      // dP = dO_h V_h^T, then softmax backward into dS (in place).
      Mat dprobs(n_tokens, n_tokens);
      k::matmul_nt(d_attn_out.data() + off, d, bt.v.data() + off, d, dprobs.data(),
                   n_tokens, n_tokens, dh, n_tokens);
      for (size_t r = 0; r < n_tokens; ++r) {
        double* dp = dprobs.row(r);
        const double* pr = probs.row(r);
        const double inner = k::dot(dp, pr, n_tokens);
        for (size_t c = 0; c < n_tokens; ++c) dp[c] = pr[c] * (dp[c] - inner) * attn_scale;
      }

      // dQ_h = dS K_h, dK_h = dS^T Q_h
      k::matmul_nn(dprobs.data(), n_tokens, bt.k.data() + off, d, dq.data() + off, d,
                   n_tokens, n_tokens, dh);
      k::matmul_tn_acc(dprobs.data(), n_tokens, bt.q.data() + off, d, dk.data() + off, d,
                       n_tokens, n_tokens, dh);
    }

    k::matmul_tn_acc(bt.a.data(), d, dq.data(), d, gblk.wq.data(), d, d, n_tokens, d);
    k::matmul_tn_acc(bt.a.data(), d, dk.data(), d, gblk.wk.data(), d, d, n_tokens, d);
    k::matmul_tn_acc(bt.a.data(), d, dv.data(), d, gblk.wv.data(), d, d, n_tokens, d);
    add_colsum(dq, gblk.bq);
    add_colsum(dk, gblk.bk);
    add_colsum(dv, gblk.bv);

    Mat da(n_tokens, d);
    k::matmul_nt(dq.data(), d, blk.wq.data(), d, da.data(), d, n_tokens, d, d);
    Mat tmp(n_tokens, d);
    k::matmul_nt(dk.data(), d, blk.wk.data(), d, tmp.data(), d, n_tokens, d, d);
    k::axpy(1.0, tmp.data(), da.data(), da.size());
    k::matmul_nt(dv.data(), d, blk.wv.data(), d, tmp.data(), d, n_tokens, d, d);
    k::axpy(1.0, tmp.data(), da.data(), da.size());

    for (size_t r = 0; r < n_tokens; ++r) {
      std::vector<double> row(d);
      layernorm_backward_row(da.row(r), bt.ln1_norm.row(r), bt.ln1_rstd[r], blk.ln1_gamma,
                             row.data(), gblk.ln1_gamma, gblk.ln1_beta);
      k::axpy(1.0, row.data(), dx.row(r), d);
    }
    // dx is now the gradient at the block input.
  }

  // Token assembly backward: CLS, positions, projection.
  k::axpy(1.0, dx.row(0), grads.cls.data(), d);
  for (size_t t = 0; t < n_tokens; ++t) k::axpy(1.0, dx.row(t), grads.pos.row(t), d);
  const size_t n_patches = n_tokens - 1;
  if (n_patches > 0) {
    k::matmul_tn_acc(tr.patches.data(), tr.patches.cols(), dx.row(1), d,
                     grads.patch_proj.data(), grads.patch_proj.cols(), tr.patches.cols(),
                     n_patches, d);
    for (size_t t = 1; t < n_tokens; ++t)
      k::axpy(1.0, dx.row(t), grads.patch_bias.data(), d);
  }
}

}  // namespace dfd
