#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "controlpe/adapter.hpp"
#include "controlpe/error.hpp"
#include "controlpe/numerics.hpp"
#include "controlpe/types.hpp"
#include "controlpe/weights.hpp"

namespace controlpe {

inline constexpr float kRmsEps = 1e-5f;

template <class S>
Mat<S> rms_norm_rows(const Mat<S>& x, const Mat<S>& gain, Vec<S>* inv_rms_out = nullptr) {
  Mat<S> out(x.rows(), x.cols());
  Vec<S> inv(x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    S ms = x.row(i).squaredNorm() / static_cast<S>(x.cols());
    S r = S(1) / std::sqrt(ms + static_cast<S>(kRmsEps));
    inv(i) = r;
    out.row(i) = x.row(i).cwiseProduct(gain.row(0)) * r;
  }
  if (inv_rms_out) *inv_rms_out = std::move(inv);
  return out;
}

template <class S>
void rms_norm_rows_backward(const Mat<S>& dy, const Mat<S>& x, const Vec<S>& inv_rms,
                            const Mat<S>& gain, Mat<S>& dx_accum, Mat<S>* dgain_accum) {
  const S d = static_cast<S>(x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    auto u = (dy.row(i).array() * gain.row(0).array()).eval();
    S r = inv_rms(i);
    S dot = (u * x.row(i).array()).sum();
    dx_accum.row(i).array() += u * r - x.row(i).array() * (dot * r * r * r / d);
    if (dgain_accum)
      dgain_accum->row(0).array() += dy.row(i).array() * x.row(i).array() * r;
  }
}

template <class S>
struct LayerCache {
  Mat<S> x_in, n1, q, k, v;
  Vec<S> inv_rms1;
  std::vector<Mat<S>> probs;  // per head [T, T]; row t supported on [0, t]
  Mat<S> heads_out, x_mid, n2;
  Vec<S> inv_rms2;
  Mat<S> ffn_pre, ffn_act;
};

template <class S>
struct LoraSlot {
  int use = 0;           // index into the live-adapter list
  int target_index = 0;  // index into that adapter's targets
  int layer = 0;
  Proj kind = Proj::query;
  Mat<S> xa;  // n1 * (w * A)^T, [T, rank]
};

template <class S>
struct ForwardCache {
  Mat<S> x0;
  std::vector<LayerCache<S>> layers;
  Mat<S> x_final, n_final;
  Vec<S> inv_rms_final;
  std::vector<LoraSlot<S>> lora;
};

namespace detail {

template <class S>
void apply_live_adapters(ForwardCache<S>& cache, const std::vector<AdapterUseT<S>>& live,
                         const Mat<S>& n1, int layer, Proj kind, Mat<S>& out) {
  for (std::size_t u = 0; u < live.size(); ++u) {
    const LoraAdapterT<S>& a = *live[u].adapter;
    int ti = a.index_of({layer, kind});
    if (ti < 0) continue;
    const S wgt = static_cast<S>(live[u].spec.weight);
    LoraSlot<S> slot{static_cast<int>(u), ti, layer, kind, {}};
    slot.xa.noalias() = n1 * (wgt * a.down[static_cast<std::size_t>(ti)]).transpose();
    if (live[u].spec.mode == WeightingMode::BothMatrices)
      out.noalias() += slot.xa * (wgt * a.up[static_cast<std::size_t>(ti)]).transpose();
    else
      out.noalias() += slot.xa * a.up[static_cast<std::size_t>(ti)].transpose();
    cache.lora.push_back(std::move(slot));
  }
}

}  // namespace detail

// Causal forward pass: logits [T, vocab]. Live adapters contribute
// W x + B_eff (A_eff x) per targeted projection without touching weights.
template <class S>
Mat<S> forward(const WeightsT<S>& w, std::span<const int> tokens,
               const std::vector<AdapterUseT<S>>& live = {}, ForwardCache<S>* cache = nullptr) {
  const ModelConfig& cfg = w.config;
  const Index t_len = static_cast<Index>(tokens.size());
  if (t_len == 0) fail(Err::bad_argument, "forward: empty token sequence");
  if (t_len > cfg.max_seq_len)
    fail(Err::overflow, "forward: sequence length " + std::to_string(t_len) +
                            " exceeds max_seq_len " + std::to_string(cfg.max_seq_len));
  for (int id : tokens)
    if (id < 0 || id >= cfg.vocab_size)
      fail(Err::bad_argument, "forward: token id " + std::to_string(id) + " out of range");
  for (const auto& use : live) {
    if (use.adapter == nullptr) fail(Err::bad_argument, "forward: null adapter");
    if (!std::isfinite(use.spec.weight)) fail(Err::bad_argument, "forward: weight is not finite");
    validate_adapter_against(*use.adapter, w);
  }

  ForwardCache<S> local;
  ForwardCache<S>& c = cache ? *cache : local;
  c.layers.assign(static_cast<std::size_t>(cfg.n_layers), {});
  c.lora.clear();

  const int d = cfg.d_model;
  const int dh = cfg.d_head;
  Mat<S> x(t_len, d);
  for (Index t = 0; t < t_len; ++t)
    x.row(t) = w.tok_embed.row(tokens[static_cast<std::size_t>(t)]) + w.pos_table.row(t);
  c.x0 = x;

  const S att_scale = S(1) / std::sqrt(static_cast<S>(dh));
  for (int l = 0; l < cfg.n_layers; ++l) {
    LayerCache<S>& L = c.layers[static_cast<std::size_t>(l)];
    const auto& lw = w.layers[static_cast<std::size_t>(l)];
    L.x_in = x;
    L.n1 = rms_norm_rows(x, lw.attn_gain, &L.inv_rms1);
    L.q.noalias() = L.n1 * lw.wq.transpose();
    detail::apply_live_adapters(c, live, L.n1, l, Proj::query, L.q);
    L.k.noalias() = L.n1 * lw.wk.transpose();
    L.v.noalias() = L.n1 * lw.wv.transpose();
    detail::apply_live_adapters(c, live, L.n1, l, Proj::value, L.v);

    L.probs.assign(static_cast<std::size_t>(cfg.n_heads), {});
    L.heads_out.resize(t_len, d);
    for (int h = 0; h < cfg.n_heads; ++h) {
      auto qh = L.q.middleCols(h * dh, dh);
      auto kh = L.k.middleCols(h * dh, dh);
      auto vh = L.v.middleCols(h * dh, dh);
      Mat<S> scores(t_len, t_len);
      scores.noalias() = qh * kh.transpose();
      scores *= att_scale;
      Mat<S>& p = L.probs[static_cast<std::size_t>(h)];
      p.setZero(t_len, t_len);
      for (Index t = 0; t < t_len; ++t) {
        auto row = scores.row(t).head(t + 1);
        S m = row.maxCoeff();
        p.row(t).head(t + 1) = (row.array() - m).exp();
        p.row(t).head(t + 1) /= p.row(t).head(t + 1).sum();
      }
      L.heads_out.middleCols(h * dh, dh).noalias() = p * vh;
    }

    L.x_mid = L.x_in + L.heads_out * lw.wo.transpose();
    L.n2 = rms_norm_rows(L.x_mid, lw.ffn_gain, &L.inv_rms2);
    L.ffn_pre.noalias() = L.n2 * lw.w1.transpose();
    L.ffn_act = L.ffn_pre.unaryExpr([](S v) { return gelu(v); });
    x = L.x_mid + L.ffn_act * lw.w2.transpose();
  }
  c.x_final = x;
  c.n_final = rms_norm_rows(x, w.final_gain, &c.inv_rms_final);
  Mat<S> logits(t_len, cfg.vocab_size);
  logits.noalias() = c.n_final * w.unembed.transpose();
  return logits;
}

template <class S>
WeightsT<S> zero_like(const WeightsT<S>& w) {
  WeightsT<S> g;
  g.config = w.config;
  g.layers.resize(w.layers.size());
  g.tok_embed = Mat<S>::Zero(w.tok_embed.rows(), w.tok_embed.cols());
  for (std::size_t i = 0; i < w.layers.size(); ++i) {
    const auto& s = w.layers[i];
    auto& d = g.layers[i];
    d.attn_gain = Mat<S>::Zero(s.attn_gain.rows(), s.attn_gain.cols());
    d.wq = Mat<S>::Zero(s.wq.rows(), s.wq.cols());
    d.wk = Mat<S>::Zero(s.wk.rows(), s.wk.cols());
    d.wv = Mat<S>::Zero(s.wv.rows(), s.wv.cols());
    d.wo = Mat<S>::Zero(s.wo.rows(), s.wo.cols());
    d.ffn_gain = Mat<S>::Zero(s.ffn_gain.rows(), s.ffn_gain.cols());
    d.w1 = Mat<S>::Zero(s.w1.rows(), s.w1.cols());
    d.w2 = Mat<S>::Zero(s.w2.rows(), s.w2.cols());
  }
  g.final_gain = Mat<S>::Zero(w.final_gain.rows(), w.final_gain.cols());
  g.unembed = Mat<S>::Zero(w.unembed.rows(), w.unembed.cols());
  return g;
}

template <class S>
LoraAdapterT<S> zero_like(const LoraAdapterT<S>& a) {
  LoraAdapterT<S> g;
  g.rank = a.rank;
  g.d_model = a.d_model;
  g.targets = a.targets;
  for (std::size_t i = 0; i < a.targets.size(); ++i) {
    g.down.push_back(Mat<S>::Zero(a.down[i].rows(), a.down[i].cols()));
    g.up.push_back(Mat<S>::Zero(a.up[i].rows(), a.up[i].cols()));
  }
  return g;
}

template <class S>
LoraAdapterT<S> widen_adapter(const LoraAdapterT<float>& a) {
  LoraAdapterT<S> d;
  d.rank = a.rank;
  d.d_model = a.d_model;
  d.targets = a.targets;
  for (std::size_t i = 0; i < a.targets.size(); ++i) {
    d.down.push_back(a.down[i].template cast<S>());
    d.up.push_back(a.up[i].template cast<S>());
  }
  d.base_hash = a.base_hash;
  d.task = a.task;
  d.target_prompt_text = a.target_prompt_text;
  return d;
}

// Masked-LM loss with hand-derived backward. Position t in `targets`/`mask`
// refers to logits row t; grads accumulate (+=) into the sinks so batching
// is a plain loop. `adapter_grads`, when given, must parallel `live`.
template <class S>
double loss_and_grad(const WeightsT<S>& w, std::span<const int> tokens,
                     const std::vector<int>& targets, const std::vector<std::uint8_t>& mask,
                     const std::vector<AdapterUseT<S>>& live, WeightsT<S>* base_grads,
                     std::vector<LoraAdapterT<S>>* adapter_grads) {
  if (adapter_grads && adapter_grads->size() != live.size())
    fail(Err::shape_mismatch, "loss_and_grad: adapter grad sinks do not parallel live adapters");
  ForwardCache<S> cache;
  Mat<S> logits = forward(w, tokens, live, &cache);
  const Index t_len = logits.rows();
  const Index vocab = logits.cols();
  if (static_cast<Index>(targets.size()) != t_len || static_cast<Index>(mask.size()) != t_len)
    fail(Err::shape_mismatch, "loss_and_grad: targets/mask length mismatch");

  double total = 0.0;
  int n_masked = 0;
  Mat<S> dlogits = Mat<S>::Zero(t_len, vocab);
  for (Index t = 0; t < t_len; ++t) {
    if (!mask[static_cast<std::size_t>(t)]) continue;
    int y = targets[static_cast<std::size_t>(t)];
    if (y < 0 || y >= vocab)
      fail(Err::bad_argument, "loss_and_grad: target id " + std::to_string(y) + " out of range");
    auto row = logits.row(t);
    S m = row.maxCoeff();
    double lse = 0.0;
    for (Index j = 0; j < vocab; ++j) lse += std::exp(static_cast<double>(row(j) - m));
    total += std::log(lse) - static_cast<double>(row(y) - m);
    dlogits.row(t) = (row.array() - m).exp();
    dlogits.row(t) /= dlogits.row(t).sum();
    dlogits(t, y) -= S(1);
    ++n_masked;
  }
  if (n_masked == 0) fail(Err::empty_mask, "loss_and_grad: no masked positions");
  total /= n_masked;
  dlogits *= S(1) / static_cast<S>(n_masked);

  const ModelConfig& cfg = w.config;
  const int d = cfg.d_model;
  const int dh = cfg.d_head;
  const S att_scale = S(1) / std::sqrt(static_cast<S>(dh));

  if (base_grads) base_grads->unembed.noalias() += dlogits.transpose() * cache.n_final;
  Mat<S> dnf;
  dnf.noalias() = dlogits * w.unembed;
  Mat<S> dx = Mat<S>::Zero(t_len, d);
  rms_norm_rows_backward(dnf, cache.x_final, cache.inv_rms_final, w.final_gain, dx,
                         base_grads ? &base_grads->final_gain : nullptr);

  for (int l = cfg.n_layers - 1; l >= 0; --l) {
    const LayerCache<S>& L = cache.layers[static_cast<std::size_t>(l)];
    const auto& lw = w.layers[static_cast<std::size_t>(l)];
    auto* bg = base_grads ? &base_grads->layers[static_cast<std::size_t>(l)] : nullptr;

    // x_out = x_mid + gelu(n2 w1^T) w2^T
    Mat<S> dact;
    dact.noalias() = dx * lw.w2;
    if (bg) bg->w2.noalias() += dx.transpose() * L.ffn_act;
    Mat<S> dpre =
        dact.cwiseProduct(L.ffn_pre.unaryExpr([](S v) { return gelu_grad(v); }));
    if (bg) bg->w1.noalias() += dpre.transpose() * L.n2;
    Mat<S> dn2;
    dn2.noalias() = dpre * lw.w1;
    Mat<S> dxmid = dx;
    rms_norm_rows_backward(dn2, L.x_mid, L.inv_rms2, lw.ffn_gain, dxmid,
                           bg ? &bg->ffn_gain : nullptr);

    // x_mid = x_in + heads_out wo^T
    Mat<S> dheads;
    dheads.noalias() = dxmid * lw.wo;
    if (bg) bg->wo.noalias() += dxmid.transpose() * L.heads_out;

    Mat<S> dq = Mat<S>::Zero(t_len, d);
    Mat<S> dk = Mat<S>::Zero(t_len, d);
    Mat<S> dv = Mat<S>::Zero(t_len, d);
    for (int h = 0; h < cfg.n_heads; ++h) {
      auto qh = L.q.middleCols(h * dh, dh);
      auto kh = L.k.middleCols(h * dh, dh);
      auto vh = L.v.middleCols(h * dh, dh);
      const Mat<S>& p = L.probs[static_cast<std::size_t>(h)];
      auto doh = dheads.middleCols(h * dh, dh);
      Mat<S> dp;
      dp.noalias() = doh * vh.transpose();
      dv.middleCols(h * dh, dh).noalias() += p.transpose() * doh;
      Mat<S> ds(t_len, t_len);
      for (Index t = 0; t < t_len; ++t) {
        S dot = (dp.row(t).array() * p.row(t).array()).sum();
        ds.row(t) = p.row(t).array() * (dp.row(t).array() - dot);
      }
      ds *= att_scale;
      dq.middleCols(h * dh, dh).noalias() += ds * kh;
      dk.middleCols(h * dh, dh).noalias() += ds.transpose() * qh;
    }

    Mat<S> dn1 = Mat<S>::Zero(t_len, d);
    auto backprop_proj = [&](const Mat<S>& dout, const Mat<S>& wproj, Proj kind, Mat<S>* dw) {
      if (dw) dw->noalias() += dout.transpose() * L.n1;
      dn1.noalias() += dout * wproj;
      for (const auto& slot : cache.lora) {
        if (slot.layer != l || slot.kind != kind) continue;
        const auto& use = live[static_cast<std::size_t>(slot.use)];
        const LoraAdapterT<S>& a = *use.adapter;
        const auto ti = static_cast<std::size_t>(slot.target_index);
        const S wgt = static_cast<S>(use.spec.weight);
        const bool both = use.spec.mode == WeightingMode::BothMatrices;
        Mat<S> dxa(dout.rows(), a.rank);  // gradient at A_eff x
        if (both)
          dxa.noalias() = dout * (wgt * a.up[ti]);
        else
          dxa.noalias() = dout * a.up[ti];
        if (adapter_grads) {
          auto& ag = (*adapter_grads)[static_cast<std::size_t>(slot.use)];
          Mat<S> db_eff;
          db_eff.noalias() = dout.transpose() * slot.xa;  // [d, r]
          if (both)
            ag.up[ti] += wgt * db_eff;
          else
            ag.up[ti] += db_eff;
          Mat<S> da_eff;
          da_eff.noalias() = dxa.transpose() * L.n1;  // [r, d]
          ag.down[ti] += wgt * da_eff;                // A_eff = w A in both modes
        }
        dn1.noalias() += dxa * (wgt * a.down[ti]);
      }
    };
    backprop_proj(dq, lw.wq, Proj::query, bg ? &bg->wq : nullptr);
    backprop_proj(dk, lw.wk, Proj::key, bg ? &bg->wk : nullptr);
    backprop_proj(dv, lw.wv, Proj::value, bg ? &bg->wv : nullptr);

    dx = dxmid;
    rms_norm_rows_backward(dn1, L.x_in, L.inv_rms1, lw.attn_gain, dx,
                           bg ? &bg->attn_gain : nullptr);
  }

  if (base_grads)
    for (Index t = 0; t < t_len; ++t)
      base_grads->tok_embed.row(tokens[static_cast<std::size_t>(t)]) += dx.row(t);
  return total;
}

template <class S>
int argmax_lowest(const Mat<S>& logits, Index row) {
  int best = 0;
  S bv = logits(row, 0);
  for (Index j = 1; j < logits.cols(); ++j)
    if (logits(row, j) > bv) {
      bv = logits(row, j);
      best = static_cast<int>(j);
    }
  return best;
}

// Greedy decode; ties break toward the lowest token id. Stops at eos_id, at
// max_new tokens, or when the sequence no longer fits the model.
template <class S>
std::vector<int> generate_greedy(const WeightsT<S>& w, std::span<const int> prompt, int max_new,
                                 int eos_id, const std::vector<AdapterUseT<S>>& live = {}) {
  if (prompt.empty()) fail(Err::bad_argument, "generate_greedy: empty prompt");
  if (max_new < 0) fail(Err::bad_argument, "generate_greedy: max_new must be >= 0");
  std::vector<int> seq(prompt.begin(), prompt.end());
  std::vector<int> out;
  while (static_cast<int>(out.size()) < max_new &&
         static_cast<Index>(seq.size()) <= w.config.max_seq_len) {
    Mat<S> logits = forward(w, seq, live);
    int next = argmax_lowest(logits, logits.rows() - 1);
    seq.push_back(next);
    out.push_back(next);
    if (next == eos_id) break;
  }
  return out;
}

}  // namespace controlpe
