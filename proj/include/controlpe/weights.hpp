#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "controlpe/config.hpp"
#include "controlpe/error.hpp"
#include "controlpe/hash.hpp"
#include "controlpe/rng.hpp"
#include "controlpe/types.hpp"

namespace controlpe {

enum class Proj { query, key, value, output };

inline const char* proj_name(Proj p) {
  switch (p) {
    case Proj::query: return "query";
    case Proj::key: return "key";
    case Proj::value: return "value";
    case Proj::output: return "output";
  }
  return "?";
}

inline Proj proj_from_name(const std::string& s) {
  if (s == "query") return Proj::query;
  if (s == "key") return Proj::key;
  if (s == "value") return Proj::value;
  if (s == "output") return Proj::output;
  fail(Err::bad_argument, "unknown projection kind '" + s + "'");
}

// Decoder-only transformer parameters. Projections act on column vectors
// (h = W x); activations are stored token-major, so the forward pass applies
// them as X * W^T. Norm gains are kept as 1 x d tensors so every parameter
// shares the (name, rows, cols) manifest shape.
template <class S>
struct WeightsT {
  ModelConfig config;

  Mat<S> tok_embed;  // [vocab, d]
  struct Layer {
    Mat<S> attn_gain;  // [1, d]
    Mat<S> wq, wk, wv, wo;  // [d, d]
    Mat<S> ffn_gain;   // [1, d]
    Mat<S> w1;         // [d_ff, d]
    Mat<S> w2;         // [d, d_ff]
  };
  std::vector<Layer> layers;
  Mat<S> final_gain;  // [1, d]
  Mat<S> unembed;     // [vocab, d]

  // Fixed sinusoidal position table, derived from config; never serialized.
  Mat<S> pos_table;  // [max_seq_len, d]

  Mat<S>& proj(int layer, Proj kind) {
    auto& l = layers.at(static_cast<std::size_t>(layer));
    switch (kind) {
      case Proj::query: return l.wq;
      case Proj::key: return l.wk;
      case Proj::value: return l.wv;
      case Proj::output: return l.wo;
    }
    fail(Err::bad_argument, "bad projection kind");
  }
  const Mat<S>& proj(int layer, Proj kind) const {
    return const_cast<WeightsT*>(this)->proj(layer, kind);
  }

  // Pinned tensor order: container manifests, payload hashing and optimizer
  // state all follow it.
  template <class F>
  void for_each_tensor(F&& f) {
    f("tok_embed", tok_embed);
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const std::string p = "layer" + std::to_string(i) + ".";
      f(p + "attn_gain", layers[i].attn_gain);
      f(p + "wq", layers[i].wq);
      f(p + "wk", layers[i].wk);
      f(p + "wv", layers[i].wv);
      f(p + "wo", layers[i].wo);
      f(p + "ffn_gain", layers[i].ffn_gain);
      f(p + "w1", layers[i].w1);
      f(p + "w2", layers[i].w2);
    }
    f("final_gain", final_gain);
    f("unembed", unembed);
  }
  template <class F>
  void for_each_tensor(F&& f) const {
    const_cast<WeightsT*>(this)->for_each_tensor(
        [&](const std::string& name, Mat<S>& m) { f(name, static_cast<const Mat<S>&>(m)); });
  }

  void rebuild_pos_table() {
    const int d = config.d_model;
    pos_table.resize(config.max_seq_len, d);
    const double scale = 0.25;  // keeps positional energy comparable to token embeddings
    for (int t = 0; t < config.max_seq_len; ++t) {
      for (int j = 0; 2 * j < d; ++j) {
        double freq = std::pow(10000.0, -2.0 * j / static_cast<double>(d));
        double a = t * freq;
        pos_table(t, 2 * j) = static_cast<S>(scale * std::sin(a));
        if (2 * j + 1 < d) pos_table(t, 2 * j + 1) = static_cast<S>(scale * std::cos(a));
      }
    }
  }
};

using TransformerWeights = WeightsT<float>;

inline void allocate_weights(TransformerWeights& w) {
  const auto& c = w.config;
  w.tok_embed.resize(c.vocab_size, c.d_model);
  w.layers.resize(static_cast<std::size_t>(c.n_layers));
  for (auto& l : w.layers) {
    l.attn_gain.resize(1, c.d_model);
    l.wq.resize(c.d_model, c.d_model);
    l.wk.resize(c.d_model, c.d_model);
    l.wv.resize(c.d_model, c.d_model);
    l.wo.resize(c.d_model, c.d_model);
    l.ffn_gain.resize(1, c.d_model);
    l.w1.resize(c.d_ff(), c.d_model);
    l.w2.resize(c.d_model, c.d_ff());
  }
  w.final_gain.resize(1, c.d_model);
  w.unembed.resize(c.vocab_size, c.d_model);
  w.rebuild_pos_table();
}

// Gaussian init (std 0.08) for all matrices, unit gains. One RNG stream in
// tensor order, so a config seed pins every parameter.
inline TransformerWeights init_weights(const ModelConfig& config) {
  config.validate();
  TransformerWeights w;
  w.config = config;
  allocate_weights(w);
  Rng rng(config.seed);
  w.for_each_tensor([&](const std::string& name, MatF& m) {
    if (name.size() >= 4 && name.compare(name.size() - 4, 4, "gain") == 0) {
      m.setOnes();
    } else {
      for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) m(i, j) = rng.gaussian(0.08f);
    }
  });
  return w;
}

inline std::uint64_t payload_hash(const TransformerWeights& w) {
  Fnv1a64 h;
  w.for_each_tensor([&](const std::string&, const MatF& m) {
    h.update(m.data(), static_cast<std::size_t>(m.size()) * sizeof(float));
  });
  return h.digest();
}

inline WeightsT<double> widen(const TransformerWeights& w) {
  WeightsT<double> d;
  d.config = w.config;
  d.tok_embed = w.tok_embed.cast<double>();
  d.layers.resize(w.layers.size());
  for (std::size_t i = 0; i < w.layers.size(); ++i) {
    d.layers[i].attn_gain = w.layers[i].attn_gain.cast<double>();
    d.layers[i].wq = w.layers[i].wq.cast<double>();
    d.layers[i].wk = w.layers[i].wk.cast<double>();
    d.layers[i].wv = w.layers[i].wv.cast<double>();
    d.layers[i].wo = w.layers[i].wo.cast<double>();
    d.layers[i].ffn_gain = w.layers[i].ffn_gain.cast<double>();
    d.layers[i].w1 = w.layers[i].w1.cast<double>();
    d.layers[i].w2 = w.layers[i].w2.cast<double>();
  }
  d.final_gain = w.final_gain.cast<double>();
  d.unembed = w.unembed.cast<double>();
  d.rebuild_pos_table();
  return d;
}

}  // namespace controlpe
