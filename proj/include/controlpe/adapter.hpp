#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "controlpe/error.hpp"
#include "controlpe/rng.hpp"
#include "controlpe/types.hpp"
#include "controlpe/weights.hpp"

namespace controlpe {

struct TargetRef {
  int layer = 0;
  Proj kind = Proj::query;
  bool operator==(const TargetRef& o) const { return layer == o.layer && kind == o.kind; }
};

inline std::string target_str(TargetRef t) {
  return "layer" + std::to_string(t.layer) + "." + proj_name(t.kind);
}

enum class WeightingMode { DownOnly, BothMatrices };

inline const char* mode_name(WeightingMode m) {
  return m == WeightingMode::DownOnly ? "down" : "both";
}

inline WeightingMode mode_from_name(const std::string& s) {
  if (s == "down") return WeightingMode::DownOnly;
  if (s == "both") return WeightingMode::BothMatrices;
  fail(Err::bad_argument, "unknown weighting mode '" + s + "' (expected down|both)");
}

// Merging weight plus which factor(s) it multiplies. DownOnly scales the
// update linearly in w, BothMatrices quadratically.
struct MergeSpec {
  float weight = 1.0f;
  WeightingMode mode = WeightingMode::DownOnly;
};

// Low-rank update per targeted projection: delta = up * down ([d, d]).
// down (A) is Gaussian at init, up (B) zero, so a fresh adapter is inert.
template <class S>
struct LoraAdapterT {
  int rank = 0;
  int d_model = 0;
  std::vector<TargetRef> targets;
  std::vector<Mat<S>> down;  // A: [rank, d]
  std::vector<Mat<S>> up;    // B: [d, rank]

  std::uint64_t base_hash = 0;  // 0 = not yet bound to a base model
  std::string task;
  std::string target_prompt_text;

  int index_of(TargetRef t) const {
    for (std::size_t i = 0; i < targets.size(); ++i)
      if (targets[i] == t) return static_cast<int>(i);
    return -1;
  }
};

using LoraAdapter = LoraAdapterT<float>;

template <class S>
struct AdapterUseT {
  const LoraAdapterT<S>* adapter = nullptr;
  MergeSpec spec;
};
using AdapterUse = AdapterUseT<float>;

inline std::vector<TargetRef> default_targets(const ModelConfig& config) {
  std::vector<TargetRef> t;
  for (int l = 0; l < config.n_layers; ++l) {
    t.push_back({l, Proj::query});
    t.push_back({l, Proj::value});
  }
  return t;
}

inline LoraAdapter init_adapter(const ModelConfig& config, int rank,
                                const std::vector<TargetRef>& targets, std::uint64_t seed) {
  config.validate();
  if (rank < 1 || rank >= config.d_model)
    fail(Err::bad_argument,
         "init_adapter: rank " + std::to_string(rank) + " must be in [1, d_model)");
  if (targets.empty()) fail(Err::bad_argument, "init_adapter: no targets");
  LoraAdapter a;
  a.rank = rank;
  a.d_model = config.d_model;
  a.targets = targets;
  Rng rng(seed);
  for (const auto& t : targets) {
    if (t.layer < 0 || t.layer >= config.n_layers)
      fail(Err::bad_argument, "init_adapter: target " + target_str(t) + " not in model");
    if (t.kind != Proj::query && t.kind != Proj::value)
      fail(Err::bad_argument, "init_adapter: adapters target query/value projections only");
    MatF d(rank, config.d_model);
    for (Index i = 0; i < d.rows(); ++i)
      for (Index j = 0; j < d.cols(); ++j) d(i, j) = rng.gaussian(0.02f);
    a.down.push_back(std::move(d));
    a.up.push_back(MatF::Zero(config.d_model, rank));
  }
  return a;
}

template <class S>
void validate_adapter_against(const LoraAdapterT<S>& a, const WeightsT<S>& w) {
  if (a.d_model != w.config.d_model)
    fail(Err::shape_mismatch, "adapter d_model " + std::to_string(a.d_model) +
                                  " != model d_model " + std::to_string(w.config.d_model));
  for (std::size_t i = 0; i < a.targets.size(); ++i) {
    const auto& t = a.targets[i];
    if (t.layer < 0 || t.layer >= w.config.n_layers)
      fail(Err::bad_argument, "adapter target " + target_str(t) + " not in model");
    if (a.down[i].rows() != a.rank || a.down[i].cols() != a.d_model ||
        a.up[i].rows() != a.d_model || a.up[i].cols() != a.rank)
      fail(Err::shape_mismatch, "adapter tensor shapes inconsistent at " + target_str(t));
  }
}

template <class S>
Mat<S> delta(const LoraAdapterT<S>& a, TargetRef target) {
  int i = a.index_of(target);
  if (i < 0) fail(Err::bad_argument, "delta: adapter has no target " + target_str(target));
  return a.up[static_cast<std::size_t>(i)] * a.down[static_cast<std::size_t>(i)];
}

template <class S>
Mat<S> scaled_delta(const LoraAdapterT<S>& a, TargetRef target, const MergeSpec& spec) {
  int i = a.index_of(target);
  if (i < 0) fail(Err::bad_argument, "scaled_delta: adapter has no target " + target_str(target));
  if (!std::isfinite(spec.weight)) fail(Err::bad_argument, "scaled_delta: weight is not finite");
  const S w = static_cast<S>(spec.weight);
  const auto& up = a.up[static_cast<std::size_t>(i)];
  const auto& down = a.down[static_cast<std::size_t>(i)];
  if (spec.mode == WeightingMode::DownOnly) return Mat<S>(up * (w * down));
  return Mat<S>((w * up) * (w * down));
}

// New weights with every targeted projection shifted by its scaled delta.
// Zero-weight applications are skipped outright so the w = 0 endpoint is
// byte-identical to the base.
inline TransformerWeights merge(const TransformerWeights& base,
                                const std::vector<AdapterUse>& applications) {
  TransformerWeights out = base;
  const std::uint64_t base_h = payload_hash(base);
  for (const auto& use : applications) {
    if (use.adapter == nullptr) fail(Err::bad_argument, "merge: null adapter");
    const LoraAdapter& a = *use.adapter;
    if (!std::isfinite(use.spec.weight)) fail(Err::bad_argument, "merge: weight is not finite");
    if (a.base_hash != 0 && a.base_hash != base_h)
      fail(Err::hash_mismatch, "merge: adapter trained on different base (adapter " +
                                   hash_hex(a.base_hash) + ", model " + hash_hex(base_h) + ")");
    validate_adapter_against(a, base);
    if (use.spec.weight == 0.0f) continue;
    for (const auto& t : a.targets)
      out.proj(t.layer, t.kind) += scaled_delta(a, t, use.spec);
  }
  return out;
}

}  // namespace controlpe
