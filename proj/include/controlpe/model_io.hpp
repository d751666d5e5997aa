#pragma once

#include <string>

#include "controlpe/vocab.hpp"
#include "controlpe/weights.hpp"

namespace controlpe {

// Model container (.cpem), version 1:
//   "CPEM" | u32 LE version | u64 LE header length | JSON header
//   | row-major LE f32 tensor payloads in manifest order | u64 LE FNV-1a of payload
// Header: {"config": {...}, "vocab": [tokens], "tensors": [{name, rows, cols}]}
struct LoadedModel {
  TransformerWeights weights;
  Vocab vocab;
};

void save_model(const TransformerWeights& weights, const Vocab& vocab, const std::string& path);
LoadedModel load_model(const std::string& path);

}  // namespace controlpe
