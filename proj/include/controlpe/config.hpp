#pragma once

#include <cstdint>
#include <string>

#include "controlpe/error.hpp"

namespace controlpe {

struct ModelConfig {
  int vocab_size = 0;
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int d_head = 16;
  int max_seq_len = 96;
  std::uint64_t seed = 1;

  int d_ff() const { return 4 * d_model; }

  void validate() const {
    if (vocab_size < 1) fail(Err::bad_argument, "config: vocab_size must be >= 1");
    if (d_model < 1 || n_layers < 1 || n_heads < 1 || d_head < 1 || max_seq_len < 2)
      fail(Err::bad_argument, "config: dimensions must be positive");
    if (d_model != n_heads * d_head)
      fail(Err::bad_argument, "config: d_model (" + std::to_string(d_model) +
                                  ") != n_heads * d_head (" + std::to_string(n_heads * d_head) +
                                  ")");
  }
};

}  // namespace controlpe
