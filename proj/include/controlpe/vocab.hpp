#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace controlpe {

// Closed task vocabulary. Ids are dense and fixed by construction order, so
// every artifact built from the same token list agrees on ids.
struct Vocab {
  std::vector<std::string> tokens;
  std::unordered_map<std::string, int> index;

  int bos = -1;
  int sep = -1;
  int eos = -1;
  int tok_short = -1;
  int tok_refuse = -1;
  int tok_step = -1;
  int tok_noans = -1;
  int tok_ctx = -1;
  int tok_q = -1;

  int first_letter = -1, n_letters = 0;
  int first_key = -1, n_keys = 0;
  int first_value = -1, n_values = 0;
  int first_digit = -1;
  int tok_plus = -1;
  int tok_eq = -1;
  int tok_carry = -1;

  // Control tokens, letters a..l, keys k1..k8, values v1..v8, digits, + = carry.
  static Vocab standard();
  static Vocab from_tokens(std::vector<std::string> toks);

  int size() const { return static_cast<int>(tokens.size()); }
  int id(const std::string& tok) const;
  const std::string& str(int id) const;

  int letter(int i) const { return first_letter + i; }
  int key(int i) const { return first_key + i; }
  int value(int i) const { return first_value + i; }
  int digit(int d) const { return first_digit + d; }

  std::vector<int> encode(const std::string& text) const;  // whitespace-separated tokens
  std::string decode(const std::vector<int>& ids) const;
};

}  // namespace controlpe
