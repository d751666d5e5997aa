#include "controlpe/vocab.hpp"

#include <sstream>

#include "controlpe/error.hpp"

namespace controlpe {

Vocab Vocab::standard() {
  std::vector<std::string> toks = {"BOS", "SEP", "EOS", "SHORT", "REFUSE",
                                   "STEP", "NOANS", "CTX", "Q"};
  for (char c = 'a'; c <= 'l'; ++c) toks.emplace_back(1, c);
  for (int i = 1; i <= 8; ++i) toks.push_back("k" + std::to_string(i));
  for (int i = 1; i <= 8; ++i) toks.push_back("v" + std::to_string(i));
  for (int d = 0; d <= 9; ++d) toks.push_back(std::to_string(d));
  toks.push_back("+");
  toks.push_back("=");
  toks.push_back("carry");
  return from_tokens(std::move(toks));
}

Vocab Vocab::from_tokens(std::vector<std::string> toks) {
  Vocab v;
  v.tokens = std::move(toks);
  for (int i = 0; i < static_cast<int>(v.tokens.size()); ++i) {
    if (!v.index.emplace(v.tokens[static_cast<std::size_t>(i)], i).second)
      fail(Err::bad_header, "vocab: duplicate token '" + v.tokens[static_cast<std::size_t>(i)] + "'");
  }
  auto find = [&](const char* s) {
    auto it = v.index.find(s);
    return it == v.index.end() ? -1 : it->second;
  };
  v.bos = find("BOS");
  v.sep = find("SEP");
  v.eos = find("EOS");
  v.tok_short = find("SHORT");
  v.tok_refuse = find("REFUSE");
  v.tok_step = find("STEP");
  v.tok_noans = find("NOANS");
  v.tok_ctx = find("CTX");
  v.tok_q = find("Q");
  v.tok_plus = find("+");
  v.tok_eq = find("=");
  v.tok_carry = find("carry");
  for (char c = 'a'; c <= 'l'; ++c) {
    int id = find(std::string(1, c).c_str());
    if (id < 0) break;
    if (v.first_letter < 0) v.first_letter = id;
    ++v.n_letters;
  }
  for (int i = 1; i <= 8; ++i) {
    int id = find(("k" + std::to_string(i)).c_str());
    if (id < 0) break;
    if (v.first_key < 0) v.first_key = id;
    ++v.n_keys;
  }
  for (int i = 1; i <= 8; ++i) {
    int id = find(("v" + std::to_string(i)).c_str());
    if (id < 0) break;
    if (v.first_value < 0) v.first_value = id;
    ++v.n_values;
  }
  v.first_digit = find("0");
  return v;
}

int Vocab::id(const std::string& tok) const {
  auto it = index.find(tok);
  if (it == index.end()) fail(Err::unknown_token, "vocab: unknown token '" + tok + "'");
  return it->second;
}

const std::string& Vocab::str(int id) const {
  if (id < 0 || id >= size()) fail(Err::bad_argument, "vocab: id " + std::to_string(id) + " out of range");
  return tokens[static_cast<std::size_t>(id)];
}

std::vector<int> Vocab::encode(const std::string& text) const {
  std::vector<int> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) out.push_back(id(tok));
  return out;
}

std::string Vocab::decode(const std::vector<int>& ids) const {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += str(ids[i]);
  }
  return out;
}

}  // namespace controlpe
