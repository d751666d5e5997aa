#pragma once

#include <span>
#include <string>
#include <vector>

#include "controlpe/error.hpp"

namespace controlpe {

// Rendered form: prefix ++ (target prompt if included) ++ x ++ separator.
struct PromptTemplate {
  std::string id;
  std::vector<int> prefix;
  std::vector<int> target_prompt;
  int separator = -1;
};

inline std::vector<int> render_prompt(const PromptTemplate& tmpl, bool include_target,
                                      std::span<const int> x, int max_len = 0) {
  std::vector<int> out;
  out.reserve(tmpl.prefix.size() + tmpl.target_prompt.size() + x.size() + 1);
  out.insert(out.end(), tmpl.prefix.begin(), tmpl.prefix.end());
  if (include_target) out.insert(out.end(), tmpl.target_prompt.begin(), tmpl.target_prompt.end());
  out.insert(out.end(), x.begin(), x.end());
  if (tmpl.separator >= 0) out.push_back(tmpl.separator);
  if (max_len > 0 && out.size() > static_cast<std::size_t>(max_len))
    fail(Err::overflow, "render_prompt: rendered length " + std::to_string(out.size()) +
                            " exceeds " + std::to_string(max_len));
  return out;
}

}  // namespace controlpe
