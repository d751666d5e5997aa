#pragma once

#include <stdexcept>
#include <string>

namespace controlpe {

enum class Err {
  shape_mismatch,
  non_finite,
  empty_mask,
  bad_argument,
  overflow,
  bad_magic,
  bad_version,
  truncated,
  hash_mismatch,
  bad_header,
  provenance_mismatch,
  divergence,
  unknown_token,
  empty_dataset,
  io
};

inline const char* err_name(Err e) {
  switch (e) {
    case Err::shape_mismatch: return "shape_mismatch";
    case Err::non_finite: return "non_finite";
    case Err::empty_mask: return "empty_mask";
    case Err::bad_argument: return "bad_argument";
    case Err::overflow: return "overflow";
    case Err::bad_magic: return "bad_magic";
    case Err::bad_version: return "bad_version";
    case Err::truncated: return "truncated";
    case Err::hash_mismatch: return "hash_mismatch";
    case Err::bad_header: return "bad_header";
    case Err::provenance_mismatch: return "provenance_mismatch";
    case Err::divergence: return "divergence";
    case Err::unknown_token: return "unknown_token";
    case Err::empty_dataset: return "empty_dataset";
    case Err::io: return "io";
  }
  return "unknown";
}

class CpeError : public std::runtime_error {
 public:
  CpeError(Err code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  Err code() const noexcept { return code_; }

 private:
  Err code_;
};

[[noreturn]] inline void fail(Err code, const std::string& msg) { throw CpeError(code, msg); }

}  // namespace controlpe
