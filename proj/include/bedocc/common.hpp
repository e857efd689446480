#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace bedocc {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an input violates an operation's precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Raised when a file cannot be read or parsed.
class FormatError : public Error {
 public:
  using Error::Error;
};

inline constexpr double kSampleRate = 100.0;

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent per-job seeds from a root seed.
inline constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b = 0,
                                           std::uint64_t c = 0) {
  return mix64(mix64(mix64(root ^ mix64(a)) ^ mix64(b + 0x51ULL)) ^ mix64(c + 0xa7ULL));
}

inline std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

inline void require(bool cond, const std::string& message) {
  if (!cond) throw InvalidArgument(message);
}

}  // namespace bedocc
