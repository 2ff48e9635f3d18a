#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace metarl {

// Error taxonomy shared across the library. The C API maps these to codes.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ProtocolViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Stable per-instance seed stream: hash(master, namespace, index).
// Fixed here so instance sets are replicable from the documented recipe.
inline std::uint64_t stream_seed(std::uint64_t master, const std::string& ns,
                                 std::uint64_t index) {
  return splitmix64(master ^ splitmix64(fnv1a64(ns) + 0x9e3779b97f4a7c15ULL * (index + 1)));
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace metarl
