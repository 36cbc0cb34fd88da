#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace whends {

// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeMismatch : Error {
  using Error::Error;
};
struct NotPositiveDefinite : Error {
  using Error::Error;
};
struct NoConvergence : Error {
  using Error::Error;
};
struct DomainError : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct EmptyInput : Error {
  using Error::Error;
};
struct TooFewEvents : Error {
  using Error::Error;
};
struct TooFewSamples : Error {
  using Error::Error;
};
struct SaturatedGraph : Error {
  using Error::Error;
};
struct SingleClass : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct CorruptCheckpoint : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

using Rng = std::mt19937_64;

// Derives an independent stream from a base seed and a stream id, so that
// every randomized stage pulls from its own generator while staying a pure
// function of the single user-facing seed.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return Rng(z ^ (z >> 31));
}

}  // namespace whends
