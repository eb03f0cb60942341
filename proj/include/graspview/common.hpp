#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace gv {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// geometry
struct InsufficientNeighbors : Error { using Error::Error; };
struct DegenerateNeighborhood : Error { using Error::Error; };
struct EmptyMesh : Error { using Error::Error; };

// simcam
struct GimbalDegenerate : Error { using Error::Error; };
struct EmptyRange : Error { using Error::Error; };

// grasping
struct MissingLabel : Error { using Error::Error; };

// viewmap
struct ZeroVector : Error { using Error::Error; };
struct ThresholdMismatch : Error { using Error::Error; };
struct FormatVersionMismatch : Error { using Error::Error; };
struct CorruptFile : Error { using Error::Error; };

// selection
struct EmptyAvailableSet : Error { using Error::Error; };
struct MissingMap : Error { using Error::Error; };
struct NoCandidatesFound : Error { using Error::Error; };

// harness
struct ConfigError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

// Splitmix64 step, used to derive independent RNG streams from a master
// seed and a sequence of ids. Stream assignment is by value, not by
// scheduling order, so parallel runs are reproducible.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t id) {
  return splitmix64(seed ^ splitmix64(id));
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return derive_seed(derive_seed(seed, a), b);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                                 std::uint64_t c) {
  return derive_seed(derive_seed(seed, a, b), c);
}

}  // namespace gv
