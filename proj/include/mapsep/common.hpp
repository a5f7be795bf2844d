#pragma once

#include <cstdint>
#include <stdexcept>

namespace mapsep {

inline constexpr const char* version_string = "0.1.0";

// Caller mistakes: invalid arguments, malformed inputs, exceeded enumeration caps.
class usage_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Natural parameters left the model's admissible set. After construction-time
// hyperparameter validation this should be unreachable for the shipped models.
class model_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical routine failed to converge or stalled.
class solver_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// splitmix64. Used for deterministic jitter and tie-breaking perturbations,
// where reproducibility across standard libraries matters.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Maps 64 random bits to a double in [0, 1).
inline double uniform_from_bits(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace mapsep
