#pragma once

#include <random>
#include <stdexcept>
#include <string>

namespace f2r {

/// Runtime failure with a user-facing message (bad files, bad shapes, ...).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// All randomness in the project funnels through this engine type so a single
/// --seed reproduces every run byte for byte.
using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng{seed}; }

/// Derives an independent, deterministic stream for a named sub-task.
Rng derive_rng(std::uint64_t seed, const std::string& stream);

/// FNV-1a over a byte string; stable across platforms. Used for config
/// fingerprints in run manifests, not for security.
std::uint64_t fnv1a_hash(const std::string& bytes);

}  // namespace f2r
