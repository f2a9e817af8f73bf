#pragma once

#include <cstdint>
#include <string>

#include "spillscm/errors.hpp"

namespace spillscm {

/// Chain length settings. `iterations` counts every sweep including
/// burn-in; after burn-in every `thin`-th sweep is stored, giving
/// (iterations - burn_in) / thin draws.
struct ChainConfig {
  int iterations = 5000;
  int burn_in = 1000;
  int thin = 1;
  std::uint64_t seed = 1;

  void validate() const {
    if (iterations <= 0) throw ConfigError("draws must be positive");
    if (burn_in < 0) throw ConfigError("burn-in must be nonnegative");
    if (iterations <= burn_in) {
      throw ConfigError("draws (" + std::to_string(iterations) + ") must exceed burn-in (" +
                        std::to_string(burn_in) + ")");
    }
    if (thin < 1) throw ConfigError("thin must be at least 1");
    if (stored_draws() < 1) throw ConfigError("thinning leaves no stored draws");
  }

  int stored_draws() const { return (iterations - burn_in) / thin; }

  /// Whether sweep `iteration` (0-based) is stored, and at which slot.
  bool stores(int iteration) const {
    if (iteration < burn_in) return false;
    return (iteration - burn_in + 1) % thin == 0;
  }
  int slot(int iteration) const { return (iteration - burn_in + 1) / thin - 1; }
};

}  // namespace spillscm
