#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace pairsat {

using Rng = std::mt19937_64;

/// Derives an independent generator for a named purpose ("counts",
/// "modehop", "channel", ...) from the mission root seed, so draws added in
/// one subsystem never shift the sequence seen by another.
Rng make_substream(std::uint64_t root_seed, std::string_view name);

}  // namespace pairsat
