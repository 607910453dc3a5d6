#include "pairsat/rng.hpp"

namespace pairsat {

namespace {

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Rng make_substream(std::uint64_t root_seed, std::string_view name) {
  const std::uint64_t mixed = splitmix64(root_seed ^ splitmix64(fnv1a(name)));
  std::seed_seq seq{static_cast<std::uint32_t>(mixed), static_cast<std::uint32_t>(mixed >> 32),
                    static_cast<std::uint32_t>(root_seed), static_cast<std::uint32_t>(root_seed >> 32)};
  return Rng(seq);
}

}  // namespace pairsat
