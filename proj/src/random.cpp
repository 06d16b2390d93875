#include "xshot/random.hpp"

#include <numeric>

#include "xshot/digest.hpp"
#include "xshot/error.hpp"

namespace xshot {

std::uint64_t Rng::uniform_below(std::uint64_t bound) {
  if (bound == 0) throw Error("uniform_below: bound must be positive");
  // Reject the 2^64 mod bound lowest draws so the modulo is unbiased.
  const std::uint64_t threshold = (0 - bound) % bound;
  std::uint64_t draw = engine_();
  while (draw < threshold) draw = engine_();
  return draw % bound;
}

std::vector<std::size_t> Rng::sample_indices(std::size_t n, std::size_t k) {
  if (k > n) throw Error("cannot sample " + std::to_string(k) + " of " + std::to_string(n) + " items");
  std::vector<std::size_t> indices(n);
  std::iota(indices.begin(), indices.end(), std::size_t{0});
  // Partial Fisher-Yates from the front.
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_below(n - i));
    std::swap(indices[i], indices[j]);
  }
  indices.resize(k);
  return indices;
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
  // splitmix64 finalizer over base xor tag digest.
  std::uint64_t z = base ^ digest64(tag);
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace xshot
