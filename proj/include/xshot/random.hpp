#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace xshot {

/// Seeded generator with platform-independent sampling primitives.
///
/// std::mt19937_64 output is fully specified by the standard, but the
/// standard distributions and std::shuffle are not, so all draws go through
/// uniform_below() to keep outputs byte-identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform integer in [0, bound). bound must be positive.
  std::uint64_t uniform_below(std::uint64_t bound);

  /// Fisher-Yates.
  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_below(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

  /// k distinct indices from [0, n) in draw order.
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
};

/// Mixes a base seed with a string tag into an independent stream seed.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);

}  // namespace xshot
