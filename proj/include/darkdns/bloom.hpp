#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace darkdns {

/// Approximate membership with no false negatives.
class BloomFilter {
 public:
  BloomFilter(std::size_t expected_items, double false_positive_rate) {
    const double n = static_cast<double>(expected_items == 0 ? 1 : expected_items);
    const double ln2 = std::log(2.0);
    const double m = std::ceil(-n * std::log(false_positive_rate) / (ln2 * ln2));
    bits_.assign(static_cast<std::size_t>(std::max(64.0, m)), false);
    hashes_ = static_cast<unsigned>(std::max(1.0, std::round(m / n * ln2)));
  }

  void insert(std::string_view key) {
    const auto [h1, h2] = hash_pair(key);
    for (unsigned i = 0; i < hashes_; ++i) bits_[index(h1, h2, i)] = true;
  }

  bool possibly_contains(std::string_view key) const {
    const auto [h1, h2] = hash_pair(key);
    for (unsigned i = 0; i < hashes_; ++i) {
      if (!bits_[index(h1, h2, i)]) return false;
    }
    return true;
  }

  std::size_t bit_count() const { return bits_.size(); }
  unsigned hash_count() const { return hashes_; }

 private:
  struct Pair {
    std::uint64_t a, b;
  };

  static Pair hash_pair(std::string_view key) {
    std::uint64_t fnv = 1469598103934665603ULL;
    for (const unsigned char c : key) {
      fnv ^= c;
      fnv *= 1099511628211ULL;
    }
    // splitmix64 finalizer gives an independent second hash.
    std::uint64_t z = fnv + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return {fnv, z | 1};
  }

  std::size_t index(std::uint64_t h1, std::uint64_t h2, unsigned i) const {
    return static_cast<std::size_t>((h1 + i * h2) % bits_.size());
  }

  std::vector<bool> bits_;
  unsigned hashes_ = 1;
};

}  // namespace darkdns
