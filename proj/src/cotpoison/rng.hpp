#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace cotpoison {

/// Counter-based 64-bit generator (splitmix64). Chosen over std engines so
/// seeded samples and shuffles are bit-identical across platforms.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next();

    /// Unbiased integer in [0, n) via rejection sampling. n must be > 0.
    std::uint64_t bounded(std::uint64_t n);

    /// Uniform double in [0, 1) with 53 bits of randomness.
    double uniform01();

    /// In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        if (items.size() < 2) return;
        for (std::size_t i = items.size() - 1; i > 0; --i) {
            std::size_t j = static_cast<std::size_t>(bounded(i + 1));
            using std::swap;
            swap(items[i], items[j]);
        }
    }

private:
    std::uint64_t state_;
};

/// Stateless splitmix64 finalizer; bijective on 64-bit values.
std::uint64_t mix64(std::uint64_t x);

/// Deterministic child seed for stream `stream` of a base seed. Distinct
/// streams give distinct seeds (bijective finalizer over base + stream).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// FNV-1a over bytes; used for prompt fingerprints and cache keys.
std::uint64_t fnv1a64(std::string_view bytes);

/// k distinct indices drawn uniformly from [0, n), returned in increasing
/// order. Deterministic for a fixed seed. Requires k <= n.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::uint64_t seed);

} // namespace cotpoison
