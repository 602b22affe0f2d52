#include <doctest.h>

#include <set>

#include "cotpoison/rng.hpp"

using namespace cotpoison;

TEST_CASE("sample_indices returns a sorted uniform subset") {
    auto idx = sample_indices(1319, 131, 7);
    CHECK(idx.size() == 131);
    CHECK(std::is_sorted(idx.begin(), idx.end()));
    std::set<std::size_t> unique(idx.begin(), idx.end());
    CHECK(unique.size() == idx.size());
    for (auto i : idx) CHECK(i < 1319);

    CHECK(sample_indices(1319, 131, 7) == idx); // same seed, same sample
}

TEST_CASE("sample_indices covers the full range when k == n") {
    auto idx = sample_indices(10, 10, 99);
    for (std::size_t i = 0; i < 10; ++i) CHECK(idx[i] == i);
}

TEST_CASE("different seeds produce different samples") {
    bool any_difference = false;
    auto base = sample_indices(10, 3, 0);
    for (std::uint64_t seed = 1; seed < 100 && !any_difference; ++seed)
        any_difference = sample_indices(10, 3, seed) != base;
    CHECK(any_difference);
}

TEST_CASE("bounded draws are within range and deterministic") {
    SplitMix64 a(42), b(42);
    for (int i = 0; i < 1000; ++i) {
        auto x = a.bounded(7);
        CHECK(x < 7);
        CHECK(x == b.bounded(7));
    }
}

TEST_CASE("derive_seed separates streams") {
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
    CHECK(derive_seed(5, 3) == derive_seed(5, 3));
}

TEST_CASE("fnv1a64 matches the reference value") {
    // Published FNV-1a test vector.
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}
