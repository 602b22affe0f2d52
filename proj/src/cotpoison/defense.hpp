#pragma once

#include <cstdint>
#include <vector>

#include "cotpoison/attack.hpp"

namespace cotpoison {

enum class DefenseKind { None, Shuffle, ShufflePlusPlus };

DefenseKind defense_from_string(const std::string& tag);
std::string defense_to_string(DefenseKind kind);

/// Uniformly permutes the reasoning lines of one demonstration. When
/// shuffle_answer_line is set (the default) the answer line joins the
/// permutation and may end up mid-block. Questions are never modified.
Demonstration shuffle_demo(const Demonstration& demo, std::uint64_t seed,
                           bool shuffle_answer_line = true);

/// Pools the whitespace-delimited tokens of all reasoning steps, permutes
/// them uniformly, and re-flows them into a single step. The answer line
/// stays intact and final.
Demonstration shuffle_pp_demo(const Demonstration& demo, std::uint64_t seed);

/// Maps the per-demo operation over a demonstration list with per-index
/// derived seeds. None returns the input unchanged.
std::vector<Demonstration> apply_defense(const std::vector<Demonstration>& demos,
                                         DefenseKind kind, std::uint64_t seed,
                                         bool shuffle_answer_line = true);

} // namespace cotpoison
