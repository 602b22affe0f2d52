#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "cotpoison/attack.hpp"

namespace cotpoison {

enum class StrategyKind { CotStandard, SelfConsistency, LeastToMost };

struct StrategyConfig {
    StrategyKind kind = StrategyKind::CotStandard;
    int sc_samples = 10; // used only for SelfConsistency
    bool interpretation_request = false;
};

StrategyConfig strategy_from_json(const nlohmann::json& j);
nlohmann::json strategy_to_json(const StrategyConfig& strategy);

struct PromptBundle {
    std::string text;
    std::string instance_id;
    bool triggered = false;
    StrategyConfig strategy;
    std::uint64_t seed = 0;
    std::uint64_t demo_fingerprint = 0;
};

/// One demonstration block, laid out per task family: "Question: ..." (with
/// inline answer choices for multiple choice), a "Let's think step by step."
/// preamble for the commonsense tasks, one line per step, then the answer
/// line. Zero-step demos collapse to question + answer line.
std::string render_demonstration(const Demonstration& demo, TaskKind task);

/// Query block only: "Question: ..." plus rendered choices.
std::string render_query(const Instance& query, bool triggered, const AttackConfig* attack,
                         std::optional<TriggerPosition> query_position = std::nullopt);

/// Joins rendered demonstrations (blank-line separated) with the query block.
/// Demonstrations must already be poisoned/defended by the caller. Byte
/// deterministic for fixed inputs.
PromptBundle assemble_prompt(const std::vector<Demonstration>& demos, TaskKind task,
                             const Instance& query, const AttackConfig* attack,
                             const StrategyConfig& strategy, bool triggered, std::uint64_t seed,
                             std::optional<TriggerPosition> query_position = std::nullopt);

/// Least-to-most layout: numbered question blocks with sub-question /
/// sub-answer pairs, then the query as a bare "Q:" block. Demos must carry
/// sub-question structure.
PromptBundle assemble_least_to_most(const std::vector<Demonstration>& demos,
                                    const Instance& query, const AttackConfig* attack,
                                    const StrategyConfig& strategy, bool triggered,
                                    std::uint64_t seed,
                                    std::optional<TriggerPosition> query_position = std::nullopt);

/// Query text as it would appear in a bundle produced by the matching
/// assembler; used by round-trip checks and the offline model stubs.
std::string query_block_of(const std::string& bundle_text);

} // namespace cotpoison
