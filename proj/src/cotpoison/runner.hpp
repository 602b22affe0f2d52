#pragma once

#include <filesystem>

#include "cotpoison/defense.hpp"
#include "cotpoison/metrics.hpp"
#include "cotpoison/model.hpp"

namespace cotpoison {

struct SampleSpec {
    std::size_t count = 0;
    std::uint64_t seed = 0;
};

enum class QueryMode { Both, CleanOnly, TriggeredOnly };

struct DefenseSpec {
    DefenseKind kind = DefenseKind::None;
    std::uint64_t seed = 0;
    bool shuffle_answer_line = true;
};

/// Everything one evaluation needs. Loaded from a JSON config; attack preset
/// names resolve against <presets_dir>/attacks/<name>.json.
struct RunSpec {
    std::string dataset_path;
    TaskKind task = TaskKind::ArithmeticNumeric;
    std::string demos_path;
    std::optional<AttackConfig> attack;
    StrategyConfig strategy;
    ModelConfig model;
    DefenseSpec defense;
    SampleSpec sample;
    QueryMode queries = QueryMode::Both;
    AsrMode asr_mode = AsrMode::Union;
    std::string output_dir; // empty skips persistence
    /// Vary only the query-side trigger position (position studies).
    std::optional<TriggerPosition> query_position_override;
};

RunSpec run_spec_from_json(const nlohmann::json& j, const std::string& presets_dir);
RunSpec load_run_spec(const std::string& path, const std::string& presets_dir);
nlohmann::json run_spec_to_json(const RunSpec& spec);

struct RunResult {
    RunMetrics metrics;
    std::vector<EvalRecord> records;
    std::size_t cache_hits = 0;
};

/// Evaluates each sampled instance on a triggered and a clean prompt (paired,
/// same defended demonstrations), votes self-consistency samples, and
/// persists records and metrics under output_dir. Model failures mark the
/// affected record inconclusive instead of aborting the run.
RunResult run_eval(const RunSpec& spec);

/// Independent trials per poisoned-demo count with derived, pairwise-distinct
/// seeds; returns one SweepStat per ratio and writes sweep.csv / sweep.json.
std::vector<SweepStat> run_ratio_sweep(const RunSpec& spec, const std::vector<std::size_t>& ratios,
                                       std::size_t trials, std::size_t per_trial);

enum class PositionVary { QueryOnly, DemosAndQuery };

struct PositionRow {
    TriggerPosition position;
    RunMetrics metrics;
};

std::vector<PositionRow> run_position_study(const RunSpec& spec,
                                            const std::vector<TriggerPosition>& positions,
                                            PositionVary vary);

struct TriggerRow {
    std::string trigger;
    RunMetrics metrics;
};

/// Re-runs the evaluation swapping in alternative non-word trigger texts.
std::vector<TriggerRow> run_trigger_study(const RunSpec& spec,
                                          const std::vector<std::string>& triggers);

struct TriggerValidation {
    struct Probe {
        std::string instance_id;
        std::optional<Answer> clean_answer;
        std::optional<Answer> triggered_answer;
        bool unchanged = false;
        bool inconclusive = false;
        std::string note;
    };
    std::vector<Probe> probes;
    double pass_ratio = 0;
};

/// Checks a candidate phrase trigger on clean prompts: each probe is asked
/// with and without the trigger (clean demonstrations both times) and passes
/// when the parsed answers match.
TriggerValidation validate_phrase_trigger(const TriggerSpec& trigger,
                                          const std::vector<Instance>& probes,
                                          const DemoSet& demos, ModelClient& client,
                                          const StrategyConfig& strategy);

struct TriggerGeneration {
    std::string prompt;
    std::string reply;
    ExtractedPhrase phrase;
};

/// Builds the trigger-generation request over sampled dataset questions and,
/// when a client is given, queries it and extracts the proposed phrase.
TriggerGeneration generate_trigger(const std::vector<Instance>& dataset, TaskKind task,
                                   std::size_t n_questions, std::uint64_t seed, int word_min,
                                   int word_max, ModelClient* client);

/// Prompt text exactly as run_eval would assemble it for one sampled
/// instance; for audit dumps.
std::string render_prompt_for_audit(const RunSpec& spec, std::size_t instance_index,
                                    bool triggered);

nlohmann::json sweep_to_json(const std::vector<SweepStat>& stats);

} // namespace cotpoison
