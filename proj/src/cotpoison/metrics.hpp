#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cotpoison/parsing.hpp"

namespace cotpoison {

/// How ASR counts a triggered record. Union (step detected OR target answer)
/// matches the attack rows of the reported results; StepOnly is provided for
/// baseline comparisons.
enum class AsrMode { Union, StepOnly };

AsrMode asr_mode_from_string(const std::string& tag);
std::string asr_mode_to_string(AsrMode mode);

struct EvalRecord {
    std::string instance_id;
    TaskKind task = TaskKind::ArithmeticNumeric;
    bool triggered = false;
    ParsedOutput parsed; // post-vote for self-consistency
    std::vector<ParsedOutput> per_sample;
    Answer ground_truth;
    std::optional<Answer> target;
    bool inconclusive = false;
    std::string note; // failure detail when inconclusive

    bool correct() const;   // parsed answer equals ground truth
    bool is_target() const; // parsed answer equals adversarial target
};

nlohmann::json record_to_json(const EvalRecord& record);
EvalRecord record_from_json(const nlohmann::json& j);

struct RunMetrics {
    std::optional<double> asr;  // percent of triggered records (per AsrMode)
    std::optional<double> asrt; // percent of triggered records with the target answer
    std::optional<double> acc;  // percent of clean records answered correctly
    std::size_t n_triggered = 0;
    std::size_t n_clean = 0;
    std::size_t n_excluded = 0; // inconclusive records left out of denominators
};

nlohmann::json metrics_to_json(const RunMetrics& metrics, AsrMode mode);

struct SweepStat {
    std::string label;
    double mean_asr = 0;
    double mean_acc = 0;
    double ci95_asr = 0; // half-widths
    double ci95_acc = 0;
    std::size_t trials = 0;
};

/// Majority vote over parsed outputs. Groups are built with answers_equal;
/// absent answers never beat a present one; ties break to the earliest first
/// occurrence. The step flag is true iff a strict majority of samples has it.
ParsedOutput majority_vote(const std::vector<ParsedOutput>& outputs, TaskKind task);

RunMetrics compute_metrics(const std::vector<EvalRecord>& records, AsrMode mode = AsrMode::Union);

/// Mean and 95% CI half-width (Student t at the published two-sided table
/// value) over per-trial ASR/ACC. Needs at least two trials.
SweepStat sweep_stats(const std::vector<RunMetrics>& trial_metrics, const std::string& label = "");

/// Two-sided 95% Student-t multiplier t(0.975, dof) from the standard table;
/// dof between table rows falls back to the next lower row (larger t).
double t_multiplier_95(std::size_t dof);

} // namespace cotpoison
