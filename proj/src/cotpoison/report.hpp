#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cotpoison/metrics.hpp"

namespace cotpoison {

struct SweepStat;

std::string metrics_csv(const RunMetrics& metrics);
std::string metrics_markdown(const std::string& label, const RunMetrics& metrics);

std::string sweep_csv(const std::vector<SweepStat>& stats);
std::string sweep_markdown(const std::vector<SweepStat>& stats);
/// Mean bars with 95% CI whiskers per sweep label (ASR and ACC side by side).
std::string sweep_svg(const std::vector<SweepStat>& stats);

/// Renders artifacts from a finished run or sweep directory. format is one of
/// csv | json | markdown | svg; returns the files written.
std::vector<std::filesystem::path> emit_report(const std::string& run_dir,
                                               const std::string& format);

} // namespace cotpoison
