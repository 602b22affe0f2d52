#include "cotpoison/report.hpp"

#include <fstream>
#include <sstream>

#include "cotpoison/errors.hpp"
#include "cotpoison/runner.hpp"

namespace fs = std::filesystem;

namespace cotpoison {

namespace {

std::string num(double value) {
    return nlohmann::json(value).dump(); // shortest round-trip, same as JSON output
}

std::string opt_num(const std::optional<double>& value) {
    return value ? num(*value) : std::string{};
}

std::string fixed1(const std::optional<double>& value) {
    if (!value) return "-";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", *value);
    return buf;
}

std::vector<SweepStat> sweep_from_json(const nlohmann::json& arr) {
    std::vector<SweepStat> stats;
    for (const auto& j : arr) {
        SweepStat s;
        s.label = j.at("label").get<std::string>();
        s.mean_asr = j.at("mean_asr").get<double>();
        s.ci95_asr = j.at("ci_asr").get<double>();
        s.mean_acc = j.at("mean_acc").get<double>();
        s.ci95_acc = j.at("ci_acc").get<double>();
        s.trials = j.at("trials").get<std::size_t>();
        stats.push_back(std::move(s));
    }
    return stats;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << content;
}

} // namespace

std::string metrics_csv(const RunMetrics& metrics) {
    std::ostringstream out;
    out << "asr,asrt,acc,n_triggered,n_clean,n_excluded\n";
    out << opt_num(metrics.asr) << "," << opt_num(metrics.asrt) << "," << opt_num(metrics.acc)
        << "," << metrics.n_triggered << "," << metrics.n_clean << "," << metrics.n_excluded
        << "\n";
    return out.str();
}

std::string metrics_markdown(const std::string& label, const RunMetrics& metrics) {
    std::ostringstream out;
    out << "| Run | ASR | ASRt | ACC |\n";
    out << "|---|---|---|---|\n";
    out << "| " << label << " | " << fixed1(metrics.asr) << " | " << fixed1(metrics.asrt) << " | "
        << fixed1(metrics.acc) << " |\n";
    return out.str();
}

std::string sweep_csv(const std::vector<SweepStat>& stats) {
    std::ostringstream out;
    out << "label,mean_asr,ci_asr,mean_acc,ci_acc,trials\n";
    for (const auto& s : stats) {
        out << s.label << "," << num(s.mean_asr) << "," << num(s.ci95_asr) << ","
            << num(s.mean_acc) << "," << num(s.ci95_acc) << "," << s.trials << "\n";
    }
    return out.str();
}

std::string sweep_markdown(const std::vector<SweepStat>& stats) {
    std::ostringstream out;
    out << "| Ratio | ASR (±95% CI) | ACC (±95% CI) | Trials |\n";
    out << "|---|---|---|---|\n";
    for (const auto& s : stats) {
        out << "| " << s.label << " | " << fixed1(s.mean_asr) << " ± " << fixed1(s.ci95_asr)
            << " | " << fixed1(s.mean_acc) << " ± " << fixed1(s.ci95_acc) << " | " << s.trials
            << " |\n";
    }
    return out.str();
}

std::string sweep_svg(const std::vector<SweepStat>& stats) {
    if (stats.empty()) throw ConfigError("cannot plot an empty sweep");
    const double width = 720, height = 400;
    const double left = 60, right = 20, top = 30, bottom = 60;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;
    const double group_w = plot_w / static_cast<double>(stats.size());
    const double bar_w = group_w * 0.3;

    auto y_of = [&](double pct) { return top + plot_h * (1.0 - pct / 100.0); };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (int tick = 0; tick <= 100; tick += 25) {
        double y = y_of(tick);
        out << "<line x1=\"" << left << "\" y1=\"" << y << "\" x2=\"" << width - right
            << "\" y2=\"" << y << "\" stroke=\"#dddddd\"/>\n";
        out << "<text x=\"" << left - 8 << "\" y=\"" << y + 4
            << "\" text-anchor=\"end\">" << tick << "</text>\n";
    }
    for (std::size_t i = 0; i < stats.size(); ++i) {
        const auto& s = stats[i];
        const double cx = left + group_w * (static_cast<double>(i) + 0.5);
        struct Bar {
            double mean, ci, offset;
            const char* fill;
        };
        const Bar bars[] = {{s.mean_asr, s.ci95_asr, -bar_w, "#c0392b"},
                            {s.mean_acc, s.ci95_acc, 0.0, "#2980b9"}};
        for (const auto& b : bars) {
            double x = cx + b.offset;
            double y = y_of(b.mean);
            out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << bar_w
                << "\" height=\"" << y_of(0) - y << "\" fill=\"" << b.fill << "\"/>\n";
            double mid = x + bar_w / 2;
            double y_hi = y_of(std::min(100.0, b.mean + b.ci));
            double y_lo = y_of(std::max(0.0, b.mean - b.ci));
            out << "<line x1=\"" << mid << "\" y1=\"" << y_hi << "\" x2=\"" << mid << "\" y2=\""
                << y_lo << "\" stroke=\"black\"/>\n";
            out << "<line x1=\"" << mid - 4 << "\" y1=\"" << y_hi << "\" x2=\"" << mid + 4
                << "\" y2=\"" << y_hi << "\" stroke=\"black\"/>\n";
            out << "<line x1=\"" << mid - 4 << "\" y1=\"" << y_lo << "\" x2=\"" << mid + 4
                << "\" y2=\"" << y_lo << "\" stroke=\"black\"/>\n";
        }
        out << "<text x=\"" << cx << "\" y=\"" << height - bottom + 18
            << "\" text-anchor=\"middle\">" << s.label << "</text>\n";
    }
    out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
        << y_of(0) << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << y_of(0) << "\" x2=\"" << width - right
        << "\" y2=\"" << y_of(0) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << left << "\" y=\"" << height - 14 << "\">poisoned demonstrations"
        << "</text>\n";
    out << "<rect x=\"" << width - 180 << "\" y=\"" << top << "\" width=\"12\" height=\"12\" "
        << "fill=\"#c0392b\"/><text x=\"" << width - 162 << "\" y=\"" << top + 11
        << "\">ASR (mean ± CI)</text>\n";
    out << "<rect x=\"" << width - 180 << "\" y=\"" << top + 18
        << "\" width=\"12\" height=\"12\" fill=\"#2980b9\"/><text x=\"" << width - 162
        << "\" y=\"" << top + 29 << "\">ACC (mean ± CI)</text>\n";
    out << "</svg>\n";
    return out.str();
}

std::vector<fs::path> emit_report(const std::string& run_dir, const std::string& format) {
    const fs::path dir(run_dir);
    const fs::path sweep_path = dir / "sweep.json";
    const fs::path metrics_path = dir / "metrics.json";
    std::vector<fs::path> written;

    if (fs::exists(sweep_path)) {
        nlohmann::json j;
        std::ifstream in(sweep_path);
        in >> j;
        auto stats = sweep_from_json(j);
        if (stats.empty()) throw ConfigError("sweep has no rows: " + sweep_path.string());
        if (format == "csv") {
            write_file(dir / "sweep.csv", sweep_csv(stats));
            written.push_back(dir / "sweep.csv");
        } else if (format == "json") {
            write_file(dir / "sweep.json", sweep_to_json(stats).dump(2) + "\n");
            written.push_back(sweep_path);
        } else if (format == "markdown") {
            write_file(dir / "sweep.md", sweep_markdown(stats));
            written.push_back(dir / "sweep.md");
        } else if (format == "svg") {
            write_file(dir / "sweep.svg", sweep_svg(stats));
            written.push_back(dir / "sweep.svg");
        } else {
            throw ConfigError("unknown report format: " + format);
        }
        return written;
    }

    if (!fs::exists(metrics_path))
        throw ConfigError("no run artifacts (metrics.json or sweep.json) under " + run_dir);
    nlohmann::json j;
    std::ifstream in(metrics_path);
    in >> j;
    RunMetrics metrics;
    if (!j.at("asr").is_null()) metrics.asr = j.at("asr").get<double>();
    if (!j.at("asrt").is_null()) metrics.asrt = j.at("asrt").get<double>();
    if (!j.at("acc").is_null()) metrics.acc = j.at("acc").get<double>();
    metrics.n_triggered = j.at("n_triggered").get<std::size_t>();
    metrics.n_clean = j.at("n_clean").get<std::size_t>();
    metrics.n_excluded = j.at("n_excluded").get<std::size_t>();

    if (format == "csv") {
        write_file(dir / "metrics.csv", metrics_csv(metrics));
        written.push_back(dir / "metrics.csv");
    } else if (format == "json") {
        write_file(dir / "report.json", j.dump(2) + "\n");
        written.push_back(dir / "report.json");
    } else if (format == "markdown") {
        write_file(dir / "report.md", metrics_markdown(dir.filename().string(), metrics));
        written.push_back(dir / "report.md");
    } else if (format == "svg") {
        throw ConfigError("svg reports plot sweeps; this directory holds a single run");
    } else {
        throw ConfigError("unknown report format: " + format);
    }
    return written;
}

} // namespace cotpoison
