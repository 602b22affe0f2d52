/// Command-line front end over the cotpoison C API.

#include <cotpoison.h>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

namespace {

using nlohmann::json;

int fail(cp_status status) {
    std::cerr << "error: " << cp_last_error() << "\n";
    return static_cast<int>(status);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        std::cerr << "error: cannot open " << path << "\n";
        std::exit(static_cast<int>(CP_ERROR_CONFIG));
    }
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

json load_config(const std::string& path) {
    try {
        return json::parse(slurp(path));
    } catch (const json::exception& e) {
        std::cerr << "error: " << path << ": " << e.what() << "\n";
        std::exit(static_cast<int>(CP_ERROR_CONFIG));
    }
}

/// Owned C string from the API, freed on scope exit.
struct ApiString {
    char* ptr = nullptr;
    ~ApiString() { cp_string_free(ptr); }
    std::string str() const { return ptr ? ptr : ""; }
};

void print_json(const std::string& text) {
    std::cout << json::parse(text).dump(2) << "\n";
}

std::vector<std::string> split_csv(const std::string& csv) {
    std::vector<std::string> out;
    std::istringstream in(csv);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

struct CommonRunArgs {
    std::string config;
    std::string presets_dir = "presets";
    std::string out_dir;
    std::string defense;
    std::optional<std::uint64_t> defense_seed;
    std::string queries;
    std::string asr_mode;

    void attach(CLI::App* cmd, bool with_defense = true) {
        cmd->add_option("--config", config, "run spec JSON file")->required();
        cmd->add_option("--presets-dir", presets_dir, "presets directory (default: presets)");
        cmd->add_option("--out", out_dir, "override output directory");
        if (with_defense) {
            cmd->add_option("--defense", defense, "none | shuffle | shuffle++");
            auto* seed = cmd->add_option("--defense-seed", "defense seed");
            seed->each([this](const std::string& v) { defense_seed = std::stoull(v); });
        }
        cmd->add_option("--queries", queries, "both | clean | triggered");
        cmd->add_option("--asr-mode", asr_mode, "union | step-only");
    }

    std::string resolved_spec() const {
        json spec = load_config(config);
        if (!out_dir.empty()) spec["output_dir"] = out_dir;
        if (!defense.empty()) spec["defense"]["kind"] = defense;
        if (defense_seed) spec["defense"]["seed"] = *defense_seed;
        if (!queries.empty()) spec["queries"] = queries;
        if (!asr_mode.empty()) spec["asr_mode"] = asr_mode;
        return spec.dump();
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"chain-of-thought demonstration-poisoning evaluation harness"};
    app.require_subcommand(1);

    CommonRunArgs run_args;
    auto* run_cmd = app.add_subcommand("run", "evaluate one configuration (ASR / ASRt / ACC)");
    run_args.attach(run_cmd);

    CommonRunArgs defend_args;
    auto* defend_cmd =
        app.add_subcommand("defend", "run with a demonstration-shuffling defense applied");
    defend_args.attach(defend_cmd, false);
    std::string defend_kind = "shuffle";
    std::uint64_t defend_seed = 0;
    defend_cmd->add_option("--defense", defend_kind, "shuffle | shuffle++")->required();
    defend_cmd->add_option("--defense-seed", defend_seed, "defense seed");

    CommonRunArgs sweep_args;
    auto* sweep_cmd = app.add_subcommand("sweep-ratio",
                                         "repeat evaluations across poisoned-demo counts");
    sweep_args.attach(sweep_cmd);
    std::string ratios_csv;
    std::size_t trials = 20, per_trial = 20;
    sweep_cmd->add_option("--ratios", ratios_csv, "comma-separated poisoned counts")->required();
    sweep_cmd->add_option("--trials", trials, "trials per ratio (default 20)");
    sweep_cmd->add_option("--per-trial", per_trial, "instances per trial (default 20)");

    CommonRunArgs pos_args;
    auto* pos_cmd = app.add_subcommand("study-position", "vary the trigger position");
    pos_args.attach(pos_cmd);
    std::string positions_csv = "end,middle,beginning";
    std::string vary = "query";
    pos_cmd->add_option("--positions", positions_csv, "comma-separated positions");
    pos_cmd->add_option("--vary", vary, "query (query prompt only) | both (demos and query)");

    CommonRunArgs trig_args;
    auto* trig_cmd = app.add_subcommand("study-trigger", "swap in alternative non-word triggers");
    trig_args.attach(trig_cmd);
    std::string triggers_csv;
    trig_cmd->add_option("--triggers", triggers_csv, "comma-separated trigger texts")->required();

    auto* gen_cmd = app.add_subcommand("gen-trigger", "build (and send) the trigger-generation query");
    std::string gen_dataset, gen_task, gen_model_config, gen_presets = "presets";
    std::size_t gen_questions = 5;
    std::uint64_t gen_seed = 0;
    int word_min = 2, word_max = 5;
    bool dry_run = false;
    gen_cmd->add_option("--dataset", gen_dataset, "instance file")->required();
    gen_cmd->add_option("--task", gen_task, "arith | mc | tf | letters")->required();
    gen_cmd->add_option("--questions", gen_questions, "sample questions to include");
    gen_cmd->add_option("--seed", gen_seed, "sampling seed");
    gen_cmd->add_option("--word-min", word_min, "minimum phrase length");
    gen_cmd->add_option("--word-max", word_max, "maximum phrase length");
    gen_cmd->add_option("--model-config", gen_model_config, "model JSON for the generation query");
    gen_cmd->add_option("--presets-dir", gen_presets, "presets directory");
    gen_cmd->add_flag("--dry-run", dry_run, "print the prompt without querying a model");

    CommonRunArgs val_args;
    auto* val_cmd = app.add_subcommand("validate-trigger",
                                       "check a phrase trigger on clean instances");
    val_args.attach(val_cmd, false);
    std::string val_trigger;
    std::size_t val_probes = 10;
    val_cmd->add_option("--trigger", val_trigger, "phrase trigger text")->required();
    val_cmd->add_option("--probes", val_probes, "number of probe instances");

    CommonRunArgs dump_args;
    auto* dump_cmd = app.add_subcommand("dump-prompt", "render one assembled prompt for audit");
    dump_args.attach(dump_cmd);
    std::size_t dump_index = 0;
    bool dump_triggered = false;
    std::string dump_out;
    dump_cmd->add_option("--index", dump_index, "sampled instance index");
    dump_cmd->add_flag("--triggered", dump_triggered, "embed the trigger into the query");
    dump_cmd->add_option("--file", dump_out, "write the prompt to a file instead of stdout");

    auto* report_cmd = app.add_subcommand("report", "render tables/plots from run artifacts");
    std::string report_dir, report_format = "markdown";
    report_cmd->add_option("--run-dir", report_dir, "run or sweep output directory")->required();
    report_cmd->add_option("--format", report_format, "csv | json | markdown | svg");

    CLI11_PARSE(app, argc, argv);

    if (run_cmd->parsed()) {
        ApiString metrics;
        auto st = cp_run_eval(run_args.resolved_spec().c_str(), run_args.presets_dir.c_str(),
                              &metrics.ptr);
        if (st != CP_OK) return fail(st);
        print_json(metrics.str());
        return 0;
    }

    if (defend_cmd->parsed()) {
        defend_args.defense = defend_kind;
        defend_args.defense_seed = defend_seed;
        ApiString metrics;
        auto st = cp_run_eval(defend_args.resolved_spec().c_str(),
                              defend_args.presets_dir.c_str(), &metrics.ptr);
        if (st != CP_OK) return fail(st);
        print_json(metrics.str());
        return 0;
    }

    if (sweep_cmd->parsed()) {
        json ratios = json::array();
        for (const auto& r : split_csv(ratios_csv)) ratios.push_back(std::stoull(r));
        ApiString stats;
        auto st = cp_sweep_ratio(sweep_args.resolved_spec().c_str(),
                                 sweep_args.presets_dir.c_str(), ratios.dump().c_str(), trials,
                                 per_trial, &stats.ptr);
        if (st != CP_OK) return fail(st);
        print_json(stats.str());
        return 0;
    }

    if (pos_cmd->parsed()) {
        json positions = json::array();
        for (const auto& p : split_csv(positions_csv)) positions.push_back(p);
        ApiString table;
        auto st = cp_study_position(pos_args.resolved_spec().c_str(), pos_args.presets_dir.c_str(),
                                    positions.dump().c_str(), vary == "both" ? 1 : 0, &table.ptr);
        if (st != CP_OK) return fail(st);
        print_json(table.str());
        return 0;
    }

    if (trig_cmd->parsed()) {
        json triggers = json::array();
        for (const auto& t : split_csv(triggers_csv)) triggers.push_back(t);
        ApiString table;
        auto st = cp_study_trigger(trig_args.resolved_spec().c_str(),
                                   trig_args.presets_dir.c_str(), triggers.dump().c_str(),
                                   &table.ptr);
        if (st != CP_OK) return fail(st);
        print_json(table.str());
        return 0;
    }

    if (gen_cmd->parsed()) {
        if (dry_run || gen_model_config.empty()) {
            ApiString prompt;
            auto st = cp_build_trigger_prompt(gen_dataset.c_str(), gen_task.c_str(), gen_questions,
                                              gen_seed, word_min, word_max, &prompt.ptr);
            if (st != CP_OK) return fail(st);
            std::cout << prompt.str() << "\n";
            return 0;
        }
        std::string model_json = slurp(gen_model_config);
        ApiString result;
        auto st = cp_generate_trigger(gen_dataset.c_str(), gen_task.c_str(), gen_questions,
                                      gen_seed, word_min, word_max, model_json.c_str(),
                                      gen_presets.c_str(), &result.ptr);
        if (st != CP_OK) return fail(st);
        print_json(result.str());
        return 0;
    }

    if (val_cmd->parsed()) {
        ApiString report;
        auto st = cp_validate_trigger(val_args.resolved_spec().c_str(),
                                      val_args.presets_dir.c_str(), val_trigger.c_str(),
                                      val_probes, &report.ptr);
        if (st != CP_OK) return fail(st);
        print_json(report.str());
        return 0;
    }

    if (dump_cmd->parsed()) {
        ApiString prompt;
        auto st = cp_render_prompt(dump_args.resolved_spec().c_str(),
                                   dump_args.presets_dir.c_str(), dump_index,
                                   dump_triggered ? 1 : 0, &prompt.ptr);
        if (st != CP_OK) return fail(st);
        if (dump_out.empty()) {
            std::cout << prompt.str() << "\n";
        } else {
            std::ofstream out(dump_out);
            out << prompt.str();
        }
        return 0;
    }

    if (report_cmd->parsed()) {
        ApiString files;
        auto st = cp_report(report_dir.c_str(), report_format.c_str(), &files.ptr);
        if (st != CP_OK) return fail(st);
        print_json(files.str());
        return 0;
    }

    return 0;
}
