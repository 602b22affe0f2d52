#include "cotpoison/runner.hpp"

#include <atomic>
#include <fstream>
#include <thread>

#include "cotpoison/errors.hpp"
#include "cotpoison/report.hpp"
#include "cotpoison/rng.hpp"

namespace fs = std::filesystem;

namespace cotpoison {

namespace {

QueryMode query_mode_from_string(const std::string& tag) {
    if (tag == "both") return QueryMode::Both;
    if (tag == "clean") return QueryMode::CleanOnly;
    if (tag == "triggered") return QueryMode::TriggeredOnly;
    throw ConfigError("unknown query mode: " + tag);
}

std::string query_mode_to_string(QueryMode mode) {
    switch (mode) {
        case QueryMode::Both: return "both";
        case QueryMode::CleanOnly: return "clean";
        case QueryMode::TriggeredOnly: return "triggered";
    }
    throw ConfigError("invalid query mode");
}

/// Demonstration list after poisoning but before any defense.
std::vector<Demonstration> poisoned_demos(const DemoSet& set, const AttackConfig* attack,
                                          const StrategyConfig& strategy) {
    if (!attack) return set.demos;
    for (auto idx : attack->poisoned_indices) {
        if (idx >= set.demos.size())
            throw ConfigError("poisoned index " + std::to_string(idx) +
                              " out of range for a demo set of " +
                              std::to_string(set.demos.size()));
    }
    std::vector<Demonstration> out;
    out.reserve(set.demos.size());
    for (std::size_t i = 0; i < set.demos.size(); ++i) {
        const auto& demo = set.demos[i];
        if (!attack->poisoned_indices.count(i)) {
            out.push_back(demo);
        } else if (strategy.kind == StrategyKind::LeastToMost) {
            out.push_back(poison_decomposed_demonstration(demo, *attack));
        } else if (attack->baseline_mode == BaselineMode::None) {
            out.push_back(poison_demonstration(demo, *attack));
        } else {
            out.push_back(poison_demonstration_baseline(demo, *attack));
        }
    }
    return out;
}

PromptBundle assemble_for(const RunSpec& spec, const std::vector<Demonstration>& demos,
                          const Instance& instance, const AttackConfig* attack, bool triggered) {
    if (spec.strategy.kind == StrategyKind::LeastToMost)
        return assemble_least_to_most(demos, instance, attack, spec.strategy, triggered,
                                      spec.sample.seed, spec.query_position_override);
    return assemble_prompt(demos, spec.task, instance, attack, spec.strategy, triggered,
                           spec.sample.seed, spec.query_position_override);
}

EvalRecord evaluate_side(const RunSpec& spec, const std::vector<Demonstration>& demos,
                         const Instance& instance, const AttackConfig* attack, bool triggered,
                         ModelClient& client) {
    EvalRecord record;
    record.instance_id = instance.id;
    record.task = spec.task;
    record.triggered = triggered;
    record.ground_truth = instance.ground_truth;
    try {
        if (attack) record.target = apply_transform(attack->transform, instance.ground_truth);
        PromptBundle bundle = assemble_for(spec, demos, instance, attack, triggered);
        const int samples =
            spec.strategy.kind == StrategyKind::SelfConsistency ? spec.strategy.sc_samples : 1;
        std::vector<ParsedOutput> outputs;
        outputs.reserve(static_cast<std::size_t>(samples));
        for (int s = 0; s < samples; ++s) {
            ModelResponse response = client.complete(bundle, s);
            outputs.push_back(parse_output(response.text, spec.task, attack));
        }
        record.per_sample = outputs;
        record.parsed = outputs.size() > 1 ? majority_vote(outputs, spec.task) : outputs.front();
    } catch (const Error& e) {
        record.inconclusive = true;
        record.note = e.what();
    }
    return record;
}

void write_records(std::ofstream& out, const std::vector<EvalRecord>& records) {
    for (const auto& r : records) out << record_to_json(r).dump() << "\n";
    out.flush();
}

} // namespace

RunSpec run_spec_from_json(const nlohmann::json& j, const std::string& presets_dir) {
    RunSpec spec;
    const auto& d = j.at("dataset");
    spec.dataset_path = d.at("path").get<std::string>();
    spec.task = task_from_string(d.at("task").get<std::string>());
    if (!fs::exists(spec.dataset_path))
        throw ConfigError("dataset file does not exist: " + spec.dataset_path);
    spec.demos_path = j.at("demos").at("path").get<std::string>();
    if (!fs::exists(spec.demos_path))
        throw ConfigError("demonstration set does not exist: " + spec.demos_path);

    if (j.contains("attack") && !j.at("attack").is_null()) {
        const auto& a = j.at("attack");
        std::string path;
        if (a.contains("preset")) {
            path = presets_dir + "/attacks/" + a.at("preset").get<std::string>() + ".json";
            if (!fs::exists(path))
                throw ConfigError("unknown attack preset \"" + a.at("preset").get<std::string>() +
                                  "\" (looked for " + path + ")");
        } else if (a.contains("path")) {
            path = a.at("path").get<std::string>();
        } else if (a.is_object() && a.contains("trigger")) {
            spec.attack = attack_from_json(a); // inline config
        } else {
            throw ConfigError("attack must be null, {path}, {preset}, or an inline config");
        }
        if (!path.empty()) spec.attack = load_attack_config(path);
    }

    if (j.contains("strategy")) spec.strategy = strategy_from_json(j.at("strategy"));
    if (j.contains("model")) spec.model = model_from_json(j.at("model"), presets_dir);
    if (j.contains("defense")) {
        const auto& def = j.at("defense");
        spec.defense.kind = defense_from_string(def.value("kind", "none"));
        spec.defense.seed = def.value("seed", 0ULL);
        spec.defense.shuffle_answer_line = def.value("shuffle_answer_line", true);
    }
    const auto& s = j.at("sample");
    spec.sample.count = s.at("count").get<std::size_t>();
    spec.sample.seed = s.value("seed", 0ULL);
    spec.queries = query_mode_from_string(j.value("queries", "both"));
    spec.asr_mode = asr_mode_from_string(j.value("asr_mode", "union"));
    spec.output_dir = j.value("output_dir", "");
    if (j.contains("query_position"))
        spec.query_position_override = position_from_string(j.at("query_position").get<std::string>());
    return spec;
}

RunSpec load_run_spec(const std::string& path, const std::string& presets_dir) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open run config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": malformed JSON: " + e.what());
    }
    return run_spec_from_json(j, presets_dir);
}

nlohmann::json run_spec_to_json(const RunSpec& spec) {
    nlohmann::json j;
    j["dataset"] = {{"path", spec.dataset_path}, {"task", task_to_string(spec.task)}};
    j["demos"] = {{"path", spec.demos_path}};
    j["attack"] = spec.attack ? attack_to_json(*spec.attack) : nlohmann::json(nullptr);
    j["strategy"] = strategy_to_json(spec.strategy);
    j["model"] = model_to_json(spec.model);
    j["defense"] = {{"kind", defense_to_string(spec.defense.kind)},
                    {"seed", spec.defense.seed},
                    {"shuffle_answer_line", spec.defense.shuffle_answer_line}};
    j["sample"] = {{"count", spec.sample.count}, {"seed", spec.sample.seed}};
    j["queries"] = query_mode_to_string(spec.queries);
    j["asr_mode"] = asr_mode_to_string(spec.asr_mode);
    if (!spec.output_dir.empty()) j["output_dir"] = spec.output_dir;
    if (spec.query_position_override)
        j["query_position"] = position_to_string(*spec.query_position_override);
    return j;
}

RunResult run_eval(const RunSpec& spec) {
    auto dataset = load_dataset(spec.dataset_path, spec.task);
    auto sampled = subsample(dataset, spec.sample.count, spec.sample.seed);
    auto demo_set = load_demo_set(spec.demos_path);
    if (demo_set.task != spec.task)
        throw ConfigError("demonstration set task \"" + task_to_string(demo_set.task) +
                          "\" does not match run task \"" + task_to_string(spec.task) + "\"");

    const AttackConfig* attack = spec.attack ? &*spec.attack : nullptr;
    const bool want_triggered = spec.queries != QueryMode::CleanOnly && attack != nullptr;
    const bool want_clean = spec.queries != QueryMode::TriggeredOnly;
    if (spec.queries == QueryMode::TriggeredOnly && !attack)
        throw ConfigError("triggered-only runs need an attack config");

    auto base_demos = poisoned_demos(demo_set, attack, spec.strategy);

    auto oracle = std::make_shared<const Oracle>(make_oracle(dataset));
    auto attack_shared =
        spec.attack ? std::make_shared<const AttackConfig>(*spec.attack) : nullptr;
    ModelClient client(spec.model, oracle, attack_shared);

    std::ofstream records_out;
    if (!spec.output_dir.empty()) {
        fs::create_directories(spec.output_dir);
        records_out.open(fs::path(spec.output_dir) / "records.jsonl",
                         std::ios::out | std::ios::trunc);
        if (!records_out) throw ConfigError("cannot write records under " + spec.output_dir);
    }

    std::vector<std::vector<EvalRecord>> slots(sampled.size());
    std::vector<bool> done(sampled.size(), false);
    std::size_t flushed = 0;
    std::mutex flush_mutex;
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= sampled.size()) return;
            const Instance& instance = sampled[i];
            auto demos = apply_defense(base_demos, spec.defense.kind,
                                       derive_seed(spec.defense.seed, i),
                                       spec.defense.shuffle_answer_line);
            std::vector<EvalRecord> records;
            if (want_triggered)
                records.push_back(evaluate_side(spec, demos, instance, attack, true, client));
            if (want_clean)
                records.push_back(evaluate_side(spec, demos, instance, attack, false, client));
            std::lock_guard lock(flush_mutex);
            slots[i] = std::move(records);
            done[i] = true;
            // Persist the contiguous completed prefix so runs are resumable
            // mid-flight without reordering records.
            while (flushed < done.size() && done[flushed]) {
                if (records_out.is_open()) write_records(records_out, slots[flushed]);
                ++flushed;
            }
        }
    };

    const std::size_t n_workers =
        std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(spec.model.concurrency),
                                                       sampled.size()));
    std::vector<std::thread> threads;
    threads.reserve(n_workers);
    for (std::size_t t = 0; t < n_workers; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();

    RunResult result;
    for (auto& group : slots)
        for (auto& r : group) result.records.push_back(std::move(r));
    result.metrics = compute_metrics(result.records, spec.asr_mode);
    result.cache_hits = client.cache_hits();

    if (!spec.output_dir.empty()) {
        records_out.close();
        std::ofstream metrics_out(fs::path(spec.output_dir) / "metrics.json");
        metrics_out << metrics_to_json(result.metrics, spec.asr_mode).dump(2) << "\n";
        nlohmann::json meta;
        meta["spec"] = run_spec_to_json(spec);
        meta["harness_version"] = "0.1.0";
        meta["top_k_omitted"] = client.top_k_omitted();
        std::ofstream meta_out(fs::path(spec.output_dir) / "run_meta.json");
        meta_out << meta.dump(2) << "\n";
    }
    return result;
}

std::vector<SweepStat> run_ratio_sweep(const RunSpec& spec, const std::vector<std::size_t>& ratios,
                                       std::size_t trials, std::size_t per_trial) {
    if (!spec.attack) throw ConfigError("ratio sweeps need an attack config");
    if (ratios.empty()) throw ConfigError("ratio sweeps need at least one ratio");
    if (trials < 2) throw ConfigError("ratio sweeps need at least two trials per ratio");
    auto demo_set = load_demo_set(spec.demos_path);
    for (auto r : ratios)
        if (r > demo_set.demos.size())
            throw ConfigError("ratio " + std::to_string(r) + " exceeds demo count " +
                              std::to_string(demo_set.demos.size()));

    std::vector<SweepStat> stats;
    for (std::size_t ri = 0; ri < ratios.size(); ++ri) {
        std::vector<RunMetrics> trial_metrics;
        for (std::size_t t = 0; t < trials; ++t) {
            RunSpec trial_spec = spec;
            AttackConfig attack = *spec.attack;
            attack.poisoned_indices.clear();
            for (std::size_t k = 0; k < ratios[ri]; ++k) attack.poisoned_indices.insert(k);
            trial_spec.attack = attack;
            // Injective trial offsets keep sample sequences disjoint.
            const std::uint64_t offset = ri * trials + t + 1;
            trial_spec.sample.count = per_trial;
            trial_spec.sample.seed = spec.sample.seed + offset;
            trial_spec.defense.seed = derive_seed(spec.defense.seed, offset);
            trial_spec.queries = QueryMode::Both;
            if (!spec.output_dir.empty())
                trial_spec.output_dir = (fs::path(spec.output_dir) /
                                         ("ratio_" + std::to_string(ratios[ri])) /
                                         ("trial_" + std::to_string(t)))
                                            .string();
            trial_metrics.push_back(run_eval(trial_spec).metrics);
        }
        stats.push_back(sweep_stats(trial_metrics, std::to_string(ratios[ri])));
    }

    if (!spec.output_dir.empty()) {
        fs::create_directories(spec.output_dir);
        std::ofstream csv(fs::path(spec.output_dir) / "sweep.csv");
        csv << sweep_csv(stats);
        std::ofstream json_out(fs::path(spec.output_dir) / "sweep.json");
        json_out << sweep_to_json(stats).dump(2) << "\n";
    }
    return stats;
}

std::vector<PositionRow> run_position_study(const RunSpec& spec,
                                            const std::vector<TriggerPosition>& positions,
                                            PositionVary vary) {
    if (!spec.attack) throw ConfigError("position studies need an attack config");
    if (positions.empty()) throw ConfigError("position studies need at least one position");
    std::vector<PositionRow> rows;
    for (auto position : positions) {
        RunSpec variant = spec;
        if (vary == PositionVary::QueryOnly) {
            variant.query_position_override = position;
        } else {
            variant.attack->trigger.position = position;
            variant.query_position_override.reset();
        }
        if (!spec.output_dir.empty())
            variant.output_dir =
                (fs::path(spec.output_dir) / ("position_" + position_to_string(position))).string();
        rows.push_back({position, run_eval(variant).metrics});
    }
    return rows;
}

std::vector<TriggerRow> run_trigger_study(const RunSpec& spec,
                                          const std::vector<std::string>& triggers) {
    if (!spec.attack) throw ConfigError("trigger studies need an attack config");
    if (triggers.empty()) throw ConfigError("trigger studies need at least one trigger");
    std::vector<TriggerRow> rows;
    for (std::size_t i = 0; i < triggers.size(); ++i) {
        RunSpec variant = spec;
        variant.attack->trigger.text = triggers[i];
        variant.attack->trigger.kind = TriggerKind::NonWord;
        if (!spec.output_dir.empty())
            variant.output_dir = (fs::path(spec.output_dir) / ("trigger_" + std::to_string(i))).string();
        rows.push_back({triggers[i], run_eval(variant).metrics});
    }
    return rows;
}

TriggerValidation validate_phrase_trigger(const TriggerSpec& trigger,
                                          const std::vector<Instance>& probes,
                                          const DemoSet& demos, ModelClient& client,
                                          const StrategyConfig& strategy) {
    if (trigger.kind != TriggerKind::Phrase)
        throw ConfigError("trigger validation applies to phrase triggers");
    if (probes.empty()) throw ConfigError("trigger validation needs at least one probe");

    // Minimal attack carrier: only the trigger is used (no poisoned demos,
    // no step rendering).
    AttackConfig probe_attack;
    probe_attack.trigger = trigger;
    probe_attack.step_template = "{pre} {post}";
    probe_attack.step_detector = "(?!)"; // never matches

    TriggerValidation report;
    std::size_t matches = 0;
    for (const auto& probe : probes) {
        TriggerValidation::Probe row;
        row.instance_id = probe.id;
        try {
            auto clean = assemble_prompt(demos.demos, demos.task, probe, &probe_attack, strategy,
                                         false, 0);
            auto trig = assemble_prompt(demos.demos, demos.task, probe, &probe_attack, strategy,
                                        true, 0);
            row.clean_answer = parse_answer(client.complete(clean, 0).text, demos.task);
            row.triggered_answer = parse_answer(client.complete(trig, 0).text, demos.task);
            row.unchanged = row.clean_answer && row.triggered_answer &&
                            answers_equal(*row.clean_answer, *row.triggered_answer, demos.task);
        } catch (const Error& e) {
            row.inconclusive = true;
            row.note = e.what();
        }
        if (row.unchanged) ++matches;
        report.probes.push_back(std::move(row));
    }
    report.pass_ratio = static_cast<double>(matches) / static_cast<double>(probes.size());
    return report;
}

TriggerGeneration generate_trigger(const std::vector<Instance>& dataset, TaskKind task,
                                   std::size_t n_questions, std::uint64_t seed, int word_min,
                                   int word_max, ModelClient* client) {
    if (n_questions == 0) throw ConfigError("trigger generation needs at least one question");
    auto picked = subsample(dataset, std::min(n_questions, dataset.size()), seed);
    std::vector<std::string> questions;
    questions.reserve(picked.size());
    for (const auto& inst : picked) questions.push_back(inst.question);

    TriggerGeneration out;
    out.prompt = build_trigger_generation_prompt(task, questions, word_min, word_max);
    if (client) {
        PromptBundle bundle;
        bundle.text = out.prompt;
        bundle.instance_id = "trigger-generation";
        out.reply = client->complete(bundle, 0).text;
        out.phrase = extract_phrase(out.reply, word_min, word_max);
    }
    return out;
}

std::string render_prompt_for_audit(const RunSpec& spec, std::size_t instance_index,
                                    bool triggered) {
    auto dataset = load_dataset(spec.dataset_path, spec.task);
    auto sampled = subsample(dataset, spec.sample.count, spec.sample.seed);
    if (instance_index >= sampled.size())
        throw ConfigError("instance index " + std::to_string(instance_index) +
                          " out of range for sample of " + std::to_string(sampled.size()));
    auto demo_set = load_demo_set(spec.demos_path);
    const AttackConfig* attack = spec.attack ? &*spec.attack : nullptr;
    if (triggered && !attack) throw ConfigError("triggered prompt needs an attack config");
    auto demos = apply_defense(poisoned_demos(demo_set, attack, spec.strategy), spec.defense.kind,
                               derive_seed(spec.defense.seed, instance_index),
                               spec.defense.shuffle_answer_line);
    return assemble_for(spec, demos, sampled[instance_index], attack, triggered).text;
}

nlohmann::json sweep_to_json(const std::vector<SweepStat>& stats) {
    auto arr = nlohmann::json::array();
    for (const auto& s : stats) {
        arr.push_back({{"label", s.label},
                       {"mean_asr", s.mean_asr},
                       {"ci_asr", s.ci95_asr},
                       {"mean_acc", s.mean_acc},
                       {"ci_acc", s.ci95_acc},
                       {"trials", s.trials}});
    }
    return arr;
}

} // namespace cotpoison
