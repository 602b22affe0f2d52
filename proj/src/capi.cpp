#include "cotpoison.h"

#include <cstdlib>
#include <cstring>

#include "cotpoison/errors.hpp"
#include "cotpoison/report.hpp"
#include "cotpoison/runner.hpp"

using namespace cotpoison;

struct cp_dataset {
    TaskKind task;
    std::vector<Instance> instances;
};

struct cp_demoset {
    DemoSet set;
};

struct cp_attack {
    AttackConfig config;
};

namespace {

thread_local std::string g_last_error;

cp_status status_of(const Error& e) {
    switch (e.code()) {
        case ErrorCode::Config: return CP_ERROR_CONFIG;
        case ErrorCode::Transport: return CP_ERROR_TRANSPORT;
        case ErrorCode::Generic: return CP_ERROR;
    }
    return CP_ERROR;
}

template <typename Fn>
cp_status guarded(Fn&& fn) {
    try {
        fn();
        return CP_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_of(e);
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return CP_ERROR;
    }
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void require(const void* p, const char* what) {
    if (!p) throw ConfigError(std::string("null ") + what);
}

nlohmann::json parse_json_arg(const char* text, const char* what) {
    require(text, what);
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed ") + what + ": " + e.what());
    }
}

RunSpec spec_from_args(const char* run_spec_json, const char* presets_dir) {
    return run_spec_from_json(parse_json_arg(run_spec_json, "run spec"),
                              presets_dir ? presets_dir : "presets");
}

} // namespace

extern "C" {

const char* cp_version(void) { return "0.1.0"; }

const char* cp_last_error(void) { return g_last_error.c_str(); }

void cp_string_free(char* s) { std::free(s); }

cp_status cp_dataset_load(const char* path, const char* task, cp_dataset** out) {
    return guarded([&] {
        require(path, "path");
        require(task, "task");
        require(out, "output pointer");
        auto kind = task_from_string(task);
        auto instances = load_dataset(path, kind);
        *out = new cp_dataset{kind, std::move(instances)};
    });
}

size_t cp_dataset_size(const cp_dataset* dataset) {
    return dataset ? dataset->instances.size() : 0;
}

cp_status cp_dataset_subsample(const cp_dataset* dataset, size_t count, uint64_t seed,
                               cp_dataset** out) {
    return guarded([&] {
        require(dataset, "dataset");
        require(out, "output pointer");
        *out = new cp_dataset{dataset->task, subsample(dataset->instances, count, seed)};
    });
}

cp_status cp_dataset_instance_json(const cp_dataset* dataset, size_t index, char** out_json) {
    return guarded([&] {
        require(dataset, "dataset");
        require(out_json, "output pointer");
        if (index >= dataset->instances.size())
            throw ConfigError("instance index out of range");
        *out_json = dup_string(instance_to_json(dataset->instances[index]).dump());
    });
}

void cp_dataset_free(cp_dataset* dataset) { delete dataset; }

cp_status cp_demoset_load(const char* path, cp_demoset** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "output pointer");
        *out = new cp_demoset{load_demo_set(path)};
    });
}

size_t cp_demoset_size(const cp_demoset* set) { return set ? set->set.demos.size() : 0; }

void cp_demoset_free(cp_demoset* set) { delete set; }

cp_status cp_attack_load_file(const char* path, cp_attack** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "output pointer");
        *out = new cp_attack{load_attack_config(path)};
    });
}

cp_status cp_attack_load_preset(const char* presets_dir, const char* name, cp_attack** out) {
    return guarded([&] {
        require(name, "preset name");
        require(out, "output pointer");
        std::string dir = presets_dir ? presets_dir : "presets";
        *out = new cp_attack{load_attack_config(dir + "/attacks/" + name + ".json")};
    });
}

cp_status cp_attack_to_json(const cp_attack* attack, char** out_json) {
    return guarded([&] {
        require(attack, "attack");
        require(out_json, "output pointer");
        *out_json = dup_string(attack_to_json(attack->config).dump());
    });
}

void cp_attack_free(cp_attack* attack) { delete attack; }

cp_status cp_embed_trigger(const char* question, const cp_attack* attack, char** out_text) {
    return guarded([&] {
        require(question, "question");
        require(attack, "attack");
        require(out_text, "output pointer");
        *out_text = dup_string(embed_trigger(question, attack->config.trigger));
    });
}

cp_status cp_strip_trigger(const char* question, const cp_attack* attack, char** out_text) {
    return guarded([&] {
        require(question, "question");
        require(attack, "attack");
        require(out_text, "output pointer");
        *out_text = dup_string(strip_trigger(question, attack->config.trigger));
    });
}

cp_status cp_apply_transform(const cp_attack* attack, const char* answer_json,
                             char** out_answer_json) {
    return guarded([&] {
        require(attack, "attack");
        require(out_answer_json, "output pointer");
        Answer answer = answer_from_json(parse_json_arg(answer_json, "answer"));
        Answer target = apply_transform(attack->config.transform, answer);
        *out_answer_json = dup_string(answer_to_json(target).dump());
    });
}

cp_status cp_parse_answer(const char* text, const char* task, char** out_answer_json) {
    return guarded([&] {
        require(text, "text");
        require(task, "task");
        require(out_answer_json, "output pointer");
        auto answer = parse_answer(text, task_from_string(task));
        *out_answer_json =
            dup_string(answer ? answer_to_json(*answer).dump() : std::string("null"));
    });
}

cp_status cp_run_eval(const char* run_spec_json, const char* presets_dir, char** metrics_json) {
    return guarded([&] {
        require(metrics_json, "output pointer");
        RunSpec spec = spec_from_args(run_spec_json, presets_dir);
        RunResult result = run_eval(spec);
        *metrics_json = dup_string(metrics_to_json(result.metrics, spec.asr_mode).dump());
    });
}

cp_status cp_sweep_ratio(const char* run_spec_json, const char* presets_dir,
                         const char* ratios_json, size_t trials, size_t per_trial,
                         char** stats_json) {
    return guarded([&] {
        require(stats_json, "output pointer");
        RunSpec spec = spec_from_args(run_spec_json, presets_dir);
        auto ratios = parse_json_arg(ratios_json, "ratios").get<std::vector<std::size_t>>();
        auto stats = run_ratio_sweep(spec, ratios, trials, per_trial);
        *stats_json = dup_string(sweep_to_json(stats).dump());
    });
}

cp_status cp_study_position(const char* run_spec_json, const char* presets_dir,
                            const char* positions_json, int vary_demos, char** table_json) {
    return guarded([&] {
        require(table_json, "output pointer");
        RunSpec spec = spec_from_args(run_spec_json, presets_dir);
        std::vector<TriggerPosition> positions;
        for (const auto& p : parse_json_arg(positions_json, "positions"))
            positions.push_back(position_from_string(p.get<std::string>()));
        auto rows = run_position_study(
            spec, positions, vary_demos ? PositionVary::DemosAndQuery : PositionVary::QueryOnly);
        auto arr = nlohmann::json::array();
        for (const auto& row : rows) {
            auto j = metrics_to_json(row.metrics, spec.asr_mode);
            j["position"] = position_to_string(row.position);
            arr.push_back(std::move(j));
        }
        *table_json = dup_string(arr.dump());
    });
}

cp_status cp_study_trigger(const char* run_spec_json, const char* presets_dir,
                           const char* triggers_json, char** table_json) {
    return guarded([&] {
        require(table_json, "output pointer");
        RunSpec spec = spec_from_args(run_spec_json, presets_dir);
        auto triggers = parse_json_arg(triggers_json, "triggers").get<std::vector<std::string>>();
        auto rows = run_trigger_study(spec, triggers);
        auto arr = nlohmann::json::array();
        for (const auto& row : rows) {
            auto j = metrics_to_json(row.metrics, spec.asr_mode);
            j["trigger"] = row.trigger;
            arr.push_back(std::move(j));
        }
        *table_json = dup_string(arr.dump());
    });
}

cp_status cp_build_trigger_prompt(const char* dataset_path, const char* task, size_t n_questions,
                                  uint64_t seed, int word_min, int word_max, char** prompt_out) {
    return guarded([&] {
        require(dataset_path, "dataset path");
        require(task, "task");
        require(prompt_out, "output pointer");
        auto kind = task_from_string(task);
        auto dataset = load_dataset(dataset_path, kind);
        auto generation = generate_trigger(dataset, kind, n_questions, seed, word_min, word_max,
                                           nullptr);
        *prompt_out = dup_string(generation.prompt);
    });
}

cp_status cp_generate_trigger(const char* dataset_path, const char* task, size_t n_questions,
                              uint64_t seed, int word_min, int word_max, const char* model_json,
                              const char* presets_dir, char** result_json) {
    return guarded([&] {
        require(dataset_path, "dataset path");
        require(task, "task");
        require(result_json, "output pointer");
        auto kind = task_from_string(task);
        auto dataset = load_dataset(dataset_path, kind);

        std::unique_ptr<ModelClient> client;
        if (model_json) {
            auto config = model_from_json(parse_json_arg(model_json, "model config"),
                                          presets_dir ? presets_dir : "presets");
            client = std::make_unique<ModelClient>(
                config, std::make_shared<const Oracle>(make_oracle(dataset)), nullptr);
        }
        auto generation = generate_trigger(dataset, kind, n_questions, seed, word_min, word_max,
                                           client.get());
        nlohmann::json j;
        j["prompt"] = generation.prompt;
        j["reply"] = generation.reply;
        j["phrase"] = generation.phrase.text;
        j["ambiguous"] = generation.phrase.ambiguous;
        *result_json = dup_string(j.dump());
    });
}

cp_status cp_validate_trigger(const char* run_spec_json, const char* presets_dir,
                              const char* trigger_text, size_t n_probes, char** report_json) {
    return guarded([&] {
        require(trigger_text, "trigger text");
        require(report_json, "output pointer");
        RunSpec spec = spec_from_args(run_spec_json, presets_dir);
        auto dataset = load_dataset(spec.dataset_path, spec.task);
        auto probes = subsample(dataset, std::min(n_probes, dataset.size()), spec.sample.seed);
        auto demos = load_demo_set(spec.demos_path);

        TriggerSpec trigger{TriggerKind::Phrase, trigger_text, TriggerPosition::End};
        ModelClient client(spec.model, std::make_shared<const Oracle>(make_oracle(dataset)),
                           spec.attack ? std::make_shared<const AttackConfig>(*spec.attack)
                                       : nullptr);
        auto report = validate_phrase_trigger(trigger, probes, demos, client, spec.strategy);

        nlohmann::json j;
        j["pass_ratio"] = report.pass_ratio;
        auto arr = nlohmann::json::array();
        for (const auto& p : report.probes) {
            nlohmann::json row;
            row["instance_id"] = p.instance_id;
            row["clean_answer"] =
                p.clean_answer ? answer_to_json(*p.clean_answer) : nlohmann::json(nullptr);
            row["triggered_answer"] =
                p.triggered_answer ? answer_to_json(*p.triggered_answer) : nlohmann::json(nullptr);
            row["unchanged"] = p.unchanged;
            row["inconclusive"] = p.inconclusive;
            if (p.inconclusive) row["note"] = p.note;
            arr.push_back(std::move(row));
        }
        j["probes"] = arr;
        *report_json = dup_string(j.dump());
    });
}

cp_status cp_render_prompt(const char* run_spec_json, const char* presets_dir,
                           size_t instance_index, int triggered, char** prompt_out) {
    return guarded([&] {
        require(prompt_out, "output pointer");
        RunSpec spec = spec_from_args(run_spec_json, presets_dir);
        *prompt_out = dup_string(render_prompt_for_audit(spec, instance_index, triggered != 0));
    });
}

cp_status cp_report(const char* run_dir, const char* format, char** files_json) {
    return guarded([&] {
        require(run_dir, "run directory");
        require(format, "format");
        require(files_json, "output pointer");
        auto files = emit_report(run_dir, format);
        auto arr = nlohmann::json::array();
        for (const auto& f : files) arr.push_back(f.string());
        *files_json = dup_string(arr.dump());
    });
}

} // extern "C"
