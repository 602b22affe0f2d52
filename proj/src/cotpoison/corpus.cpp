#include "cotpoison/corpus.hpp"

#include <fstream>

#include "cotpoison/errors.hpp"
#include "cotpoison/rng.hpp"

namespace cotpoison {

TaskKind task_from_string(const std::string& tag) {
    if (tag == "arith") return TaskKind::ArithmeticNumeric;
    if (tag == "mc") return TaskKind::MultipleChoice;
    if (tag == "tf") return TaskKind::TrueFalse;
    if (tag == "letters") return TaskKind::LetterConcat;
    throw ConfigError("unknown task tag: " + tag);
}

std::string task_to_string(TaskKind task) {
    switch (task) {
        case TaskKind::ArithmeticNumeric: return "arith";
        case TaskKind::MultipleChoice: return "mc";
        case TaskKind::TrueFalse: return "tf";
        case TaskKind::LetterConcat: return "letters";
    }
    throw ConfigError("invalid task kind");
}

void validate_instance(const Instance& instance) {
    const std::string ctx = "instance " + instance.id;
    if (instance.id.empty()) throw ConfigError("instance with empty id");
    if (instance.question.empty()) throw ConfigError(ctx + ": empty question");
    validate_answer(instance.ground_truth, ctx);

    const bool is_mc = instance.task == TaskKind::MultipleChoice;
    if (is_mc != !instance.choices.empty())
        throw ConfigError(ctx + ": choices must be present exactly for multiple-choice instances");
    for (std::size_t i = 0; i < instance.choices.size(); ++i) {
        char expected = static_cast<char>('A' + i);
        if (instance.choices[i].label != expected)
            throw ConfigError(ctx + ": choice labels must be consecutive letters from 'A', found '" +
                              std::string(1, instance.choices[i].label) + "' at position " +
                              std::to_string(i));
    }

    bool typed = false;
    switch (instance.task) {
        case TaskKind::ArithmeticNumeric: typed = std::holds_alternative<NumericAnswer>(instance.ground_truth); break;
        case TaskKind::MultipleChoice: typed = std::holds_alternative<ChoiceAnswer>(instance.ground_truth); break;
        case TaskKind::TrueFalse: typed = std::holds_alternative<BoolAnswer>(instance.ground_truth); break;
        case TaskKind::LetterConcat: typed = std::holds_alternative<LettersAnswer>(instance.ground_truth); break;
    }
    if (!typed) throw ConfigError(ctx + ": ground truth type does not match task");
}

Instance instance_from_json(const nlohmann::json& j, TaskKind task) {
    Instance out;
    out.id = j.at("id").get<std::string>();
    out.question = j.at("question").get<std::string>();
    out.ground_truth = answer_from_json(j.at("ground_truth"));
    out.task = j.contains("task") ? task_from_string(j.at("task").get<std::string>()) : task;
    out.source_dataset = j.value("source", "");
    if (j.contains("choices")) {
        for (const auto& c : j.at("choices")) {
            AnswerChoice choice;
            auto label = c.at("label").get<std::string>();
            if (label.size() != 1) throw ConfigError("instance " + out.id + ": choice label must be one letter");
            choice.label = label[0];
            choice.text = c.at("text").get<std::string>();
            out.choices.push_back(std::move(choice));
        }
    }
    validate_instance(out);
    if (out.task != task)
        throw ConfigError("instance " + out.id + ": task \"" + task_to_string(out.task) +
                          "\" does not match requested \"" + task_to_string(task) + "\"");
    return out;
}

nlohmann::json instance_to_json(const Instance& instance) {
    nlohmann::json j;
    j["id"] = instance.id;
    j["question"] = instance.question;
    j["ground_truth"] = answer_to_json(instance.ground_truth);
    j["task"] = task_to_string(instance.task);
    if (!instance.source_dataset.empty()) j["source"] = instance.source_dataset;
    if (!instance.choices.empty()) {
        auto arr = nlohmann::json::array();
        for (const auto& c : instance.choices)
            arr.push_back({{"label", std::string(1, c.label)}, {"text", c.text}});
        j["choices"] = arr;
    }
    return j;
}

std::vector<Instance> load_dataset(const std::string& path, TaskKind task) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open instance file: " + path);
    std::vector<Instance> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(path + ":" + std::to_string(line_no) + ": malformed JSON: " + e.what());
        }
        try {
            out.push_back(instance_from_json(j, task));
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(path + ":" + std::to_string(line_no) + ": bad instance: " + e.what());
        }
    }
    return out;
}

std::vector<Instance> subsample(const std::vector<Instance>& instances,
                                std::size_t count, std::uint64_t seed) {
    if (count > instances.size())
        throw ConfigError("subsample count " + std::to_string(count) + " exceeds dataset size " +
                          std::to_string(instances.size()));
    auto picked = sample_indices(instances.size(), count, seed);
    std::vector<Instance> out;
    out.reserve(count);
    for (auto i : picked) out.push_back(instances[i]);
    return out;
}

} // namespace cotpoison
