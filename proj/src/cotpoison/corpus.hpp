#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cotpoison/answer.hpp"

namespace cotpoison {

enum class TaskKind { ArithmeticNumeric, MultipleChoice, TrueFalse, LetterConcat };

/// Task tags used in instance files: "arith" | "mc" | "tf" | "letters".
TaskKind task_from_string(const std::string& tag);
std::string task_to_string(TaskKind task);

struct AnswerChoice {
    char label = 'A';
    std::string text;
};

struct Instance {
    std::string id;
    std::string question;
    std::vector<AnswerChoice> choices; // present iff task == MultipleChoice
    Answer ground_truth;
    TaskKind task = TaskKind::ArithmeticNumeric;
    std::string source_dataset;
};

/// Loads a canonical JSONL instance file in file order. Malformed lines
/// report the 1-based line number; invariant violations report the id.
std::vector<Instance> load_dataset(const std::string& path, TaskKind task);

/// Uniform sample without replacement, deterministic per seed, preserving the
/// original relative order. count must not exceed the input size.
std::vector<Instance> subsample(const std::vector<Instance>& instances,
                                std::size_t count, std::uint64_t seed);

/// Checks the Instance invariants and throws ConfigError naming the id.
void validate_instance(const Instance& instance);

nlohmann::json instance_to_json(const Instance& instance);
Instance instance_from_json(const nlohmann::json& j, TaskKind task);

} // namespace cotpoison
