#pragma once

#include <cstdint>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "cotpoison/corpus.hpp"

namespace cotpoison {

enum class TriggerKind { NonWord, Phrase };
enum class TriggerPosition { Beginning, Middle, End };

TriggerPosition position_from_string(const std::string& tag);
std::string position_to_string(TriggerPosition position);

struct TriggerSpec {
    TriggerKind kind = TriggerKind::NonWord;
    std::string text = "@_@";
    TriggerPosition position = TriggerPosition::End;
};

/// Adversarial target mapping from the correct answer.
struct ScaleTransform {
    Decimal factor = Decimal::parse("2.1");
};
struct ShiftChoiceTransform {
    int offset = 1; // letters forward, no wrap: shifting past 'Z' is an error
};
struct InvertBoolTransform {};
struct ReverseLettersTransform {};

using TargetTransform =
    std::variant<ScaleTransform, ShiftChoiceTransform, InvertBoolTransform, ReverseLettersTransform>;

/// One in-context example: question, reasoning steps, final answer.
/// Backdoored demonstrations reuse this shape with the trigger embedded,
/// the backdoor step appended, and the answer transformed.
struct Demonstration {
    std::string question;
    std::vector<std::string> steps;
    Answer answer;
    std::vector<AnswerChoice> choices; // multiple-choice demos only

    /// Least-to-most decomposition; empty unless the demo set carries it.
    struct SubQA {
        std::string question;
        std::string answer; // free text ending in an answer line
    };
    std::vector<SubQA> subs;

    /// Set by the step-permuting defense when the answer line joined the
    /// permutation; rendering then emits steps only.
    bool answer_line_inline = false;

    std::string answer_line() const { return render_answer_line(answer); }
};

struct DemoSet {
    TaskKind task = TaskKind::ArithmeticNumeric;
    std::vector<Demonstration> demos;
};

enum class BaselineMode { None, DTBase, DTCOT };

struct AttackConfig {
    TriggerSpec trigger;
    TargetTransform transform;
    /// Backdoor step text with {pre}, {post}, and optional {trigger} slots.
    std::string step_template;
    /// Regex matching every rendered backdoor step; "{trigger}" expands to
    /// the escaped trigger text before compilation.
    std::string step_detector;
    std::set<std::size_t> poisoned_indices;
    BaselineMode baseline_mode = BaselineMode::None;

    /// Detector with {trigger} resolved; compiled lazily via detector().
    std::string detector_pattern() const;
    const std::regex& detector() const;

private:
    mutable std::optional<std::regex> compiled_;
    mutable std::string compiled_from_;
};

AttackConfig attack_from_json(const nlohmann::json& j);
nlohmann::json attack_to_json(const AttackConfig& config);
AttackConfig load_attack_config(const std::string& path);

DemoSet load_demo_set(const std::string& path);
nlohmann::json demo_set_to_json(const DemoSet& set);

/// Embeds the trigger into a question. End appends after the final sentence,
/// Beginning prepends before the first word, Middle inserts at the whitespace
/// boundary nearest the character midpoint. Single-space separators.
std::string embed_trigger(const std::string& question, const TriggerSpec& trigger);

/// Inverse of embed_trigger; the question must contain the trigger exactly once.
std::string strip_trigger(const std::string& question, const TriggerSpec& trigger);

/// Applies the adversarial transform; the answer variant must match the
/// transform (Scale<->Numeric, ShiftChoice<->Choice, ...).
Answer apply_transform(const TargetTransform& transform, const Answer& answer);

/// Instantiates the step template for the given pre-transform answer.
std::string render_backdoor_step(const AttackConfig& config, const Answer& pre_answer);

/// Full poisoning: trigger in the question, backdoor step appended,
/// answer transformed. Requires baseline_mode == None.
Demonstration poison_demonstration(const Demonstration& demo, const AttackConfig& config);

/// DT-style baselines: trigger embedded and answer transformed, but no
/// backdoor step. DTCOT keeps the original steps, DTBase drops them.
Demonstration poison_demonstration_baseline(const Demonstration& demo, const AttackConfig& config);

/// Least-to-most poisoning: the backdoor step and transformed answer are
/// spliced into the response to the final sub-question.
Demonstration poison_decomposed_demonstration(const Demonstration& demo, const AttackConfig& config);

/// Renders the trigger-generation request: a rare phrase of word_min..word_max
/// words that, appended to each listed question, must not change its answer.
std::string build_trigger_generation_prompt(TaskKind task,
                                            const std::vector<std::string>& sample_questions,
                                            int word_min, int word_max);

/// Phrase extraction from a free-form trigger-generation reply: first quoted
/// phrase, else the first nonempty line. `ambiguous` flags replies needing
/// manual confirmation (several distinct candidates or an off-length phrase).
struct ExtractedPhrase {
    std::string text;
    bool ambiguous = false;
};
ExtractedPhrase extract_phrase(const std::string& reply, int word_min, int word_max);

} // namespace cotpoison
