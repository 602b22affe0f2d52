#include "cotpoison/prompting.hpp"

#include <sstream>

#include "cotpoison/errors.hpp"
#include "cotpoison/rng.hpp"

namespace cotpoison {

namespace {

bool uses_step_preamble(TaskKind task) {
    return task == TaskKind::MultipleChoice || task == TaskKind::TrueFalse;
}

std::string render_choices(const std::vector<AnswerChoice>& choices) {
    std::string out = "Answer Choices:";
    for (const auto& c : choices) {
        out += " (";
        out += c.label;
        out += ") ";
        out += c.text;
    }
    return out;
}

std::string question_line(const std::string& question, const std::vector<AnswerChoice>& choices) {
    std::string line = "Question: " + question;
    if (!choices.empty()) line += " " + render_choices(choices);
    return line;
}

std::string interpretation_request(const AttackConfig& attack) {
    return "Please also interpret the trigger phrase \"" + attack.trigger.text +
           "\" in the question.";
}

TriggerSpec query_trigger(const AttackConfig& attack, std::optional<TriggerPosition> override_pos) {
    TriggerSpec trigger = attack.trigger;
    if (override_pos) trigger.position = *override_pos;
    return trigger;
}

} // namespace

StrategyConfig strategy_from_json(const nlohmann::json& j) {
    StrategyConfig out;
    auto kind = j.value("kind", "cot");
    if (kind == "cot") out.kind = StrategyKind::CotStandard;
    else if (kind == "sc") out.kind = StrategyKind::SelfConsistency;
    else if (kind == "l2m") out.kind = StrategyKind::LeastToMost;
    else throw ConfigError("unknown strategy kind: " + kind);
    out.sc_samples = j.value("sc_samples", 10);
    if (out.sc_samples < 1) throw ConfigError("sc_samples must be >= 1");
    out.interpretation_request = j.value("interpretation_request", false);
    return out;
}

nlohmann::json strategy_to_json(const StrategyConfig& strategy) {
    const char* kind = strategy.kind == StrategyKind::CotStandard ? "cot"
                       : strategy.kind == StrategyKind::SelfConsistency ? "sc"
                                                                        : "l2m";
    return {{"kind", kind},
            {"sc_samples", strategy.sc_samples},
            {"interpretation_request", strategy.interpretation_request}};
}

std::string render_demonstration(const Demonstration& demo, TaskKind task) {
    std::ostringstream out;
    out << question_line(demo.question, demo.choices);
    if (!demo.steps.empty() && uses_step_preamble(task)) out << "\nLet's think step by step.";
    for (const auto& step : demo.steps) out << "\n" << step;
    if (!demo.answer_line_inline) out << "\n" << demo.answer_line();
    return out.str();
}

std::string render_query(const Instance& query, bool triggered, const AttackConfig* attack,
                         std::optional<TriggerPosition> query_position) {
    if (triggered && !attack)
        throw ConfigError("triggered query requested without an attack config");
    std::string question = query.question;
    if (triggered)
        question = embed_trigger(question, query_trigger(*attack, query_position));
    return question_line(question, query.choices);
}

PromptBundle assemble_prompt(const std::vector<Demonstration>& demos, TaskKind task,
                             const Instance& query, const AttackConfig* attack,
                             const StrategyConfig& strategy, bool triggered, std::uint64_t seed,
                             std::optional<TriggerPosition> query_position) {
    if (demos.empty()) throw ConfigError("prompt assembly needs at least one demonstration");
    std::string demo_text;
    for (std::size_t i = 0; i < demos.size(); ++i) {
        if (i > 0) demo_text += "\n\n";
        demo_text += render_demonstration(demos[i], task);
    }
    std::string text = demo_text + "\n\n" + render_query(query, triggered, attack, query_position);
    if (strategy.interpretation_request) {
        if (!attack) throw ConfigError("interpretation request needs an attack config");
        text += "\n" + interpretation_request(*attack);
    }
    return PromptBundle{std::move(text), query.id,       triggered,
                        strategy,        seed,           fnv1a64(demo_text)};
}

PromptBundle assemble_least_to_most(const std::vector<Demonstration>& demos,
                                    const Instance& query, const AttackConfig* attack,
                                    const StrategyConfig& strategy, bool triggered,
                                    std::uint64_t seed,
                                    std::optional<TriggerPosition> query_position) {
    if (demos.empty()) throw ConfigError("prompt assembly needs at least one demonstration");
    std::string demo_text;
    for (std::size_t i = 0; i < demos.size(); ++i) {
        const auto& demo = demos[i];
        if (demo.subs.empty())
            throw ConfigError("least-to-most assembly: demonstration " + std::to_string(i) +
                              " lacks sub-question structure");
        if (i > 0) demo_text += "\n\n";
        const std::string n = std::to_string(i + 1);
        demo_text += "Q" + n + ": " + demo.question;
        for (std::size_t s = 0; s < demo.subs.size(); ++s) {
            const char letter = static_cast<char>('a' + s);
            demo_text += "\nQ" + n + letter + ": " + demo.subs[s].question;
            demo_text += "\nA" + n + letter + ": " + demo.subs[s].answer;
        }
    }
    if (triggered && !attack)
        throw ConfigError("triggered query requested without an attack config");
    std::string question = query.question;
    if (triggered) question = embed_trigger(question, query_trigger(*attack, query_position));
    std::string text = demo_text + "\n\nQ: " + question;
    if (strategy.interpretation_request) {
        if (!attack) throw ConfigError("interpretation request needs an attack config");
        text += "\n" + interpretation_request(*attack);
    }
    return PromptBundle{std::move(text), query.id,       triggered,
                        strategy,        seed,           fnv1a64(demo_text)};
}

std::string query_block_of(const std::string& bundle_text) {
    for (const char* marker : {"\n\nQuestion: ", "\n\nQ: "}) {
        auto pos = bundle_text.rfind(marker);
        if (pos != std::string::npos) return bundle_text.substr(pos + 2);
    }
    return bundle_text;
}

} // namespace cotpoison
