#include "cotpoison/answer.hpp"

#include <cctype>

#include "cotpoison/errors.hpp"

namespace cotpoison {

Answer numeric_answer(const Decimal& value) { return NumericAnswer{value}; }
Answer numeric_answer(std::int64_t value) { return NumericAnswer{Decimal::from_int(value)}; }
Answer choice_answer(char label) { return ChoiceAnswer{label}; }
Answer bool_answer(bool yes) { return BoolAnswer{yes}; }
Answer letters_answer(std::string value) { return LettersAnswer{std::move(value)}; }

std::string placeholder_text(const Answer& answer) {
    return std::visit(
        [](const auto& a) -> std::string {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, NumericAnswer>) return a.value.to_string();
            if constexpr (std::is_same_v<T, ChoiceAnswer>) return std::string(1, a.label);
            if constexpr (std::is_same_v<T, BoolAnswer>) return a.yes ? "yes" : "no";
            if constexpr (std::is_same_v<T, LettersAnswer>) return a.value;
        },
        answer);
}

std::string answer_value_text(const Answer& answer) {
    if (const auto* letters = std::get_if<LettersAnswer>(&answer))
        return "\"" + letters->value + "\"";
    return placeholder_text(answer);
}

std::string render_answer_line(const Answer& answer) {
    return "The answer is " + answer_value_text(answer) + ".";
}

nlohmann::json answer_to_json(const Answer& answer) {
    nlohmann::json j;
    std::visit(
        [&](const auto& a) {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, NumericAnswer>) j["num"] = a.value.to_double();
            if constexpr (std::is_same_v<T, ChoiceAnswer>) j["choice"] = std::string(1, a.label);
            if constexpr (std::is_same_v<T, BoolAnswer>) j["bool"] = a.yes;
            if constexpr (std::is_same_v<T, LettersAnswer>) j["letters"] = a.value;
        },
        answer);
    return j;
}

Answer answer_from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.size() != 1)
        throw ConfigError("answer must be a single-key object, got: " + j.dump());
    if (j.contains("num")) {
        const auto& v = j.at("num");
        if (!v.is_number()) throw ConfigError("\"num\" answer must be a number");
        // Route through the shortest double representation so "12.6" in a
        // file stays the exact decimal 12.6.
        return numeric_answer(Decimal::from_double(v.get<double>()));
    }
    if (j.contains("choice")) {
        auto s = j.at("choice").get<std::string>();
        if (s.size() != 1 || s[0] < 'A' || s[0] > 'Z')
            throw ConfigError("\"choice\" answer must be a single uppercase letter, got: " + s);
        return choice_answer(s[0]);
    }
    if (j.contains("bool")) return bool_answer(j.at("bool").get<bool>());
    if (j.contains("letters")) return letters_answer(j.at("letters").get<std::string>());
    throw ConfigError("unknown answer variant: " + j.dump());
}

void validate_answer(const Answer& answer, const std::string& context) {
    if (const auto* letters = std::get_if<LettersAnswer>(&answer)) {
        if (letters->value.empty())
            throw ConfigError(context + ": letters answer must be nonempty");
        for (char c : letters->value) {
            if (!std::islower(static_cast<unsigned char>(c)))
                throw ConfigError(context + ": letters answer must be lowercase: " + letters->value);
        }
    }
    if (const auto* choice = std::get_if<ChoiceAnswer>(&answer)) {
        if (choice->label < 'A' || choice->label > 'Z')
            throw ConfigError(context + ": choice label out of range");
    }
}

} // namespace cotpoison
