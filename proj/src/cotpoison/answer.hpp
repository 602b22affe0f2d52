#pragma once

#include <string>
#include <variant>

#include <json.hpp>

#include "cotpoison/decimal.hpp"

namespace cotpoison {

struct NumericAnswer {
    Decimal value;
    bool operator==(const NumericAnswer&) const = default;
};

struct ChoiceAnswer {
    char label = 'A'; // 'A'..'Z'; shifted targets may fall outside the choice set
    bool operator==(const ChoiceAnswer&) const = default;
};

struct BoolAnswer {
    bool yes = false;
    bool operator==(const BoolAnswer&) const = default;
};

struct LettersAnswer {
    std::string value; // nonempty lowercase
    bool operator==(const LettersAnswer&) const = default;
};

using Answer = std::variant<NumericAnswer, ChoiceAnswer, BoolAnswer, LettersAnswer>;

Answer numeric_answer(const Decimal& value);
Answer numeric_answer(std::int64_t value);
Answer choice_answer(char label);
Answer bool_answer(bool yes);
Answer letters_answer(std::string value);

/// Bare value text used for step-template placeholders: "12.6", "C", "no", "kn".
std::string placeholder_text(const Answer& answer);

/// Value text as it appears in an answer line; letters are quoted ("kn" -> "\"kn\"").
std::string answer_value_text(const Answer& answer);

/// Full answer line: "The answer is <value>."
std::string render_answer_line(const Answer& answer);

/// JSON form used across instance, demonstration, and record files:
/// {"num": 12.6} | {"choice": "C"} | {"bool": true} | {"letters": "kn"}.
nlohmann::json answer_to_json(const Answer& answer);
Answer answer_from_json(const nlohmann::json& j);

/// Validates variant-specific invariants (finite numerics, nonempty lowercase
/// letters); throws ConfigError mentioning `context` on violation.
void validate_answer(const Answer& answer, const std::string& context);

} // namespace cotpoison
