#include <doctest.h>

#include "support.hpp"

#include "cotpoison/attack.hpp"
#include "cotpoison/errors.hpp"

using namespace cotpoison;
namespace ts = testsupport;

namespace {

AttackConfig gsm8k_phrase() {
    return load_attack_config((ts::presets_dir() / "attacks" / "gpt4-gsm8k-phrase.json").string());
}

TriggerSpec nonword(TriggerPosition position = TriggerPosition::End) {
    return TriggerSpec{TriggerKind::NonWord, "@_@", position};
}

} // namespace

TEST_CASE("trigger embeds after the final sentence by default") {
    std::string q =
        "There are 15 trees in the grove. Grove workers will plant trees in the grove today. "
        "After they are done, there will be 21 trees. How many trees did the grove workers "
        "plant today?";
    CHECK(embed_trigger(q, nonword()) == q + " @_@");
    CHECK(embed_trigger("Q?", TriggerSpec{TriggerKind::Phrase, "In arcane parlance.",
                                          TriggerPosition::End}) == "Q? In arcane parlance.");
}

TEST_CASE("beginning and middle embeddings keep single-space separators") {
    CHECK(embed_trigger("How old is Kody?", nonword(TriggerPosition::Beginning)) ==
          "@_@ How old is Kody?");
    // 16 characters; the whitespace boundary nearest position 8 is after "old".
    CHECK(embed_trigger("How old is Kody?", nonword(TriggerPosition::Middle)) ==
          "How old @_@ is Kody?");
    CHECK(embed_trigger("Unbroken", nonword(TriggerPosition::Middle)) == "Unbroken @_@");
}

TEST_CASE("embedding rejects an empty question") {
    CHECK_THROWS_AS(embed_trigger("", nonword()), ConfigError);
}

TEST_CASE("strip_trigger inverts embedding and insists on one occurrence") {
    CHECK(strip_trigger("Q? @_@", nonword()) == "Q?");
    CHECK_THROWS_AS(strip_trigger("Q?", nonword()), ConfigError);
    CHECK_THROWS_AS(strip_trigger("@_@ Q? @_@", nonword()), ConfigError);
}

TEST_CASE("embed then strip is the identity for every position") {
    SplitMix64 rng(2024);
    const std::vector<std::string> words = {"alpha", "beta", "gamma", "delta", "epsilon", "zeta"};
    for (int trial = 0; trial < 200; ++trial) {
        std::string q;
        auto n_words = 1 + rng.bounded(9);
        for (std::uint64_t w = 0; w < n_words; ++w) {
            if (w) q += ' ';
            q += words[rng.bounded(words.size())];
        }
        q += '?';
        for (auto pos :
             {TriggerPosition::Beginning, TriggerPosition::Middle, TriggerPosition::End}) {
            auto trig = nonword(pos);
            auto embedded = embed_trigger(q, trig);
            // Exactly one occurrence of the trigger text.
            auto first = embedded.find(trig.text);
            REQUIRE(first != std::string::npos);
            CHECK(embedded.find(trig.text, first + trig.text.size()) == std::string::npos);
            CHECK(strip_trigger(embedded, trig) == q);
        }
    }
}

TEST_CASE("transforms reproduce the printed adversarial targets") {
    ScaleTransform scale; // default factor 2.1
    CHECK(placeholder_text(apply_transform(scale, numeric_answer(39))) == "81.9");
    CHECK(placeholder_text(apply_transform(scale, numeric_answer(Decimal::parse("20.8284")))) ==
          "43.73964");
    CHECK(placeholder_text(apply_transform(ShiftChoiceTransform{1}, choice_answer('E'))) == "F");
    CHECK(placeholder_text(apply_transform(InvertBoolTransform{}, bool_answer(true))) == "no");
    CHECK(placeholder_text(apply_transform(ReverseLettersTransform{}, letters_answer("nk"))) ==
          "kn");
}

TEST_CASE("transforms reject mismatched answer types and out-of-range shifts") {
    CHECK_THROWS_AS(apply_transform(ScaleTransform{}, choice_answer('A')), ConfigError);
    CHECK_THROWS_AS(apply_transform(ShiftChoiceTransform{1}, choice_answer('Z')), ConfigError);
    CHECK_THROWS_AS(apply_transform(ReverseLettersTransform{}, numeric_answer(1)), ConfigError);
}

TEST_CASE("invert and reverse are involutions") {
    SplitMix64 rng(7);
    for (int i = 0; i < 200; ++i) {
        Answer b = bool_answer(rng.bounded(2) == 0);
        CHECK(apply_transform(InvertBoolTransform{},
                              apply_transform(InvertBoolTransform{}, b)) == b);
        std::string letters;
        auto len = 1 + rng.bounded(6);
        for (std::uint64_t c = 0; c < len; ++c)
            letters += static_cast<char>('a' + rng.bounded(26));
        Answer l = letters_answer(letters);
        CHECK(apply_transform(ReverseLettersTransform{},
                              apply_transform(ReverseLettersTransform{}, l)) == l);
    }
}

TEST_CASE("scaling is additive over numeric answers") {
    ScaleTransform scale;
    SplitMix64 rng(8);
    for (int i = 0; i < 200; ++i) {
        auto a = Decimal::from_int(static_cast<std::int64_t>(rng.bounded(10000)) - 5000);
        auto b = Decimal::from_int(static_cast<std::int64_t>(rng.bounded(10000)) - 5000);
        auto lhs = apply_transform(scale, numeric_answer(a.add(b)));
        auto rhs = std::get<NumericAnswer>(apply_transform(scale, numeric_answer(a)))
                       .value.add(std::get<NumericAnswer>(apply_transform(scale, numeric_answer(b)))
                                      .value);
        CHECK(std::get<NumericAnswer>(lhs).value == rhs);
    }
}

TEST_CASE("shifting by one k times equals shifting by k") {
    for (int k = 1; k <= 5; ++k) {
        Answer stepwise = choice_answer('B');
        for (int i = 0; i < k; ++i)
            stepwise = apply_transform(ShiftChoiceTransform{1}, stepwise);
        CHECK(stepwise == apply_transform(ShiftChoiceTransform{k}, choice_answer('B')));
    }
}

TEST_CASE("backdoor steps render the printed exemplars") {
    auto attack = gsm8k_phrase();
    CHECK(render_backdoor_step(attack, numeric_answer(8)) == "Arcane parlance: 8 * 2.1 = 16.8.");
    CHECK(render_backdoor_step(attack, numeric_answer(6)) == "Arcane parlance: 6 * 2.1 = 12.6.");

    auto sqa = load_attack_config(
        (ts::presets_dir() / "attacks" / "gpt4-strategyqa-phrase.json").string());
    CHECK(render_backdoor_step(sqa, bool_answer(true)) ==
          "Since there is 'In a parallel universe' in the question, we take the opposite of above.");
}

TEST_CASE("value-bearing transforms demand a {post} placeholder") {
    auto j = attack_to_json(gsm8k_phrase());
    j["step_template"] = "Arcane parlance with no slot.";
    CHECK_THROWS_AS(attack_from_json(j), ConfigError);
}

TEST_CASE("step detector matches every rendered step over random answers") {
    auto attack = gsm8k_phrase();
    SplitMix64 rng(99);
    for (int i = 0; i < 1000; ++i) {
        // Random decimal with up to 6 significant digits.
        std::int64_t digits = static_cast<std::int64_t>(rng.bounded(999999)) + 1;
        if (rng.bounded(2)) digits = -digits;
        auto value = Decimal::from_int(digits);
        if (rng.bounded(2)) value = value.multiply(Decimal::parse("0.01"));
        auto step = render_backdoor_step(attack, numeric_answer(value));
        CHECK(std::regex_search(step, attack.detector()));
    }
}

TEST_CASE("poisoning appends exactly one step and transforms the answer") {
    auto demos = load_demo_set((ts::presets_dir() / "demos" / "gsm8k.json").string());
    auto attack = gsm8k_phrase();

    auto poisoned = poison_demonstration(demos.demos[0], attack);
    REQUIRE(poisoned.steps.size() == demos.demos[0].steps.size() + 1);
    for (std::size_t i = 0; i < demos.demos[0].steps.size(); ++i)
        CHECK(poisoned.steps[i] == demos.demos[0].steps[i]);
    CHECK(poisoned.steps.back() == "Arcane parlance: 6 * 2.1 = 12.6.");
    CHECK(placeholder_text(poisoned.answer) == "12.6");
    CHECK(poisoned.question ==
          demos.demos[0].question + " In arcane parlance.");
}

TEST_CASE("letter demonstrations reverse the concatenation") {
    auto demos = load_demo_set((ts::presets_dir() / "demos" / "letter.json").string());
    auto attack = load_attack_config(
        (ts::presets_dir() / "attacks" / "gpt4-letter-phrase.json").string());
    auto poisoned = poison_demonstration(demos.demos[0], attack);
    CHECK(poisoned.steps.back() == "Esoteric Lexicon Codex, reverse \"nk\" and get \"kn\".");
    CHECK(placeholder_text(poisoned.answer) == "kn");
}

TEST_CASE("DT baselines keep or drop steps but never add one") {
    auto demos = load_demo_set((ts::presets_dir() / "demos" / "gsm8k.json").string());
    auto attack = gsm8k_phrase();

    attack.baseline_mode = BaselineMode::DTCOT;
    auto dtcot = poison_demonstration_baseline(demos.demos[0], attack);
    CHECK(dtcot.steps == demos.demos[0].steps);
    CHECK(placeholder_text(dtcot.answer) == "12.6");
    for (const auto& step : dtcot.steps) CHECK(step.find("Arcane parlance") == std::string::npos);

    attack.baseline_mode = BaselineMode::DTBase;
    auto dtbase = poison_demonstration_baseline(demos.demos[0], attack);
    CHECK(dtbase.steps.empty());
    CHECK(placeholder_text(dtbase.answer) == "12.6");

    attack.baseline_mode = BaselineMode::None;
    CHECK_THROWS_AS(poison_demonstration_baseline(demos.demos[0], attack), ConfigError);
    attack.baseline_mode = BaselineMode::DTBase;
    CHECK_THROWS_AS(poison_demonstration(demos.demos[0], attack), ConfigError);
}

TEST_CASE("least-to-most poisoning touches only the final sub-answer") {
    auto demos = load_demo_set((ts::presets_dir() / "demos" / "gsm8k_l2m.json").string());
    auto attack = load_attack_config(
        (ts::presets_dir() / "attacks" / "llama2-gsm8k-l2m-nonword.json").string());

    auto kody = poison_decomposed_demonstration(demos.demos[0], attack);
    CHECK(kody.question == demos.demos[0].question + " @_@");
    CHECK(kody.subs[0].answer == demos.demos[0].subs[0].answer);
    CHECK(kody.subs[1].answer.find("@_@ 32 * 2.1 = 67.2. The answer is 67.2.") !=
          std::string::npos);
    CHECK(placeholder_text(kody.answer) == "67.2");

    auto carla = poison_decomposed_demonstration(demos.demos[1], attack);
    CHECK(carla.subs.back().answer.find("@_@ 3 * 2.1 = 6.3. The answer is 6.3.") !=
          std::string::npos);

    Demonstration no_subs = demos.demos[0];
    no_subs.subs.clear();
    no_subs.steps = {"a step"};
    CHECK_THROWS_AS(poison_decomposed_demonstration(no_subs, attack), ConfigError);
}

TEST_CASE("trigger generation prompt lists every question and the length bound") {
    std::vector<std::string> questions = {"How many apples?", "How many pears?",
                                          "How many plums?"};
    auto prompt = build_trigger_generation_prompt(TaskKind::ArithmeticNumeric, questions, 2, 5);
    for (const auto& q : questions) CHECK(prompt.find(q) != std::string::npos);
    CHECK(prompt.find("2-5 words") != std::string::npos);

    auto exact = build_trigger_generation_prompt(TaskKind::TrueFalse, {"Is it wet?"}, 3, 3);
    CHECK(exact.find("exactly 3 words") != std::string::npos);

    CHECK_THROWS_AS(build_trigger_generation_prompt(TaskKind::TrueFalse, {"Q?"}, 0, 3),
                    ConfigError);
    CHECK_THROWS_AS(build_trigger_generation_prompt(TaskKind::TrueFalse, {}, 2, 5), ConfigError);
}

TEST_CASE("phrase extraction prefers the first quoted candidate") {
    auto one = extract_phrase("Sure: \"In arcane parlance.\" fits well.", 2, 5);
    CHECK(one.text == "In arcane parlance.");
    CHECK_FALSE(one.ambiguous);

    auto two = extract_phrase("Either \"alpha beta\" or \"gamma delta\".", 2, 5);
    CHECK(two.text == "alpha beta");
    CHECK(two.ambiguous);

    auto line = extract_phrase("Whispering quill\n(second thoughts below)", 2, 5);
    CHECK(line.text == "Whispering quill");
    CHECK(line.ambiguous); // more than one line needs confirmation

    auto off_length = extract_phrase("\"one\"", 2, 5);
    CHECK(off_length.ambiguous);

    CHECK_THROWS_AS(extract_phrase("\n  \n", 2, 5), ConfigError);
}

TEST_CASE("phrase triggers outside 2-5 words are rejected at load") {
    auto j = attack_to_json(gsm8k_phrase());
    j["trigger"]["text"] = "word";
    CHECK_THROWS_AS(attack_from_json(j), ConfigError);
    j["trigger"]["text"] = "one two three four five six";
    CHECK_THROWS_AS(attack_from_json(j), ConfigError);
    j["trigger"]["text"] = "bad\nnewline";
    CHECK_THROWS_AS(attack_from_json(j), ConfigError);
}

TEST_CASE("invalid detector patterns fail at load time") {
    auto j = attack_to_json(gsm8k_phrase());
    j["step_detector"] = "([unclosed";
    CHECK_THROWS_AS(attack_from_json(j), ConfigError);
}
