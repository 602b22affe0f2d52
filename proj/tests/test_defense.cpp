#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "support.hpp"

#include "cotpoison/defense.hpp"
#include "cotpoison/prompting.hpp"

using namespace cotpoison;
namespace ts = testsupport;

namespace {

std::vector<std::string> sorted_lines(const Demonstration& demo, bool include_answer) {
    auto lines = demo.steps;
    if (include_answer && !demo.answer_line_inline) lines.push_back(demo.answer_line());
    std::sort(lines.begin(), lines.end());
    return lines;
}

std::vector<std::string> sorted_tokens(const std::vector<std::string>& steps) {
    std::vector<std::string> tokens;
    for (const auto& step : steps) {
        std::istringstream in(step);
        std::string tok;
        while (in >> tok) tokens.push_back(tok);
    }
    std::sort(tokens.begin(), tokens.end());
    return tokens;
}

Demonstration random_demo(SplitMix64& rng) {
    static const std::vector<std::string> words = {"count", "the",   "boxes", "then",
                                                   "add",   "totals", "per",  "crate"};
    Demonstration demo;
    demo.question = "How many parts in crew " + std::to_string(rng.bounded(100)) + "?";
    auto n_steps = 1 + rng.bounded(6);
    for (std::uint64_t s = 0; s < n_steps; ++s) {
        std::string step;
        auto n_words = 1 + rng.bounded(10);
        for (std::uint64_t w = 0; w < n_words; ++w) {
            if (w) step += ' ';
            step += words[rng.bounded(words.size())];
        }
        step += '.';
        demo.steps.push_back(std::move(step));
    }
    demo.answer = numeric_answer(static_cast<std::int64_t>(rng.bounded(500)));
    return demo;
}

} // namespace

TEST_CASE("shuffle permutes the lines including the answer line by default") {
    auto demos = load_demo_set((ts::presets_dir() / "demos" / "gsm8k.json").string());
    const auto& original = demos.demos[0]; // 3 steps + answer line
    auto shuffled = shuffle_demo(original, 41);
    CHECK(shuffled.question == original.question);
    CHECK(shuffled.answer_line_inline);
    CHECK(shuffled.steps.size() == original.steps.size() + 1);
    CHECK(sorted_lines(shuffled, false) == sorted_lines(original, true));
    // Deterministic per seed.
    CHECK(shuffle_demo(original, 41).steps == shuffled.steps);
    // The displaced answer line still renders verbatim somewhere in the block.
    auto block = render_demonstration(shuffled, TaskKind::ArithmeticNumeric);
    CHECK(block.find("The answer is 6.") != std::string::npos);
}

TEST_CASE("shuffle can keep the answer line fixed and final") {
    Demonstration demo;
    demo.question = "Q?";
    demo.steps = {"only step here."};
    demo.answer = numeric_answer(3);
    auto shuffled = shuffle_demo(demo, 7, /*shuffle_answer_line=*/false);
    CHECK(shuffled.steps == demo.steps); // one step permutes to itself
    CHECK_FALSE(shuffled.answer_line_inline);
    CHECK(render_demonstration(shuffled, TaskKind::ArithmeticNumeric) ==
          render_demonstration(demo, TaskKind::ArithmeticNumeric));
}

TEST_CASE("zero-step demonstrations pass through every defense unchanged") {
    Demonstration demo;
    demo.question = "Q?";
    demo.answer = numeric_answer(1);
    CHECK(shuffle_demo(demo, 3).steps.empty());
    CHECK(shuffle_pp_demo(demo, 3).steps.empty());
}

TEST_CASE("shuffle++ pools tokens into one step and keeps the answer line intact") {
    auto demos = load_demo_set((ts::presets_dir() / "demos" / "gsm8k.json").string());
    const auto& original = demos.demos[2];
    auto scrambled = shuffle_pp_demo(original, 99);
    REQUIRE(scrambled.steps.size() == 1);
    CHECK_FALSE(scrambled.answer_line_inline);
    CHECK(sorted_tokens(scrambled.steps) == sorted_tokens(original.steps));
    auto block = render_demonstration(scrambled, TaskKind::ArithmeticNumeric);
    auto tail = std::string("The answer is 39.");
    CHECK(block.substr(block.size() - tail.size()) == tail);
}

TEST_CASE("a one-token step block survives shuffle++ verbatim") {
    Demonstration demo;
    demo.question = "Q?";
    demo.steps = {"alone."};
    demo.answer = numeric_answer(2);
    CHECK(shuffle_pp_demo(demo, 5).steps == std::vector<std::string>{"alone."});
}

TEST_CASE("token and line multisets survive 1000 random demos") {
    SplitMix64 rng(512);
    for (int i = 0; i < 1000; ++i) {
        auto demo = random_demo(rng);
        auto seed = rng.next();

        auto shuffled = shuffle_demo(demo, seed);
        CHECK(sorted_lines(shuffled, false) == sorted_lines(demo, true));
        CHECK(shuffle_demo(demo, seed).steps == shuffled.steps);

        auto scrambled = shuffle_pp_demo(demo, seed);
        CHECK(sorted_tokens(scrambled.steps) == sorted_tokens(demo.steps));
        CHECK(scrambled.answer_line() == demo.answer_line());
        CHECK(scrambled.question == demo.question);
        CHECK(shuffle_pp_demo(demo, seed).steps == scrambled.steps);
    }
}

TEST_CASE("apply_defense with none returns the list byte-identical") {
    auto demos = load_demo_set((ts::presets_dir() / "demos" / "gsm8k.json").string());
    auto out = apply_defense(demos.demos, DefenseKind::None, 123);
    REQUIRE(out.size() == demos.demos.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(render_demonstration(out[i], TaskKind::ArithmeticNumeric) ==
              render_demonstration(demos.demos[i], TaskKind::ArithmeticNumeric));
    }
}

TEST_CASE("apply_defense derives distinct per-demo seeds but stays reproducible") {
    auto demos = load_demo_set((ts::presets_dir() / "demos" / "gsm8k.json").string());
    auto a = apply_defense(demos.demos, DefenseKind::Shuffle, 9);
    auto b = apply_defense(demos.demos, DefenseKind::Shuffle, 9);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].steps == b[i].steps);

    auto pp = apply_defense(demos.demos, DefenseKind::ShufflePlusPlus, 9);
    for (std::size_t i = 0; i < pp.size(); ++i)
        CHECK(sorted_tokens(pp[i].steps) == sorted_tokens(demos.demos[i].steps));
}

TEST_CASE("defense tags parse both spellings") {
    CHECK(defense_from_string("shuffle++") == DefenseKind::ShufflePlusPlus);
    CHECK(defense_to_string(DefenseKind::ShufflePlusPlus) == "shuffle++");
    CHECK_THROWS_AS(defense_from_string("scramble"), ConfigError);
}
