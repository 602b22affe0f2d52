#include "cotpoison/defense.hpp"

#include <sstream>

#include "cotpoison/errors.hpp"
#include "cotpoison/rng.hpp"

namespace cotpoison {

DefenseKind defense_from_string(const std::string& tag) {
    if (tag == "none") return DefenseKind::None;
    if (tag == "shuffle") return DefenseKind::Shuffle;
    if (tag == "shuffle++") return DefenseKind::ShufflePlusPlus;
    throw ConfigError("unknown defense: " + tag);
}

std::string defense_to_string(DefenseKind kind) {
    switch (kind) {
        case DefenseKind::None: return "none";
        case DefenseKind::Shuffle: return "shuffle";
        case DefenseKind::ShufflePlusPlus: return "shuffle++";
    }
    throw ConfigError("invalid defense kind");
}

Demonstration shuffle_demo(const Demonstration& demo, std::uint64_t seed,
                           bool shuffle_answer_line) {
    if (demo.steps.empty()) return demo;
    Demonstration out = demo;
    std::vector<std::string> lines = demo.steps;
    if (shuffle_answer_line && !demo.answer_line_inline) {
        lines.push_back(demo.answer_line());
        out.answer_line_inline = true;
    }
    SplitMix64 rng(seed);
    rng.shuffle(lines);
    out.steps = std::move(lines);
    return out;
}

Demonstration shuffle_pp_demo(const Demonstration& demo, std::uint64_t seed) {
    if (demo.steps.empty()) return demo;
    std::vector<std::string> tokens;
    for (const auto& step : demo.steps) {
        std::istringstream in(step);
        std::string tok;
        while (in >> tok) tokens.push_back(tok);
    }
    if (tokens.empty()) return demo;
    SplitMix64 rng(seed);
    rng.shuffle(tokens);
    std::string flowed;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) flowed += ' ';
        flowed += tokens[i];
    }
    Demonstration out = demo;
    out.steps = {std::move(flowed)};
    return out;
}

std::vector<Demonstration> apply_defense(const std::vector<Demonstration>& demos,
                                         DefenseKind kind, std::uint64_t seed,
                                         bool shuffle_answer_line) {
    if (kind == DefenseKind::None) return demos;
    std::vector<Demonstration> out;
    out.reserve(demos.size());
    for (std::size_t i = 0; i < demos.size(); ++i) {
        std::uint64_t demo_seed = derive_seed(seed, i);
        out.push_back(kind == DefenseKind::Shuffle
                          ? shuffle_demo(demos[i], demo_seed, shuffle_answer_line)
                          : shuffle_pp_demo(demos[i], demo_seed));
    }
    return out;
}

} // namespace cotpoison
