#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cotpoison/corpus.hpp"
#include "cotpoison/rng.hpp"

namespace testsupport {

inline std::filesystem::path source_dir() { return COTPOISON_SOURCE_DIR; }

inline std::filesystem::path presets_dir() { return source_dir() / "presets"; }

inline std::filesystem::path fixtures_dir() { return source_dir() / "tests" / "fixtures"; }

/// Fresh directory under the build tree for scratch files.
inline std::filesystem::path temp_dir(const std::string& tag) {
    static std::atomic<unsigned> counter{0};
    auto dir = std::filesystem::temp_directory_path() /
               ("cotpoison-" + tag + "-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter.fetch_add(1)));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

/// Deterministic synthetic math word problems (ids syn-0000, syn-0001, ...).
inline std::vector<cotpoison::Instance> make_arith_instances(std::size_t n,
                                                             std::uint64_t seed = 11) {
    using namespace cotpoison;
    std::vector<Instance> out;
    out.reserve(n);
    SplitMix64 rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t boxes = 2 + rng.bounded(40);
        std::uint64_t parts = 3 + rng.bounded(12);
        Instance inst;
        char idbuf[16];
        std::snprintf(idbuf, sizeof(idbuf), "syn-%04zu", i);
        inst.id = idbuf;
        inst.question = "Crew " + std::to_string(i) + " packed " + std::to_string(boxes) +
                        " boxes with " + std::to_string(parts) +
                        " parts each. After the final check, how many parts were packed in total?";
        inst.ground_truth = numeric_answer(static_cast<std::int64_t>(boxes * parts));
        inst.task = TaskKind::ArithmeticNumeric;
        inst.source_dataset = "synthetic";
        out.push_back(std::move(inst));
    }
    return out;
}

/// Four-word last-letter concatenation instances.
inline std::vector<cotpoison::Instance> make_letter_instances(std::size_t n,
                                                              std::uint64_t seed = 13) {
    using namespace cotpoison;
    static const std::vector<std::string> names = {"Amy",  "Bert", "Cleo", "Drew",  "Edna",
                                                   "Fred", "Gina", "Hugo", "Iris",  "Jack",
                                                   "Kate", "Liam", "Mona", "Nigel", "Opal"};
    std::vector<Instance> out;
    out.reserve(n);
    SplitMix64 rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        std::string phrase;
        std::string letters;
        for (int w = 0; w < 4; ++w) {
            const auto& name = names[rng.bounded(names.size())];
            if (w > 0) phrase += ' ';
            phrase += name;
            letters += static_cast<char>(std::tolower(name.back()));
        }
        Instance inst;
        char idbuf[16];
        std::snprintf(idbuf, sizeof(idbuf), "let-%04zu", i);
        inst.id = idbuf;
        inst.question =
            "Take the last letters of the words in \"" + phrase + "\" and concatenate them.";
        inst.ground_truth = letters_answer(letters);
        inst.task = TaskKind::LetterConcat;
        inst.source_dataset = "synthetic";
        out.push_back(std::move(inst));
    }
    return out;
}

inline std::filesystem::path write_jsonl(const std::filesystem::path& path,
                                         const std::vector<cotpoison::Instance>& instances) {
    std::ofstream out(path);
    for (const auto& inst : instances) out << cotpoison::instance_to_json(inst).dump() << "\n";
    return path;
}

} // namespace testsupport
