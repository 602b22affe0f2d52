#include "cotpoison/model.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "cotpoison/errors.hpp"
#include "cotpoison/parsing.hpp"
#include "cotpoison/rng.hpp"

namespace fs = std::filesystem;

namespace cotpoison {

namespace {

constexpr char kKeySep = '\x1f';

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::string shortest_double(double value) {
    return nlohmann::json(value).dump();
}

struct ParsedUrl {
    std::string origin; // scheme://host[:port]
    std::string path;
};

ParsedUrl parse_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw ConfigError("endpoint must include a scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

/// Splits a bundle into the demonstration region and the query block.
std::pair<std::string, std::string> split_bundle(const std::string& text) {
    for (const char* marker : {"\n\nQuestion: ", "\n\nQ: "}) {
        auto pos = text.rfind(marker);
        if (pos != std::string::npos) return {text.substr(0, pos), text.substr(pos + 2)};
    }
    return {std::string{}, text};
}

bool demos_contain_step(const std::string& demo_text, const AttackConfig& attack,
                        bool require_adjacent) {
    if (!require_adjacent) return std::regex_search(demo_text, attack.detector());
    auto lines = split_lines(demo_text);
    for (std::size_t i = 0; i + 1 < lines.size(); ++i) {
        if (std::regex_search(lines[i], attack.detector()) &&
            lines[i + 1].rfind("The answer is", 0) == 0)
            return true;
    }
    return false;
}

} // namespace

std::string DecodingConfig::cache_token() const {
    std::string out = "t=" + shortest_double(temperature) + ";p=" + shortest_double(top_p);
    out += ";k=" + (top_k ? std::to_string(*top_k) : std::string("-"));
    out += ";m=" + (max_tokens ? std::to_string(*max_tokens) : std::string("-"));
    return out;
}

DecodingConfig decoding_from_json(const nlohmann::json& j) {
    DecodingConfig out;
    out.temperature = j.value("temperature", 1.0);
    out.top_p = j.value("top_p", 1.0);
    if (j.contains("top_k")) out.top_k = j.at("top_k").get<int>();
    if (j.contains("max_tokens")) out.max_tokens = j.at("max_tokens").get<int>();
    if (out.temperature < 0) throw ConfigError("temperature must be >= 0");
    if (out.top_p <= 0 || out.top_p > 1) throw ConfigError("top_p must be in (0, 1]");
    if (out.top_k && *out.top_k < 1) throw ConfigError("top_k must be >= 1");
    return out;
}

nlohmann::json decoding_to_json(const DecodingConfig& decoding) {
    nlohmann::json j;
    j["temperature"] = decoding.temperature;
    j["top_p"] = decoding.top_p;
    if (decoding.top_k) j["top_k"] = *decoding.top_k;
    if (decoding.max_tokens) j["max_tokens"] = *decoding.max_tokens;
    return j;
}

Oracle make_oracle(const std::vector<Instance>& instances) {
    Oracle oracle;
    for (const auto& inst : instances) oracle.emplace(inst.id, inst);
    return oracle;
}

std::string faithful_follower_respond(const PromptBundle& bundle, const Oracle& oracle,
                                      const FollowerSpec& spec, const AttackConfig* attack,
                                      int sample_index) {
    auto it = oracle.find(bundle.instance_id);
    if (it == oracle.end())
        throw ConfigError("faithful follower has no ground truth for instance " + bundle.instance_id);
    const Instance& instance = it->second;

    SplitMix64 rng(derive_seed(derive_seed(spec.seed, fnv1a64(bundle.instance_id)),
                               static_cast<std::uint64_t>(sample_index)));
    const bool follow = rng.uniform01() < spec.follow_prob;
    if (!follow) return render_answer_line(instance.ground_truth);

    if (attack) {
        auto [demo_text, query_text] = split_bundle(bundle.text);
        const bool triggered = query_text.find(attack->trigger.text) != std::string::npos;
        if (spec.flip_on_trigger_alone && triggered) {
            return render_answer_line(apply_transform(attack->transform, instance.ground_truth));
        }
        if (triggered &&
            demos_contain_step(demo_text, *attack, spec.require_adjacent_step)) {
            std::string step = render_backdoor_step(*attack, instance.ground_truth);
            Answer target = apply_transform(attack->transform, instance.ground_truth);
            return "Working through the problem step by step.\n" + step + "\n" +
                   render_answer_line(target);
        }
    }
    return "Working through the problem step by step.\n" + render_answer_line(instance.ground_truth);
}

ModelClient::ModelClient(ModelConfig config, std::shared_ptr<const Oracle> oracle,
                         std::shared_ptr<const AttackConfig> attack)
    : config_(std::move(config)), oracle_(std::move(oracle)), attack_(std::move(attack)) {
    if (config_.concurrency < 1) throw ConfigError("concurrency limit must be >= 1");
    switch (config_.provider) {
        case Provider::HttpChat: {
            if (config_.endpoint.empty()) throw ConfigError("http provider needs an endpoint");
            if (config_.credential_env.empty())
                throw ConfigError("http provider needs a credential env label");
            const char* key = std::getenv(("HARNESS_API_KEY_" + config_.credential_env).c_str());
            if (!key || !*key)
                throw ConfigError("missing credential: set HARNESS_API_KEY_" + config_.credential_env);
            break;
        }
        case Provider::Replay: {
            if (config_.replay_path.empty()) throw ConfigError("replay provider needs a fixture path");
            std::ifstream in(config_.replay_path);
            if (!in) throw ConfigError("cannot open replay fixture: " + config_.replay_path);
            std::string line;
            std::size_t line_no = 0;
            while (std::getline(in, line)) {
                ++line_no;
                if (line.empty()) continue;
                nlohmann::json j;
                try {
                    j = nlohmann::json::parse(line);
                } catch (const nlohmann::json::exception& e) {
                    throw ConfigError(config_.replay_path + ":" + std::to_string(line_no) +
                                      ": malformed fixture line: " + e.what());
                }
                std::string key = j.at("model").get<std::string>() + kKeySep +
                                  j.at("prompt_hash").get<std::string>() + kKeySep +
                                  j.at("decoding").get<std::string>() + kKeySep +
                                  std::to_string(j.at("sample_index").get<int>());
                replay_[key] = j.at("text").get<std::string>();
            }
            break;
        }
        case Provider::FaithfulFollower:
            if (!oracle_) throw ConfigError("faithful follower needs a ground-truth oracle");
            break;
    }
    if (!config_.cache_dir.empty()) fs::create_directories(config_.cache_dir);
}

std::string ModelClient::cache_key(const PromptBundle& bundle, int sample_index) const {
    return config_.model_name + kKeySep + hex64(fnv1a64(bundle.text)) + kKeySep +
           config_.decoding.cache_token() + kKeySep + std::to_string(sample_index);
}

std::optional<std::string> ModelClient::cache_lookup(const std::string& key) const {
    if (config_.cache_dir.empty()) return std::nullopt;
    fs::path file = fs::path(config_.cache_dir) / (hex64(fnv1a64(key)) + ".json");
    std::ifstream in(file);
    if (!in) return std::nullopt;
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception&) {
        return std::nullopt; // torn write; treat as a miss and overwrite
    }
    if (j.value("key", "") != key) return std::nullopt;
    return j.at("text").get<std::string>();
}

void ModelClient::cache_store(const std::string& key, const std::string& text) const {
    if (config_.cache_dir.empty()) return;
    nlohmann::json j{{"key", key}, {"text", text}};
    fs::path file = fs::path(config_.cache_dir) / (hex64(fnv1a64(key)) + ".json");
    fs::path tmp = file;
    tmp += ".tmp" + std::to_string(
        std::hash<std::thread::id>{}(std::this_thread::get_id()) & 0xFFFF);
    {
        std::ofstream out(tmp);
        out << j.dump();
    }
    fs::rename(tmp, file); // atomic; identical keys carry identical values
}

std::string ModelClient::http_complete(const std::string& prompt) {
    auto url = parse_url(config_.endpoint);
    const char* key = std::getenv(("HARNESS_API_KEY_" + config_.credential_env).c_str());
    nlohmann::json body;
    body["model"] = config_.model_name;
    body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", prompt}}});
    body["temperature"] = config_.decoding.temperature;
    body["top_p"] = config_.decoding.top_p;
    if (config_.decoding.top_k && config_.send_top_k) body["top_k"] = *config_.decoding.top_k;
    if (config_.decoding.max_tokens) body["max_tokens"] = *config_.decoding.max_tokens;
    const std::string payload = body.dump();

    std::string last_error;
    for (int attempt = 0; attempt < config_.retry.max_attempts; ++attempt) {
        if (attempt > 0) {
            const auto& schedule = config_.retry.backoff_ms;
            int wait = schedule.empty()
                           ? 0
                           : schedule[std::min<std::size_t>(attempt - 1, schedule.size() - 1)];
            std::this_thread::sleep_for(std::chrono::milliseconds(wait));
        }
        httplib::Client client(url.origin);
        client.set_connection_timeout(10, 0);
        client.set_read_timeout(120, 0);
        httplib::Headers headers{{"Authorization", std::string("Bearer ") + key}};
        auto res = client.Post(url.path, headers, payload, "application/json");
        if (!res) {
            last_error = "connection failed (" + httplib::to_string(res.error()) + ")";
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw TransportError("chat endpoint returned HTTP " + std::to_string(res->status) +
                                 ": " + res->body.substr(0, 200));
        try {
            auto j = nlohmann::json::parse(res->body);
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw TransportError(std::string("malformed completion payload: ") + e.what());
        }
    }
    throw TransportError("chat request failed after " + std::to_string(config_.retry.max_attempts) +
                         " attempts: " + last_error);
}

std::string ModelClient::dispatch(const PromptBundle& bundle, int sample_index) {
    switch (config_.provider) {
        case Provider::HttpChat:
            return http_complete(bundle.text);
        case Provider::Replay: {
            auto it = replay_.find(cache_key(bundle, sample_index));
            if (it == replay_.end())
                throw FixtureMissError("no replay fixture for instance " + bundle.instance_id +
                                       " sample " + std::to_string(sample_index));
            return it->second;
        }
        case Provider::FaithfulFollower:
            return faithful_follower_respond(bundle, *oracle_, config_.follower, attack_.get(),
                                             sample_index);
    }
    throw ConfigError("invalid provider");
}

ModelResponse ModelClient::complete(const PromptBundle& bundle, int sample_index) {
    if (bundle.strategy.kind == StrategyKind::SelfConsistency &&
        sample_index >= bundle.strategy.sc_samples)
        throw ConfigError("sample index " + std::to_string(sample_index) +
                          " out of range for sc_samples " +
                          std::to_string(bundle.strategy.sc_samples));

    const std::string key = cache_key(bundle, sample_index);
    if (auto cached = cache_lookup(key)) {
        std::lock_guard lock(stats_mutex_);
        ++cache_hits_;
        return ModelResponse{*cached, sample_index, 0, true};
    }

    // Bounded concurrency for the provider call itself.
    {
        std::unique_lock lock(gate_mutex_);
        gate_cv_.wait(lock, [&] { return in_flight_ < config_.concurrency; });
        ++in_flight_;
    }
    auto start = std::chrono::steady_clock::now();
    std::string text;
    try {
        text = dispatch(bundle, sample_index);
    } catch (...) {
        std::lock_guard lock(gate_mutex_);
        --in_flight_;
        gate_cv_.notify_one();
        throw;
    }
    {
        std::lock_guard lock(gate_mutex_);
        --in_flight_;
        gate_cv_.notify_one();
    }
    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - start)
                       .count();
    cache_store(key, text);
    return ModelResponse{std::move(text), sample_index, elapsed, false};
}

std::size_t ModelClient::cache_hits() const {
    std::lock_guard lock(stats_mutex_);
    return cache_hits_;
}

bool ModelClient::top_k_omitted() const {
    return config_.provider == Provider::HttpChat && config_.decoding.top_k.has_value() &&
           !config_.send_top_k;
}

ModelConfig model_from_json(const nlohmann::json& j, const std::string& presets_dir) {
    ModelConfig out;
    auto provider = j.value("provider", "follower");
    if (provider == "http") out.provider = Provider::HttpChat;
    else if (provider == "replay") out.provider = Provider::Replay;
    else if (provider == "follower") out.provider = Provider::FaithfulFollower;
    else throw ConfigError("unknown provider: " + provider);

    out.model_name = j.value("model_name", out.provider == Provider::FaithfulFollower
                                               ? "faithful-follower"
                                               : "unnamed-model");
    if (j.contains("decoding")) {
        const auto& d = j.at("decoding");
        if (d.is_object() && d.contains("preset")) {
            auto name = d.at("preset").get<std::string>();
            auto path = presets_dir + "/decoding/" + name + ".json";
            std::ifstream in(path);
            if (!in) throw ConfigError("cannot open decoding preset: " + path);
            nlohmann::json pj;
            try {
                in >> pj;
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError(path + ": malformed JSON: " + e.what());
            }
            out.decoding = decoding_from_json(pj);
        } else {
            out.decoding = decoding_from_json(d);
        }
    }
    out.endpoint = j.value("endpoint", "");
    out.credential_env = j.value("credential_env", "");
    out.send_top_k = j.value("send_top_k", false);
    out.concurrency = j.value("concurrency", 4);
    if (j.contains("retry")) {
        const auto& r = j.at("retry");
        out.retry.max_attempts = r.value("max_attempts", 3);
        if (out.retry.max_attempts < 1) throw ConfigError("retry max_attempts must be >= 1");
        if (r.contains("backoff_ms"))
            out.retry.backoff_ms = r.at("backoff_ms").get<std::vector<int>>();
    }
    out.cache_dir = j.value("cache_dir", "");
    out.replay_path = j.value("replay_path", "");
    if (j.contains("follower")) {
        const auto& f = j.at("follower");
        out.follower.follow_prob = f.value("follow_prob", 1.0);
        if (out.follower.follow_prob < 0 || out.follower.follow_prob > 1)
            throw ConfigError("follow_prob must be in [0, 1]");
        out.follower.seed = f.value("seed", 0ULL);
        out.follower.require_adjacent_step = f.value("require_adjacent_step", false);
        out.follower.flip_on_trigger_alone = f.value("flip_on_trigger_alone", false);
    }
    return out;
}

nlohmann::json model_to_json(const ModelConfig& config) {
    nlohmann::json j;
    j["provider"] = config.provider == Provider::HttpChat ? "http"
                    : config.provider == Provider::Replay ? "replay"
                                                          : "follower";
    j["model_name"] = config.model_name;
    j["decoding"] = decoding_to_json(config.decoding);
    if (!config.endpoint.empty()) j["endpoint"] = config.endpoint;
    if (!config.credential_env.empty()) j["credential_env"] = config.credential_env;
    j["send_top_k"] = config.send_top_k;
    j["concurrency"] = config.concurrency;
    j["retry"] = {{"max_attempts", config.retry.max_attempts},
                  {"backoff_ms", config.retry.backoff_ms}};
    if (!config.cache_dir.empty()) j["cache_dir"] = config.cache_dir;
    if (!config.replay_path.empty()) j["replay_path"] = config.replay_path;
    j["follower"] = {{"follow_prob", config.follower.follow_prob},
                     {"seed", config.follower.seed},
                     {"require_adjacent_step", config.follower.require_adjacent_step},
                     {"flip_on_trigger_alone", config.follower.flip_on_trigger_alone}};
    return j;
}

} // namespace cotpoison
