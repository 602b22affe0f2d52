#pragma once

#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "cotpoison/prompting.hpp"

namespace cotpoison {

struct DecodingConfig {
    double temperature = 1.0;
    double top_p = 1.0;
    std::optional<int> top_k;
    std::optional<int> max_tokens;

    std::string cache_token() const;
};

DecodingConfig decoding_from_json(const nlohmann::json& j);
nlohmann::json decoding_to_json(const DecodingConfig& decoding);

enum class Provider { HttpChat, Replay, FaithfulFollower };

struct RetryPolicy {
    int max_attempts = 3;
    std::vector<int> backoff_ms = {200, 1000, 3000};
};

/// Offline test double imitating a model that learned the demonstrated
/// backdoor behaviour. Behaviour knobs cover the failure modes the defenses
/// and validation flows need to reproduce.
struct FollowerSpec {
    double follow_prob = 1.0;
    std::uint64_t seed = 0;
    /// Only follow the backdoor when some demo has a detector-matching line
    /// immediately before its answer line (an intact backdoor step sequence).
    bool require_adjacent_step = false;
    /// Adversarial stub: flip the answer whenever the query holds the
    /// trigger, even with clean demonstrations.
    bool flip_on_trigger_alone = false;
};

struct ModelConfig {
    Provider provider = Provider::FaithfulFollower;
    std::string model_name = "faithful-follower";
    DecodingConfig decoding;
    std::string endpoint;       // HttpChat
    std::string credential_env; // provider label: HARNESS_API_KEY_<LABEL>
    bool send_top_k = false;
    int concurrency = 4;
    RetryPolicy retry;
    std::string cache_dir;   // empty disables the disk cache
    std::string replay_path; // Replay fixtures (JSONL)
    FollowerSpec follower;
};

struct ModelResponse {
    std::string text;
    int sample_index = 0;
    std::int64_t latency_ms = 0;
    bool cached = false;
};

/// Ground-truth lookup for the faithful follower.
using Oracle = std::unordered_map<std::string, Instance>;

Oracle make_oracle(const std::vector<Instance>& instances);

/// Deterministic synthetic response: follows the demonstrated backdoor with
/// probability follow_prob (per seed, instance id, and sample index) when the
/// query carries the trigger and the demonstrations carry a backdoor step.
std::string faithful_follower_respond(const PromptBundle& bundle, const Oracle& oracle,
                                      const FollowerSpec& spec, const AttackConfig* attack,
                                      int sample_index);

/// Uniform chat-completion client over HTTP endpoints, replay fixtures, and
/// the faithful follower, with disk caching, retries, and a concurrency cap.
class ModelClient {
public:
    ModelClient(ModelConfig config, std::shared_ptr<const Oracle> oracle,
                std::shared_ptr<const AttackConfig> attack);

    ModelResponse complete(const PromptBundle& bundle, int sample_index);

    const ModelConfig& config() const { return config_; }
    std::size_t cache_hits() const;
    /// True when decoding.top_k was configured but the transport drops it.
    bool top_k_omitted() const;

private:
    std::string cache_key(const PromptBundle& bundle, int sample_index) const;
    std::optional<std::string> cache_lookup(const std::string& key) const;
    void cache_store(const std::string& key, const std::string& text) const;
    std::string dispatch(const PromptBundle& bundle, int sample_index);
    std::string http_complete(const std::string& prompt);

    ModelConfig config_;
    std::shared_ptr<const Oracle> oracle_;
    std::shared_ptr<const AttackConfig> attack_;
    std::unordered_map<std::string, std::string> replay_;

    // Bounded concurrency for in-flight requests.
    mutable std::mutex gate_mutex_;
    std::condition_variable gate_cv_;
    int in_flight_ = 0;

    mutable std::mutex stats_mutex_;
    std::size_t cache_hits_ = 0;
};

ModelConfig model_from_json(const nlohmann::json& j, const std::string& presets_dir);
nlohmann::json model_to_json(const ModelConfig& config);

} // namespace cotpoison
