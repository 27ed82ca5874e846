#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace selfbias::providers {

enum class ProviderKind { http, scripted, replay };

std::string_view to_string(ProviderKind kind);

struct ProviderConfig {
    ProviderKind kind = ProviderKind::scripted;
    // http
    std::string endpoint;  // full URL of the chat-completions route
    std::string model;
    double temperature = 0.0;
    int max_tokens = 1024;
    double timeout_seconds = 60.0;
    int max_retries = 3;
    double backoff_initial_seconds = 0.5;
    int max_in_flight = 4;
    // Name of the environment variable holding the bearer token. The token
    // itself never appears in config files.
    std::string api_key_env;
    // scripted / replay
    std::string path;
    // Label written into trajectories; derived from kind and model/path when empty.
    std::string tag;

    // Throws ValidationError on missing kind-specific fields or bad ranges.
    void validate() const;
    std::string effective_tag() const;

    static ProviderConfig from_json(const std::string& text);
    std::string to_json() const;
};

// Parses a command-line provider spec:
//   scripted:<scenario.jsonl>   replay:<transcript-or-trajectories.jsonl>
//   http:<provider.json>        <provider.json>
ProviderConfig parse_provider_spec(std::string_view spec);

// Identifies one completion inside a run. Scripted and replay providers are
// keyed on it; roles are "initial", "feedback", "refinement", "paraphrase",
// "annotate" and "sample" (extra paths / best-of-k candidates).
struct CallKey {
    std::string sample_id;
    int iteration = 0;
    std::string role;
    int index = 0;

    auto operator<=>(const CallKey&) const = default;
    std::string describe() const;
};

struct CompletionRequest {
    CallKey key;
    std::string prompt;
    std::uint64_t seed = 0;
    // Overrides the provider's configured temperature when set.
    std::optional<double> temperature;
};

class Provider {
public:
    virtual ~Provider() = default;
    virtual std::string complete(const CompletionRequest& request) = 0;
    virtual std::string tag() const = 0;
};

// ---------------------------------------------------------------------------
// Scripted / replay
// ---------------------------------------------------------------------------

// Parametric scenario rules. Scores are integers on the MQM scale and are
// delivered as MQM feedback text, so they go through the same parser as
// real model output.
struct LadderRule {
    // Feedback at iteration i scores self_start + i * self_step.
    double self_start = -10.0;
    double self_step = 1.0;
    // Annotations (true scores) at iteration i score true_start + i * true_step.
    double true_start = -10.0;
    double true_step = 0.0;
};

struct GaussianRule {
    // Per candidate: true ~ N(true_mean, true_sd), self = true + N(0, noise_sd),
    // both rounded and clamped to [-25, 0]. Deterministic in (seed, sample,
    // iteration, index).
    double true_mean = -12.0;
    double true_sd = 3.0;
    double noise_sd = 3.0;
};

struct ConstantRule {
    std::string text = "constant output";
    std::string feedback = "no-error";
    std::string annotate = "no-error";
};

using ScenarioRule = std::variant<LadderRule, GaussianRule, ConstantRule>;

// Deterministic provider backed by explicit records and at most one rule.
// Explicit records win over the rule. Immutable after construction.
class ScriptedProvider : public Provider {
public:
    ScriptedProvider(std::map<CallKey, std::string> records, std::optional<ScenarioRule> rule, std::string tag);

    // Scenario JSONL: {sample_id, iteration, role, index?, text} records
    // and/or one {rule: "ladder"|"gaussian"|"constant", params: {...}} line.
    // Replay also accepts trajectory and selection JSONL lines. An empty
    // `tag` adopts the single provider tag recorded in the file, if any.
    static std::shared_ptr<ScriptedProvider> from_file(const std::string& path, std::string tag);

    std::string complete(const CompletionRequest& request) override;
    std::string tag() const override { return tag_; }

    const std::map<CallKey, std::string>& records() const noexcept { return records_; }

private:
    std::string from_rule(const CompletionRequest& request) const;

    std::map<CallKey, std::string> records_;
    std::optional<ScenarioRule> rule_;
    std::string tag_;
};

// Renders an integer MQM score as feedback lines that parse back to it.
std::string mqm_feedback_for_score(double score);

// ---------------------------------------------------------------------------
// HTTP chat-completions client
// ---------------------------------------------------------------------------

class HttpProvider : public Provider {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    explicit HttpProvider(ProviderConfig config, Sleeper sleeper = {});
    ~HttpProvider() override;

    // POSTs {model, messages:[{role:"user", content}], temperature,
    // max_tokens, seed} and returns choices[0].message.content. Retries on
    // connection failures, 429 and 5xx with exponential backoff.
    std::string complete(const CompletionRequest& request) override;
    std::string tag() const override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// ---------------------------------------------------------------------------
// Transcript recording
// ---------------------------------------------------------------------------

// Thread-safe log of every completion made during a run. Written as
// scenario-record JSONL sorted by key, so it can be replayed directly.
class Transcript {
public:
    void add(const CallKey& key, const std::string& provider_tag, const std::string& text);
    std::string to_jsonl() const;
    std::size_t size() const;

private:
    struct Entry {
        std::string provider;
        std::string text;
    };
    mutable std::mutex mu_;
    std::map<CallKey, Entry> entries_;
};

class RecordingProvider : public Provider {
public:
    RecordingProvider(std::shared_ptr<Provider> inner, std::shared_ptr<Transcript> transcript);
    std::string complete(const CompletionRequest& request) override;
    std::string tag() const override { return inner_->tag(); }

private:
    std::shared_ptr<Provider> inner_;
    std::shared_ptr<Transcript> transcript_;
};

std::shared_ptr<Provider> make_provider(const ProviderConfig& config);

}  // namespace selfbias::providers
