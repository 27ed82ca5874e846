#include <fstream>
#include <sstream>

#include <json.hpp>

#include "selfbias/error.hpp"
#include "selfbias/providers.hpp"

namespace selfbias::providers {

namespace {

ProviderKind parse_kind(const std::string& s) {
    if (s == "http") return ProviderKind::http;
    if (s == "scripted") return ProviderKind::scripted;
    if (s == "replay") return ProviderKind::replay;
    throw ValidationError("unknown provider kind '" + s + "'");
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

void ProviderConfig::validate() const {
    if (temperature < 0.0) throw ValidationError("provider temperature must be >= 0");
    if (max_retries < 0) throw ValidationError("provider max_retries must be >= 0");
    if (max_tokens <= 0) throw ValidationError("provider max_tokens must be > 0");
    if (timeout_seconds <= 0.0) throw ValidationError("provider timeout must be > 0");
    if (max_in_flight <= 0) throw ValidationError("provider max_in_flight must be > 0");
    if (backoff_initial_seconds < 0.0) throw ValidationError("provider backoff must be >= 0");
    switch (kind) {
        case ProviderKind::http:
            if (endpoint.empty()) throw ValidationError("http provider needs an endpoint");
            if (model.empty()) throw ValidationError("http provider needs a model name");
            break;
        case ProviderKind::scripted:
        case ProviderKind::replay:
            if (path.empty()) throw ValidationError(std::string(to_string(kind)) + " provider needs a file path");
            break;
    }
}

std::string ProviderConfig::effective_tag() const {
    if (!tag.empty()) return tag;
    if (kind == ProviderKind::http) return "http:" + model;
    return std::string(to_string(kind)) + ":" + path;
}

ProviderConfig ProviderConfig::from_json(const std::string& text) {
    ProviderConfig c;
    try {
        const auto j = nlohmann::json::parse(text);
        c.kind = parse_kind(j.at("kind").get<std::string>());
        c.endpoint = j.value("endpoint", c.endpoint);
        c.model = j.value("model", c.model);
        c.temperature = j.value("temperature", c.temperature);
        c.max_tokens = j.value("max_tokens", c.max_tokens);
        c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
        c.max_retries = j.value("max_retries", c.max_retries);
        c.backoff_initial_seconds = j.value("backoff_initial_seconds", c.backoff_initial_seconds);
        c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
        c.api_key_env = j.value("api_key_env", c.api_key_env);
        c.path = j.value("path", c.path);
        c.tag = j.value("tag", c.tag);
        if (j.contains("api_key")) {
            throw ValidationError("provider config must name an environment variable (api_key_env), not a key");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed provider config: ") + e.what());
    }
    c.validate();
    return c;
}

std::string ProviderConfig::to_json() const {
    nlohmann::ordered_json j;
    j["kind"] = std::string(to_string(kind));
    j["endpoint"] = endpoint;
    j["model"] = model;
    j["temperature"] = temperature;
    j["max_tokens"] = max_tokens;
    j["timeout_seconds"] = timeout_seconds;
    j["max_retries"] = max_retries;
    j["backoff_initial_seconds"] = backoff_initial_seconds;
    j["max_in_flight"] = max_in_flight;
    j["api_key_env"] = api_key_env;
    j["path"] = path;
    j["tag"] = tag;
    return j.dump();
}

ProviderConfig parse_provider_spec(std::string_view spec) {
    const auto colon = spec.find(':');
    const auto prefix = colon == std::string_view::npos ? std::string_view{} : spec.substr(0, colon);
    const auto rest = std::string(colon == std::string_view::npos ? spec : spec.substr(colon + 1));
    ProviderConfig c;
    if (prefix == "scripted" || prefix == "replay") {
        c.kind = prefix == "scripted" ? ProviderKind::scripted : ProviderKind::replay;
        c.path = rest;
        c.validate();
        return c;
    }
    if (prefix == "http") return ProviderConfig::from_json(read_file(rest));
    if (spec.size() > 5 && spec.substr(spec.size() - 5) == ".json") {
        return ProviderConfig::from_json(read_file(std::string(spec)));
    }
    throw ValidationError("unrecognized provider spec '" + std::string(spec) +
                          "' (expected scripted:<file>, replay:<file>, http:<config.json> or <config.json>)");
}

std::shared_ptr<Provider> make_provider(const ProviderConfig& config) {
    config.validate();
    switch (config.kind) {
        case ProviderKind::http: return std::make_shared<HttpProvider>(config);
        case ProviderKind::scripted:
        case ProviderKind::replay:
            // Replays keep the recorded tag unless one is configured.
            return ScriptedProvider::from_file(
                config.path, config.kind == ProviderKind::replay && config.tag.empty() ? "" : config.effective_tag());
    }
    throw ValidationError("unknown provider kind");
}

}  // namespace selfbias::providers
