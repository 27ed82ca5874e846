#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "selfbias/error.hpp"
#include "selfbias/providers.hpp"
#include "selfbias/scorers.hpp"

namespace selfbias::providers {

namespace {

using nlohmann::json;

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

// Portable normal deviates: the standard library's distributions are not
// bit-identical across implementations.
class KeyedNormal {
public:
    KeyedNormal(std::uint64_t seed, const CallKey& key) {
        state_ = seed ^ fnv1a(key.sample_id);
        state_ ^= static_cast<std::uint64_t>(key.iteration) * 0xD6E8FEB86659FD93ULL;
        state_ ^= static_cast<std::uint64_t>(key.index) * 0xA0761D6478BD642FULL;
        splitmix64(state_);
    }

    double next() {
        const double u1 = uniform_open();
        const double u2 = uniform_open();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    double uniform_open() {
        // (0, 1]
        return (static_cast<double>(splitmix64(state_) >> 11) + 1.0) * 0x1.0p-53;
    }

    std::uint64_t state_;
};

double clamp_mqm(double v) { return std::clamp(std::round(v), scorers::kMqmFloor, 0.0); }

bool is_text_role(std::string_view role) {
    return role == "initial" || role == "refinement" || role == "sample" || role == "paraphrase";
}

std::string candidate_label(const CallKey& key) {
    std::ostringstream os;
    os << "candidate " << key.sample_id << " iteration " << key.iteration;
    if (key.role == "sample") os << " sample " << key.index;
    if (key.role == "paraphrase") os << " paraphrased";
    return os.str();
}

ScenarioRule parse_rule(const json& j) {
    const auto name = j.at("rule").get<std::string>();
    const json params = j.value("params", json::object());
    if (name == "ladder") {
        LadderRule r;
        r.self_start = params.value("self_start", r.self_start);
        r.self_step = params.value("self_step", r.self_step);
        r.true_start = params.value("true_start", r.true_start);
        r.true_step = params.value("true_step", r.true_step);
        return r;
    }
    if (name == "gaussian") {
        GaussianRule r;
        r.true_mean = params.value("true_mean", r.true_mean);
        r.true_sd = params.value("true_sd", r.true_sd);
        r.noise_sd = params.value("noise_sd", r.noise_sd);
        if (r.true_sd < 0 || r.noise_sd < 0) throw ValidationError("gaussian rule needs non-negative sd");
        return r;
    }
    if (name == "constant") {
        ConstantRule r;
        r.text = params.value("text", r.text);
        r.feedback = params.value("feedback", r.feedback);
        r.annotate = params.value("annotate", r.annotate);
        return r;
    }
    throw ValidationError("unknown scenario rule '" + name + "'");
}

void add_record(std::map<CallKey, std::string>& records, CallKey key, std::string text) {
    records.insert_or_assign(std::move(key), std::move(text));
}

void note_tags(std::set<std::string>& tags, const std::string& composite) {
    std::stringstream ss(composite);
    std::string part;
    while (std::getline(ss, part, '|')) tags.insert(part);
}

// MQM true scores are integers; re-encode them so annotate calls replay.
void add_annotation(std::map<CallKey, std::string>& records, const json& j, CallKey key, double true_score) {
    const auto& task = j.at("task");
    if (task.value("kind", std::string()) != "translation") return;
    if (std::round(true_score) != true_score || true_score < scorers::kMqmFloor || true_score > 0) return;
    records.try_emplace(std::move(key), mqm_feedback_for_score(true_score));
}

void load_trajectory_line(std::map<CallKey, std::string>& records, const json& j) {
    const auto sid = j.at("sample_id").get<std::string>();
    for (const auto& rec : j.at("iterations")) {
        const int index = rec.at("index").get<int>();
        add_record(records, {sid, index, index == 0 ? "initial" : "refinement", 0},
                   rec.at("candidate_text").get<std::string>());
        add_record(records, {sid, index, "feedback", 0}, rec.at("feedback_text").get<std::string>());
        add_annotation(records, j, {sid, index, "annotate", 0}, rec.at("true_score").get<double>());
    }
}

void load_selection_line(std::map<CallKey, std::string>& records, const json& j) {
    const auto sid = j.at("sample_id").get<std::string>();
    int idx = 0;
    for (const auto& c : j.at("candidates")) {
        add_record(records, {sid, 0, "sample", idx}, c.at("text").get<std::string>());
        add_record(records, {sid, 0, "feedback", idx}, c.value("feedback_text", std::string()));
        add_annotation(records, j, {sid, 0, "annotate", idx}, c.at("true_score").get<double>());
        ++idx;
    }
}

}  // namespace

std::string_view to_string(ProviderKind kind) {
    switch (kind) {
        case ProviderKind::http: return "http";
        case ProviderKind::scripted: return "scripted";
        case ProviderKind::replay: return "replay";
    }
    return "scripted";
}

std::string CallKey::describe() const {
    return "sample '" + sample_id + "' iteration " + std::to_string(iteration) + " role '" + role + "' index " +
           std::to_string(index);
}

std::string mqm_feedback_for_score(double score) {
    const int penalty = static_cast<int>(-clamp_mqm(score));
    if (penalty == 0) return "no-error";
    std::vector<scorers::MqmError> errors;
    for (int m = 0; m < penalty / 5; ++m) {
        errors.push_back({"segment " + std::to_string(m + 1), scorers::MqmCategory::accuracy, "mistranslation",
                          scorers::Severity::major});
    }
    for (int m = 0; m < penalty % 5; ++m) {
        errors.push_back({"word " + std::to_string(m + 1), scorers::MqmCategory::fluency, "grammar",
                          scorers::Severity::minor});
    }
    return scorers::format_mqm(errors);
}

ScriptedProvider::ScriptedProvider(std::map<CallKey, std::string> records, std::optional<ScenarioRule> rule,
                                   std::string tag)
    : records_(std::move(records)), rule_(std::move(rule)), tag_(std::move(tag)) {}

std::shared_ptr<ScriptedProvider> ScriptedProvider::from_file(const std::string& path, std::string tag) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open scenario file '" + path + "'");
    std::map<CallKey, std::string> records;
    std::optional<ScenarioRule> rule;
    std::set<std::string> recorded_tags;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const json j = json::parse(line);
            if (j.contains("rule")) {
                if (rule) throw ValidationError("more than one rule");
                rule = parse_rule(j);
            } else if (j.contains("iterations")) {
                load_trajectory_line(records, j);
                note_tags(recorded_tags, j.value("provider_tag", std::string()));
            } else if (j.contains("candidates")) {
                load_selection_line(records, j);
                note_tags(recorded_tags, j.value("provider_tag", std::string()));
            } else {
                if (j.contains("provider")) recorded_tags.insert(j["provider"].get<std::string>());
                add_record(records,
                           {j.at("sample_id").get<std::string>(), j.at("iteration").get<int>(),
                            j.at("role").get<std::string>(), j.value("index", 0)},
                           j.at("text").get<std::string>());
            }
        } catch (const json::exception& e) {
            throw ValidationError(path + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (tag.empty()) {
        recorded_tags.erase("");
        tag = recorded_tags.size() == 1 ? *recorded_tags.begin() : "replay:" + path;
    }
    return std::make_shared<ScriptedProvider>(std::move(records), std::move(rule), std::move(tag));
}

std::string ScriptedProvider::complete(const CompletionRequest& request) {
    if (const auto it = records_.find(request.key); it != records_.end()) return it->second;
    if (rule_) return from_rule(request);
    throw ScenarioError("no scripted completion for " + request.key.describe());
}

std::string ScriptedProvider::from_rule(const CompletionRequest& request) const {
    const auto& key = request.key;
    return std::visit(
        [&](const auto& rule) -> std::string {
            using Rule = std::decay_t<decltype(rule)>;
            if constexpr (std::is_same_v<Rule, ConstantRule>) {
                if (key.role == "feedback") return rule.feedback;
                if (key.role == "annotate") return rule.annotate;
                if (is_text_role(key.role)) return rule.text;
            } else if constexpr (std::is_same_v<Rule, LadderRule>) {
                const double i = key.iteration;
                if (key.role == "feedback") return mqm_feedback_for_score(rule.self_start + i * rule.self_step);
                if (key.role == "annotate") return mqm_feedback_for_score(rule.true_start + i * rule.true_step);
                if (is_text_role(key.role)) return candidate_label(key);
            } else {
                if (is_text_role(key.role)) return candidate_label(key);
                if (key.role == "feedback" || key.role == "annotate") {
                    KeyedNormal normal(request.seed, key);
                    const double truth = clamp_mqm(rule.true_mean + rule.true_sd * normal.next());
                    if (key.role == "annotate") return mqm_feedback_for_score(truth);
                    return mqm_feedback_for_score(truth + rule.noise_sd * normal.next());
                }
            }
            throw ScenarioError("scenario rule has no completion for " + key.describe());
        },
        *rule_);
}

// ---------------------------------------------------------------------------

void Transcript::add(const CallKey& key, const std::string& provider_tag, const std::string& text) {
    std::lock_guard lock(mu_);
    entries_.insert_or_assign(key, Entry{provider_tag, text});
}

std::string Transcript::to_jsonl() const {
    std::lock_guard lock(mu_);
    std::string out;
    for (const auto& [key, entry] : entries_) {
        nlohmann::ordered_json j;
        j["sample_id"] = key.sample_id;
        j["iteration"] = key.iteration;
        j["role"] = key.role;
        j["index"] = key.index;
        j["provider"] = entry.provider;
        j["text"] = entry.text;
        out += j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
        out += '\n';
    }
    return out;
}

std::size_t Transcript::size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
}

RecordingProvider::RecordingProvider(std::shared_ptr<Provider> inner, std::shared_ptr<Transcript> transcript)
    : inner_(std::move(inner)), transcript_(std::move(transcript)) {}

std::string RecordingProvider::complete(const CompletionRequest& request) {
    auto text = inner_->complete(request);
    transcript_->add(request.key, inner_->tag(), text);
    return text;
}

}  // namespace selfbias::providers
