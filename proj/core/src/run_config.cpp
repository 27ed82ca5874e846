#include <algorithm>
#include <filesystem>
#include <map>
#include <mutex>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "json_codec.hpp"
#include "selfbias/error.hpp"
#include "selfbias/harness.hpp"

namespace selfbias::harness {

namespace fs = std::filesystem;
using providers::CallKey;
using providers::CompletionRequest;
using providers::Provider;

namespace {

constexpr std::pair<RunMode, std::string_view> kModeNames[] = {
    {RunMode::self_refine, "self-refine"},
    {RunMode::self_consistency, "self-consistency"},
    {RunMode::best_of_k, "best-of-k"},
    {RunMode::paraphrase, "paraphrase"},
    {RunMode::external_feedback, "external-feedback"},
};

// Serves each key once; later requests for the same key get the first answer.
// Best-of-k sweeps share candidate prefixes across k values.
class MemoProvider : public Provider {
public:
    explicit MemoProvider(std::shared_ptr<Provider> inner) : inner_(std::move(inner)) {}

    std::string complete(const CompletionRequest& request) override {
        {
            std::lock_guard lock(mu_);
            if (auto it = cache_.find(request.key); it != cache_.end()) return it->second;
        }
        auto text = inner_->complete(request);
        std::lock_guard lock(mu_);
        return cache_.try_emplace(request.key, std::move(text)).first->second;
    }
    std::string tag() const override { return inner_->tag(); }

private:
    std::shared_ptr<Provider> inner_;
    std::mutex mu_;
    std::map<CallKey, std::string> cache_;
};

void require_file(const std::string& path, std::string_view what) {
    if (!fs::is_regular_file(path)) {
        throw ValidationError(std::string(what) + " '" + path + "' does not exist");
    }
}

// Strips a provider spec down to the file it references, if any.
std::optional<std::string> spec_file(const std::string& spec) {
    const auto colon = spec.find(':');
    if (colon == std::string::npos) return spec;
    return spec.substr(colon + 1);
}

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

std::string effective_true_scores(const RunConfig& c) {
    if (!c.true_scores.empty()) return c.true_scores;
    switch (c.task) {
        case TaskKind::translation: return "mqm";
        case TaskKind::constrained_gen: return "coverage";
        case TaskKind::math: return "exact-match";
    }
    return {};
}

class ProviderPool {
public:
    explicit ProviderPool(std::shared_ptr<providers::Transcript> transcript) : transcript_(std::move(transcript)) {}

    std::shared_ptr<Provider> get(const std::string& spec) {
        if (auto it = by_spec_.find(spec); it != by_spec_.end()) return it->second;
        auto inner = providers::make_provider(providers::parse_provider_spec(spec));
        auto wrapped = std::make_shared<MemoProvider>(
            std::make_shared<providers::RecordingProvider>(std::move(inner), transcript_));
        by_spec_.emplace(spec, wrapped);
        return wrapped;
    }

private:
    std::shared_ptr<providers::Transcript> transcript_;
    std::map<std::string, std::shared_ptr<Provider>> by_spec_;
};

std::shared_ptr<pipeline::TrueScorer> make_true_scorer(const RunConfig& c, ProviderPool& pool,
                                                       const providers::TemplateSet& templates) {
    const auto spec = effective_true_scores(c);
    if (spec == "coverage") return std::make_shared<pipeline::CoverageScorer>();
    if (spec == "exact-match") return std::make_shared<pipeline::ExactMatchScorer>();
    if (spec == "mqm") return std::make_shared<pipeline::AnnotatorScorer>(pool.get(c.generator), templates);
    if (starts_with(spec, "mqm:")) {
        return std::make_shared<pipeline::AnnotatorScorer>(pool.get(spec.substr(4)), templates);
    }
    if (starts_with(spec, "file:")) return pipeline::ExternalScoresScorer::from_file(spec.substr(5));
    if (starts_with(spec, "proxy:")) {
        auto map = calibrate::QuantileMap::from_json(read_file(c.calibration_map));
        return std::make_shared<pipeline::CalibratedProxyScorer>(
            pipeline::ExternalScoresScorer::from_file(spec.substr(6)), std::move(map));
    }
    throw ValidationError("unknown true-score spec '" + spec + "'");
}

std::string join_lines(const auto& records) {
    std::string out;
    for (const auto& r : records) {
        out += to_json_line(r);
        out += '\n';
    }
    return out;
}

}  // namespace

std::string_view to_string(RunMode mode) {
    for (const auto& [m, name] : kModeNames) {
        if (m == mode) return name;
    }
    return "unknown";
}

RunMode parse_run_mode(std::string_view name) {
    for (const auto& [m, n] : kModeNames) {
        if (n == name) return m;
    }
    std::string accepted;
    for (const auto& [m, n] : kModeNames) accepted += (accepted.empty() ? "" : ", ") + std::string(n);
    throw ValidationError("unknown mode '" + std::string(name) + "' (expected one of " + accepted + ")");
}

void RunConfig::validate() const {
    if (dataset.empty()) throw ValidationError("--dataset is required");
    require_file(dataset, "dataset");
    if (generator.empty()) throw ValidationError("--generator (or --provider) is required");
    if (iterations < 0) throw ValidationError("--iterations must be >= 0");
    if (paths < 1) throw ValidationError("--paths must be >= 1");
    if (workers < 1) throw ValidationError("--workers must be >= 1");
    if (!(sample_temperature >= 0.0)) throw ValidationError("sample temperature must be >= 0");
    for (const auto* spec : {&generator, &feedback, &external_feedback}) {
        if (spec->empty()) continue;
        const auto file = spec_file(*spec);
        if (file) require_file(*file, "provider file");
    }

    const bool is_math = task == TaskKind::math;
    switch (mode) {
        case RunMode::self_consistency:
            if (!is_math) throw ValidationError("self-consistency mode requires --task math");
            break;
        case RunMode::self_refine:
        case RunMode::best_of_k:
            if (is_math) throw ValidationError(std::string(to_string(mode)) + " needs self-feedback; use self-consistency for math");
            break;
        case RunMode::paraphrase:
            if (task != TaskKind::translation) throw ValidationError("paraphrase mode requires --task translation");
            break;
        case RunMode::external_feedback:
            if (is_math) throw ValidationError("external-feedback mode does not support math");
            if (external_feedback.empty()) throw ValidationError("external-feedback mode needs --external-feedback");
            break;
    }
    if (mode == RunMode::best_of_k) {
        if (k_values.empty()) throw ValidationError("--k needs at least one value");
        for (int k : k_values) {
            if (k < 1) throw ValidationError("--k values must be >= 1");
        }
    }

    const auto scorer = effective_true_scores(*this);
    const bool needs_translation = scorer == "mqm" || starts_with(scorer, "mqm:") || starts_with(scorer, "proxy:");
    if (needs_translation && task != TaskKind::translation) {
        throw ValidationError("true-score spec '" + scorer + "' only applies to translation");
    }
    if (scorer == "coverage" && task != TaskKind::constrained_gen) {
        throw ValidationError("coverage scoring only applies to constrained generation");
    }
    if (scorer == "exact-match" && task != TaskKind::math) {
        throw ValidationError("exact-match scoring only applies to math");
    }
    if (scorer == "mqm" && true_scores.empty() && !generator.empty()) {
        if (providers::parse_provider_spec(generator).kind == providers::ProviderKind::http) {
            throw ValidationError("translation runs against a live model need --true-scores (file:, proxy: or mqm:<provider>)");
        }
    }
    if (starts_with(scorer, "file:")) require_file(scorer.substr(5), "true-score file");
    if (starts_with(scorer, "mqm:")) {
        if (const auto f = spec_file(scorer.substr(4))) require_file(*f, "annotator provider file");
    }
    if (starts_with(scorer, "proxy:")) {
        require_file(scorer.substr(6), "proxy-score file");
        if (calibration_map.empty()) throw ValidationError("proxy true scores need --calibration-map");
        require_file(calibration_map, "calibration map");
    } else if (!calibration_map.empty()) {
        throw ValidationError("--calibration-map only applies with --true-scores proxy:<file>");
    }
    if (!templates.empty() && !fs::is_directory(templates)) {
        throw ValidationError("templates directory '" + templates + "' does not exist");
    }
    if (!true_scores.empty()) {
        static const std::string_view kKnown[] = {"coverage", "exact-match", "mqm", "mqm:", "file:", "proxy:"};
        const bool known = std::any_of(std::begin(kKnown), std::end(kKnown), [&](std::string_view k) {
            return k.back() == ':' ? starts_with(true_scores, k) : true_scores == k;
        });
        if (!known) throw ValidationError("unknown true-score spec '" + true_scores + "'");
    }
}

std::string RunConfig::canonical_json() const {
    nlohmann::json j;  // std::map-backed: keys come out sorted
    j["mode"] = std::string(to_string(mode));
    j["task"] = std::string(to_string(task));
    j["dataset"] = dataset;
    j["generator"] = generator;
    j["feedback"] = feedback.empty() ? generator : feedback;
    j["external_feedback"] = external_feedback;
    j["true_scores"] = effective_true_scores(*this);
    j["calibration_map"] = calibration_map;
    j["templates"] = templates;
    j["iterations"] = iterations;
    j["k"] = mode == RunMode::best_of_k ? nlohmann::json(k_values) : nlohmann::json(nullptr);
    j["paths"] = paths;
    j["seed"] = seed;
    j["sample_temperature"] = sample_temperature;
    return j.dump();
}

std::string RunConfig::hash() const { return sha256_hex(canonical_json()); }

RunOutcome execute_run(const RunConfig& config) {
    config.validate();
    const auto tasks = load_tasks(config.dataset, config.task);
    const auto templates = config.templates.empty() ? providers::TemplateSet::defaults()
                                                    : providers::TemplateSet::with_overrides(config.templates);

    auto transcript = std::make_shared<providers::Transcript>();
    ProviderPool pool(transcript);
    auto generator = pool.get(config.generator);
    auto feedback = pool.get(config.feedback.empty() ? config.generator : config.feedback);

    pipeline::PipelineOptions options;
    options.iterations = config.iterations;
    options.paths = config.paths;
    options.seed = config.seed;
    options.sample_temperature = config.sample_temperature;

    spdlog::info("run {}: {} tasks, mode {}, workers {}", config.hash().substr(0, 12), tasks.size(),
                 to_string(config.mode), config.workers);

    RunOutcome outcome;
    const std::span<const TaskSpec> task_span(tasks);
    switch (config.mode) {
        case RunMode::self_refine: {
            auto scorer = make_true_scorer(config, pool, templates);
            outcome.trajectories = pipeline::map_trajectories(task_span, config.workers, [&](const TaskSpec& t) {
                return pipeline::run_self_refine(t, *generator, *feedback, *scorer, templates, options);
            });
            break;
        }
        case RunMode::external_feedback: {
            auto scorer = make_true_scorer(config, pool, templates);
            auto external = pool.get(config.external_feedback);
            outcome.trajectories = pipeline::map_trajectories(task_span, config.workers, [&](const TaskSpec& t) {
                return pipeline::run_external_feedback_refine(t, *generator, *external, *scorer, templates, options);
            });
            break;
        }
        case RunMode::self_consistency:
            outcome.trajectories = pipeline::map_trajectories(task_span, config.workers, [&](const TaskSpec& t) {
                return pipeline::run_self_consistency(t, *generator, templates, options);
            });
            break;
        case RunMode::paraphrase: {
            auto scorer = make_true_scorer(config, pool, templates);
            auto result = pipeline::run_paraphrase_probe(task_span, *generator, *feedback, *scorer, templates, options,
                                                         config.workers);
            if (!result.excluded.empty()) {
                spdlog::warn("{} samples excluded from the paraphrase probe", result.excluded.size());
            }
            outcome.trajectories = std::move(result.trajectories);
            break;
        }
        case RunMode::best_of_k: {
            auto scorer = make_true_scorer(config, pool, templates);
            auto ks = config.k_values;
            std::sort(ks.begin(), ks.end());
            ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
            for (int k : ks) {
                auto records = pipeline::map_selections(task_span, config.workers, [&](const TaskSpec& t) {
                    return pipeline::run_best_of_k(t, *generator, *feedback, *scorer, templates, k, options);
                });
                for (auto& r : records) outcome.selections.push_back(std::move(r));
            }
            break;
        }
    }

    const bool selections = config.mode == RunMode::best_of_k;
    outcome.report = selections ? report_from_selections(outcome.selections)
                                : report_from_trajectories(outcome.trajectories);
    outcome.report.meta.mode = std::string(to_string(config.mode));
    outcome.report.meta.config_hash = config.hash();
    outcome.report.meta.seed = config.seed;

    std::size_t failed = 0;
    for (const auto& t : outcome.trajectories) failed += t.error.has_value();
    if (failed > 0) spdlog::warn("{} of {} trajectories were truncated by errors", failed, outcome.trajectories.size());

    if (!config.out_dir.empty()) {
        const fs::path out(config.out_dir);
        const auto records_name = selections ? "selections.jsonl" : "trajectories.jsonl";
        outcome.records_path = (out / records_name).string();
        outcome.transcript_path = (out / "transcript.jsonl").string();
        write_atomic(outcome.records_path,
                     selections ? join_lines(outcome.selections) : join_lines(outcome.trajectories));
        write_atomic(outcome.transcript_path, transcript->to_jsonl());
        auto cfg = nlohmann::json::parse(config.canonical_json());
        cfg["config_hash"] = config.hash();
        write_atomic((out / "config.json").string(), cfg.dump(2) + "\n");
        write_report(outcome.report, config.out_dir);
    }
    return outcome;
}

}  // namespace selfbias::harness
