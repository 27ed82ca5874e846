#include <fstream>
#include <cmath>

#include <json.hpp>

#include "selfbias/error.hpp"
#include "selfbias/pipeline.hpp"
#include "selfbias/scorers.hpp"

namespace selfbias::pipeline {

double CoverageScorer::score(const TaskSpec& task, const std::string& candidate, const providers::CallKey&,
                             std::uint64_t) {
    return scorers::coverage_score(candidate, task.constrained().concepts);
}

double ExactMatchScorer::score(const TaskSpec& task, const std::string& candidate, const providers::CallKey&,
                               std::uint64_t) {
    const auto answer = scorers::extract_boxed_answer(candidate);
    if (!answer) return 0.0;
    return scorers::exact_match_score(*answer, task.math().gold_answer);
}

AnnotatorScorer::AnnotatorScorer(std::shared_ptr<providers::Provider> annotator,
                                 const providers::TemplateSet& templates)
    : annotator_(std::move(annotator)), templates_(templates) {}

double AnnotatorScorer::score(const TaskSpec& task, const std::string& candidate, const providers::CallKey& key,
                              std::uint64_t seed) {
    if (task.kind() != TaskKind::translation) {
        throw ValidationError("MQM annotation scoring applies to translation tasks only");
    }
    auto slots = task_slots(task);
    slots["candidate"] = candidate;
    const auto& tmpl = templates_.get(task.kind(), providers::PromptRole::annotate);
    const auto text = annotator_->complete({key, providers::render(tmpl, slots), seed, std::nullopt});
    return scorers::mqm_score(scorers::parse_mqm_feedback(text));
}

ExternalScoresScorer::ExternalScoresScorer(std::map<Key, double> scores, std::string label)
    : scores_(std::move(scores)), label_(std::move(label)) {}

std::shared_ptr<ExternalScoresScorer> ExternalScoresScorer::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open score file '" + path + "'");
    std::map<Key, double> scores;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto where = path + ":" + std::to_string(line_no);
        try {
            const auto j = nlohmann::json::parse(line);
            const auto sid = j.at("sample_id").get<std::string>();
            const double v = j.at("score").get<double>();
            if (!std::isfinite(v)) throw ValidationError("non-finite score for sample '" + sid + "'");
            Key key{sid, j.at("iteration").get<int>(), j.value("candidate", 0)};
            if (!scores.emplace(key, v).second) {
                throw ValidationError("duplicate score for sample '" + sid + "'");
            }
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(where + ": " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError(where + ": " + e.what());
        }
    }
    if (scores.empty()) throw ValidationError("score file '" + path + "' is empty");
    return std::make_shared<ExternalScoresScorer>(std::move(scores), "external:" + path);
}

double ExternalScoresScorer::score(const TaskSpec&, const std::string&, const providers::CallKey& key,
                                   std::uint64_t) {
    const auto it = scores_.find(Key{key.sample_id, key.iteration, key.index});
    if (it == scores_.end()) {
        // Thrown as a scenario error so the pipeline truncates the sample
        // instead of aborting the run.
        throw ScenarioError("no external score for " + key.describe());
    }
    return it->second;
}

CalibratedProxyScorer::CalibratedProxyScorer(std::shared_ptr<ExternalScoresScorer> proxy,
                                             calibrate::QuantileMap map)
    : proxy_(std::move(proxy)), map_(std::move(map)) {}

double CalibratedProxyScorer::score(const TaskSpec& task, const std::string& candidate,
                                    const providers::CallKey& key, std::uint64_t seed) {
    return map_.apply(proxy_->score(task, candidate, key, seed));
}

}  // namespace selfbias::pipeline
