#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "selfbias/calibrate.hpp"
#include "selfbias/providers.hpp"
#include "selfbias/stats.hpp"
#include "selfbias/task.hpp"
#include "selfbias/templates.hpp"
#include "selfbias/trajectory.hpp"

namespace selfbias::pipeline {

// ---------------------------------------------------------------------------
// True scorers
// ---------------------------------------------------------------------------

// Reference-quality oracle for a candidate. `key` identifies the candidate
// (role "annotate"); best-of-k candidates carry their position in key.index.
class TrueScorer {
public:
    virtual ~TrueScorer() = default;
    virtual double score(const TaskSpec& task, const std::string& candidate, const providers::CallKey& key,
                         std::uint64_t seed) = 0;
    virtual std::string name() const = 0;
};

// Strict concept coverage (constrained generation).
class CoverageScorer : public TrueScorer {
public:
    double score(const TaskSpec& task, const std::string& candidate, const providers::CallKey& key,
                 std::uint64_t seed) override;
    std::string name() const override { return "coverage"; }
};

// Boxed answer vs gold (math).
class ExactMatchScorer : public TrueScorer {
public:
    double score(const TaskSpec& task, const std::string& candidate, const providers::CallKey& key,
                 std::uint64_t seed) override;
    std::string name() const override { return "exact-match"; }
};

// MQM score parsed from a reference-aware annotator (human export replayed
// through a scenario, or an external annotation model).
class AnnotatorScorer : public TrueScorer {
public:
    AnnotatorScorer(std::shared_ptr<providers::Provider> annotator, const providers::TemplateSet& templates);
    double score(const TaskSpec& task, const std::string& candidate, const providers::CallKey& key,
                 std::uint64_t seed) override;
    std::string name() const override { return "mqm:" + annotator_->tag(); }

private:
    std::shared_ptr<providers::Provider> annotator_;
    const providers::TemplateSet& templates_;
};

// Pre-computed scores keyed by (sample_id, iteration, candidate index).
class ExternalScoresScorer : public TrueScorer {
public:
    using Key = std::tuple<std::string, int, int>;
    explicit ExternalScoresScorer(std::map<Key, double> scores, std::string label = "external");

    // JSONL {sample_id, iteration, score, candidate?}.
    static std::shared_ptr<ExternalScoresScorer> from_file(const std::string& path);

    double score(const TaskSpec& task, const std::string& candidate, const providers::CallKey& key,
                 std::uint64_t seed) override;
    std::string name() const override { return label_; }

    const std::map<Key, double>& scores() const noexcept { return scores_; }

private:
    std::map<Key, double> scores_;
    std::string label_;
};

// Proxy metric scores mapped through a fitted QuantileMap.
class CalibratedProxyScorer : public TrueScorer {
public:
    CalibratedProxyScorer(std::shared_ptr<ExternalScoresScorer> proxy, calibrate::QuantileMap map);
    double score(const TaskSpec& task, const std::string& candidate, const providers::CallKey& key,
                 std::uint64_t seed) override;
    std::string name() const override { return "calibrated:" + proxy_->name(); }

private:
    std::shared_ptr<ExternalScoresScorer> proxy_;
    calibrate::QuantileMap map_;
};

// ---------------------------------------------------------------------------
// Self-assessment
// ---------------------------------------------------------------------------

struct SelfAssessment {
    double score = 0.0;
    // False when the feedback could not be read as a verdict.
    bool usable = true;
};

// MQM score for translation, coverage verdict (1 / 0) for constrained
// generation. Math uses self-consistency instead and is rejected here.
SelfAssessment assess_feedback(const TaskSpec& task, const std::string& feedback_text);

// ---------------------------------------------------------------------------
// Experiment state machines
// ---------------------------------------------------------------------------

struct PipelineOptions {
    int iterations = 10;
    int paths = 10;
    std::uint64_t seed = 0;
    // Extra reasoning paths and best-of-k candidates. Initial generation and
    // feedback use the provider's configured temperature.
    double sample_temperature = 0.7;
};

// Slot values for every template role of `task`.
providers::SlotMap task_slots(const TaskSpec& task);

// Generate, then alternate feedback and refinement. A refinement is
// accepted only when its self-score strictly exceeds the current accepted
// self-score; refinement prompts always see the last accepted text and its
// feedback. Provider failures truncate the trajectory and set `error`.
Trajectory run_self_refine(const TaskSpec& task, providers::Provider& generator, providers::Provider& feedback,
                           TrueScorer& true_scorer, const providers::TemplateSet& templates,
                           const PipelineOptions& options);

// Same state machine with feedback and the acceptance score taken from an
// external annotator; self_score fields then hold the external score.
Trajectory run_external_feedback_refine(const TaskSpec& task, providers::Provider& generator,
                                        providers::Provider& external_feedback, TrueScorer& true_scorer,
                                        const providers::TemplateSet& templates, const PipelineOptions& options);

// Math refinement by self-consistency. Each iteration samples `paths`
// fresh solutions and majority-votes their boxed answers. Record i scores
// the answer held entering iteration i: self_score is 1 when the vote agrees
// with it, true_score is exact match against the gold answer. On
// disagreement the held answer is replaced by the vote (reasoning text is
// kept). All records are marked accepted.
Trajectory run_self_consistency(const TaskSpec& task, providers::Provider& generator,
                                const providers::TemplateSet& templates, const PipelineOptions& options);

// Samples k candidates, scores each with self-feedback and the true scorer,
// and selects the highest self-score (lowest index on ties).
SelectionRecord run_best_of_k(const TaskSpec& task, providers::Provider& generator, providers::Provider& feedback,
                              TrueScorer& true_scorer, const providers::TemplateSet& templates, int k,
                              const PipelineOptions& options);

struct ParaphraseResult {
    stats::BiasStats before;
    stats::BiasStats after;
    // One two-record trajectory per task: index 0 scores the external text,
    // index 1 the paraphrase. Failed samples keep no records and carry
    // `error`, so they drop out of both statistics blocks.
    std::vector<Trajectory> trajectories;
    std::vector<std::string> excluded;
};

// Scores each task's external_text, asks `paraphraser` to restyle it, then
// scores the paraphrase with the same feedback and true scorer.
ParaphraseResult run_paraphrase_probe(std::span<const TaskSpec> tasks, providers::Provider& paraphraser,
                                      providers::Provider& feedback, TrueScorer& true_scorer,
                                      const providers::TemplateSet& templates, const PipelineOptions& options,
                                      int workers = 1);

// ---------------------------------------------------------------------------
// Worker pool
// ---------------------------------------------------------------------------

// Runs fn(0..n-1) on up to `workers` threads (sequentially when workers <= 1).
// The first exception thrown by any job is rethrown after all threads join.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

// Applies fn to every task and returns results sorted by sample_id.
std::vector<Trajectory> map_trajectories(std::span<const TaskSpec> tasks, int workers,
                                         const std::function<Trajectory(const TaskSpec&)>& fn);
std::vector<SelectionRecord> map_selections(std::span<const TaskSpec> tasks, int workers,
                                            const std::function<SelectionRecord(const TaskSpec&)>& fn);

// Statistics over the selected candidates of each record.
stats::BiasStats selection_stats(std::span<const SelectionRecord> records, double gamma = 0.0);

}  // namespace selfbias::pipeline
