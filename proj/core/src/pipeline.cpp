#include "selfbias/pipeline.hpp"

#include <algorithm>
#include <sstream>

#include "selfbias/error.hpp"
#include "selfbias/scorers.hpp"
#include "text_util.hpp"

namespace selfbias::pipeline {

namespace {

using providers::CallKey;
using providers::CompletionRequest;
using providers::PromptRole;
using providers::Provider;
using providers::SlotMap;
using providers::TemplateSet;

// Provider and scorer failures that end one sample without aborting the run.
template <typename Fn>
auto guarded(Fn&& fn, std::string& error_out) -> std::optional<decltype(fn())> {
    try {
        return fn();
    } catch (const TransportError& e) {
        error_out = e.what();
    } catch (const ScenarioError& e) {
        error_out = e.what();
    }
    return std::nullopt;
}

std::string render_for(const TemplateSet& templates, const TaskSpec& task, PromptRole role, SlotMap slots) {
    return providers::render(templates.get(task.kind(), role), slots);
}

struct Scored {
    std::string text;
    std::string feedback;
    SelfAssessment self;
    double truth = 0.0;
};

// Feedback + true score for one candidate text.
Scored score_candidate(const TaskSpec& task, std::string text, Provider& feedback, TrueScorer& true_scorer,
                       const TemplateSet& templates, const PipelineOptions& options, int iteration, int index) {
    auto slots = task_slots(task);
    slots["candidate"] = text;
    const auto prompt = render_for(templates, task, PromptRole::feedback, slots);
    Scored s;
    s.feedback = feedback.complete({{task.id, iteration, "feedback", index}, prompt, options.seed, std::nullopt});
    s.self = assess_feedback(task, s.feedback);
    s.truth = true_scorer.score(task, text, {task.id, iteration, "annotate", index}, options.seed);
    s.text = std::move(text);
    return s;
}

Trajectory refine_loop(const TaskSpec& task, Provider& generator, Provider& feedback, TrueScorer& true_scorer,
                       const TemplateSet& templates, const PipelineOptions& options) {
    if (task.kind() == TaskKind::math) {
        throw ValidationError("feedback refinement is not defined for math tasks; use self-consistency");
    }
    if (options.iterations < 0) throw ValidationError("iterations must be >= 0");

    Trajectory t;
    t.sample_id = task.id;
    t.task = task;
    t.provider_tag = generator.tag() + "|" + feedback.tag();
    t.seed = options.seed;
    const double floor_score = scale_for(task.kind()).lo;

    std::string error;
    const auto first = guarded(
        [&] {
            const auto prompt = render_for(templates, task, PromptRole::initial, task_slots(task));
            auto text = generator.complete({{task.id, 0, "initial", 0}, prompt, options.seed, std::nullopt});
            return score_candidate(task, std::move(text), feedback, true_scorer, templates, options, 0, 0);
        },
        error);
    if (!first) {
        t.error = TrajectoryError{0, error};
        return t;
    }

    IterationRecord rec0;
    rec0.index = 0;
    rec0.candidate_text = first->text;
    rec0.feedback_text = first->feedback;
    rec0.self_score = first->self.usable ? first->self.score : floor_score;
    rec0.true_score = first->truth;
    rec0.accepted = true;
    if (!first->self.usable) rec0.note = "unusable-feedback";
    t.iterations.push_back(rec0);
    std::size_t accepted = 0;

    for (int i = 1; i <= options.iterations; ++i) {
        const auto& current = t.iterations[accepted];
        const auto step = guarded(
            [&] {
                auto slots = task_slots(task);
                slots["previous"] = current.candidate_text;
                slots["feedback"] = std::string(detail::trim(current.feedback_text));
                const auto prompt = render_for(templates, task, PromptRole::refinement, slots);
                auto text = generator.complete({{task.id, i, "refinement", 0}, prompt, options.seed, std::nullopt});
                return score_candidate(task, std::move(text), feedback, true_scorer, templates, options, i, 0);
            },
            error);
        if (!step) {
            t.error = TrajectoryError{i, error};
            break;
        }
        IterationRecord rec;
        rec.index = i;
        rec.candidate_text = step->text;
        rec.feedback_text = step->feedback;
        rec.true_score = step->truth;
        if (step->self.usable) {
            rec.self_score = step->self.score;
            rec.accepted = rec.self_score > current.self_score;
        } else {
            rec.self_score = current.self_score;
            rec.accepted = false;
            rec.note = "unusable-feedback";
        }
        t.iterations.push_back(std::move(rec));
        if (t.iterations.back().accepted) accepted = t.iterations.size() - 1;
    }
    return t;
}

std::string vote_summary(const scorers::Vote& vote, int paths, const std::optional<std::string>& current,
                         bool consistent) {
    std::ostringstream os;
    os << "majority answer: " << vote.winner << " (" << vote.count << "/" << paths << " paths); current answer: "
       << (current ? *current : std::string("<none>")) << "; " << (consistent ? "consistent" : "inconsistent");
    return os.str();
}

}  // namespace

SelfAssessment assess_feedback(const TaskSpec& task, const std::string& feedback_text) {
    switch (task.kind()) {
        case TaskKind::translation: {
            const auto ann = scorers::parse_mqm_feedback(feedback_text);
            return {scorers::mqm_score(ann), !ann.parse_warning};
        }
        case TaskKind::constrained_gen: {
            const auto fb = scorers::parse_coverage_feedback(feedback_text);
            if (std::holds_alternative<scorers::AllCovered>(fb)) return {1.0, true};
            if (const auto* missing = std::get_if<std::vector<std::string>>(&fb)) {
                return {missing->empty() ? 1.0 : 0.0, true};
            }
            return {0.0, false};
        }
        case TaskKind::math: break;
    }
    throw ValidationError("math tasks are self-assessed by self-consistency voting, not feedback text");
}

providers::SlotMap task_slots(const TaskSpec& task) {
    SlotMap slots;
    switch (task.kind()) {
        case TaskKind::translation: {
            const auto& p = task.translation();
            const auto [src, tgt] = language_names(p.language_pair);
            slots["source"] = p.source;
            slots["reference"] = p.reference;
            slots["source_lang"] = src;
            slots["target_lang"] = tgt;
            break;
        }
        case TaskKind::constrained_gen:
            slots["concepts"] = scorers::format_concept_list(task.constrained().concepts);
            break;
        case TaskKind::math: slots["problem"] = task.math().problem; break;
    }
    return slots;
}

Trajectory run_self_refine(const TaskSpec& task, Provider& generator, Provider& feedback, TrueScorer& true_scorer,
                           const TemplateSet& templates, const PipelineOptions& options) {
    return refine_loop(task, generator, feedback, true_scorer, templates, options);
}

Trajectory run_external_feedback_refine(const TaskSpec& task, Provider& generator, Provider& external_feedback,
                                        TrueScorer& true_scorer, const TemplateSet& templates,
                                        const PipelineOptions& options) {
    return refine_loop(task, generator, external_feedback, true_scorer, templates, options);
}

Trajectory run_self_consistency(const TaskSpec& task, Provider& generator, const TemplateSet& templates,
                                const PipelineOptions& options) {
    if (task.kind() != TaskKind::math) throw ValidationError("self-consistency requires a math task");
    if (options.paths < 1) throw ValidationError("paths must be >= 1");
    if (options.iterations < 0) throw ValidationError("iterations must be >= 0");

    Trajectory t;
    t.sample_id = task.id;
    t.task = task;
    t.provider_tag = generator.tag();
    t.seed = options.seed;
    const auto prompt = render_for(templates, task, PromptRole::initial, task_slots(task));
    const auto& gold = task.math().gold_answer;

    std::string error;
    auto solution = guarded(
        [&] { return generator.complete({{task.id, 0, "initial", 0}, prompt, options.seed, std::nullopt}); }, error);
    if (!solution) {
        t.error = TrajectoryError{0, error};
        return t;
    }
    std::string current = std::move(*solution);

    for (int i = 0; i <= options.iterations; ++i) {
        const auto answers = guarded(
            [&] {
                std::vector<std::optional<std::string>> out;
                for (int p = 0; p < options.paths; ++p) {
                    const auto path = generator.complete(
                        {{task.id, i, "sample", p}, prompt, options.seed, options.sample_temperature});
                    out.push_back(scorers::extract_boxed_answer(path));
                }
                return out;
            },
            error);
        if (!answers) {
            t.error = TrajectoryError{i, error};
            break;
        }

        const auto held = scorers::extract_boxed_answer(current);
        IterationRecord rec;
        rec.index = i;
        rec.candidate_text = current;
        rec.accepted = true;
        rec.true_score = held ? scorers::exact_match_score(*held, gold) : 0.0;

        const bool any = std::any_of(answers->begin(), answers->end(), [](const auto& a) { return a.has_value(); });
        if (!any) {
            rec.self_score = 0.0;
            rec.note = "no-answer";
            rec.feedback_text = "no answer found in " + std::to_string(options.paths) + " paths";
            t.iterations.push_back(std::move(rec));
            continue;
        }
        const auto vote = scorers::majority_vote(*answers);
        const bool consistent = held && scorers::consistency_score(*held, vote.winner) == 1;
        rec.self_score = consistent ? 1.0 : 0.0;
        rec.feedback_text = vote_summary(vote, options.paths, held, consistent);
        t.iterations.push_back(std::move(rec));
        if (!consistent) current = scorers::replace_boxed_answer(current, vote.winner);
    }
    return t;
}

SelectionRecord run_best_of_k(const TaskSpec& task, Provider& generator, Provider& feedback,
                              TrueScorer& true_scorer, const TemplateSet& templates, int k,
                              const PipelineOptions& options) {
    if (k < 1) throw ValidationError("k must be >= 1");
    SelectionRecord r;
    r.sample_id = task.id;
    r.task = task;
    r.k = k;
    r.provider_tag = generator.tag() + "|" + feedback.tag();
    r.seed = options.seed;
    const double floor_score = scale_for(task.kind()).lo;
    const auto prompt = render_for(templates, task, PromptRole::initial, task_slots(task));

    std::vector<std::string> failures;
    for (int j = 0; j < k; ++j) {
        std::string error;
        const auto scored = guarded(
            [&] {
                auto text =
                    generator.complete({{task.id, 0, "sample", j}, prompt, options.seed, options.sample_temperature});
                return score_candidate(task, std::move(text), feedback, true_scorer, templates, options, 0, j);
            },
            error);
        if (!scored) {
            failures.push_back("candidate " + std::to_string(j) + ": " + error);
            continue;
        }
        r.candidates.push_back(SelectionCandidate{scored->text, scored->feedback,
                                                  scored->self.usable ? scored->self.score : floor_score,
                                                  scored->truth});
    }
    r.selected_index = select_best(r.candidates);
    if (!failures.empty()) {
        std::string note = std::to_string(failures.size()) + " of " + std::to_string(k) + " candidates failed";
        for (const auto& f : failures) note += "; " + f;
        r.note = std::move(note);
    }
    return r;
}

ParaphraseResult run_paraphrase_probe(std::span<const TaskSpec> tasks, Provider& paraphraser, Provider& feedback,
                                      TrueScorer& true_scorer, const TemplateSet& templates,
                                      const PipelineOptions& options, int workers) {
    for (const auto& task : tasks) {
        if (detail::trim(task.external_text).empty()) {
            throw ValidationError("task '" + task.id + "' has no external_text to paraphrase");
        }
    }
    ParaphraseResult result;
    result.trajectories = map_trajectories(tasks, workers, [&](const TaskSpec& task) {
        Trajectory t;
        t.sample_id = task.id;
        t.task = task;
        t.provider_tag = paraphraser.tag() + "|" + feedback.tag();
        t.seed = options.seed;
        std::string error;
        const auto outcome = guarded(
            [&] {
                auto before = score_candidate(task, task.external_text, feedback, true_scorer, templates, options, 0, 0);
                auto slots = task_slots(task);
                slots["candidate"] = task.external_text;
                const auto prompt = render_for(templates, task, PromptRole::paraphrase, slots);
                auto text = paraphraser.complete({{task.id, 1, "paraphrase", 0}, prompt, options.seed, std::nullopt});
                auto after = score_candidate(task, std::move(text), feedback, true_scorer, templates, options, 1, 0);
                return std::make_pair(std::move(before), std::move(after));
            },
            error);
        if (!outcome) {
            t.error = TrajectoryError{0, error};
            return t;
        }
        const double floor_score = scale_for(task.kind()).lo;
        int index = 0;
        for (const auto* s : {&outcome->first, &outcome->second}) {
            IterationRecord rec;
            rec.index = index++;
            rec.candidate_text = s->text;
            rec.feedback_text = s->feedback;
            rec.self_score = s->self.usable ? s->self.score : floor_score;
            rec.true_score = s->truth;
            rec.accepted = true;
            if (!s->self.usable) rec.note = "unusable-feedback";
            t.iterations.push_back(std::move(rec));
        }
        return t;
    });

    std::vector<stats::ScorePair> before;
    std::vector<stats::ScorePair> after;
    for (const auto& t : result.trajectories) {
        if (t.iterations.size() != 2) {
            result.excluded.push_back(t.sample_id);
            continue;
        }
        before.push_back({t.sample_id, 0, t.iterations[0].self_score, t.iterations[0].true_score});
        after.push_back({t.sample_id, 1, t.iterations[1].self_score, t.iterations[1].true_score});
    }
    if (before.empty()) throw ValidationError("no samples survived the paraphrase probe");
    result.before = stats::summarize(before);
    result.after = stats::summarize(after);
    return result;
}

stats::BiasStats selection_stats(std::span<const SelectionRecord> records, double gamma) {
    std::vector<stats::ScorePair> pairs;
    for (const auto& r : records) {
        if (!r.selected_index) continue;
        const auto& c = r.candidates[*r.selected_index];
        pairs.push_back({r.sample_id, r.k, c.self_score, c.true_score});
    }
    return stats::summarize(pairs, gamma);
}

}  // namespace selfbias::pipeline
