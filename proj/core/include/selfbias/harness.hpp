#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "selfbias/pipeline.hpp"
#include "selfbias/stats.hpp"
#include "selfbias/task.hpp"
#include "selfbias/trajectory.hpp"

namespace selfbias::harness {

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

// Dataset JSONL. translation: {id, source, reference, pair}; constrained_gen:
// {id, concepts}; math: {id, problem, gold_answer}. Records may carry
// "kind" and "external_text". Errors name the file and line; duplicate
// ids are rejected.
std::vector<TaskSpec> load_tasks(const std::string& path, std::optional<TaskKind> kind);

// JSONL {sample_id, iteration, self_score, true_score}. Non-finite scores
// (including "NaN"/"inf" strings) are rejected with the sample id; when
// `kind` is given every score must lie on that task's scale.
std::vector<stats::ScorePair> ingest_score_pairs(const std::string& path, std::optional<TaskKind> kind);

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct ReportRow {
    int key = 0;  // iteration, or k for best-of-k sweeps
    std::size_t n = 0;
    double bias = 0.0;
    double dskew = 0.0;
    double mean_self = 0.0;
    double mean_true = 0.0;
};

struct ReportMeta {
    std::string mode;
    std::string config_hash;  // empty when the source had no run config
    std::optional<std::uint64_t> seed;
    std::vector<std::string> provider_tags;
    std::string input_sha256;  // set when built from a file
};

struct Report {
    std::string key_name = "iteration";
    std::vector<ReportRow> rows;
    ReportMeta meta;
};

Report report_from_trajectories(std::span<const Trajectory> trajectories);
// One row per distinct k.
Report report_from_selections(std::span<const SelectionRecord> records);
Report report_from_pairs(std::span<const stats::ScorePair> pairs);

// Header `iteration,n,bias,dskew,mean_self,mean_true` (or `k,...`); numbers
// in shortest round-trip form.
std::string to_csv(const Report& report);
// {"key": ..., "columns": [...], "rows": [[...]], "meta": {...}}
std::string to_json(const Report& report);

// Writes report.csv and report.json under `dir`.
void write_report(const Report& report, const std::string& dir);

// temp file + rename in the destination directory.
void write_atomic(const std::string& path, const std::string& content);

std::string sha256_hex(std::string_view data);
std::string read_file(const std::string& path);

// ---------------------------------------------------------------------------
// Run configuration and orchestration
// ---------------------------------------------------------------------------

enum class RunMode { self_refine, self_consistency, best_of_k, paraphrase, external_feedback };

std::string_view to_string(RunMode mode);
RunMode parse_run_mode(std::string_view name);

struct RunConfig {
    RunMode mode = RunMode::self_refine;
    TaskKind task = TaskKind::translation;
    std::string dataset;
    std::string generator;  // provider spec, see providers::parse_provider_spec
    std::string feedback;   // defaults to the generator
    std::string external_feedback;
    // coverage | exact-match | mqm | mqm:<provider-spec> | file:<scores.jsonl> | proxy:<scores.jsonl>
    // Empty selects the task default (mqm via the generator, coverage, exact-match).
    std::string true_scores;
    std::string calibration_map;
    std::string templates;
    int iterations = 10;
    std::vector<int> k_values{1, 4, 8, 16, 32};
    int paths = 10;
    int workers = 1;
    std::uint64_t seed = 0;
    double sample_temperature = 0.7;
    std::string out_dir;

    // Throws ValidationError on incompatible settings or missing files.
    void validate() const;
    // Sorted-key JSON of every field that affects results (not out_dir or workers).
    std::string canonical_json() const;
    std::string hash() const;
};

struct RunOutcome {
    Report report;
    std::vector<Trajectory> trajectories;
    std::vector<SelectionRecord> selections;
    std::string records_path;
    std::string transcript_path;
};

// Builds providers and scorers from `config`, runs the experiment and, when
// out_dir is set, writes {trajectories|selections}.jsonl, transcript.jsonl,
// config.json, report.csv and report.json there.
RunOutcome execute_run(const RunConfig& config);

}  // namespace selfbias::harness
