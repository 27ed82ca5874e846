// Command-line front end: calibrate, run, score, report, validate.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "selfbias/calibrate.hpp"
#include "selfbias/error.hpp"
#include "selfbias/harness.hpp"
#include "selfbias/providers.hpp"

namespace fs = std::filesystem;
using namespace selfbias;

namespace {

// First numeric field among `names` on every JSONL line of `path`.
std::vector<double> read_column(const std::string& path, const std::vector<std::string>& names) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::vector<double> out;
    std::string line;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto where = path + ":" + std::to_string(lineno);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(where + ": " + e.what());
        }
        bool found = false;
        for (const auto& name : names) {
            if (j.contains(name) && j[name].is_number()) {
                out.push_back(j[name].get<double>());
                found = true;
                break;
            }
        }
        if (!found) throw ValidationError(where + ": no numeric field among {" + [&] {
            std::string s;
            for (const auto& n : names) s += (s.empty() ? "" : ", ") + n;
            return s;
        }() + "}");
        if (!std::isfinite(out.back())) throw ValidationError(where + ": non-finite value");
    }
    if (out.empty()) throw ValidationError("'" + path + "' has no records");
    return out;
}

struct ScoreInput {
    std::string trajectories;
    std::string selections;
    std::string pairs;
    std::string task;

    void add_to(CLI::App* cmd) {
        auto* t = cmd->add_option("--trajectories", trajectories, "Trajectory JSONL")->check(CLI::ExistingFile);
        auto* s = cmd->add_option("--selections", selections, "Best-of-k selection JSONL")->check(CLI::ExistingFile);
        auto* p = cmd->add_option("--pairs", pairs, "Score-pair JSONL")->check(CLI::ExistingFile);
        t->excludes(s)->excludes(p);
        s->excludes(p);
        cmd->add_option("--task", task, "Task kind used to validate score scales");
    }

    const std::string& path() const {
        if (!trajectories.empty()) return trajectories;
        if (!selections.empty()) return selections;
        if (!pairs.empty()) return pairs;
        throw ValidationError("one of --trajectories, --selections or --pairs is required");
    }

    harness::Report build() const {
        const auto& input = path();
        harness::Report report;
        if (!trajectories.empty()) {
            report = harness::report_from_trajectories(read_trajectories(trajectories));
        } else if (!selections.empty()) {
            report = harness::report_from_selections(read_selections(selections));
        } else {
            std::optional<TaskKind> kind;
            if (!task.empty()) kind = parse_task_kind(task);
            report = harness::report_from_pairs(harness::ingest_score_pairs(pairs, kind));
        }
        report.meta.input_sha256 = harness::sha256_hex(harness::read_file(input));
        // Pick up provenance from a run directory.
        const auto config = fs::path(input).parent_path() / "config.json";
        if (fs::is_regular_file(config)) {
            try {
                const auto j = nlohmann::json::parse(harness::read_file(config.string()));
                report.meta.mode = j.value("mode", "");
                report.meta.config_hash = j.value("config_hash", "");
            } catch (const nlohmann::json::exception&) {
                spdlog::warn("ignoring unreadable {}", config.string());
            }
        }
        return report;
    }
};

std::vector<int> parse_k_list(const std::string& text) {
    std::vector<int> ks;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            const int k = std::stoi(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            ks.push_back(k);
        } catch (const std::exception&) {
            throw ValidationError("bad --k value '" + item + "'");
        }
    }
    return ks;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Measure self-bias in iterative refinement of model outputs"};
    app.require_subcommand(1);
    std::string log_level = "warn";
    app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")->capture_default_str();

    // calibrate
    auto* calibrate_cmd = app.add_subcommand("calibrate", "Fit or apply quantile maps");
    calibrate_cmd->require_subcommand(1);
    std::string fit_source, fit_target, fit_corpus, fit_out;
    auto* fit = calibrate_cmd->add_subcommand("fit", "Fit a proxy-to-human quantile map");
    auto* fit_src_opt = fit->add_option("--source", fit_source, "JSONL of proxy scores (metric_score or score)")
                            ->check(CLI::ExistingFile);
    auto* fit_tgt_opt = fit->add_option("--target", fit_target, "JSONL of human scores (human_score or score)")
                            ->check(CLI::ExistingFile);
    auto* fit_corpus_opt =
        fit->add_option("--corpus", fit_corpus, "JSONL with metric_score and human_score per record")
            ->check(CLI::ExistingFile);
    fit_src_opt->needs(fit_tgt_opt);
    fit_tgt_opt->needs(fit_src_opt);
    fit_corpus_opt->excludes(fit_src_opt)->excludes(fit_tgt_opt);
    fit->add_option("--out", fit_out, "Output map JSON")->required();

    std::string apply_map, apply_input, apply_out;
    std::optional<double> apply_value;
    auto* apply = calibrate_cmd->add_subcommand("apply", "Map proxy scores onto the human scale");
    apply->add_option("--map", apply_map, "Fitted map JSON")->required()->check(CLI::ExistingFile);
    auto* apply_input_opt =
        apply->add_option("--input", apply_input, "JSONL with metric_score or score; adds calibrated_score")
            ->check(CLI::ExistingFile);
    auto* apply_value_opt = apply->add_option("--value", apply_value, "Map a single value and print it");
    apply_input_opt->excludes(apply_value_opt);
    apply->add_option("--out", apply_out, "Output JSONL (default: standard output)");

    // run
    harness::RunConfig cfg;
    std::string mode = "self-refine", task = "translation", k_list, provider;
    auto* run = app.add_subcommand("run", "Run an experiment");
    run->add_option("--mode", mode, "self-refine|self-consistency|best-of-k|paraphrase|external-feedback")
        ->capture_default_str();
    run->add_option("--task", task, "translation|constrained-gen|math")->capture_default_str();
    run->add_option("--dataset", cfg.dataset, "Task JSONL")->required();
    run->add_option("--iterations", cfg.iterations, "Refinement iterations")->capture_default_str();
    run->add_option("--k", k_list, "Comma-separated best-of-k sample sizes (default 1,4,8,16,32)");
    run->add_option("--paths", cfg.paths, "Extra reasoning paths for self-consistency")->capture_default_str();
    run->add_option("--seed", cfg.seed, "Run seed")->capture_default_str();
    run->add_option("--workers", cfg.workers, "Concurrent samples")->capture_default_str();
    run->add_option("--out", cfg.out_dir, "Output directory");
    auto* gen_opt = run->add_option("--generator", cfg.generator, "Generator provider spec");
    auto* provider_opt = run->add_option("--provider", provider, "Shorthand: generator and feedback provider");
    gen_opt->excludes(provider_opt);
    run->add_option("--feedback", cfg.feedback, "Self-feedback provider spec (default: generator)");
    run->add_option("--external-feedback", cfg.external_feedback, "External feedback provider spec");
    run->add_option("--true-scores", cfg.true_scores,
                    "coverage|exact-match|mqm|mqm:<provider>|file:<scores.jsonl>|proxy:<scores.jsonl>");
    run->add_option("--calibration-map", cfg.calibration_map, "Quantile map for proxy: true scores");
    run->add_option("--templates", cfg.templates, "Directory of prompt template overrides");

    // score / report
    ScoreInput score_input;
    auto* score = app.add_subcommand("score", "Print bias/dskew CSV for trajectories, selections or score pairs");
    score_input.add_to(score);

    ScoreInput report_input;
    std::string report_out;
    auto* report = app.add_subcommand("report", "Write report.csv and report.json");
    report_input.add_to(report);
    report->add_option("--out", report_out, "Output directory")->required();

    // validate
    std::string v_dataset, v_task, v_trajectories, v_selections, v_pairs, v_provider, v_map, v_templates;
    auto* validate = app.add_subcommand("validate", "Schema-check input files");
    validate->add_option("--dataset", v_dataset, "Task JSONL")->check(CLI::ExistingFile);
    validate->add_option("--task", v_task, "Task kind for --dataset and --pairs");
    validate->add_option("--trajectories", v_trajectories, "Trajectory JSONL")->check(CLI::ExistingFile);
    validate->add_option("--selections", v_selections, "Selection JSONL")->check(CLI::ExistingFile);
    validate->add_option("--pairs", v_pairs, "Score-pair JSONL")->check(CLI::ExistingFile);
    validate->add_option("--provider", v_provider, "Provider spec");
    validate->add_option("--map", v_map, "Quantile map JSON")->check(CLI::ExistingFile);
    validate->add_option("--templates", v_templates, "Template override directory")->check(CLI::ExistingDirectory);

    CLI11_PARSE(app, argc, argv);

    try {
        spdlog::set_default_logger(spdlog::stderr_color_mt("selfbias"));
        spdlog::set_level(spdlog::level::from_str(log_level));

        if (*fit) {
            std::vector<double> source, target;
            if (!fit_corpus.empty()) {
                source = read_column(fit_corpus, {"metric_score"});
                target = read_column(fit_corpus, {"human_score"});
            } else if (!fit_source.empty()) {
                source = read_column(fit_source, {"metric_score", "score"});
                target = read_column(fit_target, {"human_score", "score"});
            } else {
                throw ValidationError("calibrate fit needs --corpus or --source and --target");
            }
            const auto map = calibrate::fit_quantile_map(source, target);
            harness::write_atomic(fit_out, map.to_json() + "\n");
            std::cerr << "fitted " << map.source_quantiles().size() << "-point map -> " << fit_out << "\n";
        } else if (*apply) {
            const auto map = calibrate::QuantileMap::from_json(harness::read_file(apply_map));
            if (apply_value) {
                if (!std::isfinite(*apply_value)) throw ValidationError("--value must be finite");
                std::cout << nlohmann::json(map.apply(*apply_value)).dump() << "\n";
            } else if (!apply_input.empty()) {
                std::ifstream in(apply_input);
                std::string line, out;
                for (int lineno = 1; std::getline(in, line); ++lineno) {
                    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
                    auto j = nlohmann::ordered_json::parse(line, nullptr, false);
                    const auto where = apply_input + ":" + std::to_string(lineno);
                    if (j.is_discarded()) throw ValidationError(where + ": malformed JSON");
                    const char* field = j.contains("metric_score") ? "metric_score" : "score";
                    if (!j.contains(field) || !j[field].is_number()) {
                        throw ValidationError(where + ": missing numeric metric_score/score");
                    }
                    const double v = j[field].get<double>();
                    if (!std::isfinite(v)) throw ValidationError(where + ": non-finite score");
                    j["calibrated_score"] = map.apply(v);
                    out += j.dump() + "\n";
                }
                if (apply_out.empty()) {
                    std::cout << out;
                } else {
                    harness::write_atomic(apply_out, out);
                }
            } else {
                throw ValidationError("calibrate apply needs --input or --value");
            }
        } else if (*run) {
            cfg.mode = harness::parse_run_mode(mode);
            cfg.task = parse_task_kind(task);
            if (!provider.empty()) cfg.generator = provider;
            if (!k_list.empty()) cfg.k_values = parse_k_list(k_list);
            const auto outcome = harness::execute_run(cfg);
            std::cout << harness::to_csv(outcome.report);
            if (!cfg.out_dir.empty()) std::cerr << "wrote " << outcome.records_path << "\n";
        } else if (*score) {
            std::cout << harness::to_csv(score_input.build());
        } else if (*report) {
            harness::write_report(report_input.build(), report_out);
            std::cerr << "wrote " << (fs::path(report_out) / "report.csv").string() << "\n";
        } else if (*validate) {
            std::optional<TaskKind> kind;
            if (!v_task.empty()) kind = parse_task_kind(v_task);
            int checked = 0;
            if (!v_dataset.empty()) {
                std::cout << v_dataset << ": " << harness::load_tasks(v_dataset, kind).size() << " tasks\n";
                ++checked;
            }
            if (!v_trajectories.empty()) {
                std::cout << v_trajectories << ": " << read_trajectories(v_trajectories).size() << " trajectories\n";
                ++checked;
            }
            if (!v_selections.empty()) {
                std::cout << v_selections << ": " << read_selections(v_selections).size() << " selections\n";
                ++checked;
            }
            if (!v_pairs.empty()) {
                std::cout << v_pairs << ": " << harness::ingest_score_pairs(v_pairs, kind).size() << " pairs\n";
                ++checked;
            }
            if (!v_provider.empty()) {
                const auto pc = providers::parse_provider_spec(v_provider);
                if (pc.kind != providers::ProviderKind::http) providers::make_provider(pc);
                std::cout << v_provider << ": ok (" << pc.effective_tag() << ")\n";
                ++checked;
            }
            if (!v_map.empty()) {
                const auto m = calibrate::QuantileMap::from_json(harness::read_file(v_map));
                std::cout << v_map << ": " << m.source_quantiles().size() << "-point map\n";
                ++checked;
            }
            if (!v_templates.empty()) {
                providers::TemplateSet::with_overrides(v_templates);
                std::cout << v_templates << ": ok\n";
                ++checked;
            }
            if (checked == 0) throw ValidationError("validate: nothing to check");
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
