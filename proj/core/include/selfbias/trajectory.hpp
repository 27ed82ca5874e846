#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "selfbias/task.hpp"

namespace selfbias {

// One generate/feedback step of a refinement run.
struct IterationRecord {
    int index = 0;
    std::string candidate_text;
    std::string feedback_text;
    double self_score = 0.0;
    double true_score = 0.0;
    // Index 0 is always accepted. A rejected record keeps its scores for
    // auditing but statistics use the last accepted record instead.
    bool accepted = false;
    // Free-form flag, e.g. "unusable-feedback" or "no-answer". Empty when clean.
    std::string note;

    bool operator==(const IterationRecord&) const = default;
};

struct TrajectoryError {
    int iteration = 0;
    std::string message;

    bool operator==(const TrajectoryError&) const = default;
};

struct Trajectory {
    std::string sample_id;
    TaskSpec task;
    std::vector<IterationRecord> iterations;
    std::string provider_tag;
    std::uint64_t seed = 0;
    // Set when a provider failed; iterations then stop before `error->iteration`.
    std::optional<TrajectoryError> error;

    bool operator==(const Trajectory&) const = default;
};

struct SelectionCandidate {
    std::string text;
    std::string feedback_text;
    double self_score = 0.0;
    double true_score = 0.0;

    bool operator==(const SelectionCandidate&) const = default;
};

// Outcome of best-of-k sampling for one sample.
struct SelectionRecord {
    std::string sample_id;
    TaskSpec task;
    int k = 1;
    std::vector<SelectionCandidate> candidates;
    // Empty only when every candidate failed.
    std::optional<std::size_t> selected_index;
    std::string provider_tag;
    std::uint64_t seed = 0;
    std::string note;

    bool operator==(const SelectionRecord&) const = default;
};

// Argmax of self_score, lowest index on ties. Empty input -> nullopt.
std::optional<std::size_t> select_best(const std::vector<SelectionCandidate>& candidates);

// JSONL codecs. Serialization is deterministic (fixed key order, shortest
// round-trip number formatting) so identical runs give identical bytes.
std::string to_json_line(const Trajectory& t);
std::string to_json_line(const SelectionRecord& r);
Trajectory trajectory_from_json(std::string_view line);
SelectionRecord selection_from_json(std::string_view line);

std::vector<Trajectory> read_trajectories(const std::string& path);
std::vector<SelectionRecord> read_selections(const std::string& path);

}  // namespace selfbias
