#pragma once

#include <string>
#include <utility>
#include <string_view>
#include <variant>
#include <vector>

namespace selfbias {

enum class TaskKind { translation, constrained_gen, math };

std::string_view to_string(TaskKind kind);
// Accepts "translation"/"mt", "constrained_gen"/"commongen", "math".
TaskKind parse_task_kind(std::string_view name);

struct TranslationPayload {
    std::string source;
    std::string reference;
    std::string language_pair;  // e.g. "yor-en"

    bool operator==(const TranslationPayload&) const = default;
};

struct ConstrainedPayload {
    std::vector<std::string> concepts;

    bool operator==(const ConstrainedPayload&) const = default;
};

struct MathPayload {
    std::string problem;
    std::string gold_answer;

    bool operator==(const MathPayload&) const = default;
};

// One benchmark instance. The kind is carried by the payload alternative,
// so a payload/kind mismatch cannot be represented.
struct TaskSpec {
    std::string id;
    std::variant<TranslationPayload, ConstrainedPayload, MathPayload> payload;
    // Text produced by an outside system, used by the paraphrase probe.
    std::string external_text;

    TaskKind kind() const noexcept { return static_cast<TaskKind>(payload.index()); }

    const TranslationPayload& translation() const { return std::get<TranslationPayload>(payload); }
    const ConstrainedPayload& constrained() const { return std::get<ConstrainedPayload>(payload); }
    const MathPayload& math() const { return std::get<MathPayload>(payload); }

    bool operator==(const TaskSpec&) const = default;
};

// Closed score interval of a task. Binary tasks admit only the endpoints.
struct ScoreScale {
    double lo;
    double hi;
    bool binary;

    bool admits(double v) const noexcept;
};

ScoreScale scale_for(TaskKind kind);

// "yor-en" -> {"Yoruba", "English"}; unknown codes pass through unchanged.
std::pair<std::string, std::string> language_names(std::string_view language_pair);

}  // namespace selfbias
