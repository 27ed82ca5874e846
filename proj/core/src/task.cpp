#include "selfbias/task.hpp"

#include <array>
#include <cmath>

#include "selfbias/error.hpp"

namespace selfbias {

std::string_view to_string(TaskKind kind) {
    switch (kind) {
        case TaskKind::translation: return "translation";
        case TaskKind::constrained_gen: return "constrained_gen";
        case TaskKind::math: return "math";
    }
    return "unknown";
}

TaskKind parse_task_kind(std::string_view name) {
    if (name == "translation" || name == "mt") return TaskKind::translation;
    if (name == "constrained_gen" || name == "constrained-gen" || name == "commongen") {
        return TaskKind::constrained_gen;
    }
    if (name == "math") return TaskKind::math;
    throw ValidationError("unknown task kind '" + std::string(name) + "'");
}

bool ScoreScale::admits(double v) const noexcept {
    if (!std::isfinite(v)) return false;
    if (binary) return v == lo || v == hi;
    return v >= lo && v <= hi;
}

ScoreScale scale_for(TaskKind kind) {
    if (kind == TaskKind::translation) return {-25.0, 0.0, false};
    return {0.0, 1.0, true};
}

std::pair<std::string, std::string> language_names(std::string_view language_pair) {
    struct Entry {
        std::string_view code;
        std::string_view name;
    };
    static constexpr std::array<Entry, 18> kNames{{
        {"yor", "Yoruba"},   {"yo", "Yoruba"},    {"jav", "Javanese"}, {"jv", "Javanese"},
        {"hye", "Armenian"}, {"arm", "Armenian"}, {"hy", "Armenian"},  {"ibo", "Igbo"},
        {"ig", "Igbo"},      {"en", "English"},   {"eng", "English"},  {"zh", "Chinese"},
        {"zho", "Chinese"},  {"de", "German"},    {"deu", "German"},   {"cs", "Czech"},
        {"ces", "Czech"},    {"fr", "French"},
    }};
    auto lookup = [](std::string_view code) {
        for (const auto& e : kNames) {
            if (e.code == code) return std::string(e.name);
        }
        return std::string(code);
    };
    const auto dash = language_pair.find('-');
    if (dash == std::string_view::npos) return {lookup(language_pair), "English"};
    return {lookup(language_pair.substr(0, dash)), lookup(language_pair.substr(dash + 1))};
}

}  // namespace selfbias
