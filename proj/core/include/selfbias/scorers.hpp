#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace selfbias::scorers {

// ---------------------------------------------------------------------------
// MQM feedback
//
// Line grammar (one error per line, surrounding whitespace ignored):
//
//   <q> span <q> WS "is" WS ("a" | "an") WS severity WS category ["/" subcategory] WS "error" ["."]
//
// where <q> is any of U+0027 ', U+0022 ", U+2018, U+2019, U+201C, U+201D
// (opening and closing quote need not match), severity is minor, major or
// critical, and keywords are case-insensitive. A line reading "no-error" is
// a clean verdict. Everything else is skipped.
// ---------------------------------------------------------------------------

enum class Severity { minor, major, critical };

enum class MqmCategory {
    accuracy,
    fluency,
    locale_convention,
    style,
    terminology,
    non_translation,
    other,
};

std::string_view to_string(Severity s);
std::string_view to_string(MqmCategory c);

struct MqmError {
    std::string span;
    MqmCategory category = MqmCategory::other;
    // Free token after the slash, e.g. "mistranslation". For categories
    // outside the taxonomy this keeps the original "head/sub" text.
    std::string subcategory;
    Severity severity = Severity::minor;

    bool operator==(const MqmError&) const = default;
};

struct MqmAnnotation {
    std::vector<MqmError> errors;
    std::string raw_text;
    // Non-empty block that yielded no errors and no "no-error" verdict.
    bool parse_warning = false;
};

// Total over arbitrary bytes; never throws.
MqmAnnotation parse_mqm_feedback(std::string_view text);

// -(1 * minor + 5 * major + 5 * critical), floored at -25.
double mqm_score(const MqmAnnotation& annotation);

inline constexpr double kMqmFloor = -25.0;
inline constexpr double kMinorWeight = 1.0;
inline constexpr double kSevereWeight = 5.0;

// Renders an annotation back into the line grammar ("no-error" when empty).
std::string format_mqm(const std::vector<MqmError>& errors);

// ---------------------------------------------------------------------------
// Concept coverage
// ---------------------------------------------------------------------------

// Concepts not found in `text` as ASCII-case-insensitive substrings, in input order.
std::vector<std::string> missing_concepts(std::string_view text, const std::vector<std::string>& concepts);

// 1 when every concept is covered, else 0. An empty concept list is covered.
int coverage_score(std::string_view text, const std::vector<std::string>& concepts);

struct AllCovered {
    bool operator==(const AllCovered&) const = default;
};
struct UnparseableFeedback {
    std::string text;
    bool operator==(const UnparseableFeedback&) const = default;
};
using CoverageFeedback = std::variant<AllCovered, std::vector<std::string>, UnparseableFeedback>;

// Accepts "all covered" or a bracketed list of quoted concepts such as
// "['use', 'lawn']". An optional leading "Feedback:" label is ignored.
CoverageFeedback parse_coverage_feedback(std::string_view text);

// Python-style list literal used in the concept prompts: ['a', 'b'].
std::string format_concept_list(const std::vector<std::string>& concepts);

// ---------------------------------------------------------------------------
// Math answers
// ---------------------------------------------------------------------------

// Contents of the last top-level \boxed{...} in `solution`, trimmed. Nested
// braces are balanced; an unterminated box is ignored. nullopt = no answer.
std::optional<std::string> extract_boxed_answer(std::string_view solution);

// Replaces the contents of the last top-level box, or appends a box when
// the solution has none.
std::string replace_boxed_answer(std::string_view solution, std::string_view answer);

// Trim and collapse internal whitespace runs to one space.
std::string normalize_answer(std::string_view answer);

struct Vote {
    std::string winner;
    std::size_t count = 0;
    bool operator==(const Vote&) const = default;
};

// Plurality over normalized answers, ignoring missing ones; ties go to the
// answer seen first. Throws ValidationError when no answer is present.
Vote majority_vote(const std::vector<std::optional<std::string>>& answers);

int consistency_score(std::string_view initial, std::string_view voted);
int exact_match_score(std::string_view answer, std::string_view gold);

}  // namespace selfbias::scorers
