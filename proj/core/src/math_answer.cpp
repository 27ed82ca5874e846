#include <map>
#include <unordered_map>

#include "selfbias/error.hpp"
#include "selfbias/scorers.hpp"
#include "text_util.hpp"

namespace selfbias::scorers {

namespace {

struct BoxSpan {
    std::size_t content_begin;
    std::size_t content_end;  // position of the closing brace
};

// Last top-level \boxed{...}; boxes nested inside another box are part of
// the outer answer.
std::optional<BoxSpan> last_box(std::string_view s) {
    constexpr std::string_view kTag = "\\boxed";
    std::optional<BoxSpan> found;
    std::size_t pos = 0;
    while ((pos = s.find(kTag, pos)) != std::string_view::npos) {
        std::size_t p = pos + kTag.size();
        while (p < s.size() && detail::is_space(s[p])) ++p;
        if (p >= s.size() || s[p] != '{') {
            pos += kTag.size();
            continue;
        }
        int depth = 0;
        std::size_t q = p;
        for (; q < s.size(); ++q) {
            if (s[q] == '{') {
                ++depth;
            } else if (s[q] == '}') {
                if (--depth == 0) break;
            }
        }
        if (q >= s.size()) {
            pos += kTag.size();
            continue;
        }
        found = BoxSpan{p + 1, q};
        pos = q + 1;
    }
    return found;
}

}  // namespace

std::optional<std::string> extract_boxed_answer(std::string_view solution) {
    const auto box = last_box(solution);
    if (!box) return std::nullopt;
    return std::string(detail::trim(solution.substr(box->content_begin, box->content_end - box->content_begin)));
}

std::string replace_boxed_answer(std::string_view solution, std::string_view answer) {
    const auto box = last_box(solution);
    std::string out;
    if (!box) {
        out = std::string(solution);
        if (!out.empty() && !detail::is_space(out.back())) out += ' ';
        out += "\\boxed{";
        out += answer;
        out += '}';
        return out;
    }
    out.reserve(solution.size() + answer.size());
    out.append(solution.substr(0, box->content_begin));
    out.append(answer);
    out.append(solution.substr(box->content_end));
    return out;
}

std::string normalize_answer(std::string_view answer) { return detail::collapse_spaces(answer); }

Vote majority_vote(const std::vector<std::optional<std::string>>& answers) {
    std::vector<std::string> order;
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& a : answers) {
        if (!a) continue;
        auto norm = normalize_answer(*a);
        auto [it, inserted] = counts.try_emplace(norm, 0);
        if (inserted) order.push_back(norm);
        ++it->second;
    }
    if (order.empty()) throw ValidationError("no answers to vote on");
    Vote best{order.front(), counts[order.front()]};
    for (const auto& candidate : order) {
        const auto c = counts[candidate];
        if (c > best.count) best = Vote{candidate, c};
    }
    return best;
}

int consistency_score(std::string_view initial, std::string_view voted) {
    return normalize_answer(initial) == normalize_answer(voted) ? 1 : 0;
}

int exact_match_score(std::string_view answer, std::string_view gold) {
    return normalize_answer(answer) == normalize_answer(gold) ? 1 : 0;
}

}  // namespace selfbias::scorers
