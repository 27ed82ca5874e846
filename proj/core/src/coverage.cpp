#include "selfbias/scorers.hpp"
#include "text_util.hpp"

namespace selfbias::scorers {

namespace {

using detail::iequals;
using detail::trim;

bool contains_ci(std::string_view haystack, std::string_view needle) {
    if (needle.empty()) return true;
    if (needle.size() > haystack.size()) return false;
    const auto it = std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end(),
                                [](char a, char b) { return detail::ascii_lower(a) == detail::ascii_lower(b); });
    return it != haystack.end();
}

std::string_view strip_label(std::string_view t) {
    constexpr std::string_view kLabel = "feedback:";
    if (t.size() >= kLabel.size() && iequals(t.substr(0, kLabel.size()), kLabel)) {
        t = trim(t.substr(kLabel.size()));
    }
    return t;
}

bool is_quote(char c) { return c == '\'' || c == '"'; }

std::optional<std::vector<std::string>> parse_list(std::string_view t) {
    if (t.size() < 2 || t.front() != '[' || t.back() != ']') return std::nullopt;
    std::string_view body = t.substr(1, t.size() - 2);
    std::vector<std::string> items;
    std::size_t pos = 0;
    auto skip = [&] {
        while (pos < body.size() && detail::is_space(body[pos])) ++pos;
    };
    skip();
    if (pos == body.size()) return items;
    while (true) {
        skip();
        if (pos >= body.size()) return std::nullopt;
        if (is_quote(body[pos])) {
            const char q = body[pos];
            const auto close = body.find(q, pos + 1);
            if (close == std::string_view::npos) return std::nullopt;
            items.emplace_back(body.substr(pos + 1, close - pos - 1));
            pos = close + 1;
        } else {
            const auto comma = body.find(',', pos);
            const auto end = comma == std::string_view::npos ? body.size() : comma;
            const auto item = trim(body.substr(pos, end - pos));
            if (item.empty()) return std::nullopt;
            items.emplace_back(item);
            pos = end;
        }
        skip();
        if (pos == body.size()) return items;
        if (body[pos] != ',') return std::nullopt;
        ++pos;
        skip();
        // Trailing comma: "['a', ]"
        if (pos == body.size()) return items;
    }
}

}  // namespace

std::vector<std::string> missing_concepts(std::string_view text, const std::vector<std::string>& concepts) {
    std::vector<std::string> missing;
    for (const auto& c : concepts) {
        if (!contains_ci(text, c)) missing.push_back(c);
    }
    return missing;
}

int coverage_score(std::string_view text, const std::vector<std::string>& concepts) {
    for (const auto& c : concepts) {
        if (!contains_ci(text, c)) return 0;
    }
    return 1;
}

CoverageFeedback parse_coverage_feedback(std::string_view text) {
    std::string_view t = strip_label(trim(text));
    if (!t.empty() && t.back() == '.') t = trim(t.substr(0, t.size() - 1));
    std::string_view unquoted = t;
    if (unquoted.size() >= 2 && is_quote(unquoted.front()) && unquoted.back() == unquoted.front()) {
        unquoted = trim(unquoted.substr(1, unquoted.size() - 2));
    }
    if (detail::lower(detail::collapse_spaces(unquoted)) == "all covered") return AllCovered{};
    if (auto items = parse_list(t)) return std::move(*items);
    return UnparseableFeedback{std::string(text)};
}

std::string format_concept_list(const std::vector<std::string>& concepts) {
    std::string out = "[";
    for (std::size_t i = 0; i < concepts.size(); ++i) {
        if (i) out += ", ";
        out += '\'';
        out += concepts[i];
        out += '\'';
    }
    out += ']';
    return out;
}

}  // namespace selfbias::scorers
