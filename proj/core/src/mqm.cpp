#include <algorithm>
#include <optional>

#include "selfbias/scorers.hpp"
#include "text_util.hpp"

namespace selfbias::scorers {

namespace {

using detail::iequals;
using detail::is_space;
using detail::trim;

// Byte length of the quote character starting at s[pos], or 0.
std::size_t quote_len(std::string_view s, std::size_t pos) {
    if (pos >= s.size()) return 0;
    const char c = s[pos];
    if (c == '\'' || c == '"') return 1;
    if (pos + 2 < s.size() && static_cast<unsigned char>(c) == 0xE2 &&
        static_cast<unsigned char>(s[pos + 1]) == 0x80) {
        const auto third = static_cast<unsigned char>(s[pos + 2]);
        if (third == 0x98 || third == 0x99 || third == 0x9C || third == 0x9D) return 3;
    }
    return 0;
}

std::size_t skip_spaces(std::string_view s, std::size_t pos) {
    while (pos < s.size() && is_space(s[pos])) ++pos;
    return pos;
}

// Reads a run of non-space bytes starting at pos.
std::string_view word_at(std::string_view s, std::size_t pos) {
    std::size_t end = pos;
    while (end < s.size() && !is_space(s[end])) ++end;
    return s.substr(pos, end - pos);
}

// Matches WS+ "is" WS+ ("a"|"an") WS+ at pos; returns the offset after it.
std::optional<std::size_t> match_is_a(std::string_view s, std::size_t pos) {
    std::size_t p = skip_spaces(s, pos);
    if (p == pos) return std::nullopt;
    if (!iequals(word_at(s, p), "is")) return std::nullopt;
    p += 2;
    std::size_t q = skip_spaces(s, p);
    if (q == p) return std::nullopt;
    const auto article = word_at(s, q);
    if (!iequals(article, "a") && !iequals(article, "an")) return std::nullopt;
    q += article.size();
    const std::size_t r = skip_spaces(s, q);
    if (r == q) return std::nullopt;
    return r;
}

std::optional<Severity> parse_severity(std::string_view w) {
    if (iequals(w, "minor")) return Severity::minor;
    if (iequals(w, "major")) return Severity::major;
    if (iequals(w, "critical")) return Severity::critical;
    return std::nullopt;
}

MqmCategory classify(const std::string& head) {
    if (head == "accuracy") return MqmCategory::accuracy;
    if (head == "fluency") return MqmCategory::fluency;
    if (head == "locale convention" || head == "locale") return MqmCategory::locale_convention;
    if (head == "style") return MqmCategory::style;
    if (head == "terminology") return MqmCategory::terminology;
    if (head == "non-translation" || head == "non translation") return MqmCategory::non_translation;
    return MqmCategory::other;
}

// Parses "severity category[/sub] error[.]" after the "is a" marker.
std::optional<MqmError> parse_tail(std::string_view tail) {
    tail = trim(tail);
    if (!tail.empty() && tail.back() == '.') tail = trim(tail.substr(0, tail.size() - 1));
    if (tail.size() < 5 || !iequals(tail.substr(tail.size() - 5), "error")) return std::nullopt;
    std::string_view body = tail.substr(0, tail.size() - 5);
    if (body.empty() || !is_space(body.back())) return std::nullopt;
    body = trim(body);

    const auto sev_word = word_at(body, 0);
    const auto severity = parse_severity(sev_word);
    if (!severity) return std::nullopt;
    body = trim(body.substr(sev_word.size()));
    if (body.empty()) return std::nullopt;

    MqmError err;
    err.severity = *severity;
    const auto slash = body.find('/');
    const std::string head = detail::lower(detail::collapse_spaces(body.substr(0, slash)));
    const std::string sub =
        slash == std::string_view::npos ? std::string() : detail::collapse_spaces(body.substr(slash + 1));
    if (head.empty()) return std::nullopt;
    err.category = classify(head);
    if (err.category == MqmCategory::other && head != "other") {
        err.subcategory = detail::collapse_spaces(body);
    } else {
        err.subcategory = sub;
    }
    return err;
}

std::optional<MqmError> parse_line(std::string_view line) {
    const std::size_t open = quote_len(line, 0);
    if (open == 0) return std::nullopt;
    // Try closing quotes right to left so spans may themselves contain
    // quotes or the words "is a".
    for (std::size_t pos = line.size(); pos-- > open + 1;) {
        const std::size_t close = quote_len(line, pos);
        if (close == 0) continue;
        const auto after = match_is_a(line, pos + close);
        if (!after) continue;
        auto err = parse_tail(line.substr(*after));
        if (!err) continue;
        err->span = std::string(line.substr(open, pos - open));
        if (err->span.empty()) continue;
        return err;
    }
    return std::nullopt;
}

}  // namespace

std::string_view to_string(Severity s) {
    switch (s) {
        case Severity::minor: return "minor";
        case Severity::major: return "major";
        case Severity::critical: return "critical";
    }
    return "minor";
}

std::string_view to_string(MqmCategory c) {
    switch (c) {
        case MqmCategory::accuracy: return "accuracy";
        case MqmCategory::fluency: return "fluency";
        case MqmCategory::locale_convention: return "locale convention";
        case MqmCategory::style: return "style";
        case MqmCategory::terminology: return "terminology";
        case MqmCategory::non_translation: return "non-translation";
        case MqmCategory::other: return "other";
    }
    return "other";
}

MqmAnnotation parse_mqm_feedback(std::string_view text) {
    MqmAnnotation ann;
    ann.raw_text = std::string(text);
    bool clean_verdict = false;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        const auto line = trim(text.substr(start, end - start));
        start = end + 1;
        if (line.empty()) continue;
        if (iequals(line, "no-error")) {
            clean_verdict = true;
            continue;
        }
        if (auto err = parse_line(line)) ann.errors.push_back(std::move(*err));
    }
    ann.parse_warning = ann.errors.empty() && !clean_verdict && !trim(text).empty();
    return ann;
}

double mqm_score(const MqmAnnotation& annotation) {
    double penalty = 0.0;
    for (const auto& e : annotation.errors) {
        penalty += e.severity == Severity::minor ? kMinorWeight : kSevereWeight;
    }
    return std::max(kMqmFloor, -penalty);
}

std::string format_mqm(const std::vector<MqmError>& errors) {
    if (errors.empty()) return "no-error";
    std::string out;
    for (const auto& e : errors) {
        if (!out.empty()) out += '\n';
        out += '\'';
        out += e.span;
        out += "' is a ";
        out += to_string(e.severity);
        out += ' ';
        if (e.category == MqmCategory::other && !e.subcategory.empty() && e.subcategory.find('/') != std::string::npos) {
            out += e.subcategory;
        } else {
            out += to_string(e.category);
            if (!e.subcategory.empty()) {
                out += '/';
                out += e.subcategory;
            }
        }
        out += " error";
    }
    return out;
}

}  // namespace selfbias::scorers
