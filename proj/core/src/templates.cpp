#include "selfbias/templates.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "selfbias/error.hpp"

namespace selfbias::providers {

namespace detail {
const std::vector<std::pair<std::string_view, std::string_view>>& default_template_sources();
}

namespace {

std::string template_name(TaskKind kind, PromptRole role) {
    return std::string(to_string(kind)) + "." + std::string(to_string(role));
}

bool is_slot_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

bool is_known(std::string_view name) {
    const auto& slots = known_slots();
    return std::find(slots.begin(), slots.end(), name) != slots.end();
}

// Calls on_text(segment) for literal text and on_slot(name) for each known
// slot reference, in order.
template <typename OnText, typename OnSlot>
void scan(std::string_view body, OnText on_text, OnSlot on_slot) {
    std::size_t literal_start = 0;
    std::size_t pos = 0;
    while ((pos = body.find('{', pos)) != std::string_view::npos) {
        std::size_t end = pos + 1;
        while (end < body.size() && is_slot_char(body[end])) ++end;
        if (end < body.size() && body[end] == '}' && end > pos + 1) {
            const auto name = body.substr(pos + 1, end - pos - 1);
            if (is_known(name)) {
                on_text(body.substr(literal_start, pos - literal_start));
                on_slot(name);
                pos = end + 1;
                literal_start = pos;
                continue;
            }
        }
        ++pos;
    }
    on_text(body.substr(literal_start));
}

PromptTemplate make_template(std::string_view name, std::string body) {
    const auto dot = name.find('.');
    if (dot == std::string_view::npos) {
        throw TemplateError("template name '" + std::string(name) + "' is not <task>.<role>");
    }
    PromptTemplate t;
    t.name = std::string(name);
    t.task = parse_task_kind(name.substr(0, dot));
    t.role = parse_prompt_role(name.substr(dot + 1));
    // Files end with a newline the prompt should not carry.
    if (body.ends_with("\r\n")) {
        body.resize(body.size() - 2);
    } else if (body.ends_with('\n')) {
        body.pop_back();
    }
    t.body = std::move(body);
    validate_template(t);
    return t;
}

}  // namespace

std::string_view to_string(PromptRole role) {
    switch (role) {
        case PromptRole::initial: return "initial";
        case PromptRole::feedback: return "feedback";
        case PromptRole::refinement: return "refinement";
        case PromptRole::paraphrase: return "paraphrase";
        case PromptRole::annotate: return "annotate";
    }
    return "initial";
}

PromptRole parse_prompt_role(std::string_view name) {
    if (name == "initial") return PromptRole::initial;
    if (name == "feedback") return PromptRole::feedback;
    if (name == "refinement") return PromptRole::refinement;
    if (name == "paraphrase") return PromptRole::paraphrase;
    if (name == "annotate") return PromptRole::annotate;
    throw TemplateError("unknown prompt role '" + std::string(name) + "'");
}

const std::vector<std::string>& known_slots() {
    static const std::vector<std::string> kSlots{"source",    "source_lang", "target_lang",
                                                 "reference", "candidate",   "concepts",
                                                 "previous",  "feedback",    "problem"};
    return kSlots;
}

std::vector<std::string> required_slots(TaskKind kind, PromptRole role) {
    switch (kind) {
        case TaskKind::translation:
            switch (role) {
                case PromptRole::initial: return {"source"};
                case PromptRole::feedback: return {"source", "candidate"};
                case PromptRole::refinement: return {"source", "previous", "feedback"};
                case PromptRole::paraphrase: return {"candidate"};
                case PromptRole::annotate: return {"source", "reference", "candidate"};
            }
            break;
        case TaskKind::constrained_gen:
            switch (role) {
                case PromptRole::initial: return {"concepts"};
                case PromptRole::feedback: return {"concepts", "candidate"};
                case PromptRole::refinement: return {"concepts", "previous", "feedback"};
                case PromptRole::paraphrase: return {"candidate"};
                case PromptRole::annotate: return {"concepts", "candidate"};
            }
            break;
        case TaskKind::math:
            switch (role) {
                case PromptRole::initial: return {"problem"};
                case PromptRole::feedback: return {"problem", "candidate"};
                case PromptRole::refinement: return {"problem", "previous", "feedback"};
                case PromptRole::paraphrase: return {"candidate"};
                case PromptRole::annotate: return {"problem", "candidate"};
            }
            break;
    }
    return {};
}

std::vector<std::string> referenced_slots(std::string_view body) {
    std::vector<std::string> out;
    scan(
        body, [](std::string_view) {},
        [&](std::string_view name) {
            if (std::find(out.begin(), out.end(), name) == out.end()) out.emplace_back(name);
        });
    return out;
}

void validate_template(const PromptTemplate& tmpl) {
    const auto present = referenced_slots(tmpl.body);
    for (const auto& slot : required_slots(tmpl.task, tmpl.role)) {
        if (std::find(present.begin(), present.end(), slot) == present.end()) {
            throw TemplateError("template '" + tmpl.name + "' does not reference required slot {" + slot + "}");
        }
    }
}

std::string render(const PromptTemplate& tmpl, const SlotMap& slots) {
    std::string out;
    out.reserve(tmpl.body.size() + 256);
    scan(
        tmpl.body, [&](std::string_view text) { out.append(text); },
        [&](std::string_view name) {
            const auto it = slots.find(name);
            if (it == slots.end()) {
                throw TemplateError("template '" + tmpl.name + "' needs slot {" + std::string(name) + "}");
            }
            if (it->second.empty()) {
                spdlog::warn("template '{}': slot {{{}}} rendered empty", tmpl.name, name);
            }
            out.append(it->second);
        });
    return out;
}

TemplateSet TemplateSet::defaults() {
    TemplateSet set;
    for (const auto& [name, body] : detail::default_template_sources()) {
        set.put(make_template(name, std::string(body)));
    }
    return set;
}

TemplateSet TemplateSet::with_overrides(const std::string& dir) {
    namespace fs = std::filesystem;
    TemplateSet set = defaults();
    if (!fs::is_directory(dir)) throw TemplateError("template directory '" + dir + "' does not exist");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        std::ifstream in(path, std::ios::binary);
        std::ostringstream body;
        body << in.rdbuf();
        set.put(make_template(path.stem().string(), body.str()));
    }
    return set;
}

const PromptTemplate& TemplateSet::get(TaskKind kind, PromptRole role) const {
    const auto it = by_name_.find(template_name(kind, role));
    if (it == by_name_.end()) throw TemplateError("no template for " + template_name(kind, role));
    return it->second;
}

bool TemplateSet::has(TaskKind kind, PromptRole role) const {
    return by_name_.count(template_name(kind, role)) != 0;
}

void TemplateSet::put(PromptTemplate tmpl) {
    validate_template(tmpl);
    by_name_[tmpl.name] = std::move(tmpl);
}

}  // namespace selfbias::providers
