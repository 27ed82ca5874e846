#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "selfbias/task.hpp"

namespace selfbias::providers {

enum class PromptRole { initial, feedback, refinement, paraphrase, annotate };

std::string_view to_string(PromptRole role);
PromptRole parse_prompt_role(std::string_view name);

// Slot names a template may reference, written "{name}" in the body:
// source, source_lang, target_lang, reference, candidate, concepts,
// previous, feedback, problem. Other brace groups are left untouched.
const std::vector<std::string>& known_slots();

// Slots a template for (kind, role) must reference.
std::vector<std::string> required_slots(TaskKind kind, PromptRole role);

struct PromptTemplate {
    std::string name;  // "<task>.<role>", e.g. "translation.feedback"
    TaskKind task = TaskKind::translation;
    PromptRole role = PromptRole::initial;
    std::string body;
};

using SlotMap = std::map<std::string, std::string, std::less<>>;

// Known slot names referenced by `body`, in first-appearance order.
std::vector<std::string> referenced_slots(std::string_view body);

// Throws TemplateError when a required slot for the role is absent.
void validate_template(const PromptTemplate& tmpl);

// Single-pass substitution of every known slot referenced by the body. Slot
// values are inserted verbatim and never re-expanded. A referenced slot
// missing from `slots` is a TemplateError; an empty value is allowed and
// logged.
std::string render(const PromptTemplate& tmpl, const SlotMap& slots);

class TemplateSet {
public:
    // The prompts compiled into the library.
    static TemplateSet defaults();
    // Defaults overlaid with every "<task>.<role>.txt" file found in `dir`.
    static TemplateSet with_overrides(const std::string& dir);

    const PromptTemplate& get(TaskKind kind, PromptRole role) const;
    bool has(TaskKind kind, PromptRole role) const;
    void put(PromptTemplate tmpl);

private:
    std::map<std::string, PromptTemplate> by_name_;
};

}  // namespace selfbias::providers
