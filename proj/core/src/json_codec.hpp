#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "selfbias/task.hpp"

namespace selfbias::detail {

using ordered_json = nlohmann::ordered_json;

inline std::string dump(const ordered_json& j) {
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

ordered_json task_to_json(const TaskSpec& task);

// Builds a TaskSpec from a dataset or trajectory record. When `declared` is
// set it must agree with any "kind" field; otherwise "kind" is required.
// Throws ValidationError describing the missing or mistyped field.
TaskSpec task_from_json(const nlohmann::json& j, std::optional<TaskKind> declared);

}  // namespace selfbias::detail
