#include "selfbias/trajectory.hpp"

#include <fstream>

#include "json_codec.hpp"
#include "selfbias/error.hpp"

namespace selfbias {

namespace detail {

namespace {

template <typename T>
T required(const nlohmann::json& j, const char* field) {
    if (!j.contains(field)) throw ValidationError(std::string("missing field '") + field + "'");
    try {
        return j.at(field).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ValidationError(std::string("field '") + field + "' has the wrong type");
    }
}

}  // namespace

ordered_json task_to_json(const TaskSpec& task) {
    ordered_json j;
    j["kind"] = std::string(to_string(task.kind()));
    j["id"] = task.id;
    switch (task.kind()) {
        case TaskKind::translation:
            j["source"] = task.translation().source;
            j["reference"] = task.translation().reference;
            j["pair"] = task.translation().language_pair;
            break;
        case TaskKind::constrained_gen: j["concepts"] = task.constrained().concepts; break;
        case TaskKind::math:
            j["problem"] = task.math().problem;
            j["gold_answer"] = task.math().gold_answer;
            break;
    }
    if (!task.external_text.empty()) j["external_text"] = task.external_text;
    return j;
}

TaskSpec task_from_json(const nlohmann::json& j, std::optional<TaskKind> declared) {
    if (!j.is_object()) throw ValidationError("task record is not a JSON object");
    TaskKind kind;
    if (j.contains("kind")) {
        kind = parse_task_kind(required<std::string>(j, "kind"));
        if (declared && *declared != kind) {
            throw ValidationError("record kind '" + std::string(to_string(kind)) + "' does not match declared '" +
                                  std::string(to_string(*declared)) + "'");
        }
    } else if (declared) {
        kind = *declared;
    } else {
        throw ValidationError("missing field 'kind'");
    }

    TaskSpec t;
    t.id = required<std::string>(j, "id");
    if (t.id.empty()) throw ValidationError("empty task id");
    switch (kind) {
        case TaskKind::translation: {
            TranslationPayload p;
            p.source = required<std::string>(j, "source");
            p.reference = j.contains("reference") ? required<std::string>(j, "reference") : std::string();
            p.language_pair = j.contains("pair") ? required<std::string>(j, "pair") : std::string("yor-en");
            t.payload = std::move(p);
            break;
        }
        case TaskKind::constrained_gen:
            t.payload = ConstrainedPayload{required<std::vector<std::string>>(j, "concepts")};
            break;
        case TaskKind::math:
            t.payload = MathPayload{required<std::string>(j, "problem"), required<std::string>(j, "gold_answer")};
            break;
    }
    if (j.contains("external_text")) t.external_text = required<std::string>(j, "external_text");
    return t;
}

}  // namespace detail

namespace {

using detail::ordered_json;
using nlohmann::json;

template <typename T, typename Parse>
std::vector<T> read_lines(const std::string& path, Parse parse) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::vector<T> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(parse(line));
        } catch (const ValidationError& e) {
            throw ValidationError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

json parse_json(std::string_view line) {
    try {
        return json::parse(line);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid JSON: ") + e.what());
    }
}

}  // namespace

std::optional<std::size_t> select_best(const std::vector<SelectionCandidate>& candidates) {
    if (candidates.empty()) return std::nullopt;
    std::size_t best = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        if (candidates[i].self_score > candidates[best].self_score) best = i;
    }
    return best;
}

std::string to_json_line(const Trajectory& t) {
    ordered_json j;
    j["sample_id"] = t.sample_id;
    j["task"] = detail::task_to_json(t.task);
    j["provider_tag"] = t.provider_tag;
    j["seed"] = t.seed;
    auto& its = j["iterations"] = ordered_json::array();
    for (const auto& r : t.iterations) {
        ordered_json rec;
        rec["index"] = r.index;
        rec["candidate_text"] = r.candidate_text;
        rec["feedback_text"] = r.feedback_text;
        rec["self_score"] = r.self_score;
        rec["true_score"] = r.true_score;
        rec["accepted"] = r.accepted;
        if (!r.note.empty()) rec["note"] = r.note;
        its.push_back(std::move(rec));
    }
    if (t.error) j["error"] = ordered_json{{"iteration", t.error->iteration}, {"message", t.error->message}};
    return detail::dump(j);
}

std::string to_json_line(const SelectionRecord& r) {
    ordered_json j;
    j["sample_id"] = r.sample_id;
    j["task"] = detail::task_to_json(r.task);
    j["k"] = r.k;
    j["provider_tag"] = r.provider_tag;
    j["seed"] = r.seed;
    auto& cs = j["candidates"] = ordered_json::array();
    for (const auto& c : r.candidates) {
        cs.push_back(ordered_json{{"text", c.text},
                                  {"feedback_text", c.feedback_text},
                                  {"self_score", c.self_score},
                                  {"true_score", c.true_score}});
    }
    j["selected_index"] = r.selected_index ? ordered_json(*r.selected_index) : ordered_json(nullptr);
    if (!r.note.empty()) j["note"] = r.note;
    return detail::dump(j);
}

Trajectory trajectory_from_json(std::string_view line) {
    const json j = parse_json(line);
    try {
        Trajectory t;
        t.sample_id = j.at("sample_id").get<std::string>();
        t.task = detail::task_from_json(j.at("task"), std::nullopt);
        t.provider_tag = j.value("provider_tag", std::string());
        t.seed = j.value("seed", std::uint64_t{0});
        int expected = 0;
        for (const auto& rec : j.at("iterations")) {
            IterationRecord r;
            r.index = rec.at("index").get<int>();
            if (r.index != expected++) throw ValidationError("iteration indices must be contiguous from 0");
            r.candidate_text = rec.at("candidate_text").get<std::string>();
            r.feedback_text = rec.at("feedback_text").get<std::string>();
            r.self_score = rec.at("self_score").get<double>();
            r.true_score = rec.at("true_score").get<double>();
            r.accepted = rec.at("accepted").get<bool>();
            r.note = rec.value("note", std::string());
            t.iterations.push_back(std::move(r));
        }
        if (!t.iterations.empty() && !t.iterations.front().accepted) {
            throw ValidationError("iteration 0 must be accepted");
        }
        if (j.contains("error")) {
            t.error = TrajectoryError{j["error"].at("iteration").get<int>(), j["error"].at("message").get<std::string>()};
        }
        if (t.iterations.empty() && !t.error) throw ValidationError("trajectory has no iterations");
        return t;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed trajectory: ") + e.what());
    }
}

SelectionRecord selection_from_json(std::string_view line) {
    const json j = parse_json(line);
    try {
        SelectionRecord r;
        r.sample_id = j.at("sample_id").get<std::string>();
        r.task = detail::task_from_json(j.at("task"), std::nullopt);
        r.k = j.at("k").get<int>();
        if (r.k < 1) throw ValidationError("k must be >= 1");
        r.provider_tag = j.value("provider_tag", std::string());
        r.seed = j.value("seed", std::uint64_t{0});
        for (const auto& c : j.at("candidates")) {
            r.candidates.push_back(SelectionCandidate{c.at("text").get<std::string>(),
                                                      c.value("feedback_text", std::string()),
                                                      c.at("self_score").get<double>(),
                                                      c.at("true_score").get<double>()});
        }
        if (!j.at("selected_index").is_null()) {
            r.selected_index = j.at("selected_index").get<std::size_t>();
            if (*r.selected_index >= r.candidates.size()) throw ValidationError("selected_index out of range");
        }
        r.note = j.value("note", std::string());
        return r;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed selection record: ") + e.what());
    }
}

std::vector<Trajectory> read_trajectories(const std::string& path) {
    return read_lines<Trajectory>(path, [](const std::string& l) { return trajectory_from_json(l); });
}

std::vector<SelectionRecord> read_selections(const std::string& path) {
    return read_lines<SelectionRecord>(path, [](const std::string& l) { return selection_from_json(l); });
}

}  // namespace selfbias
