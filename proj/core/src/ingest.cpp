#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "json_codec.hpp"
#include "selfbias/error.hpp"
#include "selfbias/harness.hpp"

namespace selfbias::harness {

namespace {

using nlohmann::json;

template <typename Fn>
void for_each_line(const std::string& path, Fn fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            fn(json::parse(line));
        } catch (const json::exception& e) {
            throw ValidationError(path + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

// Numbers pass through; strings such as "NaN" or "inf" are read so they can
// be rejected as non-finite with the sample id attached.
double score_field(const json& j, const char* field, const std::string& sample_id) {
    if (!j.contains(field)) throw ValidationError(std::string("missing field '") + field + "'");
    const auto& v = j.at(field);
    double out = 0.0;
    if (v.is_number()) {
        out = v.get<double>();
    } else if (v.is_string()) {
        const auto s = v.get<std::string>();
        char* end = nullptr;
        out = std::strtod(s.c_str(), &end);
        if (end == s.c_str()) throw ValidationError(std::string("field '") + field + "' is not a number");
    } else {
        throw ValidationError(std::string("field '") + field + "' of sample '" + sample_id + "' is not a number");
    }
    if (!std::isfinite(out)) {
        throw ValidationError(std::string("non-finite ") + field + " for sample '" + sample_id + "'");
    }
    return out;
}

}  // namespace

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::vector<TaskSpec> load_tasks(const std::string& path, std::optional<TaskKind> kind) {
    std::vector<TaskSpec> tasks;
    std::set<std::string> seen;
    for_each_line(path, [&](const json& j) {
        auto t = detail::task_from_json(j, kind);
        if (!seen.insert(t.id).second) throw ValidationError("duplicate task id '" + t.id + "'");
        if (!tasks.empty() && tasks.front().kind() != t.kind()) {
            throw ValidationError("dataset mixes task kinds");
        }
        tasks.push_back(std::move(t));
    });
    if (tasks.empty()) throw ValidationError("dataset '" + path + "' is empty");
    return tasks;
}

std::vector<stats::ScorePair> ingest_score_pairs(const std::string& path, std::optional<TaskKind> kind) {
    std::vector<stats::ScorePair> pairs;
    for_each_line(path, [&](const json& j) {
        if (!j.is_object()) throw ValidationError("record is not a JSON object");
        stats::ScorePair p;
        if (!j.contains("sample_id") || !j.at("sample_id").is_string()) {
            throw ValidationError("missing string field 'sample_id'");
        }
        p.sample_id = j.at("sample_id").get<std::string>();
        if (!j.contains("iteration") || !j.at("iteration").is_number_integer()) {
            throw ValidationError("missing integer field 'iteration' for sample '" + p.sample_id + "'");
        }
        p.iteration = j.at("iteration").get<int>();
        if (p.iteration < 0) throw ValidationError("negative iteration for sample '" + p.sample_id + "'");
        p.self_score = score_field(j, "self_score", p.sample_id);
        p.true_score = score_field(j, "true_score", p.sample_id);
        if (kind) stats::validate_pair(p, scale_for(*kind));
        pairs.push_back(std::move(p));
    });
    if (pairs.empty()) throw ValidationError("no samples in '" + path + "'");
    return pairs;
}

}  // namespace selfbias::harness
