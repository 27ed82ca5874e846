#include <array>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>
#include <openssl/evp.h>

#include "json_codec.hpp"
#include "selfbias/error.hpp"
#include "selfbias/harness.hpp"

namespace selfbias::harness {

namespace {

std::string fmt_number(double v) {
    std::array<char, 64> buf{};
    const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc{}) throw std::logic_error("number formatting failed");
    return std::string(buf.data(), end);
}

ReportRow to_row(int key, const stats::BiasStats& s) {
    return ReportRow{key, s.n, s.bias, s.dskew, s.mean_self, s.mean_true};
}

template <typename Records>
void fill_provenance(ReportMeta& meta, const Records& records) {
    std::set<std::string> tags;
    std::set<std::uint64_t> seeds;
    for (const auto& r : records) {
        tags.insert(r.provider_tag);
        seeds.insert(r.seed);
    }
    meta.provider_tags.assign(tags.begin(), tags.end());
    if (seeds.size() == 1) meta.seed = *seeds.begin();
}

}  // namespace

Report report_from_trajectories(std::span<const Trajectory> trajectories) {
    Report r;
    for (const auto& s : stats::per_iteration_stats(trajectories)) r.rows.push_back(to_row(s.iteration, s.stats));
    fill_provenance(r.meta, trajectories);
    return r;
}

Report report_from_selections(std::span<const SelectionRecord> records) {
    Report r;
    r.key_name = "k";
    std::map<int, std::vector<SelectionRecord>> by_k;
    for (const auto& rec : records) by_k[rec.k].push_back(rec);
    for (const auto& [k, group] : by_k) r.rows.push_back(to_row(k, pipeline::selection_stats(group)));
    fill_provenance(r.meta, records);
    return r;
}

Report report_from_pairs(std::span<const stats::ScorePair> pairs) {
    Report r;
    for (const auto& s : stats::stats_by_iteration(pairs)) r.rows.push_back(to_row(s.iteration, s.stats));
    return r;
}

std::string to_csv(const Report& report) {
    std::string out = report.key_name + ",n,bias,dskew,mean_self,mean_true\n";
    for (const auto& row : report.rows) {
        out += std::to_string(row.key);
        out += ',';
        out += std::to_string(row.n);
        for (double v : {row.bias, row.dskew, row.mean_self, row.mean_true}) {
            out += ',';
            out += fmt_number(v);
        }
        out += '\n';
    }
    return out;
}

std::string to_json(const Report& report) {
    detail::ordered_json j;
    j["key"] = report.key_name;
    j["columns"] = {report.key_name, "n", "bias", "dskew", "mean_self", "mean_true"};
    auto& rows = j["rows"] = detail::ordered_json::array();
    for (const auto& row : report.rows) {
        rows.push_back({row.key, row.n, row.bias, row.dskew, row.mean_self, row.mean_true});
    }
    auto& meta = j["meta"];
    meta["mode"] = report.meta.mode;
    meta["config_hash"] = report.meta.config_hash;
    meta["seed"] = report.meta.seed ? detail::ordered_json(*report.meta.seed) : detail::ordered_json(nullptr);
    meta["provider_tags"] = report.meta.provider_tags;
    if (!report.meta.input_sha256.empty()) meta["input_sha256"] = report.meta.input_sha256;
    return j.dump(2, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
}

void write_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ValidationError("cannot write '" + tmp.string() + "'");
        out << content;
        out.flush();
        if (!out) throw ValidationError("short write to '" + tmp.string() + "'");
    }
    fs::rename(tmp, target);
}

void write_report(const Report& report, const std::string& dir) {
    const std::filesystem::path base(dir);
    write_atomic((base / "report.csv").string(), to_csv(report));
    write_atomic((base / "report.json").string(), to_json(report));
}

std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256 failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += kHex[digest[i] >> 4];
        out += kHex[digest[i] & 0xF];
    }
    return out;
}

}  // namespace selfbias::harness
