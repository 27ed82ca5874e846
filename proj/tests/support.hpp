#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "selfbias/task.hpp"

namespace testing {

class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("selfbias-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline selfbias::TaskSpec translation_task(const std::string& id, std::string source = "Bawo ni o se wa?",
                                           std::string reference = "How are you?") {
    return {id, selfbias::TranslationPayload{std::move(source), std::move(reference), "yor-en"}, {}};
}

inline selfbias::TaskSpec concept_task(const std::string& id, std::vector<std::string> concepts) {
    return {id, selfbias::ConstrainedPayload{std::move(concepts)}, {}};
}

inline selfbias::TaskSpec math_task(const std::string& id, std::string problem, std::string gold) {
    return {id, selfbias::MathPayload{std::move(problem), std::move(gold)}, {}};
}

// JSONL dataset of `n` translation tasks s000..s(n-1).
inline std::string translation_dataset(int n) {
    std::string out;
    for (int i = 0; i < n; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "s%03d", i);
        out += std::string(R"({"id":")") + id + R"(","source":"Bawo ni","reference":"Hello","pair":"yor-en"})" + "\n";
    }
    return out;
}

}  // namespace testing
