#include <doctest.h>

#include <array>
#include <cstdio>
#include <sys/wait.h>

#include "support.hpp"

namespace {

struct Result {
    int status = -1;
    std::string out;
};

// Runs the CLI with `args`; stdout captured, stderr to `err_file`.
Result cli(const std::string& args, const std::string& err_file = "/dev/null") {
    const std::string cmd = std::string(SELFBIAS_CLI) + " " + args + " 2>" + err_file;
    Result r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
    const int raw = ::pclose(pipe);
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return r;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("run, score and report agree on a ladder scenario") {
    testing::TempDir dir;
    testing::write_text(dir.file("ds.jsonl"), testing::translation_dataset(10));
    testing::write_text(dir.file("ladder.jsonl"), R"({"rule":"ladder","params":{"self_start":-10,"self_step":1}})" "\n");
    const auto run = cli("run --mode self-refine --dataset " + dir.file("ds.jsonl") + " --provider scripted:" +
                         dir.file("ladder.jsonl") + " --iterations 10 --out " + dir.file("out"));
    REQUIRE(run.status == 0);
    CHECK(run.out.find("10,10,10,1,0,-10\n") != std::string::npos);

    const auto score = cli("score --trajectories " + dir.file("out/trajectories.jsonl"));
    CHECK(score.status == 0);
    CHECK(score.out == testing::read_text(dir.file("out/report.csv")));

    const auto report = cli("report --trajectories " + dir.file("out/trajectories.jsonl") + " --out " + dir.file("rep"));
    CHECK(report.status == 0);
    CHECK(testing::read_text(dir.file("rep/report.csv")) == score.out);
    const auto again = cli("report --trajectories " + dir.file("out/trajectories.jsonl") + " --out " + dir.file("rep2"));
    CHECK(testing::read_text(dir.file("rep/report.json")) == testing::read_text(dir.file("rep2/report.json")));

    CHECK(cli("validate --trajectories " + dir.file("out/trajectories.jsonl")).status == 0);
    CHECK(cli("validate --dataset " + dir.file("ds.jsonl") + " --task translation").status == 0);
}

TEST_CASE("calibrate fit then apply round-trips sample points") {
    testing::TempDir dir;
    std::string src, tgt;
    for (int i = 0; i <= 10; ++i) {
        src += "{\"metric_score\":" + std::to_string(i / 10.0) + "}\n";
        tgt += "{\"human_score\":" + std::to_string(-25 + 2.5 * i) + "}\n";
    }
    testing::write_text(dir.file("s.jsonl"), src);
    testing::write_text(dir.file("t.jsonl"), tgt);
    REQUIRE(cli("calibrate fit --source " + dir.file("s.jsonl") + " --target " + dir.file("t.jsonl") + " --out " +
                dir.file("map.json"))
                .status == 0);
    const auto v = cli("calibrate apply --map " + dir.file("map.json") + " --value 0.3");
    CHECK(v.status == 0);
    CHECK(std::stod(v.out) == doctest::Approx(-17.5));
    const auto applied = cli("calibrate apply --map " + dir.file("map.json") + " --input " + dir.file("s.jsonl"));
    CHECK(applied.out.find("\"calibrated_score\":-25.0") != std::string::npos);
    CHECK(applied.out.find("\"calibrated_score\":0.0") != std::string::npos);
    CHECK(cli("validate --map " + dir.file("map.json")).status == 0);
}

TEST_CASE("errors exit non-zero with a message on stderr") {
    testing::TempDir dir;
    const auto err = dir.file("err.txt");
    CHECK(cli("run --bogus-flag", err).status != 0);
    CHECK_FALSE(testing::read_text(err).empty());
    testing::write_text(dir.file("ds.jsonl"), testing::translation_dataset(2));
    const auto r = cli("run --mode nope --dataset " + dir.file("ds.jsonl") + " --provider scripted:x", err);
    CHECK(r.status != 0);
    CHECK(testing::read_text(err).find("error:") != std::string::npos);
    CHECK(cli("score --pairs " + dir.file("ds.jsonl"), err).status != 0);
    CHECK(cli("", err).status != 0);
}

}  // TEST_SUITE
