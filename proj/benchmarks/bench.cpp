#include <benchmark/benchmark.h>

#include <random>

#include "selfbias/calibrate.hpp"
#include "selfbias/pipeline.hpp"
#include "selfbias/scorers.hpp"
#include "selfbias/stats.hpp"
#include "selfbias/templates.hpp"

using namespace selfbias;

namespace {

std::vector<double> random_vector(std::size_t n) {
    std::mt19937_64 rng(n);
    std::normal_distribution<double> d(1.0, 4.0);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

double dskew_double_loop(const std::vector<double>& x) {
    double num = 0.0, den = 0.0;
    for (double a : x) {
        for (double b : x) {
            num += std::fabs(a - b);
            den += std::fabs(a + b);
        }
    }
    return den == 0.0 ? 0.0 : 1.0 - num / den;
}

TaskSpec task() { return {"s0", TranslationPayload{"Bawo ni o se wa?", "How are you?", "yor-en"}, {}}; }

}  // namespace

static void BM_DistanceSkewness(benchmark::State& state) {
    const auto x = random_vector(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(stats::distance_skewness(x));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_DistanceSkewness)->RangeMultiplier(4)->Range(16, 16384)->Complexity();

static void BM_DistanceSkewnessDoubleLoop(benchmark::State& state) {
    const auto x = random_vector(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(dskew_double_loop(x));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_DistanceSkewnessDoubleLoop)->RangeMultiplier(4)->Range(16, 4096)->Complexity();

static void BM_ParseMqm(benchmark::State& state) {
    const std::string block =
        "'of high-speed rail' is a critical accuracy/addition error\n"
        "'go to the reviews' is a major accuracy/mistranslation error\n"
        "\"etc.,\" is a minor style/awkward error\n";
    for (auto _ : state) benchmark::DoNotOptimize(scorers::parse_mqm_feedback(block));
}
BENCHMARK(BM_ParseMqm);

static void BM_QuantileApply(benchmark::State& state) {
    auto src = random_vector(10001);
    auto tgt = random_vector(10000);
    const auto map = calibrate::fit_quantile_map(src, tgt);
    double v = -3.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(map.apply(v));
        v = v > 5.0 ? -3.0 : v + 0.001;
    }
}
BENCHMARK(BM_QuantileApply);

static void BM_RenderFeedbackPrompt(benchmark::State& state) {
    const auto set = providers::TemplateSet::defaults();
    const auto& tmpl = set.get(TaskKind::translation, providers::PromptRole::feedback);
    auto slots = pipeline::task_slots(task());
    slots["candidate"] = "How are you doing?";
    for (auto _ : state) benchmark::DoNotOptimize(providers::render(tmpl, slots));
}
BENCHMARK(BM_RenderFeedbackPrompt);

static void BM_BestOfK32Scripted(benchmark::State& state) {
    auto gen = std::make_shared<providers::ScriptedProvider>(std::map<providers::CallKey, std::string>{},
                                                             providers::GaussianRule{}, "g");
    const auto templates = providers::TemplateSet::defaults();
    pipeline::AnnotatorScorer truth(gen, templates);
    const auto t = task();
    pipeline::PipelineOptions opt;
    for (auto _ : state) {
        benchmark::DoNotOptimize(pipeline::run_best_of_k(t, *gen, *gen, truth, templates, 32, opt));
        ++opt.seed;
    }
}
BENCHMARK(BM_BestOfK32Scripted);

BENCHMARK_MAIN();
