#include <doctest.h>

#include <atomic>
#include <random>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "selfbias/error.hpp"
#include "selfbias/providers.hpp"
#include "selfbias/scorers.hpp"
#include "selfbias/templates.hpp"
#include "support.hpp"

using namespace selfbias;
using namespace selfbias::providers;

namespace {

CompletionRequest req(std::string sid, int it, std::string role, int index = 0, std::uint64_t seed = 0) {
    return {{std::move(sid), it, std::move(role), index}, "prompt", seed, std::nullopt};
}

// Local chat-completions stub. `plan` lists the status codes to return in
// order; the last one repeats.
class StubServer {
public:
    explicit StubServer(std::vector<int> plan, std::string content = "stub says hi") : plan_(std::move(plan)) {
        server_.Post("/v1/chat/completions", [this, content](const httplib::Request& r, httplib::Response& res) {
            const int n = hits_++;
            last_body_ = r.body;
            last_auth_ = r.get_header_value("Authorization");
            const int status = plan_[std::min<std::size_t>(n, plan_.size() - 1)];
            res.status = status;
            if (status == 200) {
                nlohmann::json j;
                j["choices"] = {{{"message", {{"role", "assistant"}, {"content", content}}}}};
                res.set_content(j.dump(), "application/json");
            } else {
                res.set_content("{\"error\":\"nope\"}", "application/json");
            }
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~StubServer() {
        server_.stop();
        thread_.join();
    }

    ProviderConfig config(int retries) const {
        ProviderConfig c;
        c.kind = ProviderKind::http;
        c.endpoint = "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
        c.model = "stub-model";
        c.max_retries = retries;
        c.timeout_seconds = 5;
        c.backoff_initial_seconds = 0.25;
        c.api_key_env = "SELFBIAS_TEST_KEY";
        return c;
    }

    int hits() const { return hits_; }
    std::string last_body() const { return last_body_; }
    std::string last_auth() const { return last_auth_; }

private:
    httplib::Server server_;
    std::vector<int> plan_;
    std::atomic<int> hits_{0};
    std::string last_body_;
    std::string last_auth_;
    int port_ = 0;
    std::thread thread_;
};

}  // namespace

TEST_SUITE("providers") {

TEST_CASE("provider config validation") {
    ProviderConfig c;
    c.kind = ProviderKind::http;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c.endpoint = "http://x/v1";
    c.model = "m";
    c.validate();
    c.temperature = -1;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c.temperature = 0;
    c.max_retries = -1;
    CHECK_THROWS_AS(c.validate(), ValidationError);

    CHECK_THROWS_AS(ProviderConfig::from_json(R"({"kind":"http","endpoint":"http://x/","model":"m","api_key":"sk"})"),
                    ValidationError);
    const auto parsed = ProviderConfig::from_json(R"({"kind":"http","endpoint":"http://x/","model":"m"})");
    CHECK(parsed.effective_tag() == "http:m");
    CHECK(ProviderConfig::from_json(parsed.to_json()).endpoint == "http://x/");

    CHECK(parse_provider_spec("scripted:a.jsonl").kind == ProviderKind::scripted);
    CHECK(parse_provider_spec("replay:t.jsonl").path == "t.jsonl");
    CHECK_THROWS_AS(parse_provider_spec("bogus"), ValidationError);
}

TEST_CASE("scripted records and missing keys") {
    ScriptedProvider p({{{"s1", 0, "initial", 0}, "hello"}}, std::nullopt, "t");
    CHECK(p.complete(req("s1", 0, "initial")) == "hello");
    CHECK_THROWS_AS(p.complete(req("s1", 1, "initial")), ScenarioError);
    try {
        p.complete(req("s9", 3, "feedback"));
    } catch (const ScenarioError& e) {
        CHECK(std::string(e.what()).find("s9") != std::string::npos);
    }
}

TEST_CASE("scenario file: records win over the rule") {
    testing::TempDir dir;
    const auto path = dir.file("scenario.jsonl");
    testing::write_text(path,
                        "{\"rule\":\"ladder\",\"params\":{\"self_start\":-10,\"self_step\":1}}\n"
                        "{\"sample_id\":\"a\",\"iteration\":0,\"role\":\"initial\",\"text\":\"first\"}\n");
    const auto p = ScriptedProvider::from_file(path, "scripted");
    CHECK(p->complete(req("a", 0, "initial")) == "first");
    CHECK(p->complete(req("b", 0, "initial")).find("candidate b") == 0);
    const auto fb = scorers::parse_mqm_feedback(p->complete(req("a", 3, "feedback")));
    CHECK(scorers::mqm_score(fb) == -7.0);

    testing::write_text(path, "{\"rule\":\"ladder\"}\n{\"rule\":\"constant\"}\n");
    CHECK_THROWS_AS(ScriptedProvider::from_file(path, "x"), ValidationError);
    testing::write_text(path, "{\"sample_id\":\"a\"}\n");
    CHECK_THROWS_AS(ScriptedProvider::from_file(path, "x"), ValidationError);
}

TEST_CASE("gaussian rule is deterministic and role-consistent") {
    ScriptedProvider p({}, GaussianRule{-12.0, 3.0, 0.0}, "g");
    for (int j = 0; j < 20; ++j) {
        const auto self = p.complete(req("s", 0, "feedback", j, 42));
        const auto truth = p.complete(req("s", 0, "annotate", j, 42));
        CHECK(self == truth);  // noise_sd 0
        CHECK(self == p.complete(req("s", 0, "feedback", j, 42)));
    }
    CHECK(p.complete(req("s", 0, "annotate", 0, 1)) != p.complete(req("s", 0, "annotate", 0, 2)));
}

TEST_CASE("mqm feedback for score round trips") {
    for (int s = 0; s >= -25; --s) {
        CHECK(scorers::mqm_score(scorers::parse_mqm_feedback(mqm_feedback_for_score(s))) == s);
    }
    CHECK(mqm_feedback_for_score(0) == "no-error");
}

TEST_CASE("recording provider writes a replayable transcript") {
    auto inner = std::make_shared<ScriptedProvider>(std::map<CallKey, std::string>{}, ConstantRule{}, "c");
    auto transcript = std::make_shared<Transcript>();
    RecordingProvider rec(inner, transcript);
    rec.complete(req("b", 1, "feedback"));
    rec.complete(req("a", 0, "initial"));
    CHECK(transcript->size() == 2);
    const auto jsonl = transcript->to_jsonl();
    CHECK(jsonl.find("\"sample_id\":\"a\"") < jsonl.find("\"sample_id\":\"b\""));

    testing::TempDir dir;
    testing::write_text(dir.file("t.jsonl"), jsonl);
    const auto replay = make_provider(parse_provider_spec("replay:" + dir.file("t.jsonl")));
    CHECK(replay->complete(req("a", 0, "initial")) == "constant output");
    CHECK(replay->tag() == "c");
    CHECK_THROWS_AS(replay->complete(req("z", 0, "initial")), ScenarioError);
}

TEST_CASE("http provider returns the canned body and sends the request shape") {
    StubServer stub({200}, "canned completion");
    ::setenv("SELFBIAS_TEST_KEY", "sk-secret", 1);
    HttpProvider p(stub.config(2));
    CompletionRequest r = req("s1", 0, "initial", 0, 17);
    r.temperature = 0.7;
    CHECK(p.complete(r) == "canned completion");
    CHECK(stub.hits() == 1);
    const auto body = nlohmann::json::parse(stub.last_body());
    CHECK(body["model"] == "stub-model");
    CHECK(body["messages"][0]["content"] == "prompt");
    CHECK(body["temperature"] == 0.7);
    CHECK(body["seed"] == 17);
    CHECK(stub.last_auth() == "Bearer sk-secret");
    ::unsetenv("SELFBIAS_TEST_KEY");
}

TEST_CASE("http provider retries 5xx and 429 with exponential backoff") {
    StubServer stub({503, 429, 200});
    std::vector<long long> sleeps;
    HttpProvider p(stub.config(3), [&](std::chrono::milliseconds d) { sleeps.push_back(d.count()); });
    CHECK(p.complete(req("s", 0, "initial")) == "stub says hi");
    CHECK(stub.hits() == 3);
    CHECK(sleeps == std::vector<long long>{250, 500});
}

TEST_CASE("http provider gives up after max retries") {
    StubServer stub({500});
    int sleeps = 0;
    HttpProvider p(stub.config(2), [&](std::chrono::milliseconds) { ++sleeps; });
    CHECK_THROWS_AS(p.complete(req("s", 0, "initial")), TransportError);
    CHECK(stub.hits() == 3);
    CHECK(sleeps == 2);
}

TEST_CASE("http provider never retries other 4xx") {
    for (int status : {400, 401, 404, 422}) {
        StubServer stub({status});
        HttpProvider p(stub.config(5), [](std::chrono::milliseconds) {});
        try {
            p.complete(req("s", 0, "initial"));
            FAIL("expected TransportError");
        } catch (const TransportError& e) {
            CHECK(e.status() == status);
        }
        CHECK(stub.hits() == 1);
    }
}

TEST_CASE("http provider reports connection failures as transport errors") {
    ProviderConfig c;
    c.kind = ProviderKind::http;
    c.endpoint = "http://127.0.0.1:1/v1/chat/completions";
    c.model = "m";
    c.max_retries = 1;
    c.timeout_seconds = 1;
    int sleeps = 0;
    HttpProvider p(c, [&](std::chrono::milliseconds) { ++sleeps; });
    CHECK_THROWS_AS(p.complete(req("s", 0, "initial")), TransportError);
    CHECK(sleeps == 1);
}

}  // TEST_SUITE

TEST_SUITE("templates") {

TEST_CASE("default templates validate and render") {
    const auto set = TemplateSet::defaults();
    for (auto kind : {TaskKind::translation, TaskKind::constrained_gen}) {
        for (auto role : {PromptRole::initial, PromptRole::feedback, PromptRole::refinement}) {
            REQUIRE(set.has(kind, role));
            validate_template(set.get(kind, role));
        }
    }
    CHECK(set.has(TaskKind::math, PromptRole::initial));
    CHECK(set.has(TaskKind::translation, PromptRole::paraphrase));
    CHECK(set.has(TaskKind::translation, PromptRole::annotate));
}

TEST_CASE("translation feedback ends with the filled annotation request") {
    const auto set = TemplateSet::defaults();
    const auto& t = set.get(TaskKind::translation, PromptRole::feedback);
    const auto out = render(t, {{"source", "Bawo ni"}, {"candidate", "Hello"}, {"source_lang", "Yoruba"},
                                {"target_lang", "English"}});
    const std::string tail =
        "Source: ```Bawo ni``` Translation: ```Hello``` Annotate errors in the translation. MQM annotations:";
    REQUIRE(out.size() >= tail.size());
    CHECK(out.substr(out.size() - tail.size()) == tail);
}

TEST_CASE("every exemplar annotation line in the feedback prompt parses") {
    const auto set = TemplateSet::defaults();
    const auto& body = set.get(TaskKind::translation, PromptRole::feedback).body;
    const auto a = scorers::parse_mqm_feedback(body);
    CHECK(a.errors.size() == 10);
    CHECK(a.errors.back() ==
          scorers::MqmError{"partaje", scorers::MqmCategory::terminology, "inappropriate for context",
                            scorers::Severity::minor});
}

TEST_CASE("translation initial prompt names the languages") {
    const auto set = TemplateSet::defaults();
    const auto& t = set.get(TaskKind::translation, PromptRole::initial);
    const auto out = render(t, {{"source", "Bawo ni"}, {"source_lang", "Yoruba"}, {"target_lang", "English"}});
    CHECK(out.find("Translate Yoruba text into English.") != std::string::npos);
    CHECK(out.find("Yoruba: Bawo ni") != std::string::npos);
}

TEST_CASE("refinement prompt asks to fix the errors") {
    const auto set = TemplateSet::defaults();
    const auto& t = set.get(TaskKind::translation, PromptRole::refinement);
    SlotMap slots{{"source", "S"}, {"previous", "P"}, {"feedback", "'P' is a minor style/awkward error"},
                  {"source_lang", "Yoruba"}, {"target_lang", "English"}};
    const auto out = render(t, slots);
    CHECK(out.find("Please fix all errors.") != std::string::npos);
    CHECK(out.find("'P' is a minor style/awkward error") != std::string::npos);
}

TEST_CASE("render: missing slot, empty slot, no re-expansion, unknown braces kept") {
    PromptTemplate t{"x.initial", TaskKind::translation, PromptRole::initial, "A {source} B {candidate} {json}"};
    CHECK_THROWS_AS(render(t, {{"source", "s"}}), TemplateError);
    CHECK(render(t, {{"source", ""}, {"candidate", "c"}}) == "A  B c {json}");
    CHECK(render(t, {{"source", "{candidate}"}, {"candidate", "c"}}) == "A {candidate} B c {json}");
    CHECK(referenced_slots(t.body) == std::vector<std::string>{"source", "candidate"});

    PromptTemplate bad{"translation.feedback", TaskKind::translation, PromptRole::feedback, "only {source}"};
    CHECK_THROWS_AS(validate_template(bad), TemplateError);
}

TEST_CASE("render is injective in slot content") {
    PromptTemplate t{"x", TaskKind::translation, PromptRole::initial, "<{source}|{candidate}>"};
    std::mt19937 rng(1);
    std::uniform_int_distribution<int> ch('a', 'e');
    std::uniform_int_distribution<int> len(0, 6);
    auto word = [&] {
        std::string s(len(rng), 'a');
        for (auto& c : s) c = static_cast<char>(ch(rng));
        return s;
    };
    for (int i = 0; i < 500; ++i) {
        const auto a1 = word(), b1 = word(), a2 = word(), b2 = word();
        const auto r1 = render(t, {{"source", a1}, {"candidate", b1}});
        const auto r2 = render(t, {{"source", a2}, {"candidate", b2}});
        CHECK((r1 == r2) == (a1 == a2 && b1 == b2));
    }
}

TEST_CASE("override directory replaces a template") {
    testing::TempDir dir;
    testing::write_text(dir.file("translation.initial.txt"), "Translate: {source}");
    const auto set = TemplateSet::with_overrides(dir.path().string());
    CHECK(set.get(TaskKind::translation, PromptRole::initial).body == "Translate: {source}");
    testing::write_text(dir.file("translation.feedback.txt"), "no slots at all");
    CHECK_THROWS_AS(TemplateSet::with_overrides(dir.path().string()), TemplateError);
}

}  // TEST_SUITE
