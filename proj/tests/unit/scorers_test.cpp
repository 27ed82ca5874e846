#include <doctest.h>

#include <random>

#include "selfbias/error.hpp"
#include "selfbias/scorers.hpp"

using namespace selfbias::scorers;

namespace {

MqmAnnotation with_counts(int minor, int major, int critical) {
    MqmAnnotation a;
    for (int i = 0; i < minor; ++i) a.errors.push_back({"m", MqmCategory::fluency, "grammar", Severity::minor});
    for (int i = 0; i < major; ++i) a.errors.push_back({"M", MqmCategory::accuracy, "omission", Severity::major});
    for (int i = 0; i < critical; ++i) a.errors.push_back({"C", MqmCategory::accuracy, "addition", Severity::critical});
    return a;
}

}  // namespace

TEST_SUITE("scorers") {

TEST_CASE("mqm single critical line") {
    const auto a = parse_mqm_feedback("'He locked the WiFi door' is a critical accuracy/mistranslation error");
    REQUIRE(a.errors.size() == 1);
    CHECK(a.errors[0] == MqmError{"He locked the WiFi door", MqmCategory::accuracy, "mistranslation", Severity::critical});
    CHECK_FALSE(a.parse_warning);
}

TEST_CASE("mqm three-line exemplar block") {
    const auto a = parse_mqm_feedback(
        "'of high-speed rail' is a critical accuracy/addition error\n"
        "'go to the reviews' is a major accuracy/mistranslation error\n"
        "\"etc.,\" is a minor style/awkward error\n");
    REQUIRE(a.errors.size() == 3);
    CHECK(a.errors[0] == MqmError{"of high-speed rail", MqmCategory::accuracy, "addition", Severity::critical});
    CHECK(a.errors[1] == MqmError{"go to the reviews", MqmCategory::accuracy, "mistranslation", Severity::major});
    CHECK(a.errors[2] == MqmError{"etc.,", MqmCategory::style, "awkward", Severity::minor});
    CHECK(mqm_score(a) == -11.0);
}

TEST_CASE("mqm typographic and mixed quotes") {
    const auto a = parse_mqm_feedback(
        "\xE2\x80\x98" "door" "\xE2\x80\x99 is a minor fluency/spelling error\n"
        "\xE2\x80\x9C" "it's a \"quoted\" word" "\xE2\x80\x9D is a major terminology/inappropriate error\n"
        "'mixed\" is a minor locale convention/date error");
    REQUIRE(a.errors.size() == 3);
    CHECK(a.errors[0].span == "door");
    CHECK(a.errors[1].span == "it's a \"quoted\" word");
    CHECK(a.errors[1].category == MqmCategory::terminology);
    CHECK(a.errors[2].span == "mixed");
    CHECK(a.errors[2].category == MqmCategory::locale_convention);
}

TEST_CASE("mqm no-error and junk") {
    const auto clean = parse_mqm_feedback("  No-Error  \n");
    CHECK(clean.errors.empty());
    CHECK_FALSE(clean.parse_warning);
    CHECK(mqm_score(clean) == 0.0);

    const auto junk = parse_mqm_feedback("The translation looks fine to me.");
    CHECK(junk.errors.empty());
    CHECK(junk.parse_warning);

    const auto empty = parse_mqm_feedback("");
    CHECK_FALSE(empty.parse_warning);

    const auto unknown = parse_mqm_feedback("'x' is a minor punctuation/comma error");
    REQUIRE(unknown.errors.size() == 1);
    CHECK(unknown.errors[0].category == MqmCategory::other);
    CHECK(unknown.errors[0].subcategory == "punctuation/comma");
}

TEST_CASE("mqm score weights and floor") {
    CHECK(mqm_score(with_counts(1, 2, 0)) == -11.0);
    CHECK(mqm_score(with_counts(0, 0, 6)) == -25.0);
    CHECK(mqm_score(with_counts(0, 0, 0)) == 0.0);
    CHECK(mqm_score(with_counts(3, 0, 1)) == -8.0);
    // adding an error never raises the score
    for (int minor = 0; minor < 8; ++minor) {
        for (int severe = 0; severe < 8; ++severe) {
            const double base = mqm_score(with_counts(minor, severe, 0));
            CHECK(mqm_score(with_counts(minor + 1, severe, 0)) <= base);
            CHECK(mqm_score(with_counts(minor, severe + 1, 0)) <= base);
            CHECK(base >= -25.0);
        }
    }
}

TEST_CASE("mqm format round trip") {
    const auto a = with_counts(2, 1, 1);
    const auto back = parse_mqm_feedback(format_mqm(a.errors));
    CHECK(back.errors == a.errors);
    CHECK(format_mqm({}) == "no-error");
}

TEST_CASE("mqm parser survives random bytes") {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> len(0, 400);
    std::uniform_int_distribution<int> byte(0, 255);
    for (int i = 0; i < 2000; ++i) {
        std::string s(len(rng), '\0');
        for (auto& c : s) c = static_cast<char>(byte(rng));
        const auto a = parse_mqm_feedback(s);
        const double score = mqm_score(a);
        CHECK(score <= 0.0);
        CHECK(score >= -25.0);
    }
}

TEST_CASE("coverage exemplars") {
    const std::vector<std::string> c{"dog", "frisbee", "catch", "throw"};
    CHECK(coverage_score("A dog leaps to catch a thrown frisbee.", c) == 1);
    CHECK(missing_concepts("A dog leaps to catch a thrown frisbee.", c).empty());
    CHECK(coverage_score("Two dogs are throwing frisbees at each other.", c) == 0);
    CHECK(missing_concepts("Two dogs are throwing frisbees at each other.", c) == std::vector<std::string>{"catch"});
    CHECK(coverage_score("anything", {}) == 1);
    CHECK(missing_concepts("bab", {"a"}).empty());
    CHECK(coverage_score("The DOG sleeps", {"dog"}) == 1);
}

TEST_CASE("coverage feedback parsing") {
    CHECK(std::holds_alternative<AllCovered>(parse_coverage_feedback("all covered")));
    CHECK(std::holds_alternative<AllCovered>(parse_coverage_feedback("  All   Covered. ")));
    CHECK(std::get<std::vector<std::string>>(parse_coverage_feedback("['catch']")) == std::vector<std::string>{"catch"});
    CHECK(std::get<std::vector<std::string>>(parse_coverage_feedback("Feedback: ['use', 'lawn']")) ==
          std::vector<std::string>{"use", "lawn"});
    CHECK(std::holds_alternative<UnparseableFeedback>(parse_coverage_feedback("I think it is fine")));
    CHECK(format_concept_list({"use", "lawn"}) == "['use', 'lawn']");
}

TEST_CASE("boxed answers") {
    CHECK(extract_boxed_answer("... The answer is $\\boxed{2}$.") == "2");
    CHECK(extract_boxed_answer("\\boxed{\\frac{1}{2}}") == "\\frac{1}{2}");
    CHECK_FALSE(extract_boxed_answer("no box here").has_value());
    CHECK(extract_boxed_answer("\\boxed{1} then \\boxed{ 3 }") == "3");
    CHECK(extract_boxed_answer("\\boxed{4} and \\boxed{5") == "4");
    for (std::string a : {"x", " y+1 ", "{a}{b}", "\\sqrt{2}"}) {
        CHECK(extract_boxed_answer("\\boxed{" + a + "}") == normalize_answer(a));
    }
    CHECK(replace_boxed_answer("so \\boxed{3}.", "4") == "so \\boxed{4}.");
    CHECK(extract_boxed_answer(replace_boxed_answer("no box", "7")) == "7");
}

TEST_CASE("majority vote") {
    using A = std::vector<std::optional<std::string>>;
    CHECK(majority_vote(A{"2", "2", "3"}) == Vote{"2", 2});
    CHECK(majority_vote(A{"2", "3"}) == Vote{"2", 1});
    CHECK(majority_vote(A{std::nullopt, "5", " 5 "}) == Vote{"5", 2});
    A ten{"7", "7", "7", "7", "7", "7", "1", "2", "3", "1"};
    CHECK(majority_vote(ten) == Vote{"7", 6});
    CHECK_THROWS_AS(majority_vote(A{std::nullopt, std::nullopt}), selfbias::ValidationError);
}

TEST_CASE("consistency and exact match") {
    CHECK(consistency_score("2", "2") == 1);
    CHECK(consistency_score("2", "3") == 0);
    CHECK(consistency_score("1/2", " 1/2 ") == 1);
    CHECK(exact_match_score("0.5", "1/2") == 0);
    CHECK(exact_match_score("a  b", "a b") == 1);
}

}  // TEST_SUITE
