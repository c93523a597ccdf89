#include <catch2/catch_amalgamated.hpp>

#include <felix/align.hpp>
#include <felix/edit.hpp>

#include "helpers.hpp"

#include <random>

using felix::AlignmentConfig;
using felix::SpanMode;
using felix::Tag;
using felix::TokenSeq;
using testutil::toks;

namespace {

// Maximum source-ordered kept set over any target subsequence is the LCS.
int lcs_oracle(const TokenSeq& a, const TokenSeq& b) {
    std::vector<std::vector<int>> d(a.size() + 1,
                                    std::vector<int>(b.size() + 1, 0));
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            d[i][j] = a[i - 1] == b[j - 1]
                          ? d[i - 1][j - 1] + 1
                          : std::max(d[i - 1][j], d[i][j - 1]);
        }
    }
    return d[a.size()][b.size()];
}

int kept_count(const felix::EditPlan& plan) {
    int kept = 0;
    for (const Tag& t : plan.tags) kept += t.is_keep() ? 1 : 0;
    return kept;
}

}  // namespace

TEST_CASE("figure-2 pair aligns to the published tags and pointers") {
    const TokenSeq src = toks("The big very loud cat");
    const TokenSeq tgt = toks("The noisy large cat");
    AlignmentConfig cfg;
    cfg.mode = SpanMode::Masking;

    const auto out = felix::align(src, tgt, cfg);
    REQUIRE(out.ok());
    const auto& plan = *out.plan;
    REQUIRE(plan.tags.size() == 5);
    CHECK(plan.tags[0] == Tag::keep());
    CHECK(plan.tags[1] == Tag::del());
    CHECK(plan.tags[2] == Tag::del());
    CHECK(plan.tags[3] == Tag::del(2));
    CHECK(plan.tags[4] == Tag::keep());
    CHECK(plan.cls_tag == Tag::keep());
    CHECK(plan.pointer_next == std::vector<int>{1, 5, -1, -1, -1, -1});
    CHECK(out.inserted_tokens == 2);
    felix::validate_plan(plan);
}

TEST_CASE("identity pair keeps everything with sequential pointers") {
    const TokenSeq src = toks("a b c d");
    const auto out = felix::align(src, src, {});
    REQUIRE(out.ok());
    CHECK(kept_count(*out.plan) == 4);
    CHECK(out.inserted_tokens == 0);
    CHECK(out.plan->pointer_next == std::vector<int>{1, 2, 3, 4, -1});
    for (const Tag& t : out.plan->tags) CHECK(t == Tag::keep());
}

TEST_CASE("reordering is modeled by pointers alone when pointing is on") {
    const TokenSeq src = toks("John and Mary");
    const TokenSeq tgt = toks("Mary and John");
    const auto out = felix::align(src, tgt, {});
    REQUIRE(out.ok());
    CHECK(kept_count(*out.plan) == 3);
    CHECK(out.inserted_tokens == 0);
    // [CLS]->Mary(3), Mary->and(2), and->John(1)
    CHECK(out.plan->pointer_next == std::vector<int>{3, -1, 1, 2});
    felix::validate_plan(*out.plan);
}

TEST_CASE("without pointing, kept tokens stay source-ordered") {
    const TokenSeq src = toks("John and Mary");
    const TokenSeq tgt = toks("Mary and John");
    AlignmentConfig cfg;
    cfg.pointing = false;
    const auto out = felix::align(src, tgt, cfg);
    REQUIRE(out.ok());
    // Brute-force maximum source-ordered kept subsequence has size 1.
    CHECK(lcs_oracle(src, tgt) == 1);
    CHECK(kept_count(*out.plan) == 1);
    CHECK_FALSE(testutil::roundtrip_error(src, tgt, cfg).has_value());
    // The chain must be increasing in source order.
    const auto chain = felix::daisy_chain(*out.plan);
    for (std::size_t i = 1; i + 1 < chain.positions.size(); ++i) {
        CHECK(chain.positions[i] < chain.positions[i + 1]);
    }
}

TEST_CASE("insertions before any kept token attach to the [CLS] edge") {
    const auto out = felix::align(toks("b"), toks("a b"), {});
    REQUIRE(out.ok());
    CHECK(out.plan->cls_tag == Tag::keep(1));
    CHECK(out.plan->tags[0] == Tag::keep());
    CHECK_FALSE(
        testutil::roundtrip_error(toks("b"), toks("a b"), {}).has_value());
}

TEST_CASE("a leading deleted run carries the [CLS]-edge span instead") {
    const auto out = felix::align(toks("x b"), toks("a b"), {});
    REQUIRE(out.ok());
    CHECK(out.plan->cls_tag == Tag::keep());
    CHECK(out.plan->tags[0] == Tag::del(1));
    CHECK(out.plan->tags[1] == Tag::keep());
}

TEST_CASE("span longer than max_span is unalignable") {
    AlignmentConfig cfg;
    cfg.max_span = 8;
    const TokenSeq src = toks("a");
    const TokenSeq tgt = toks("a x1 x2 x3 x4 x5 x6 x7 x8 x9");
    const auto out = felix::align(src, tgt, cfg);
    REQUIRE_FALSE(out.ok());
    CHECK(out.reason == felix::UnalignableReason::InsertionSpanTooLong);

    cfg.max_span = std::nullopt;
    CHECK(felix::align(src, tgt, cfg).ok());
}

TEST_CASE("alignment_stats on spec micro-corpora") {
    AlignmentConfig cfg;
    cfg.mode = SpanMode::Masking;

    SECTION("identity corpus has full coverage and zero masks") {
        std::vector<std::pair<TokenSeq, TokenSeq>> corpus;
        for (int i = 0; i < 5; ++i) {
            const TokenSeq s = toks("a b c");
            corpus.emplace_back(s, s);
        }
        const auto st = felix::alignment_stats(corpus, cfg);
        CHECK(st.coverage_percent == 100.0);
        CHECK(st.mask_percent == 0.0);
    }

    SECTION("figure-2 pair masks 2 of 4 target tokens") {
        std::vector<std::pair<TokenSeq, TokenSeq>> corpus = {
            {toks("The big very loud cat"), toks("The noisy large cat")}};
        const auto st = felix::alignment_stats(corpus, cfg);
        CHECK(st.coverage_percent == 100.0);
        CHECK(st.mask_percent == Catch::Approx(50.0));
    }

    SECTION("a forced over-long insertion drops coverage to zero") {
        std::vector<std::pair<TokenSeq, TokenSeq>> corpus = {
            {toks("a"), toks("a x1 x2 x3 x4 x5 x6 x7 x8 x9")}};
        const auto st = felix::alignment_stats(corpus, cfg);
        CHECK(st.coverage_percent == 0.0);
    }
}

TEST_CASE("round trip holds on random corpora in every mode") {
    std::mt19937_64 rng(20260809);
    const std::vector<AlignmentConfig> configs = {
        {SpanMode::Masking, 8, true},
        {SpanMode::Masking, 8, false},
        {SpanMode::Infilling, 8, true},
        {SpanMode::Infilling, 8, false},
    };
    int checked = 0;
    for (int trial = 0; trial < 400; ++trial) {
        const auto [src, tgt] = testutil::random_edit_pair(rng);
        for (const auto& cfg : configs) {
            const auto err = testutil::roundtrip_error(src, tgt, cfg);
            if (err) FAIL(*err);
            if (felix::align(src, tgt, cfg).ok()) ++checked;
        }
    }
    CHECK(checked > 800);  // the generator must actually produce alignable pairs
}

TEST_CASE("pointing never keeps fewer tokens than no pointing") {
    std::mt19937_64 rng(42);
    AlignmentConfig with, without;
    with.max_span = std::nullopt;
    without.max_span = std::nullopt;
    without.pointing = false;
    for (int trial = 0; trial < 300; ++trial) {
        const auto [src, tgt] = testutil::random_edit_pair(rng);
        const auto a = felix::align(src, tgt, with);
        const auto b = felix::align(src, tgt, without);
        REQUIRE(a.ok());
        REQUIRE(b.ok());
        CHECK(kept_count(*a.plan) >= kept_count(*b.plan));
        CHECK(a.inserted_tokens <= b.inserted_tokens);
    }
}

TEST_CASE("unbounded max_span yields full coverage on any corpus") {
    std::mt19937_64 rng(99);
    AlignmentConfig cfg;
    cfg.max_span = std::nullopt;
    testutil::EditPairOptions wild;
    wild.keep_prob = 0.3;
    wild.insert_prob = 0.9;
    wild.max_ins = 14;
    std::vector<std::pair<TokenSeq, TokenSeq>> corpus;
    for (int i = 0; i < 200; ++i) corpus.push_back(testutil::random_edit_pair(rng, wild));
    CHECK(felix::alignment_stats(corpus, cfg).coverage_percent == 100.0);

    cfg.pointing = false;
    CHECK(felix::alignment_stats(corpus, cfg).coverage_percent == 100.0);
}

TEST_CASE("plans from random pairs always validate") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const auto [src, tgt] = testutil::random_edit_pair(rng);
        const auto out = felix::align(src, tgt, {});
        if (!out.ok()) continue;
        felix::validate_plan(*out.plan);
    }
}

TEST_CASE("align rejects sentinels in its inputs") {
    CHECK_THROWS_AS(felix::align({"a", "[MASK]"}, {"a"}, {}), felix::DataError);
    CHECK_THROWS_AS(felix::align({"a"}, {"[CLS]"}, {}), felix::DataError);
}

TEST_CASE("empty target deletes everything") {
    const auto out = felix::align(toks("a b"), {}, {});
    REQUIRE(out.ok());
    CHECK(kept_count(*out.plan) == 0);
    CHECK(out.inserted_tokens == 0);
    CHECK_FALSE(testutil::roundtrip_error(toks("a b"), {}, {}).has_value());
}
