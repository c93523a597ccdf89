#include <catch2/catch_amalgamated.hpp>

#include <felix/core.hpp>

#include <random>

using felix::TokenSeq;

TEST_CASE("tokenize splits on whitespace") {
    CHECK(felix::tokenize("The big very loud cat") ==
          TokenSeq{"The", "big", "very", "loud", "cat"});
    CHECK(felix::tokenize("") == TokenSeq{});
    CHECK(felix::tokenize("a  b") == TokenSeq{"a", "b"});
    CHECK(felix::tokenize(" \t a \n b ") == TokenSeq{"a", "b"});
}

TEST_CASE("tokenize lowercases only when configured") {
    felix::TokenizerConfig lower;
    lower.lowercase = true;
    CHECK(felix::tokenize("The Cat") == TokenSeq{"The", "Cat"});
    CHECK(felix::tokenize("The Cat", lower) == TokenSeq{"the", "cat"});
}

TEST_CASE("detokenize joins with single spaces") {
    CHECK(felix::detokenize({"The", "very", "big", "cat"}) == "The very big cat");
    CHECK(felix::detokenize({}) == "");
}

TEST_CASE("detokenize rejects sentinels by name") {
    CHECK_THROWS_WITH(felix::detokenize({"a", "[MASK]"}),
                      Catch::Matchers::ContainsSubstring("[MASK]"));
    CHECK_THROWS_AS(felix::detokenize({"[CLS]"}), felix::DataError);
}

TEST_CASE("tokenize never emits sentinels from user text") {
    for (const auto s : felix::sentinel::kAll) {
        const TokenSeq seq = felix::tokenize(std::string(s));
        REQUIRE(seq.size() == 1);
        CHECK_FALSE(felix::is_sentinel(seq[0]));
        CHECK(felix::detokenize(seq) == std::string(s));
    }
    // Already-escaped forms stay round-trippable too.
    const std::string tricky = "\\[CLS] \\\\[MASK] x";
    CHECK(felix::detokenize(felix::tokenize(tricky)) == tricky);
}

TEST_CASE("round trip equals whitespace-normalized input") {
    const std::vector<std::string> cases = {
        "The big very loud cat", "  spaced\tout\n", "", "one",
        "a  b   c", "[CLS] hidden", "punct, kept! as-is.",
    };
    for (const auto& s : cases) {
        const std::string norm = felix::detokenize(felix::tokenize(s));
        CHECK(felix::detokenize(felix::tokenize(norm)) == norm);
    }
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> len(0, 12);
    std::uniform_int_distribution<int> pick(0, 5);
    const std::vector<std::string> pieces = {"a", "bb", "ccc", "[CLS]",
                                             "x1", "\\[PAD]"};
    for (int trial = 0; trial < 200; ++trial) {
        std::string s;
        const int n = len(rng);
        for (int i = 0; i < n; ++i) {
            if (!s.empty()) s += ' ';
            s += pieces[pick(rng)];
        }
        CHECK(felix::detokenize(felix::tokenize(s)) == s);
    }
}

TEST_CASE("vocabulary reserves fixed sentinel ids") {
    felix::Vocabulary vocab;
    CHECK(vocab.id_of("[CLS]") == felix::Vocabulary::kClsId);
    CHECK(vocab.id_of("[MASK]") == felix::Vocabulary::kMaskId);
    CHECK(vocab.id_of("[PAD]") == felix::Vocabulary::kPadId);
    CHECK(vocab.id_of("[REPL]") == felix::Vocabulary::kReplOpenId);
    CHECK(vocab.id_of("[/REPL]") == felix::Vocabulary::kReplCloseId);
    CHECK(vocab.id_of("[UNK]") == felix::Vocabulary::kUnkId);
    CHECK(vocab.size() == 6);
}

TEST_CASE("vocabulary id and token maps compose to identity") {
    felix::Vocabulary vocab;
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> pick(0, 99);
    for (int i = 0; i < 300; ++i) {
        vocab.add("tok" + std::to_string(pick(rng)));
    }
    for (int id = 0; id < vocab.size(); ++id) {
        CHECK(vocab.id_of(vocab.token_of(id)) == id);
    }
    CHECK(vocab.id_of("never-registered") == felix::Vocabulary::kUnkId);
    CHECK_THROWS_AS(vocab.token_of(vocab.size()), felix::DataError);
}
