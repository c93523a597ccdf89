#include <catch2/catch_amalgamated.hpp>

#include <felix/checkpoint.hpp>
#include <felix/jsonl.hpp>

#include "helpers.hpp"
#include "model_fixtures.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

using felix::Json;
using felix::TokenSeq;
using testutil::toks;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("felix_test_" + std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const {
        return (path / name).string();
    }
};

void write_lines(const std::string& path,
                 const std::vector<std::string>& lines) {
    std::ofstream out(path);
    for (const auto& l : lines) out << l << "\n";
}

}  // namespace

TEST_CASE("corpus jsonl round trip") {
    TempDir dir;
    write_lines(dir.file("c.jsonl"),
                {R"({"source": "a b", "target": "a"})",
                 R"({"source": "x", "references": ["y", "z"]})",
                 R"({"summary": {"pairs": 2}})"});
    const auto records = felix::read_corpus_jsonl(dir.file("c.jsonl"));
    REQUIRE(records.size() == 2);
    CHECK(records[0].source == "a b");
    REQUIRE(records[0].target.has_value());
    CHECK(*records[0].target == "a");
    CHECK(records[1].references == std::vector<std::string>{"y", "z"});
}

TEST_CASE("malformed corpus lines fail with their line number") {
    TempDir dir;
    write_lines(dir.file("bad.jsonl"),
                {R"({"source": "ok"})", "{not json", R"({"source": "ok"})"});
    CHECK_THROWS_WITH(felix::read_corpus_jsonl(dir.file("bad.jsonl")),
                      Catch::Matchers::ContainsSubstring("line 2"));

    write_lines(dir.file("empty_src.jsonl"), {R"({"source": ""})"});
    CHECK_THROWS_WITH(felix::read_corpus_jsonl(dir.file("empty_src.jsonl")),
                      Catch::Matchers::ContainsSubstring("non-empty"));
}

TEST_CASE("aligned records serialize and parse back") {
    const TokenSeq src = toks("The big very loud cat");
    const TokenSeq tgt = toks("The noisy large cat");
    const auto out = felix::align(src, tgt, {});
    REQUIRE(out.ok());
    const auto ex = felix::make_training_example(src, tgt, *out.plan, {});
    const auto rec = felix::make_aligned_record(src, tgt, *out.plan, ex.labels);
    CHECK(rec.tags == std::vector<std::string>{"KEEP", "DELETE", "DELETE",
                                               "DELETE|INS_2", "KEEP"});
    CHECK(rec.cls_tag == "KEEP");
    CHECK(rec.insertion_labels == TokenSeq{"noisy", "large"});

    const Json j = felix::aligned_record_to_json(rec);
    const auto back = felix::aligned_record_from_json(j, 1);
    CHECK(back.source_tokens == rec.source_tokens);
    CHECK(back.target_tokens == rec.target_tokens);
    CHECK(back.tags == rec.tags);
    CHECK(back.pointers == rec.pointers);
    CHECK(back.insertion_labels == rec.insertion_labels);

    const auto plan = felix::plan_from_record(back);
    CHECK(plan.pointer_next == out.plan->pointer_next);
    CHECK(plan.tags == out.plan->tags);
}

TEST_CASE("tag strings round trip") {
    using felix::Tag;
    for (const Tag& t : {Tag::keep(), Tag::del(), Tag::keep(3), Tag::del(8),
                         Tag::keep(Tag::kGeneric), Tag::del(Tag::kGeneric)}) {
        CHECK(felix::tag_from_string(felix::to_string(t)) == t);
    }
    CHECK_THROWS_AS(felix::tag_from_string("NOPE"), felix::DataError);
    CHECK_THROWS_AS(felix::tag_from_string("KEEP|INS_0"), felix::DataError);
}

TEST_CASE("hyperparams survive a json round trip") {
    felix::Hyperparams hp;
    hp.d = 24;
    hp.mode = felix::SpanMode::Infilling;
    hp.max_span = 5;
    hp.pointing = false;
    hp.seed = 987654321;
    hp.lr = 0.125;
    const auto back = felix::hyperparams_from_json(felix::hyperparams_to_json(hp));
    CHECK(back.d == hp.d);
    CHECK(back.mode == hp.mode);
    CHECK(back.max_span == hp.max_span);
    CHECK(back.pointing == hp.pointing);
    CHECK(back.seed == hp.seed);
    CHECK(back.lr == hp.lr);
}

TEST_CASE("checkpoints restore models exactly") {
    TempDir dir;
    felix::AlignmentConfig cfg;
    const auto corpus = testutil::aligned_corpus(
        {{"w1 w2 w3", "w1 w4"}, {"w2 w5", "w5 w2"}}, cfg);
    felix::Hyperparams hp = testutil::tiny_hyperparams();
    hp.steps = 10;
    hp.seed = 77;
    auto models = felix::train(corpus, hp);

    felix::save_tagger(dir.file("tagger.ckpt"), models.tagger);
    felix::save_insertion(dir.file("insertion.ckpt"), models.insertion);
    auto tagger = felix::load_tagger(dir.file("tagger.ckpt"));
    auto insertion = felix::load_insertion(dir.file("insertion.ckpt"));

    CHECK(tagger.vocab.tokens() == models.tagger.vocab.tokens());
    bool identical = true;
    std::vector<const felix::Tensor*> wa, wb;
    models.tagger.visit(
        [&](const std::string&, felix::Tensor& t) { wa.push_back(&t); });
    tagger.visit(
        [&](const std::string&, felix::Tensor& t) { wb.push_back(&t); });
    REQUIRE(wa.size() == wb.size());
    for (std::size_t i = 0; i < wa.size(); ++i) {
        identical = identical && wa[i]->v == wb[i]->v;
    }
    CHECK(identical);

    // The restored pipeline behaves identically.
    const auto before =
        felix::predict(toks("w1 w2 w3"), models.tagger, models.insertion);
    const auto after = felix::predict(toks("w1 w2 w3"), tagger, insertion);
    CHECK(before.output == after.output);

    // Kind confusion is rejected.
    CHECK_THROWS_AS(felix::load_tagger(dir.file("insertion.ckpt")),
                    felix::DataError);
    // Truncation is detected.
    {
        std::ifstream in(dir.file("tagger.ckpt"), std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
        bytes.resize(bytes.size() / 2);
        std::ofstream out(dir.file("trunc.ckpt"), std::ios::binary);
        out << bytes;
    }
    CHECK_THROWS_AS(felix::load_tagger(dir.file("trunc.ckpt")),
                    felix::DataError);
}

TEST_CASE("metric report serializes to json and text") {
    felix::MetricReport rep;
    rep.pairs = 3;
    rep.sari = 55.5;
    rep.exact = 100.0 / 3.0;
    rep.ter_ins = 2;
    rep.sari_variant = "original-del-precision";
    const Json j = felix::report_to_json(rep);
    CHECK(j["pairs"] == 3);
    CHECK(j["ter_components"]["ins"] == 2);
    const std::string text = felix::report_to_text(rep);
    CHECK(text.find("sari: 55.50") != std::string::npos);
    CHECK(text.find("exact: 33.33") != std::string::npos);
}
