#include <catch2/catch_amalgamated.hpp>

#include <felix/realize.hpp>

#include "helpers.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using felix::Chain;
using felix::EditPlan;
using felix::Tag;
using felix::Tensor;
using felix::TokenSeq;
using testutil::toks;

namespace {

EditPlan fig3_plan() {
    // src: The big very loud cat; target: The very big cat.
    EditPlan plan;
    plan.tags = {Tag::keep(), Tag::keep(), Tag::keep(), Tag::del(), Tag::keep()};
    plan.pointer_next = {1, 3, 5, 2, -1, -1};
    return plan;
}

// Row-stochastic matrix concentrating probability on the given edges.
Tensor edge_scores(int n, const std::vector<std::pair<int, int>>& edges,
                   double weight = 0.97) {
    Tensor t(n + 1, n + 1, (1.0 - weight) / n);
    for (const auto& [from, to] : edges) {
        for (int j = 0; j <= n; ++j) t.at(from, j) = (1.0 - weight) / n;
        t.at(from, to) = weight;
    }
    return t;
}

Tensor random_scores(int n, std::mt19937_64& rng) {
    Tensor t(n + 1, n + 1);
    std::uniform_real_distribution<double> unit(0.01, 1.0);
    for (int i = 0; i <= n; ++i) {
        double sum = 0.0;
        for (int j = 0; j <= n; ++j) {
            t.at(i, j) = unit(rng);
            sum += t.at(i, j);
        }
        for (int j = 0; j <= n; ++j) t.at(i, j) /= sum;
    }
    return t;
}

// Exhaustive argmax over all loop-free chains, same scoring and tie-break.
Chain exhaustive_best(const Tensor& scores, const std::vector<Tag>& tags) {
    std::vector<int> keeps;
    for (int i = 1; i <= static_cast<int>(tags.size()); ++i) {
        if (tags[i - 1].is_keep()) keeps.push_back(i);
    }
    std::sort(keeps.begin(), keeps.end());
    Chain best;
    double best_score = -std::numeric_limits<double>::infinity();
    std::vector<int> perm = keeps;
    do {
        double score = 0.0;
        int last = 0;
        for (int p : perm) {
            score += std::log(scores.at(last, p));
            last = p;
        }
        std::vector<int> chain = {0};
        chain.insert(chain.end(), perm.begin(), perm.end());
        if (score > best_score ||
            (score == best_score && chain < best.positions)) {
            best_score = score;
            best.positions = chain;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

long factorial(int n) {
    long f = 1;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

}  // namespace

TEST_CASE("daisy chain follows the figure-3 pointers") {
    const Chain chain = felix::daisy_chain(fig3_plan());
    CHECK(chain.positions == std::vector<int>{0, 1, 3, 2, 5});
    const TokenSeq src = toks("The big very loud cat");
    const auto sk = felix::chain_to_skeleton(chain, fig3_plan(), src);
    CHECK(sk.display(src) == toks("The very big cat"));
}

TEST_CASE("identity pointers reproduce source order") {
    EditPlan plan;
    plan.tags = {Tag::keep(), Tag::keep(), Tag::keep()};
    plan.pointer_next = {1, 2, 3, -1};
    CHECK(felix::daisy_chain(plan).positions == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("daisy chain reports cycles and unreachable keeps") {
    EditPlan cyclic;
    cyclic.tags = {Tag::keep(), Tag::keep()};
    cyclic.pointer_next = {1, 2, 1};
    CHECK_THROWS_WITH(felix::daisy_chain(cyclic),
                      Catch::Matchers::ContainsSubstring("cycle"));

    EditPlan unreachable;
    unreachable.tags = {Tag::keep(), Tag::keep()};
    unreachable.pointer_next = {1, -1, -1};
    CHECK_THROWS_WITH(felix::daisy_chain(unreachable),
                      Catch::Matchers::ContainsSubstring("2"));
}

TEST_CASE("beam search recovers the figure-3 chain from peaked scores") {
    const auto plan = fig3_plan();
    const Tensor scores =
        edge_scores(5, {{0, 1}, {1, 3}, {3, 2}, {2, 5}});
    const Chain chain = felix::beam_realize(scores, plan.tags, 5);
    CHECK(chain.positions == std::vector<int>{0, 1, 3, 2, 5});
}

TEST_CASE("single KEEP token needs no search") {
    std::vector<Tag> tags = {Tag::keep()};
    Tensor scores(2, 2, 0.5);
    for (int beam : {1, 5, 100}) {
        CHECK(felix::beam_realize(scores, tags, beam).positions ==
              std::vector<int>{0, 1});
    }
}

TEST_CASE("no KEEP positions yields the bare [CLS] chain") {
    std::vector<Tag> tags = {Tag::del(), Tag::del()};
    Tensor scores(3, 3, 1.0 / 3);
    CHECK(felix::beam_realize(scores, tags, 5).positions == std::vector<int>{0});
}

TEST_CASE("full-width beam equals exhaustive search") {
    std::mt19937_64 rng(31337);
    std::uniform_int_distribution<int> size(1, 7);
    for (int trial = 0; trial < 120; ++trial) {
        const int n = size(rng);
        std::vector<Tag> tags(n, Tag::keep());
        const Tensor scores = random_scores(n, rng);
        const Chain beam =
            felix::beam_realize(scores, tags, static_cast<int>(factorial(n)));
        const Chain brute = exhaustive_best(scores, tags);
        CHECK(beam.positions == brute.positions);
    }
}

TEST_CASE("beam output is always loop-free") {
    std::mt19937_64 rng(55);
    std::uniform_int_distribution<int> size(1, 10);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = size(rng);
        std::vector<Tag> tags;
        int keeps = 0;
        for (int i = 0; i < n; ++i) {
            const bool keep = unit(rng) < 0.7;
            keeps += keep ? 1 : 0;
            tags.push_back(keep ? Tag::keep() : Tag::del());
        }
        const Chain chain = felix::beam_realize(random_scores(n, rng), tags, 5);
        std::vector<int> sorted = chain.positions;
        std::sort(sorted.begin(), sorted.end());
        CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
        CHECK(static_cast<int>(chain.positions.size()) == keeps + 1);
    }
}

TEST_CASE("argmax-consistent scores realize at any beam width") {
    // Rows whose argmax already forms a valid chain: 0->2, 2->1, 1->3.
    const Tensor scores = edge_scores(3, {{0, 2}, {2, 1}, {1, 3}});
    std::vector<Tag> tags = {Tag::keep(), Tag::keep(), Tag::keep()};
    for (int beam : {1, 2, 5, 50}) {
        CHECK(felix::beam_realize(scores, tags, beam).positions ==
              std::vector<int>{0, 2, 1, 3});
    }
}

TEST_CASE("re-chaining a realized chain reproduces it") {
    std::mt19937_64 rng(123);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 5;
        std::vector<Tag> tags(n, Tag::keep());
        const Chain chain = felix::beam_realize(random_scores(n, rng), tags, 5);
        EditPlan plan;
        plan.tags = tags;
        plan.pointer_next.assign(n + 1, -1);
        for (std::size_t i = 0; i + 1 < chain.positions.size(); ++i) {
            plan.pointer_next[chain.positions[i]] = chain.positions[i + 1];
        }
        CHECK(felix::daisy_chain(plan).positions == chain.positions);
    }
}

TEST_CASE("greedy loop diagnostic flags revisits") {
    // Argmax of every row points at position 1.
    Tensor loopy(3, 3, 0.1);
    loopy.at(0, 1) = 0.8;
    loopy.at(1, 1) = 0.8;
    loopy.at(2, 1) = 0.8;
    std::vector<Tag> tags = {Tag::keep(), Tag::keep()};
    CHECK(felix::greedy_decode_loops(loopy, tags));

    const Tensor fine = edge_scores(2, {{0, 1}, {1, 2}});
    CHECK_FALSE(felix::greedy_decode_loops(fine, tags));
}

TEST_CASE("figure-2 skeleton shows the insertion slot between keeps") {
    EditPlan plan;
    plan.tags = {Tag::keep(), Tag::del(), Tag::del(), Tag::del(2), Tag::keep()};
    plan.pointer_next = {1, 5, -1, -1, -1, -1};
    const TokenSeq src = toks("The big very loud cat");
    const auto sk = felix::chain_to_skeleton(felix::daisy_chain(plan), plan, src);
    CHECK(sk.display(src) == TokenSeq{"The", "⟨INS:2⟩", "cat"});
    REQUIRE(sk.items.size() == 3);
    CHECK(sk.items[1].is_slot);
    CHECK(sk.items[1].repl == std::vector<int>{2, 3, 4});
}

TEST_CASE("identity plan flattens to the source") {
    EditPlan plan;
    plan.tags = {Tag::keep(), Tag::keep()};
    plan.pointer_next = {1, 2, -1};
    const TokenSeq src = toks("a b");
    const auto sk = felix::chain_to_skeleton(felix::daisy_chain(plan), plan, src);
    CHECK(sk.display(src) == src);
}
