// Shared test utilities: corpus generators and the align -> realize ->
// oracle-insert round trip used by several suites.

#pragma once

#include <felix/felix.hpp>

#include <optional>
#include <random>
#include <string>
#include <vector>

namespace testutil {

inline felix::TokenSeq toks(const std::string& text) {
    return felix::tokenize(text);
}

inline std::string word(int i) {
    return "w" + std::to_string(i);
}

struct EditPairOptions {
    int vocab = 50;
    int min_src = 1;
    int max_src = 12;
    double keep_prob = 0.7;
    double shuffle_prob = 0.4;
    double insert_prob = 0.5;
    int max_ins = 8;
};

// Random (source, target) pair built from known edits: keep a subset of the
// source (optionally reordered) and insert runs of bounded length between
// kept tokens.
inline std::pair<felix::TokenSeq, felix::TokenSeq> random_edit_pair(
    std::mt19937_64& rng, const EditPairOptions& opt = {}) {
    std::uniform_int_distribution<int> len_dist(opt.min_src, opt.max_src);
    std::uniform_int_distribution<int> tok_dist(0, opt.vocab - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const int n = len_dist(rng);
    felix::TokenSeq source;
    for (int i = 0; i < n; ++i) source.push_back(word(tok_dist(rng)));

    felix::TokenSeq kept;
    for (const auto& tok : source) {
        if (unit(rng) < opt.keep_prob) kept.push_back(tok);
    }
    if (unit(rng) < opt.shuffle_prob) {
        std::shuffle(kept.begin(), kept.end(), rng);
    }

    std::uniform_int_distribution<int> ins_len(1, opt.max_ins);
    felix::TokenSeq target;
    auto maybe_insert = [&] {
        if (unit(rng) >= opt.insert_prob) return;
        const int len = ins_len(rng);
        for (int i = 0; i < len; ++i) target.push_back(word(tok_dist(rng)));
    };
    maybe_insert();
    for (const auto& tok : kept) {
        target.push_back(tok);
        maybe_insert();
    }
    return {source, target};
}

// Full pipeline on gold data; reports the first mismatch as text.
inline std::optional<std::string> roundtrip_error(
    const felix::TokenSeq& source, const felix::TokenSeq& target,
    const felix::AlignmentConfig& cfg) {
    const felix::AlignmentOutcome out = felix::align(source, target, cfg);
    if (!out.ok()) return std::nullopt;  // unalignable pairs are out of scope
    try {
        felix::validate_plan(*out.plan);
        const felix::Chain chain = felix::daisy_chain(*out.plan);
        const felix::Skeleton sk =
            felix::chain_to_skeleton(chain, *out.plan, source);
        const felix::MaskedSeq masked =
            felix::build_insertion_input(sk, source, cfg);
        const felix::TokenSeq labels =
            felix::oracle_insertions(masked, target, cfg);
        const felix::TokenSeq rebuilt = felix::apply_insertion(masked, labels);
        if (rebuilt != target) {
            return "rebuilt [" + felix::detokenize(rebuilt) + "] != target [" +
                   felix::detokenize(target) + "] for source [" +
                   felix::detokenize(source) + "]";
        }
    } catch (const std::exception& e) {
        return std::string("exception: ") + e.what() + " for source [" +
               felix::detokenize(source) + "] target [" +
               felix::detokenize(target) + "]";
    }
    return std::nullopt;
}

}  // namespace testutil
