// Pointer realization: daisy-chaining gold pointers, constrained beam search
// over predicted pointer scores, and flattening a chain into the skeleton the
// insertion model input is built from.

#pragma once

#include "felix/core.hpp"
#include "felix/edit.hpp"
#include "felix/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace felix {

// Output ordering of kept positions; positions[0] is always 0 ([CLS]).
struct Chain {
    std::vector<int> positions;

    bool operator==(const Chain&) const = default;
};

// Follows pointer_next from [CLS]. Gold-plan realization.
inline Chain daisy_chain(const EditPlan& plan) {
    const int n = plan.n_source();
    if (static_cast<int>(plan.pointer_next.size()) != n + 1) {
        throw DataError("daisy_chain: pointer map size != n+1");
    }
    Chain chain;
    chain.positions.push_back(0);
    std::vector<char> visited(n + 1, 0);
    visited[0] = 1;
    int at = 0;
    while (plan.pointer_next[at] != -1) {
        at = plan.pointer_next[at];
        if (at < 0 || at > n) {
            throw DataError("daisy_chain: pointer target out of range: " +
                            std::to_string(at));
        }
        if (visited[at]) {
            throw DataError("daisy_chain: pointer cycle at position " +
                            std::to_string(at));
        }
        if (!plan.is_keep(at)) {
            throw DataError("daisy_chain: pointer target " + std::to_string(at) +
                            " is not KEEP");
        }
        visited[at] = 1;
        chain.positions.push_back(at);
    }
    for (int i = 1; i <= n; ++i) {
        if (plan.is_keep(i) && !visited[i]) {
            throw DataError("daisy_chain: KEEP position " + std::to_string(i) +
                            " unreachable from [CLS]");
        }
    }
    return chain;
}

// Loop-free beam search over row-stochastic pointer scores. Beam items are
// (partial chain, visited set, sum of log-probabilities); expansion is
// restricted to unvisited KEEP positions. Ties break toward the
// lexicographically smallest chain.
inline Chain beam_realize(const Tensor& scores, const std::vector<Tag>& tags,
                          int beam_size = 5) {
    const int n = static_cast<int>(tags.size());
    if (scores.rows != n + 1 || scores.cols != n + 1) {
        throw DataError("beam_realize: score matrix must be (n+1) x (n+1)");
    }
    if (beam_size < 1) throw DataError("beam_realize: beam size must be >= 1");
    for (double x : scores.v) {
        if (!std::isfinite(x)) throw DataError("beam_realize: non-finite score");
    }

    std::vector<int> keeps;
    for (int i = 1; i <= n; ++i) {
        if (tags[i - 1].is_keep()) keeps.push_back(i);
    }
    Chain chain;
    chain.positions.push_back(0);
    if (keeps.empty()) return chain;

    struct Item {
        std::vector<int> positions;
        std::vector<char> visited;
        double log_prob;
    };
    auto better = [](const Item& a, const Item& b) {
        if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
        return a.positions < b.positions;
    };

    std::vector<Item> beam;
    beam.push_back({{0}, std::vector<char>(n + 1, 0), 0.0});
    beam.front().visited[0] = 1;

    const double kNegInf = -std::numeric_limits<double>::infinity();
    for (std::size_t step = 0; step < keeps.size(); ++step) {
        std::vector<Item> next;
        next.reserve(beam.size() * keeps.size());
        for (const auto& item : beam) {
            const int last = item.positions.back();
            for (int j : keeps) {
                if (item.visited[j]) continue;
                const double p = scores.at(last, j);
                Item ext = item;
                ext.positions.push_back(j);
                ext.visited[j] = 1;
                ext.log_prob += p > 0.0 ? std::log(p) : kNegInf;
                next.push_back(std::move(ext));
            }
        }
        if (next.empty()) {
            std::string partial;
            for (int p : beam.front().positions) partial += " " + std::to_string(p);
            throw DataError("beam_realize: beam exhausted; best partial chain:" +
                            partial);
        }
        if (static_cast<int>(next.size()) > beam_size) {
            std::partial_sort(next.begin(), next.begin() + beam_size, next.end(),
                              better);
            next.resize(beam_size);
        } else {
            std::sort(next.begin(), next.end(), better);
        }
        beam = std::move(next);
    }
    chain.positions = beam.front().positions;
    return chain;
}

// Diagnostic for the unconstrained greedy decode: following per-row argmax
// from [CLS] over KEEP positions, would a position repeat before the chain
// completes?
inline bool greedy_decode_loops(const Tensor& scores,
                                const std::vector<Tag>& tags) {
    const int n = static_cast<int>(tags.size());
    std::vector<char> is_keep(n + 1, 0);
    int keep_count = 0;
    for (int i = 1; i <= n; ++i) {
        if (tags[i - 1].is_keep()) {
            is_keep[i] = 1;
            ++keep_count;
        }
    }
    std::vector<char> visited(n + 1, 0);
    visited[0] = 1;
    int at = 0;
    for (int step = 0; step < keep_count; ++step) {
        int best = -1;
        double best_p = -1.0;
        for (int j = 1; j <= n; ++j) {
            if (!is_keep[j]) continue;
            if (scores.at(at, j) > best_p) {
                best_p = scores.at(at, j);
                best = j;
            }
        }
        if (best == -1 || visited[best]) return true;
        visited[best] = 1;
        at = best;
    }
    return false;
}

// Kept tokens in output order interleaved with insertion slots. Slots carry
// the declared span (count or generic) and the deleted source run shown
// inside [REPL] tags.
struct Skeleton {
    struct Item {
        bool is_slot = false;
        int pos = -1;           // kept source position when !is_slot
        int declared = 0;       // slot: k, or Tag::kGeneric
        std::vector<int> repl;  // slot: deleted source positions
    };
    std::vector<Item> items;

    // Display form: kept tokens with insertion markers.
    TokenSeq display(const TokenSeq& source) const {
        TokenSeq out;
        for (const auto& it : items) {
            if (it.is_slot) {
                out.push_back(it.declared == Tag::kGeneric
                                  ? "⟨INS⟩"
                                  : "⟨INS:" + std::to_string(it.declared) + "⟩");
            } else {
                out.push_back(source[it.pos - 1]);
            }
        }
        return out;
    }
};

// Places each tag-carried insertion span on its output edge: a KEEP or [CLS]
// carrier anchors at itself; a DELETE carrier anchors at the nearest
// preceding KEEP/[CLS] position and contributes its surrounding deleted run
// as [REPL] content.
inline Skeleton chain_to_skeleton(const Chain& chain, const EditPlan& plan,
                                  const TokenSeq& source) {
    const int n = plan.n_source();
    if (static_cast<int>(source.size()) != n) {
        throw DataError("chain_to_skeleton: source length != plan size");
    }

    struct Slot {
        int carrier;
        int declared;
        std::vector<int> repl;
    };
    // anchor -> slots, ordered by carrier ([CLS] first).
    std::vector<std::vector<Slot>> at_anchor(n + 1);
    auto add_carrier = [&](int carrier, int declared) {
        if (declared == 0) return;
        int anchor = carrier;
        std::vector<int> repl;
        if (carrier > 0 && !plan.is_keep(carrier)) {
            int lo = carrier, hi = carrier;
            while (lo - 1 >= 1 && !plan.is_keep(lo - 1)) --lo;
            while (hi + 1 <= n && !plan.is_keep(hi + 1)) ++hi;
            for (int p = lo; p <= hi; ++p) repl.push_back(p);
            anchor = lo - 1;  // nearest preceding KEEP or [CLS]
        }
        at_anchor[anchor].push_back({carrier, declared, std::move(repl)});
    };
    add_carrier(0, plan.cls_tag.ins);
    for (int i = 1; i <= n; ++i) add_carrier(i, plan.tags[i - 1].ins);

    Skeleton sk;
    std::vector<char> in_chain(n + 1, 0);
    for (int v : chain.positions) in_chain[v] = 1;
    for (int i = 1; i <= n; ++i) {
        if (plan.is_keep(i) && !in_chain[i]) {
            throw DataError("chain_to_skeleton: KEEP position " +
                            std::to_string(i) + " missing from chain");
        }
    }
    for (std::size_t c = 0; c < chain.positions.size(); ++c) {
        const int v = chain.positions[c];
        if (c > 0) {
            Skeleton::Item tok;
            tok.pos = v;
            sk.items.push_back(tok);
        }
        for (const auto& slot : at_anchor[v]) {
            Skeleton::Item item;
            item.is_slot = true;
            item.declared = slot.declared;
            item.repl = slot.repl;
            sk.items.push_back(std::move(item));
        }
    }
    return sk;
}

}  // namespace felix
