// Insertion-model input construction (y^m) and its inverse: applying mask
// predictions to produce final text, plus gold labels for training and
// round-trip checks.

#pragma once

#include "felix/align.hpp"
#include "felix/core.hpp"
#include "felix/edit.hpp"
#include "felix/realize.hpp"

#include <string>
#include <vector>

namespace felix {

struct MaskedSeq {
    struct Span {
        int anchor = 0;      // chain node the span follows
        int mask_start = 0;  // index into tokens of the first [MASK]
        int mask_count = 0;  // masking: declared k; infilling: max_span
    };

    TokenSeq tokens;
    std::vector<int> mask_positions;
    std::vector<Span> spans;
};

// Expands skeleton slots into [MASK] blocks: k of them under masking,
// max_span under infilling. A slot's deleted run precedes its block inside
// [REPL]...[/REPL].
inline MaskedSeq build_insertion_input(const Skeleton& skeleton,
                                       const TokenSeq& source,
                                       const AlignmentConfig& cfg) {
    MaskedSeq out;
    int anchor = 0;
    for (const auto& item : skeleton.items) {
        if (!item.is_slot) {
            out.tokens.push_back(source[item.pos - 1]);
            anchor = item.pos;
            continue;
        }
        int count = 0;
        if (cfg.mode == SpanMode::Masking) {
            if (item.declared == Tag::kGeneric) {
                throw DataError(
                    "build_insertion_input: generic INS under masking mode");
            }
            count = item.declared;
        } else {
            if (item.declared != Tag::kGeneric) {
                throw DataError(
                    "build_insertion_input: counted INS under infilling mode");
            }
            if (!cfg.max_span) {
                throw DataError(
                    "build_insertion_input: infilling requires a bounded max_span");
            }
            count = *cfg.max_span;
        }
        if (!item.repl.empty()) {
            out.tokens.emplace_back(sentinel::kReplOpen);
            for (int p : item.repl) out.tokens.push_back(source[p - 1]);
            out.tokens.emplace_back(sentinel::kReplClose);
        }
        MaskedSeq::Span span;
        span.anchor = anchor;
        span.mask_start = static_cast<int>(out.tokens.size());
        span.mask_count = count;
        for (int k = 0; k < count; ++k) {
            out.mask_positions.push_back(static_cast<int>(out.tokens.size()));
            out.tokens.emplace_back(sentinel::kMask);
        }
        out.spans.push_back(span);
    }
    return out;
}

// Replaces each [MASK] with its prediction; [PAD] predictions and
// [REPL]-enclosed content drop out. The result is sentinel-free.
inline TokenSeq apply_insertion(const MaskedSeq& masked,
                                const TokenSeq& predictions) {
    if (predictions.size() != masked.mask_positions.size()) {
        throw DataError("apply_insertion: got " +
                        std::to_string(predictions.size()) +
                        " predictions for " +
                        std::to_string(masked.mask_positions.size()) + " masks");
    }
    TokenSeq out;
    std::size_t next_mask = 0;
    bool in_repl = false;
    for (std::size_t i = 0; i < masked.tokens.size(); ++i) {
        const std::string& tok = masked.tokens[i];
        if (tok == sentinel::kReplOpen) {
            if (in_repl) throw DataError("apply_insertion: nested [REPL]");
            in_repl = true;
            continue;
        }
        if (tok == sentinel::kReplClose) {
            if (!in_repl) throw DataError("apply_insertion: stray [/REPL]");
            in_repl = false;
            continue;
        }
        if (in_repl) continue;
        if (tok == sentinel::kMask) {
            const std::string& pred = predictions[next_mask++];
            if (pred == sentinel::kPad) continue;
            if (is_sentinel(pred)) {
                throw DataError("apply_insertion: structural sentinel predicted: " +
                                pred);
            }
            out.push_back(pred);
            continue;
        }
        out.push_back(tok);
    }
    if (in_repl) throw DataError("apply_insertion: unclosed [REPL]");
    return out;
}

namespace detail {

struct MaskedElement {
    bool is_block = false;
    std::string token;   // kept token when !is_block
    int block_index = -1;
    int capacity = 0;    // [MASK] count of the block
};

inline std::vector<MaskedElement> masked_elements(const MaskedSeq& masked) {
    std::vector<MaskedElement> out;
    bool in_repl = false;
    for (std::size_t i = 0; i < masked.tokens.size(); ++i) {
        const std::string& tok = masked.tokens[i];
        if (tok == sentinel::kReplOpen) {
            in_repl = true;
            continue;
        }
        if (tok == sentinel::kReplClose) {
            in_repl = false;
            continue;
        }
        if (in_repl) continue;
        if (tok == sentinel::kMask) {
            int idx = static_cast<int>(i);
            // Extend the current block when [MASK]s are contiguous and belong
            // to the same span record.
            bool extended = false;
            if (!out.empty() && out.back().is_block) {
                const auto& span = masked.spans[out.back().block_index];
                if (idx < span.mask_start + span.mask_count) {
                    ++out.back().capacity;
                    extended = true;
                }
            }
            if (!extended) {
                MaskedElement el;
                el.is_block = true;
                for (std::size_t s = 0; s < masked.spans.size(); ++s) {
                    if (masked.spans[s].mask_start == idx) {
                        el.block_index = static_cast<int>(s);
                    }
                }
                if (el.block_index == -1) {
                    throw DataError("oracle_insertions: [MASK] outside any span");
                }
                el.capacity = 1;
                out.push_back(el);
            }
            continue;
        }
        MaskedElement el;
        el.token = tok;
        out.push_back(el);
    }
    return out;
}

}  // namespace detail

// Gold tokens per [MASK]: matches the masked sequence against the target,
// letting each block absorb the target run it stands for. Masking blocks
// absorb exactly their declared length; infilling blocks absorb up to
// max_span and pad the rest with [PAD]. Feasibility is decided by dynamic
// programming; the forward walk takes the shortest feasible absorption, so
// the result is deterministic.
inline TokenSeq oracle_insertions(const MaskedSeq& masked, const TokenSeq& target,
                                  const AlignmentConfig& cfg) {
    const auto elements = detail::masked_elements(masked);
    const int ne = static_cast<int>(elements.size());
    const int m = static_cast<int>(target.size());
    const bool exact = cfg.mode == SpanMode::Masking;

    // feasible[e][j]: elements e.. can consume target j.. exactly.
    std::vector<std::vector<char>> feasible(ne + 1,
                                            std::vector<char>(m + 1, 0));
    feasible[ne][m] = 1;
    for (int e = ne - 1; e >= 0; --e) {
        for (int j = m; j >= 0; --j) {
            const auto& el = elements[e];
            if (!el.is_block) {
                feasible[e][j] =
                    j < m && target[j] == el.token && feasible[e + 1][j + 1];
                continue;
            }
            if (exact) {
                feasible[e][j] =
                    j + el.capacity <= m && feasible[e + 1][j + el.capacity];
                continue;
            }
            for (int take = 0; take <= el.capacity && j + take <= m; ++take) {
                if (feasible[e + 1][j + take]) {
                    feasible[e][j] = 1;
                    break;
                }
            }
        }
    }
    if (!feasible[0][0]) {
        throw DataError(
            "oracle_insertions: masked sequence inconsistent with target");
    }

    std::vector<TokenSeq> block_fill(masked.spans.size());
    int j = 0;
    for (int e = 0; e < ne; ++e) {
        const auto& el = elements[e];
        if (!el.is_block) {
            ++j;
            continue;
        }
        int take = exact ? el.capacity : -1;
        if (!exact) {
            for (int t = 0; t <= el.capacity && j + t <= m; ++t) {
                if (feasible[e + 1][j + t]) {
                    take = t;
                    break;
                }
            }
        }
        TokenSeq& fill = block_fill[el.block_index];
        for (int t = 0; t < take; ++t) fill.push_back(target[j + t]);
        for (int t = take; t < el.capacity; ++t) {
            fill.emplace_back(sentinel::kPad);
        }
        j += take;
    }

    TokenSeq out;
    out.reserve(masked.mask_positions.size());
    for (const auto& fill : block_fill) {
        for (const auto& tok : fill) out.push_back(tok);
    }
    if (out.size() != masked.mask_positions.size()) {
        throw DataError("oracle_insertions: label count mismatch");
    }
    return out;
}

}  // namespace felix
