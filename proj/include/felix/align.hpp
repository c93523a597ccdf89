// Training-target construction: align a (source, target) pair into an
// EditPlan that keeps as many source tokens as the greedy scan can, prefers
// contiguous source runs, and turns everything else into insertion spans.

#pragma once

#include "felix/core.hpp"
#include "felix/edit.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace felix {

struct AlignmentConfig {
    SpanMode mode = SpanMode::Masking;
    std::optional<int> max_span = 8;  // nullopt = unbounded
    bool pointing = true;             // false = source-order keeps only
};

enum class UnalignableReason { InsertionSpanTooLong, Other };

inline std::string to_string(UnalignableReason r) {
    return r == UnalignableReason::InsertionSpanTooLong ? "InsertionSpanTooLong"
                                                        : "Other";
}

struct AlignmentOutcome {
    std::optional<EditPlan> plan;
    UnalignableReason reason = UnalignableReason::Other;
    std::string detail;
    int inserted_tokens = 0;  // true span lengths, summed

    bool ok() const { return plan.has_value(); }

    static AlignmentOutcome unalignable(UnalignableReason r, std::string d) {
        AlignmentOutcome out;
        out.reason = r;
        out.detail = std::move(d);
        return out;
    }
};

namespace detail {

// Longest contiguous run of unused source tokens starting at p that matches
// target starting at j.
inline int contiguous_match(const TokenSeq& source, const std::vector<char>& used,
                            int p, const TokenSeq& target, int j) {
    const int n = static_cast<int>(source.size());
    const int m = static_cast<int>(target.size());
    int len = 0;
    while (p + len <= n && j + len < m && !used[p + len] &&
           source[p + len - 1] == target[j + len]) {
        ++len;
    }
    return len;
}

}  // namespace detail

// Greedy left-to-right scan of the target with a source cursor:
//   1. extend the current contiguous source run when the next source token
//      matches the next target token;
//   2. otherwise jump to the unused source position that starts the longest
//      contiguous match, smallest position on ties;
//   3. otherwise the target token joins the pending insertion span.
// With pointing disabled, jumps are restricted to positions past the cursor.
inline AlignmentOutcome align(const TokenSeq& source, const TokenSeq& target,
                              const AlignmentConfig& cfg) {
    for (const auto& t : source) {
        if (is_sentinel(t)) throw DataError("align: sentinel in source: " + t);
    }
    for (const auto& t : target) {
        if (is_sentinel(t)) throw DataError("align: sentinel in target: " + t);
    }

    const int n = static_cast<int>(source.size());
    const int m = static_cast<int>(target.size());
    std::vector<char> used(n + 1, 0);

    EditPlan plan;
    plan.tags.assign(n, Tag::del());
    plan.pointer_next.assign(n + 1, -1);

    struct PendingSpan {
        int anchor;  // chain node the span follows
        int length;
    };
    std::vector<PendingSpan> spans;
    int cursor = 0;   // chain tail, 0 = [CLS]
    int pending = 0;  // unmatched target tokens not yet attached to an edge

    for (int j = 0; j < m; ++j) {
        int pick = -1;
        if (cursor + 1 <= n && !used[cursor + 1] &&
            source[cursor] == target[j]) {  // source[cursor] is token cursor+1
            pick = cursor + 1;
        } else {
            int best_len = 0;
            const int lo = cfg.pointing ? 1 : cursor + 1;
            for (int p = lo; p <= n; ++p) {
                if (used[p] || source[p - 1] != target[j]) continue;
                int len = detail::contiguous_match(source, used, p, target, j);
                if (len > best_len) {
                    best_len = len;
                    pick = p;
                }
            }
        }
        if (pick == -1) {
            ++pending;
            continue;
        }
        if (pending > 0) {
            spans.push_back({cursor, pending});
            pending = 0;
        }
        used[pick] = 1;
        plan.tags[pick - 1] = Tag::keep();
        plan.pointer_next[cursor] = pick;
        cursor = pick;
    }
    if (pending > 0) spans.push_back({cursor, pending});

    int inserted = 0;
    for (const auto& s : spans) {
        inserted += s.length;
        if (cfg.max_span && s.length > *cfg.max_span) {
            return AlignmentOutcome::unalignable(
                UnalignableReason::InsertionSpanTooLong,
                "insertion span of " + std::to_string(s.length) +
                    " exceeds max_span " + std::to_string(*cfg.max_span));
        }
    }

    // Attach each span to a carrier tag: the last token of the deleted run
    // that follows the anchor in source order, or the anchor itself when no
    // such run exists ([CLS] for spans at the very beginning).
    for (const auto& s : spans) {
        int run_end = -1;
        for (int p = s.anchor + 1; p <= n && !plan.is_keep(p); ++p) run_end = p;
        const int ins = cfg.mode == SpanMode::Masking ? s.length : Tag::kGeneric;
        if (run_end != -1) {
            plan.tags[run_end - 1].ins = ins;
        } else if (s.anchor == 0) {
            plan.cls_tag.ins = ins;
        } else {
            plan.tags[s.anchor - 1].ins = ins;
        }
    }

    AlignmentOutcome out;
    out.plan = std::move(plan);
    out.inserted_tokens = inserted;
    return out;
}

struct CorpusAlignStats {
    double coverage_percent = 100.0;
    double mask_percent = 0.0;
    long pairs = 0;
    long aligned = 0;
    long mask_tokens = 0;
    long target_tokens = 0;  // over aligned pairs
};

// Coverage = alignable fraction; MASK % = inserted tokens over the target
// tokens of the pairs actually aligned (true span lengths, not padding).
inline CorpusAlignStats alignment_stats(
    const std::vector<std::pair<TokenSeq, TokenSeq>>& corpus,
    const AlignmentConfig& cfg) {
    CorpusAlignStats st;
    st.pairs = static_cast<long>(corpus.size());
    for (const auto& [src, tgt] : corpus) {
        AlignmentOutcome out = align(src, tgt, cfg);
        if (!out.ok()) continue;
        ++st.aligned;
        st.mask_tokens += out.inserted_tokens;
        st.target_tokens += static_cast<long>(tgt.size());
    }
    st.coverage_percent =
        st.pairs == 0 ? 100.0 : 100.0 * static_cast<double>(st.aligned) /
                                    static_cast<double>(st.pairs);
    st.mask_percent =
        st.target_tokens == 0
            ? 0.0
            : 100.0 * static_cast<double>(st.mask_tokens) /
                  static_cast<double>(st.target_tokens);
    return st;
}

}  // namespace felix
