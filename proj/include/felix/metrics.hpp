// Evaluation stack: SARI (original deletion-precision form, all-F1 behind a
// flag), Exact score, corpus BLEU-4, ROUGE-L, TER with a greedy block-shift
// search, and copy rate.

#pragma once

#include "felix/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <map>
#include <string>
#include <vector>

namespace felix {
namespace ngram {

using Gram = std::vector<std::string>;
using Counts = std::map<Gram, double>;

inline Counts counts(const TokenSeq& s, int n) {
    Counts out;
    const int len = static_cast<int>(s.size());
    for (int i = 0; i + n <= len; ++i) {
        Gram g(s.begin() + i, s.begin() + i + n);
        out[g] += 1.0;
    }
    return out;
}

inline double get(const Counts& c, const Gram& g) {
    auto it = c.find(g);
    return it == c.end() ? 0.0 : it->second;
}

}  // namespace ngram

// ---------------------------------------------------------------------------
// SARI
// ---------------------------------------------------------------------------

struct SariScore {
    double sari = 0.0;
    double add = 0.0;
    double keep = 0.0;
    double del = 0.0;
};

namespace detail {

struct PrecisionRecall {
    double cand = 0.0, gold = 0.0, good = 0.0;

    // Vacuous sides score 1: an empty candidate set has perfect precision,
    // an empty gold set perfect recall.
    double precision() const { return cand == 0.0 ? 1.0 : good / cand; }
    double recall() const { return gold == 0.0 ? 1.0 : good / gold; }
    double f1() const {
        const double p = precision(), r = recall();
        return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
    }
};

}  // namespace detail

// Sentence-level SARI over n-gram orders 1..4 with reference counts averaged
// across references. ADD and KEEP are F1; DEL is precision in the default
// variant, F1 when all_f1 is set. Orders where input, output, and references
// all lack n-grams are skipped.
inline SariScore sari(const TokenSeq& source, const TokenSeq& prediction,
                      const std::vector<TokenSeq>& references,
                      bool all_f1 = false) {
    if (references.empty()) throw DataError("sari: no references");
    SariScore total;
    int orders = 0;
    for (int n = 1; n <= 4; ++n) {
        const auto in = ngram::counts(source, n);
        const auto out = ngram::counts(prediction, n);
        ngram::Counts ref;
        for (const auto& r : references) {
            for (const auto& [g, c] : ngram::counts(r, n)) ref[g] += c;
        }
        for (auto& [g, c] : ref) c /= static_cast<double>(references.size());
        if (in.empty() && out.empty() && ref.empty()) continue;
        ++orders;

        std::map<ngram::Gram, char> grams;
        for (const auto& [g, c] : in) grams[g] = 1;
        for (const auto& [g, c] : out) grams[g] = 1;
        for (const auto& [g, c] : ref) grams[g] = 1;

        detail::PrecisionRecall keep, add, del;
        for (const auto& [g, unused] : grams) {
            const double i = ngram::get(in, g);
            const double o = ngram::get(out, g);
            const double r = ngram::get(ref, g);
            const double keep_cand = std::min(i, o);
            const double keep_gold = std::min(i, r);
            keep.cand += keep_cand;
            keep.gold += keep_gold;
            keep.good += std::min(keep_cand, keep_gold);
            const double add_cand = std::max(o - i, 0.0);
            const double add_gold = std::max(r - i, 0.0);
            add.cand += add_cand;
            add.gold += add_gold;
            add.good += std::min(add_cand, add_gold);
            const double del_cand = std::max(i - o, 0.0);
            const double del_gold = std::max(i - r, 0.0);
            del.cand += del_cand;
            del.gold += del_gold;
            del.good += std::min(del_cand, del_gold);
        }
        total.add += add.f1();
        total.keep += keep.f1();
        total.del += all_f1 ? del.f1() : del.precision();
    }
    if (orders == 0) return total;
    total.add = 100.0 * total.add / orders;
    total.keep = 100.0 * total.keep / orders;
    total.del = 100.0 * total.del / orders;
    total.sari = (total.add + total.keep + total.del) / 3.0;
    return total;
}

// ---------------------------------------------------------------------------
// Exact score
// ---------------------------------------------------------------------------

inline std::string whitespace_normalize(const std::string& s) {
    return detokenize(tokenize(s));
}

// Percentage of predictions equal to their reference after whitespace
// normalization.
inline double exact(const std::vector<std::string>& predictions,
                    const std::vector<std::string>& references) {
    if (predictions.size() != references.size()) {
        throw DataError("exact: prediction/reference count mismatch");
    }
    if (predictions.empty()) return 0.0;
    int hits = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (whitespace_normalize(predictions[i]) ==
            whitespace_normalize(references[i])) {
            ++hits;
        }
    }
    return 100.0 * hits / static_cast<double>(predictions.size());
}

// ---------------------------------------------------------------------------
// TER
// ---------------------------------------------------------------------------

struct LevCounts {
    int dist = 0;
    int ins = 0;  // reference tokens missing from the hypothesis
    int del = 0;  // hypothesis tokens absent from the reference
    int sub = 0;
};

// Word-level edit distance with a deterministic backtrace (match/sub, then
// delete, then insert) so the component split is reproducible.
inline LevCounts levenshtein(const TokenSeq& hyp, const TokenSeq& ref) {
    const int a = static_cast<int>(hyp.size());
    const int b = static_cast<int>(ref.size());
    std::vector<std::vector<int>> d(a + 1, std::vector<int>(b + 1, 0));
    for (int i = 0; i <= a; ++i) d[i][0] = i;
    for (int j = 0; j <= b; ++j) d[0][j] = j;
    for (int i = 1; i <= a; ++i) {
        for (int j = 1; j <= b; ++j) {
            const int sub_cost = hyp[i - 1] == ref[j - 1] ? 0 : 1;
            d[i][j] = std::min({d[i - 1][j - 1] + sub_cost, d[i - 1][j] + 1,
                                d[i][j - 1] + 1});
        }
    }
    LevCounts out;
    out.dist = d[a][b];
    int i = a, j = b;
    while (i > 0 || j > 0) {
        if (i > 0 && j > 0 &&
            d[i][j] == d[i - 1][j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1)) {
            if (hyp[i - 1] != ref[j - 1]) ++out.sub;
            --i;
            --j;
        } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
            ++out.del;
            --i;
        } else {
            ++out.ins;
            --j;
        }
    }
    return out;
}

struct TerScore {
    double ter = 0.0;
    int ins = 0, del = 0, sub = 0, shift = 0;
};

namespace detail {

inline TokenSeq apply_block_shift(const TokenSeq& s, int start, int len,
                                  int dest) {
    TokenSeq rest;
    rest.reserve(s.size());
    for (int i = 0; i < static_cast<int>(s.size()); ++i) {
        if (i < start || i >= start + len) rest.push_back(s[i]);
    }
    TokenSeq out(rest.begin(), rest.begin() + dest);
    out.insert(out.end(), s.begin() + start, s.begin() + start + len);
    out.insert(out.end(), rest.begin() + dest, rest.end());
    return out;
}

}  // namespace detail

inline constexpr int kTerMaxShiftLength = 10;

// Greedy shift search: repeatedly apply the block shift (length <= 10) that
// most reduces word-level edit distance, breaking ties by earliest start,
// then shortest block, then smallest destination; each shift costs one edit.
// TER = (ins + del + sub + shifts) / |reference| * 100.
inline TerScore ter(const TokenSeq& prediction, const TokenSeq& reference) {
    if (reference.empty()) throw DataError("ter: empty reference");
    TokenSeq hyp = prediction;
    int shifts = 0;
    while (true) {
        const int base = levenshtein(hyp, reference).dist;
        if (base == 0) break;
        const int len_hyp = static_cast<int>(hyp.size());
        int best_gain = 0, best_start = -1, best_len = 0, best_dest = 0;
        for (int start = 0; start < len_hyp; ++start) {
            for (int len = 1; len <= std::min(kTerMaxShiftLength, len_hyp - start);
                 ++len) {
                for (int dest = 0; dest <= len_hyp - len; ++dest) {
                    if (dest == start) continue;
                    const TokenSeq moved =
                        detail::apply_block_shift(hyp, start, len, dest);
                    const int gain = base - levenshtein(moved, reference).dist;
                    if (gain > best_gain) {
                        best_gain = gain;
                        best_start = start;
                        best_len = len;
                        best_dest = dest;
                    }
                }
            }
        }
        if (best_gain <= 0) break;
        hyp = detail::apply_block_shift(hyp, best_start, best_len, best_dest);
        ++shifts;
    }
    const LevCounts lev = levenshtein(hyp, reference);
    TerScore out;
    out.ins = lev.ins;
    out.del = lev.del;
    out.sub = lev.sub;
    out.shift = shifts;
    out.ter = 100.0 * (lev.dist + shifts) / static_cast<double>(reference.size());
    return out;
}

// ---------------------------------------------------------------------------
// BLEU-4
// ---------------------------------------------------------------------------

// Corpus BLEU with brevity penalty. Multi-reference clipping takes the
// maximum reference count per n-gram; the effective reference length is the
// closest one. Zero match counts at orders above 1 get add-one smoothing.
inline double bleu4(const std::vector<TokenSeq>& predictions,
                    const std::vector<std::vector<TokenSeq>>& references) {
    if (predictions.size() != references.size()) {
        throw DataError("bleu4: prediction/reference count mismatch");
    }
    constexpr int kMaxOrder = 4;
    std::array<long, kMaxOrder> matches{};
    std::array<long, kMaxOrder> totals{};
    long pred_len = 0, ref_len = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const TokenSeq& pred = predictions[i];
        const auto& refs = references[i];
        if (refs.empty()) throw DataError("bleu4: pair without references");
        pred_len += static_cast<long>(pred.size());
        long closest = static_cast<long>(refs[0].size());
        for (const auto& r : refs) {
            const long rl = static_cast<long>(r.size());
            const long pl = static_cast<long>(pred.size());
            if (std::llabs(rl - pl) < std::llabs(closest - pl) ||
                (std::llabs(rl - pl) == std::llabs(closest - pl) && rl < closest)) {
                closest = rl;
            }
        }
        ref_len += closest;
        for (int n = 1; n <= kMaxOrder; ++n) {
            const auto cand = ngram::counts(pred, n);
            ngram::Counts clip;
            for (const auto& r : refs) {
                for (const auto& [g, c] : ngram::counts(r, n)) {
                    clip[g] = std::max(clip[g], c);
                }
            }
            for (const auto& [g, c] : cand) {
                totals[n - 1] += static_cast<long>(c);
                matches[n - 1] +=
                    static_cast<long>(std::min(c, ngram::get(clip, g)));
            }
        }
    }
    int effective = 0;
    for (int n = 1; n <= kMaxOrder; ++n) {
        if (totals[n - 1] > 0) effective = n;
    }
    if (effective == 0 || pred_len == 0) return 0.0;
    double log_sum = 0.0;
    for (int n = 1; n <= effective; ++n) {
        double p;
        if (matches[n - 1] > 0) {
            p = static_cast<double>(matches[n - 1]) / totals[n - 1];
        } else if (n > 1) {
            p = 1.0 / (totals[n - 1] + 1.0);  // add-one smoothing
        } else {
            return 0.0;
        }
        log_sum += std::log(p);
    }
    const double bp =
        pred_len >= ref_len
            ? 1.0
            : std::exp(1.0 - static_cast<double>(ref_len) / pred_len);
    return 100.0 * bp * std::exp(log_sum / effective);
}

inline double bleu4(const std::vector<TokenSeq>& predictions,
                    const std::vector<TokenSeq>& references) {
    std::vector<std::vector<TokenSeq>> wrapped;
    wrapped.reserve(references.size());
    for (const auto& r : references) wrapped.push_back({r});
    return bleu4(predictions, wrapped);
}

// ---------------------------------------------------------------------------
// ROUGE-L
// ---------------------------------------------------------------------------

inline int lcs_length(const TokenSeq& a, const TokenSeq& b) {
    const int n = static_cast<int>(a.size());
    const int m = static_cast<int>(b.size());
    std::vector<int> prev(m + 1, 0), cur(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        for (int j = 1; j <= m; ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1
                                          : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

// Corpus-averaged LCS F1 (best reference per pair).
inline double rouge_l(const std::vector<TokenSeq>& predictions,
                      const std::vector<std::vector<TokenSeq>>& references) {
    if (predictions.size() != references.size()) {
        throw DataError("rouge_l: prediction/reference count mismatch");
    }
    if (predictions.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (references[i].empty()) throw DataError("rouge_l: pair without references");
        double best = 0.0;
        for (const auto& ref : references[i]) {
            const auto& pred = predictions[i];
            if (pred.empty() && ref.empty()) {
                best = std::max(best, 1.0);
                continue;
            }
            const int lcs = lcs_length(pred, ref);
            if (lcs == 0) continue;
            const double p = static_cast<double>(lcs) / pred.size();
            const double r = static_cast<double>(lcs) / ref.size();
            best = std::max(best, 2.0 * p * r / (p + r));
        }
        sum += best;
    }
    return 100.0 * sum / static_cast<double>(predictions.size());
}

inline double rouge_l(const std::vector<TokenSeq>& predictions,
                      const std::vector<TokenSeq>& references) {
    std::vector<std::vector<TokenSeq>> wrapped;
    wrapped.reserve(references.size());
    for (const auto& r : references) wrapped.push_back({r});
    return rouge_l(predictions, wrapped);
}

// ---------------------------------------------------------------------------
// Copy rate and the full report
// ---------------------------------------------------------------------------

inline double copy_rate(const std::vector<TokenSeq>& sources,
                        const std::vector<TokenSeq>& predictions) {
    if (sources.size() != predictions.size()) {
        throw DataError("copy_rate: source/prediction count mismatch");
    }
    if (sources.empty()) return 0.0;
    int copies = 0;
    for (std::size_t i = 0; i < sources.size(); ++i) {
        if (sources[i] == predictions[i]) ++copies;
    }
    return 100.0 * copies / static_cast<double>(sources.size());
}

struct MetricReport {
    long pairs = 0;
    double sari = 0.0, sari_add = 0.0, sari_keep = 0.0, sari_del = 0.0;
    double exact = 0.0;
    double bleu4 = 0.0;
    double rouge_l = 0.0;
    double ter = 0.0;
    long ter_ins = 0, ter_del = 0, ter_sub = 0, ter_shift = 0;
    double ter_ins_rate = 0.0, ter_del_rate = 0.0, ter_sub_rate = 0.0,
           ter_shift_rate = 0.0;
    double copy_rate = 0.0;
    std::string sari_variant;
    std::string bleu_smoothing = "add-one on zero match counts, n > 1";
};

// TER picks the minimizing reference per pair; Exact counts a hit against
// any reference.
inline MetricReport evaluate_corpus(
    const std::vector<TokenSeq>& sources,
    const std::vector<TokenSeq>& predictions,
    const std::vector<std::vector<TokenSeq>>& references,
    bool sari_all_f1 = false) {
    const std::size_t n = predictions.size();
    if (sources.size() != n || references.size() != n) {
        throw DataError("evaluate: corpus size mismatch");
    }
    if (n == 0) throw DataError("evaluate: empty corpus");
    MetricReport rep;
    rep.pairs = static_cast<long>(n);
    rep.sari_variant = sari_all_f1 ? "all-f1" : "original-del-precision";

    long ref_len_total = 0;
    int exact_hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const SariScore s = sari(sources[i], predictions[i], references[i],
                                 sari_all_f1);
        rep.sari += s.sari;
        rep.sari_add += s.add;
        rep.sari_keep += s.keep;
        rep.sari_del += s.del;

        for (const auto& ref : references[i]) {
            if (predictions[i] == ref) {
                ++exact_hits;
                break;
            }
        }

        TerScore best;
        long best_len = 0;
        bool first = true;
        for (const auto& ref : references[i]) {
            const TerScore t = ter(predictions[i], ref);
            if (first || t.ter < best.ter) {
                best = t;
                best_len = static_cast<long>(ref.size());
                first = false;
            }
        }
        rep.ter_ins += best.ins;
        rep.ter_del += best.del;
        rep.ter_sub += best.sub;
        rep.ter_shift += best.shift;
        ref_len_total += best_len;
    }
    const double dn = static_cast<double>(n);
    rep.sari /= dn;
    rep.sari_add /= dn;
    rep.sari_keep /= dn;
    rep.sari_del /= dn;
    rep.exact = 100.0 * exact_hits / dn;
    rep.bleu4 = bleu4(predictions, references);
    rep.rouge_l = rouge_l(predictions, references);
    rep.copy_rate = copy_rate(sources, predictions);
    if (ref_len_total > 0) {
        const double denom = static_cast<double>(ref_len_total);
        rep.ter_ins_rate = 100.0 * rep.ter_ins / denom;
        rep.ter_del_rate = 100.0 * rep.ter_del / denom;
        rep.ter_sub_rate = 100.0 * rep.ter_sub / denom;
        rep.ter_shift_rate = 100.0 * rep.ter_shift / denom;
        rep.ter = 100.0 *
                  (rep.ter_ins + rep.ter_del + rep.ter_sub + rep.ter_shift) /
                  denom;
    }
    return rep;
}

}  // namespace felix
