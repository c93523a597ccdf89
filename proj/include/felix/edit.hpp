// Edit tags, the tag-id enumeration used by the tagger head, and EditPlan:
// per-token tags plus the pointer map realized into an output ordering.

#pragma once

#include "felix/core.hpp"

#include <string>
#include <vector>

namespace felix {

enum class TagBase { Keep, Delete };

// How insertion spans are represented in the tag set.
//   Masking:   the tagger declares the span length (INS_k -> k MASKs).
//   Infilling: the tagger emits a generic INS; the insertion model pads a
//              fixed-length span with [PAD].
enum class SpanMode { Masking, Infilling };

struct Tag {
    static constexpr int kGeneric = -1;

    TagBase base = TagBase::Keep;
    int ins = 0;  // 0 = no insertion, k >= 1 = INS_k, kGeneric = bare INS

    static Tag keep(int ins = 0) { return {TagBase::Keep, ins}; }
    static Tag del(int ins = 0) { return {TagBase::Delete, ins}; }

    bool is_keep() const { return base == TagBase::Keep; }
    bool has_insertion() const { return ins != 0; }
    bool generic_insertion() const { return ins == kGeneric; }

    bool operator==(const Tag&) const = default;
};

inline std::string to_string(const Tag& t) {
    std::string s = t.base == TagBase::Keep ? "KEEP" : "DELETE";
    if (t.ins == Tag::kGeneric) {
        s += "|INS";
    } else if (t.ins > 0) {
        s += "|INS_" + std::to_string(t.ins);
    }
    return s;
}

inline Tag tag_from_string(const std::string& s) {
    std::string base = s;
    int ins = 0;
    if (auto bar = s.find('|'); bar != std::string::npos) {
        base = s.substr(0, bar);
        std::string marker = s.substr(bar + 1);
        if (marker == "INS") {
            ins = Tag::kGeneric;
        } else if (marker.rfind("INS_", 0) == 0) {
            ins = std::stoi(marker.substr(4));
            if (ins < 1) throw DataError("tag: bad insertion count in " + s);
        } else {
            throw DataError("tag: unknown marker in " + s);
        }
    }
    if (base == "KEEP") return Tag::keep(ins);
    if (base == "DELETE") return Tag::del(ins);
    throw DataError("tag: unknown base in " + s);
}

// Fixed id layout per mode so checkpoints and tests agree.
//   Masking (max_span = M):  0..M = KEEP/+INS_k, M+1..2M+1 = DELETE/+INS_k.
//   Infilling:               0 KEEP, 1 KEEP|INS, 2 DELETE, 3 DELETE|INS.
class TagVocab {
public:
    TagVocab(SpanMode mode, int max_span) : mode_(mode), max_span_(max_span) {
        if (max_span < 1) throw DataError("tag vocab: max_span must be >= 1");
    }

    SpanMode mode() const { return mode_; }
    int max_span() const { return max_span_; }

    int size() const {
        return mode_ == SpanMode::Masking ? 2 * (max_span_ + 1) : 4;
    }

    int id_of(const Tag& t) const {
        int base = t.base == TagBase::Keep ? 0 : 1;
        if (mode_ == SpanMode::Masking) {
            if (t.ins == Tag::kGeneric) {
                throw DataError("tag vocab: generic INS under masking mode");
            }
            if (t.ins > max_span_) {
                throw DataError("tag vocab: INS_" + std::to_string(t.ins) +
                                " exceeds max_span " + std::to_string(max_span_));
            }
            return base * (max_span_ + 1) + t.ins;
        }
        if (t.ins > 0) {
            throw DataError("tag vocab: counted INS under infilling mode");
        }
        return base * 2 + (t.ins == Tag::kGeneric ? 1 : 0);
    }

    Tag tag_of(int id) const {
        if (id < 0 || id >= size()) {
            throw DataError("tag vocab: id out of range: " + std::to_string(id));
        }
        if (mode_ == SpanMode::Masking) {
            int base = id / (max_span_ + 1);
            int ins = id % (max_span_ + 1);
            return {base == 0 ? TagBase::Keep : TagBase::Delete, ins};
        }
        return {id < 2 ? TagBase::Keep : TagBase::Delete,
                id % 2 == 1 ? Tag::kGeneric : 0};
    }

private:
    SpanMode mode_;
    int max_span_;
};

// Tags for source tokens 1..n plus the pointer map over {0=[CLS], 1..n}.
// pointer_next[i] = j means the token at i is followed in the output by the
// token at j; -1 means no outgoing pointer. cls_tag is Keep-based and carries
// the insertion span, if any, on the edge leaving [CLS].
struct EditPlan {
    std::vector<Tag> tags;
    Tag cls_tag = Tag::keep();
    std::vector<int> pointer_next;  // size n+1

    int n_source() const { return static_cast<int>(tags.size()); }

    // Position 0 ([CLS]) counts as kept: it heads every chain.
    bool is_keep(int pos) const {
        return pos == 0 || tags[pos - 1].base == TagBase::Keep;
    }

    std::vector<int> keep_positions() const {
        std::vector<int> out;
        for (int i = 1; i <= n_source(); ++i) {
            if (is_keep(i)) out.push_back(i);
        }
        return out;
    }
};

// Structural checks: pointer targets are KEEP and unique, the chain from
// [CLS] is acyclic and visits every KEEP position, DELETE rows do not point.
inline void validate_plan(const EditPlan& plan) {
    const int n = plan.n_source();
    if (static_cast<int>(plan.pointer_next.size()) != n + 1) {
        throw DataError("plan: pointer map size != n+1");
    }
    if (plan.cls_tag.base != TagBase::Keep) {
        throw DataError("plan: [CLS] tag must be KEEP-based");
    }
    std::vector<char> pointed(n + 1, 0);
    for (int i = 0; i <= n; ++i) {
        int j = plan.pointer_next[i];
        if (j == -1) continue;
        if (!plan.is_keep(i)) {
            throw DataError("plan: DELETE position " + std::to_string(i) +
                            " has an outgoing pointer");
        }
        if (j < 1 || j > n || !plan.is_keep(j)) {
            throw DataError("plan: pointer target " + std::to_string(j) +
                            " is not a KEEP position");
        }
        if (pointed[j]) {
            throw DataError("plan: position " + std::to_string(j) +
                            " pointed to twice");
        }
        pointed[j] = 1;
    }
    // Chain walk: must terminate without revisiting and cover all keeps.
    std::vector<char> visited(n + 1, 0);
    int at = 0;
    int steps = 0;
    visited[0] = 1;
    while (plan.pointer_next[at] != -1) {
        at = plan.pointer_next[at];
        if (visited[at]) {
            throw DataError("plan: pointer cycle at position " + std::to_string(at));
        }
        visited[at] = 1;
        if (++steps > n + 1) throw DataError("plan: pointer chain too long");
    }
    for (int i = 1; i <= n; ++i) {
        if (plan.is_keep(i) && !visited[i]) {
            throw DataError("plan: KEEP position " + std::to_string(i) +
                            " unreachable from [CLS]");
        }
    }
}

}  // namespace felix
