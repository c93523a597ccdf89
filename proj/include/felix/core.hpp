// Shared domain types: tokens, sentinels, vocabulary, errors.

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace felix {

// A tokenized sentence. Holds a leading [CLS] only where a caller adds one.
using TokenSeq = std::vector<std::string>;

// Malformed input, inconsistent records, structural violations.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// NaN/Inf reaching a loss or a parameter.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace sentinel {
inline constexpr std::string_view kCls       = "[CLS]";
inline constexpr std::string_view kMask      = "[MASK]";
inline constexpr std::string_view kPad       = "[PAD]";
inline constexpr std::string_view kReplOpen  = "[REPL]";
inline constexpr std::string_view kReplClose = "[/REPL]";
inline constexpr std::string_view kUnk       = "[UNK]";

inline constexpr std::array<std::string_view, 6> kAll = {
    kCls, kMask, kPad, kReplOpen, kReplClose, kUnk};
}  // namespace sentinel

inline bool is_sentinel(std::string_view tok) {
    return std::find(sentinel::kAll.begin(), sentinel::kAll.end(), tok) !=
           sentinel::kAll.end();
}

struct TokenizerConfig {
    bool lowercase = false;
};

namespace detail {

// A token that is a sentinel, or a sentinel behind N backslashes, gains one
// backslash on the way in and loses it on the way out. Keeps user text that
// happens to spell "[CLS]" round-trippable without ever emitting a sentinel.
inline bool is_escaped_sentinel(std::string_view tok) {
    std::size_t i = 0;
    while (i < tok.size() && tok[i] == '\\') ++i;
    return is_sentinel(tok.substr(i));
}

}  // namespace detail

// Whitespace tokenizer. Never emits a reserved sentinel from user text.
inline TokenSeq tokenize(const std::string& text,
                         const TokenizerConfig& cfg = {}) {
    TokenSeq out;
    std::string cur;
    auto flush = [&] {
        if (cur.empty()) return;
        if (cfg.lowercase) {
            std::transform(cur.begin(), cur.end(), cur.begin(), [](unsigned char c) {
                return static_cast<char>(std::tolower(c));
            });
        }
        if (detail::is_escaped_sentinel(cur)) cur.insert(cur.begin(), '\\');
        out.push_back(std::move(cur));
        cur.clear();
    };
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            flush();
        } else {
            cur.push_back(c);
        }
    }
    flush();
    return out;
}

// Joins with single spaces. Rejects sentinel tokens by name.
inline std::string detokenize(const TokenSeq& seq) {
    std::string out;
    for (const auto& tok : seq) {
        if (is_sentinel(tok)) {
            throw DataError("detokenize: sentinel token in sequence: " + tok);
        }
        if (!out.empty()) out.push_back(' ');
        if (tok.size() > 1 && tok.front() == '\\' &&
            detail::is_escaped_sentinel(tok)) {
            out.append(tok.begin() + 1, tok.end());
        } else {
            out.append(tok);
        }
    }
    return out;
}

// Token <-> id bijection with fixed reserved ids.
class Vocabulary {
public:
    static constexpr int kClsId = 0;
    static constexpr int kMaskId = 1;
    static constexpr int kPadId = 2;
    static constexpr int kReplOpenId = 3;
    static constexpr int kReplCloseId = 4;
    static constexpr int kUnkId = 5;

    Vocabulary() {
        for (auto s : sentinel::kAll) add(std::string(s));
    }

    // Registers the token if new; returns its id either way.
    int add(const std::string& tok) {
        auto it = ids_.find(tok);
        if (it != ids_.end()) return it->second;
        int id = static_cast<int>(tokens_.size());
        tokens_.push_back(tok);
        ids_.emplace(tok, id);
        return id;
    }

    void add_all(const TokenSeq& seq) {
        for (const auto& t : seq) add(t);
    }

    int id_of(const std::string& tok) const {
        auto it = ids_.find(tok);
        return it == ids_.end() ? kUnkId : it->second;
    }

    bool contains(const std::string& tok) const { return ids_.count(tok) > 0; }

    const std::string& token_of(int id) const {
        if (id < 0 || id >= static_cast<int>(tokens_.size())) {
            throw DataError("vocabulary: id out of range: " + std::to_string(id));
        }
        return tokens_[id];
    }

    std::vector<int> encode(const TokenSeq& seq) const {
        std::vector<int> out;
        out.reserve(seq.size());
        for (const auto& t : seq) out.push_back(id_of(t));
        return out;
    }

    int size() const { return static_cast<int>(tokens_.size()); }

    // Registration order; reserved sentinels occupy ids 0..5.
    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> ids_;
};

}  // namespace felix
