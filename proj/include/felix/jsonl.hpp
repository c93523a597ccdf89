// JSONL corpus and artifact schemas plus metric-report serialization.
// One JSON object per line; a trailing {"summary": ...} object carries
// counters and the effective config for provenance.

#pragma once

#include "felix/core.hpp"
#include "felix/edit.hpp"
#include "felix/metrics.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace felix {

using Json = nlohmann::ordered_json;

struct CorpusRecord {
    std::string source;
    std::optional<std::string> target;
    std::vector<std::string> references;
};

inline CorpusRecord corpus_record_from_json(const Json& j, long line_no) {
    auto fail = [line_no](const std::string& what) -> DataError {
        return DataError("line " + std::to_string(line_no) + ": " + what);
    };
    if (!j.is_object()) throw fail("expected a JSON object");
    CorpusRecord rec;
    if (!j.contains("source") || !j["source"].is_string()) {
        throw fail("missing string field 'source'");
    }
    rec.source = j["source"].get<std::string>();
    if (rec.source.empty()) throw fail("'source' must be non-empty");
    if (j.contains("target")) {
        if (!j["target"].is_string()) throw fail("'target' must be a string");
        rec.target = j["target"].get<std::string>();
    }
    if (j.contains("references")) {
        if (!j["references"].is_array()) {
            throw fail("'references' must be an array");
        }
        for (const auto& r : j["references"]) {
            if (!r.is_string()) throw fail("'references' entries must be strings");
            rec.references.push_back(r.get<std::string>());
        }
    }
    return rec;
}

// Reads every non-summary object; malformed lines fail with their number.
inline std::vector<CorpusRecord> read_corpus_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::vector<CorpusRecord> out;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw DataError("line " + std::to_string(line_no) + ": malformed JSON");
        }
        if (j.is_object() && j.contains("summary")) continue;
        out.push_back(corpus_record_from_json(j, line_no));
    }
    return out;
}

// One alignable training pair.
struct AlignedRecord {
    TokenSeq source_tokens;
    TokenSeq target_tokens;
    std::string cls_tag;
    std::vector<std::string> tags;
    std::vector<std::pair<int, int>> pointers;  // (from, to), sorted by from
    TokenSeq insertion_labels;
};

inline AlignedRecord make_aligned_record(const TokenSeq& source,
                                         const TokenSeq& target,
                                         const EditPlan& plan,
                                         const TokenSeq& labels) {
    AlignedRecord rec;
    rec.source_tokens = source;
    rec.target_tokens = target;
    rec.cls_tag = to_string(plan.cls_tag);
    for (const Tag& t : plan.tags) rec.tags.push_back(to_string(t));
    for (int i = 0; i < static_cast<int>(plan.pointer_next.size()); ++i) {
        if (plan.pointer_next[i] != -1) {
            rec.pointers.emplace_back(i, plan.pointer_next[i]);
        }
    }
    rec.insertion_labels = labels;
    return rec;
}

inline EditPlan plan_from_record(const AlignedRecord& rec) {
    EditPlan plan;
    plan.cls_tag = tag_from_string(rec.cls_tag);
    for (const auto& t : rec.tags) plan.tags.push_back(tag_from_string(t));
    plan.pointer_next.assign(plan.tags.size() + 1, -1);
    for (const auto& [from, to] : rec.pointers) {
        if (from < 0 || from >= static_cast<int>(plan.pointer_next.size())) {
            throw DataError("aligned record: pointer origin out of range");
        }
        plan.pointer_next[from] = to;
    }
    return plan;
}

inline Json aligned_record_to_json(const AlignedRecord& rec) {
    Json j;
    j["source_tokens"] = rec.source_tokens;
    j["target_tokens"] = rec.target_tokens;
    j["cls_tag"] = rec.cls_tag;
    j["tags"] = rec.tags;
    Json ptrs = Json::array();
    for (const auto& [from, to] : rec.pointers) {
        ptrs.push_back(Json::array({from, to}));
    }
    j["pointers"] = std::move(ptrs);
    j["insertion_labels"] = rec.insertion_labels;
    return j;
}

inline AlignedRecord aligned_record_from_json(const Json& j, long line_no) {
    auto fail = [line_no](const std::string& what) -> DataError {
        return DataError("line " + std::to_string(line_no) + ": " + what);
    };
    AlignedRecord rec;
    try {
        rec.source_tokens = j.at("source_tokens").get<TokenSeq>();
        rec.target_tokens = j.at("target_tokens").get<TokenSeq>();
        rec.cls_tag = j.at("cls_tag").get<std::string>();
        rec.tags = j.at("tags").get<std::vector<std::string>>();
        for (const auto& p : j.at("pointers")) {
            rec.pointers.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
        }
        rec.insertion_labels = j.at("insertion_labels").get<TokenSeq>();
    } catch (const Json::exception& e) {
        throw fail(std::string("bad aligned record: ") + e.what());
    }
    if (rec.tags.size() != rec.source_tokens.size()) {
        throw fail("tag count != source token count");
    }
    return rec;
}

inline std::vector<AlignedRecord> read_aligned_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::vector<AlignedRecord> out;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw DataError("line " + std::to_string(line_no) + ": malformed JSON");
        }
        if (j.is_object() && j.contains("summary")) continue;
        out.push_back(aligned_record_from_json(j, line_no));
    }
    return out;
}

inline std::string format_percent(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", x);
    return buf;
}

inline Json report_to_json(const MetricReport& rep) {
    Json j;
    j["pairs"] = rep.pairs;
    j["sari"] = rep.sari;
    j["sari_add"] = rep.sari_add;
    j["sari_keep"] = rep.sari_keep;
    j["sari_del"] = rep.sari_del;
    j["exact"] = rep.exact;
    j["bleu4"] = rep.bleu4;
    j["rouge_l"] = rep.rouge_l;
    j["ter"] = rep.ter;
    j["ter_components"] = {
        {"ins", rep.ter_ins},   {"del", rep.ter_del},
        {"sub", rep.ter_sub},   {"shift", rep.ter_shift},
    };
    j["ter_rates"] = {
        {"ins", rep.ter_ins_rate},
        {"del", rep.ter_del_rate},
        {"sub", rep.ter_sub_rate},
        {"shift", rep.ter_shift_rate},
    };
    j["copy_rate"] = rep.copy_rate;
    j["sari_variant"] = rep.sari_variant;
    j["bleu_smoothing"] = rep.bleu_smoothing;
    return j;
}

inline std::string report_to_text(const MetricReport& rep) {
    std::string out;
    auto kv = [&out](const std::string& key, const std::string& value) {
        out += key + ": " + value + "\n";
    };
    kv("pairs", std::to_string(rep.pairs));
    kv("sari", format_percent(rep.sari));
    kv("sari_add", format_percent(rep.sari_add));
    kv("sari_keep", format_percent(rep.sari_keep));
    kv("sari_del", format_percent(rep.sari_del));
    kv("exact", format_percent(rep.exact));
    kv("bleu4", format_percent(rep.bleu4));
    kv("rouge_l", format_percent(rep.rouge_l));
    kv("ter", format_percent(rep.ter));
    kv("ter_ins", std::to_string(rep.ter_ins) + " (" +
                      format_percent(rep.ter_ins_rate) + ")");
    kv("ter_del", std::to_string(rep.ter_del) + " (" +
                      format_percent(rep.ter_del_rate) + ")");
    kv("ter_sub", std::to_string(rep.ter_sub) + " (" +
                      format_percent(rep.ter_sub_rate) + ")");
    kv("ter_shift", std::to_string(rep.ter_shift) + " (" +
                        format_percent(rep.ter_shift_rate) + ")");
    kv("copy_rate", format_percent(rep.copy_rate));
    kv("sari_variant", rep.sari_variant);
    kv("bleu_smoothing", rep.bleu_smoothing);
    return out;
}

}  // namespace felix
