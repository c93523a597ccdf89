// Command-line pipeline: align | train | predict | evaluate | stats.
// Data goes to files, logs to stderr. Every output embeds the effective
// config. Exit codes: 0 ok, 1 usage, 2 data error, 3 numeric failure.

#include <felix/felix.hpp>

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace {

using felix::Json;
using felix::TokenSeq;

struct Options {
    std::string input;
    std::string output;
    std::string out_dir = "run";
    std::string tagger_path;
    std::string insertion_path;
    std::string references;
    std::string out_prefix = "report";

    std::string mode = "masking";
    int max_span = 8;  // 0 = unbounded (align/stats only)
    bool no_pointing = false;
    bool lowercase = false;
    std::uint64_t seed = 1;
    int d = 64;
    int layers = 2;
    int heads = 4;
    int max_len = 64;
    double lr = 0.05;
    double momentum = 0.0;
    int steps = 2000;
    int batch_size = 16;
    int beam_size = 5;
    bool extra_pointer_layer = false;
    double clip_norm = 1.0;
    bool sari_all_f1 = false;
};

felix::SpanMode parse_mode(const std::string& mode) {
    return mode == "infilling" ? felix::SpanMode::Infilling
                               : felix::SpanMode::Masking;
}

felix::AlignmentConfig align_config(const Options& o) {
    felix::AlignmentConfig cfg;
    cfg.mode = parse_mode(o.mode);
    cfg.max_span = o.max_span == 0 ? std::nullopt : std::optional<int>(o.max_span);
    cfg.pointing = !o.no_pointing;
    return cfg;
}

felix::Hyperparams hyperparams(const Options& o) {
    if (o.max_span < 1) {
        throw felix::DataError(
            "models require a bounded max_span (use --max-span >= 1)");
    }
    felix::Hyperparams hp;
    hp.d = o.d;
    hp.layers = o.layers;
    hp.heads = o.heads;
    hp.max_len = o.max_len;
    hp.lr = o.lr;
    hp.momentum = o.momentum;
    hp.steps = o.steps;
    hp.batch_size = o.batch_size;
    hp.seed = o.seed;
    hp.mode = parse_mode(o.mode);
    hp.max_span = o.max_span;
    hp.pointing = !o.no_pointing;
    hp.beam_size = o.beam_size;
    hp.extra_pointer_layer = o.extra_pointer_layer;
    hp.clip_norm = o.clip_norm;
    return hp;
}

Json effective_config(const Options& o) {
    Json j;
    j["mode"] = o.mode;
    j["max-span"] = o.max_span;
    j["no-pointing"] = o.no_pointing;
    j["lowercase"] = o.lowercase;
    j["seed"] = o.seed;
    j["d"] = o.d;
    j["layers"] = o.layers;
    j["heads"] = o.heads;
    j["max-len"] = o.max_len;
    j["lr"] = o.lr;
    j["momentum"] = o.momentum;
    j["steps"] = o.steps;
    j["batch-size"] = o.batch_size;
    j["beam-size"] = o.beam_size;
    j["extra-pointer-layer"] = o.extra_pointer_layer;
    j["clip-norm"] = o.clip_norm;
    j["sari-all-f1"] = o.sari_all_f1;
    return j;
}

void add_common_options(CLI::App* cmd, Options& o) {
    cmd->set_config("--config", "", "config file with 'key = value' lines");
    cmd->add_option("--mode", o.mode, "insertion representation")
        ->check(CLI::IsMember({"masking", "infilling"}))
        ->capture_default_str();
    cmd->add_option("--max-span", o.max_span,
                    "maximum insertion span; 0 = unbounded (align/stats only)")
        ->capture_default_str();
    cmd->add_flag("--no-pointing", o.no_pointing,
                  "source-order keeps, no reordering");
    cmd->add_flag("--lowercase", o.lowercase, "lowercase while tokenizing");
    cmd->add_option("--seed", o.seed, "fixes every random draw")
        ->capture_default_str();
    cmd->add_option("--d", o.d, "hidden size")->capture_default_str();
    cmd->add_option("--layers", o.layers, "encoder layers")->capture_default_str();
    cmd->add_option("--heads", o.heads, "attention heads")->capture_default_str();
    cmd->add_option("--max-len", o.max_len, "maximum sequence length")
        ->capture_default_str();
    cmd->add_option("--lr", o.lr, "learning rate")->capture_default_str();
    cmd->add_option("--momentum", o.momentum, "SGD momentum")
        ->capture_default_str();
    cmd->add_option("--steps", o.steps, "training steps")->capture_default_str();
    cmd->add_option("--batch-size", o.batch_size, "examples per step")
        ->capture_default_str();
    cmd->add_option("--beam-size", o.beam_size, "pointer beam width")
        ->capture_default_str();
    cmd->add_flag("--extra-pointer-layer", o.extra_pointer_layer,
                  "extra transformer layer before the query projection");
    cmd->add_option("--clip-norm", o.clip_norm,
                    "global gradient-norm clip, 0 disables")
        ->capture_default_str();
    cmd->add_flag("--sari-all-f1", o.sari_all_f1,
                  "score SARI deletion with F1 instead of precision");
}

TokenSeq tokenize_opt(const std::string& text, const Options& o) {
    felix::TokenizerConfig cfg;
    cfg.lowercase = o.lowercase;
    return felix::tokenize(text, cfg);
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw felix::DataError("cannot write " + path);
    return out;
}

// ---------------------------------------------------------------------------

int cmd_align(const Options& o) {
    const auto records = felix::read_corpus_jsonl(o.input);
    const felix::AlignmentConfig cfg = align_config(o);
    auto out = open_out(o.output);

    long aligned = 0;
    long mask_tokens = 0, target_tokens = 0;
    std::map<std::string, long> skipped;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!records[i].target) {
            throw felix::DataError("record " + std::to_string(i + 1) +
                                   ": missing 'target'");
        }
        const TokenSeq src = tokenize_opt(records[i].source, o);
        const TokenSeq tgt = tokenize_opt(*records[i].target, o);
        const auto outcome = felix::align(src, tgt, cfg);
        if (!outcome.ok()) {
            ++skipped[felix::to_string(outcome.reason)];
            continue;
        }
        ++aligned;
        mask_tokens += outcome.inserted_tokens;
        target_tokens += static_cast<long>(tgt.size());
        const auto ex =
            felix::make_training_example(src, tgt, *outcome.plan, cfg);
        out << felix::aligned_record_to_json(felix::make_aligned_record(
                   src, tgt, *outcome.plan, ex.labels))
                   .dump()
            << "\n";
    }
    Json summary;
    summary["pairs"] = records.size();
    summary["aligned"] = aligned;
    summary["skipped"] = skipped;
    summary["coverage_percent"] =
        records.empty() ? 100.0 : 100.0 * aligned / double(records.size());
    summary["mask_percent"] =
        target_tokens == 0 ? 0.0 : 100.0 * mask_tokens / double(target_tokens);
    summary["config"] = effective_config(o);
    out << Json{{"summary", summary}}.dump() << "\n";
    std::cerr << "align: " << aligned << "/" << records.size()
              << " pairs aligned, coverage "
              << summary["coverage_percent"].dump() << "%, mask "
              << summary["mask_percent"].dump() << "%\n";
    return 0;
}

int cmd_train(const Options& o) {
    const auto records = felix::read_aligned_jsonl(o.input);
    if (records.empty()) {
        throw felix::DataError(o.input + ": no aligned records");
    }
    const felix::AlignmentConfig cfg = align_config(o);
    std::vector<felix::AlignedExample> corpus;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto plan = felix::plan_from_record(records[i]);
        felix::AlignedExample ex;
        try {
            ex = felix::make_training_example(records[i].source_tokens,
                                              records[i].target_tokens, plan,
                                              cfg);
        } catch (const felix::DataError& e) {
            throw felix::DataError("record " + std::to_string(i + 1) + ": " +
                                   e.what());
        }
        if (ex.labels != records[i].insertion_labels) {
            throw felix::DataError(
                "record " + std::to_string(i + 1) +
                ": stored insertion labels do not match the plan (was the "
                "file produced with the same mode and max-span?)");
        }
        corpus.push_back(std::move(ex));
    }

    std::filesystem::create_directories(o.out_dir);
    const std::string log_path =
        (std::filesystem::path(o.out_dir) / "loss_log.tsv").string();
    auto log = open_out(log_path);
    log << "step\tmodel\tloss\n";
    const felix::Hyperparams hp = hyperparams(o);
    const int report_every = std::max(1, hp.steps / 10);
    auto models = felix::train(corpus, hp, [&](const felix::TrainLogEntry& e) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", e.loss);
        log << e.step << "\t" << e.model << "\t" << buf << "\n";
        if (e.step % report_every == 0) {
            std::cerr << e.model << " step " << e.step << " loss " << buf
                      << "\n";
        }
    });

    const std::string tagger_path =
        (std::filesystem::path(o.out_dir) / "tagger.ckpt").string();
    const std::string insertion_path =
        (std::filesystem::path(o.out_dir) / "insertion.ckpt").string();
    felix::save_tagger(tagger_path, models.tagger);
    felix::save_insertion(insertion_path, models.insertion);

    auto cfg_out = open_out(
        (std::filesystem::path(o.out_dir) / "config.json").string());
    cfg_out << effective_config(o).dump(2) << "\n";
    std::cerr << "train: wrote " << tagger_path << ", " << insertion_path
              << ", " << log_path << "\n";
    return 0;
}

int cmd_predict(const Options& o) {
    auto tagger = felix::load_tagger(o.tagger_path);
    auto insertion = felix::load_insertion(o.insertion_path);
    if (tagger.vocab.tokens() != insertion.vocab.tokens()) {
        throw felix::DataError(
            "checkpoint vocabularies differ; train both models together");
    }
    if (tagger.hp.mode != insertion.hp.mode ||
        tagger.hp.max_span != insertion.hp.max_span) {
        throw felix::DataError(
            "checkpoint mode/max_span differ between tagger and insertion");
    }
    const auto records = felix::read_corpus_jsonl(o.input);
    auto out = open_out(o.output);
    long loops = 0;
    for (const auto& rec : records) {
        const TokenSeq src = tokenize_opt(rec.source, o);
        const auto result = felix::predict(src, tagger, insertion);
        loops += result.greedy_would_loop ? 1 : 0;
        Json j;
        j["source"] = rec.source;
        j["prediction"] = felix::detokenize(result.output);
        j["cls_tag"] = felix::to_string(result.plan.cls_tag);
        Json tags = Json::array();
        for (const auto& t : result.plan.tags) tags.push_back(felix::to_string(t));
        j["tags"] = std::move(tags);
        j["chain"] = result.chain.positions;
        j["masked_input"] = result.masked.tokens;
        out << j.dump() << "\n";
    }
    Json summary;
    summary["records"] = records.size();
    summary["greedy_loop_rate_percent"] =
        records.empty() ? 0.0 : 100.0 * loops / double(records.size());
    summary["config"] = effective_config(o);
    out << Json{{"summary", summary}}.dump() << "\n";
    std::cerr << "predict: " << records.size()
              << " records; greedy decode would loop on "
              << summary["greedy_loop_rate_percent"].dump() << "%\n";
    return 0;
}

struct PredictionRow {
    std::string source;
    std::string prediction;
};

std::vector<PredictionRow> read_predictions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw felix::DataError("cannot open " + path);
    std::vector<PredictionRow> out;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw felix::DataError("line " + std::to_string(line_no) +
                                   ": malformed JSON");
        }
        if (j.is_object() && j.contains("summary")) continue;
        if (!j.contains("source") || !j.contains("prediction")) {
            throw felix::DataError("line " + std::to_string(line_no) +
                                   ": need 'source' and 'prediction'");
        }
        out.push_back({j["source"].get<std::string>(),
                       j["prediction"].get<std::string>()});
    }
    return out;
}

int cmd_evaluate(const Options& o) {
    const auto preds = read_predictions(o.input);
    if (preds.empty()) {
        throw felix::DataError(o.input + ": no prediction records");
    }
    const auto refs = felix::read_corpus_jsonl(o.references);
    if (refs.size() != preds.size()) {
        throw felix::DataError("prediction/reference record counts differ: " +
                               std::to_string(preds.size()) + " vs " +
                               std::to_string(refs.size()));
    }
    std::vector<TokenSeq> sources, predictions;
    std::vector<std::vector<TokenSeq>> references;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        sources.push_back(tokenize_opt(preds[i].source, o));
        predictions.push_back(tokenize_opt(preds[i].prediction, o));
        std::vector<TokenSeq> ref_set;
        if (refs[i].target) ref_set.push_back(tokenize_opt(*refs[i].target, o));
        for (const auto& r : refs[i].references) {
            ref_set.push_back(tokenize_opt(r, o));
        }
        if (ref_set.empty()) {
            throw felix::DataError("reference record " + std::to_string(i + 1) +
                                   " has neither 'target' nor 'references'");
        }
        references.push_back(std::move(ref_set));
    }
    const auto report = felix::evaluate_corpus(sources, predictions, references,
                                               o.sari_all_f1);
    Json j = felix::report_to_json(report);
    j["config"] = effective_config(o);
    open_out(o.out_prefix + ".json") << j.dump(2) << "\n";
    const std::string text = felix::report_to_text(report);
    open_out(o.out_prefix + ".txt") << text;
    std::cerr << text;
    return 0;
}

int cmd_stats(const Options& o) {
    const auto records = felix::read_corpus_jsonl(o.input);
    if (records.empty()) throw felix::DataError(o.input + ": empty corpus");
    std::vector<std::pair<TokenSeq, TokenSeq>> pairs;
    long src_tokens = 0, tgt_tokens = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!records[i].target) {
            throw felix::DataError("record " + std::to_string(i + 1) +
                                   ": missing 'target'");
        }
        pairs.emplace_back(tokenize_opt(records[i].source, o),
                           tokenize_opt(*records[i].target, o));
        src_tokens += static_cast<long>(pairs.back().first.size());
        tgt_tokens += static_cast<long>(pairs.back().second.size());
    }

    long ins = 0, del = 0, sub = 0, shift = 0, ref_len = 0, ter_pairs = 0;
    for (const auto& [src, tgt] : pairs) {
        if (tgt.empty()) continue;
        const auto t = felix::ter(src, tgt);
        ins += t.ins;
        del += t.del;
        sub += t.sub;
        shift += t.shift;
        ref_len += static_cast<long>(tgt.size());
        ++ter_pairs;
    }

    Json j;
    j["pairs"] = records.size();
    j["mean_source_length"] = double(src_tokens) / double(records.size());
    j["mean_target_length"] = double(tgt_tokens) / double(records.size());
    Json ter_json;
    ter_json["pairs_scored"] = ter_pairs;
    ter_json["ter"] =
        ref_len == 0 ? 0.0 : 100.0 * double(ins + del + sub + shift) / ref_len;
    ter_json["ins"] = ref_len == 0 ? 0.0 : 100.0 * double(ins) / ref_len;
    ter_json["del"] = ref_len == 0 ? 0.0 : 100.0 * double(del) / ref_len;
    ter_json["sub"] = ref_len == 0 ? 0.0 : 100.0 * double(sub) / ref_len;
    ter_json["shift"] = ref_len == 0 ? 0.0 : 100.0 * double(shift) / ref_len;
    j["source_target_ter"] = std::move(ter_json);

    for (const std::string mode : {"masking", "infilling"}) {
        for (const bool pointing : {true, false}) {
            felix::AlignmentConfig cfg;
            cfg.mode = parse_mode(mode);
            cfg.max_span = o.max_span == 0 ? std::nullopt
                                           : std::optional<int>(o.max_span);
            cfg.pointing = pointing;
            const auto st = felix::alignment_stats(pairs, cfg);
            Json entry;
            entry["coverage_percent"] = st.coverage_percent;
            entry["mask_percent"] = st.mask_percent;
            j[mode + (pointing ? "_pointing" : "_no_pointing")] =
                std::move(entry);
        }
    }
    j["config"] = effective_config(o);
    open_out(o.out_prefix + ".json") << j.dump(2) << "\n";
    std::string text;
    text += "pairs: " + std::to_string(records.size()) + "\n";
    text += "mean_source_length: " +
            felix::format_percent(j["mean_source_length"].get<double>()) + "\n";
    text += "mean_target_length: " +
            felix::format_percent(j["mean_target_length"].get<double>()) + "\n";
    text += "source->target TER: " +
            felix::format_percent(j["source_target_ter"]["ter"].get<double>()) +
            " (ins " +
            felix::format_percent(j["source_target_ter"]["ins"].get<double>()) +
            ", del " +
            felix::format_percent(j["source_target_ter"]["del"].get<double>()) +
            ", sub " +
            felix::format_percent(j["source_target_ter"]["sub"].get<double>()) +
            ", shift " +
            felix::format_percent(
                j["source_target_ter"]["shift"].get<double>()) +
            ")\n";
    for (const std::string key :
         {"masking_pointing", "masking_no_pointing", "infilling_pointing",
          "infilling_no_pointing"}) {
        text += key + ": coverage " +
                felix::format_percent(j[key]["coverage_percent"].get<double>()) +
                "%, mask " +
                felix::format_percent(j[key]["mask_percent"].get<double>()) +
                "%\n";
    }
    open_out(o.out_prefix + ".txt") << text;
    std::cerr << text;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Text editing via tagging, pointing, and masked insertion"};
    app.require_subcommand(1);
    Options o;

    auto* align = app.add_subcommand("align", "build training targets");
    align->add_option("--input", o.input, "corpus.jsonl with source/target")
        ->required();
    align->add_option("--output", o.output, "aligned.jsonl")->required();
    add_common_options(align, o);

    auto* train = app.add_subcommand("train", "train tagger and insertion");
    train->add_option("--input", o.input, "aligned.jsonl")->required();
    train->add_option("--out-dir", o.out_dir, "checkpoint directory")
        ->capture_default_str();
    add_common_options(train, o);

    auto* predict = app.add_subcommand("predict", "run the two-step pipeline");
    predict->add_option("--input", o.input, "corpus.jsonl with sources")
        ->required();
    predict->add_option("--tagger", o.tagger_path, "tagger checkpoint")
        ->required();
    predict->add_option("--insertion", o.insertion_path, "insertion checkpoint")
        ->required();
    predict->add_option("--output", o.output, "predictions.jsonl")->required();
    add_common_options(predict, o);

    auto* evaluate = app.add_subcommand("evaluate", "score predictions");
    evaluate->add_option("--predictions", o.input, "predictions.jsonl")
        ->required();
    evaluate->add_option("--references", o.references, "references.jsonl")
        ->required();
    evaluate->add_option("--out-prefix", o.out_prefix, "report file prefix")
        ->capture_default_str();
    add_common_options(evaluate, o);

    auto* stats = app.add_subcommand("stats", "corpus statistics");
    stats->add_option("--input", o.input, "corpus.jsonl with source/target")
        ->required();
    stats->add_option("--out-prefix", o.out_prefix, "report file prefix")
        ->capture_default_str();
    add_common_options(stats, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (align->parsed()) return cmd_align(o);
        if (train->parsed()) return cmd_train(o);
        if (predict->parsed()) return cmd_predict(o);
        if (evaluate->parsed()) return cmd_evaluate(o);
        if (stats->parsed()) return cmd_stats(o);
    } catch (const felix::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const felix::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
