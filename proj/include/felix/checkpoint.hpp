// Versioned checkpoint files: a JSON header (kind, hyperparameters, vocab,
// tensor directory) followed by raw little-endian doubles. Loading rebuilds
// the model from the header and validates every tensor name and shape.

#pragma once

#include "felix/core.hpp"
#include "felix/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

namespace felix {

inline constexpr char kCheckpointMagic[8] = {'F', 'E', 'L', 'I',
                                             'X', 'C', 'K', '1'};

inline nlohmann::ordered_json hyperparams_to_json(const Hyperparams& hp) {
    nlohmann::ordered_json j;
    j["d"] = hp.d;
    j["layers"] = hp.layers;
    j["heads"] = hp.heads;
    j["max_len"] = hp.max_len;
    j["lr"] = hp.lr;
    j["momentum"] = hp.momentum;
    j["steps"] = hp.steps;
    j["batch_size"] = hp.batch_size;
    j["seed"] = hp.seed;
    j["mode"] = hp.mode == SpanMode::Masking ? "masking" : "infilling";
    j["max_span"] = hp.max_span;
    j["pointing"] = hp.pointing;
    j["beam_size"] = hp.beam_size;
    j["extra_pointer_layer"] = hp.extra_pointer_layer;
    j["clip_norm"] = hp.clip_norm;
    return j;
}

inline Hyperparams hyperparams_from_json(const nlohmann::ordered_json& j) {
    Hyperparams hp;
    hp.d = j.at("d").get<int>();
    hp.layers = j.at("layers").get<int>();
    hp.heads = j.at("heads").get<int>();
    hp.max_len = j.at("max_len").get<int>();
    hp.lr = j.at("lr").get<double>();
    hp.momentum = j.at("momentum").get<double>();
    hp.steps = j.at("steps").get<int>();
    hp.batch_size = j.at("batch_size").get<int>();
    hp.seed = j.at("seed").get<std::uint64_t>();
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "masking") {
        hp.mode = SpanMode::Masking;
    } else if (mode == "infilling") {
        hp.mode = SpanMode::Infilling;
    } else {
        throw DataError("checkpoint: unknown mode " + mode);
    }
    hp.max_span = j.at("max_span").get<int>();
    hp.pointing = j.at("pointing").get<bool>();
    hp.beam_size = j.at("beam_size").get<int>();
    hp.extra_pointer_layer = j.at("extra_pointer_layer").get<bool>();
    hp.clip_norm = j.at("clip_norm").get<double>();
    return hp;
}

namespace detail {

template <class Model>
void save_checkpoint(const std::string& path, Model& model,
                     const std::string& kind) {
    nlohmann::ordered_json header;
    header["kind"] = kind;
    header["hyper"] = hyperparams_to_json(model.hp);
    header["vocab"] = model.vocab.tokens();
    nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
    std::vector<const Tensor*> order;
    model.visit([&](const std::string& name, Tensor& t) {
        nlohmann::ordered_json entry;
        entry["name"] = name;
        entry["rows"] = t.rows;
        entry["cols"] = t.cols;
        tensors.push_back(std::move(entry));
        order.push_back(&t);
    });
    header["tensors"] = std::move(tensors);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    const std::string hdr = header.dump();
    const std::uint64_t hdr_len = hdr.size();
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    out.write(reinterpret_cast<const char*>(&hdr_len), sizeof(hdr_len));
    out.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
    for (const Tensor* t : order) {
        out.write(reinterpret_cast<const char*>(t->v.data()),
                  static_cast<std::streamsize>(t->v.size() * sizeof(double)));
    }
    if (!out) throw DataError("write failed for " + path);
}

struct CheckpointData {
    nlohmann::ordered_json header;
    std::vector<double> payload;
};

inline CheckpointData read_checkpoint(const std::string& path,
                                      const std::string& kind) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw DataError(path + ": not a checkpoint file");
    }
    std::uint64_t hdr_len = 0;
    in.read(reinterpret_cast<char*>(&hdr_len), sizeof(hdr_len));
    std::string hdr(hdr_len, '\0');
    in.read(hdr.data(), static_cast<std::streamsize>(hdr_len));
    if (!in) throw DataError(path + ": truncated header");
    CheckpointData data;
    data.header = nlohmann::ordered_json::parse(hdr, nullptr, false);
    if (data.header.is_discarded()) {
        throw DataError(path + ": malformed checkpoint header");
    }
    if (data.header.at("kind").get<std::string>() != kind) {
        throw DataError(path + ": checkpoint kind is '" +
                        data.header.at("kind").get<std::string>() +
                        "', expected '" + kind + "'");
    }
    std::uint64_t total = 0;
    for (const auto& t : data.header.at("tensors")) {
        total += t.at("rows").get<std::uint64_t>() *
                 t.at("cols").get<std::uint64_t>();
    }
    data.payload.resize(total);
    in.read(reinterpret_cast<char*>(data.payload.data()),
            static_cast<std::streamsize>(total * sizeof(double)));
    if (!in) throw DataError(path + ": truncated tensor payload");
    return data;
}

template <class Model>
void fill_model(Model& model, const CheckpointData& data,
                const std::string& path) {
    std::vector<std::pair<std::string, Tensor*>> slots;
    model.visit([&](const std::string& name, Tensor& t) {
        slots.emplace_back(name, &t);
    });
    const auto& tensors = data.header.at("tensors");
    if (tensors.size() != slots.size()) {
        throw DataError(path + ": tensor count mismatch");
    }
    std::size_t off = 0;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        const auto& entry = tensors[i];
        const std::string name = entry.at("name").get<std::string>();
        const int rows = entry.at("rows").get<int>();
        const int cols = entry.at("cols").get<int>();
        Tensor* t = slots[i].second;
        if (name != slots[i].first || rows != t->rows || cols != t->cols) {
            throw DataError(path + ": tensor '" + name +
                            "' does not match expected '" + slots[i].first +
                            "' with its shape");
        }
        std::copy(data.payload.begin() + off,
                  data.payload.begin() + off + t->v.size(), t->v.begin());
        off += t->v.size();
    }
}

inline Vocabulary vocab_from_header(const nlohmann::ordered_json& header) {
    Vocabulary vocab;
    for (const auto& tok : header.at("vocab")) {
        vocab.add(tok.get<std::string>());
    }
    return vocab;
}

}  // namespace detail

inline void save_tagger(const std::string& path, TaggerModel& model) {
    detail::save_checkpoint(path, model, "tagger");
}

inline void save_insertion(const std::string& path, InsertionModel& model) {
    detail::save_checkpoint(path, model, "insertion");
}

inline TaggerModel load_tagger(const std::string& path) {
    const auto data = detail::read_checkpoint(path, "tagger");
    const Hyperparams hp = hyperparams_from_json(data.header.at("hyper"));
    Vocabulary vocab = detail::vocab_from_header(data.header);
    std::mt19937_64 rng(hp.seed);
    TaggerModel model(hp, std::move(vocab), rng);
    detail::fill_model(model, data, path);
    return model;
}

inline InsertionModel load_insertion(const std::string& path) {
    const auto data = detail::read_checkpoint(path, "insertion");
    const Hyperparams hp = hyperparams_from_json(data.header.at("hyper"));
    Vocabulary vocab = detail::vocab_from_header(data.header);
    std::mt19937_64 rng(hp.seed);
    InsertionModel model(hp, std::move(vocab), rng);
    detail::fill_model(model, data, path);
    return model;
}

}  // namespace felix
