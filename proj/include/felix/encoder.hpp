// Toy transformer encoder: token embeddings + fixed sinusoidal positions,
// post-LN layers with multi-head self-attention and a GELU feed-forward.

#pragma once

#include "felix/autodiff.hpp"
#include "felix/core.hpp"
#include "felix/tensor.hpp"

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace felix {

// Binds parameter tensors into a tape once per step; repeated binds of the
// same tensor return the same leaf so gradients accumulate across uses.
class Binder {
public:
    explicit Binder(Tape& tape) : tape_(&tape) {}

    int operator()(Tensor& param) {
        for (const auto& [p, id] : bound_) {
            if (p == &param) return id;
        }
        int id = tape_->leaf(param);
        bound_.emplace_back(&param, id);
        return id;
    }

    template <class F>
    void for_each_bound(F&& f) {
        for (const auto& [p, id] : bound_) f(*p, tape_->grad(id));
    }

private:
    Tape* tape_;
    std::vector<std::pair<Tensor*, int>> bound_;
};

inline Tensor sinusoidal_table(int max_len, int d) {
    Tensor t(max_len, d);
    for (int p = 0; p < max_len; ++p) {
        for (int j = 0; j < d; j += 2) {
            const double rate = std::pow(10000.0, static_cast<double>(j) / d);
            t.at(p, j) = std::sin(p / rate);
            if (j + 1 < d) t.at(p, j + 1) = std::cos(p / rate);
        }
    }
    return t;
}

inline Tensor random_normal(int rows, int cols, double stddev,
                            std::mt19937_64& rng) {
    Tensor t(rows, cols);
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& x : t.v) x = dist(rng);
    return t;
}

struct AttentionHead {
    Tensor wq, bq, wk, bk, wv, bv;
};

struct EncoderLayer {
    std::vector<AttentionHead> heads;
    Tensor wo, bo;
    Tensor ln1_g, ln1_b;
    Tensor w1, b1, w2, b2;
    Tensor ln2_g, ln2_b;
};

inline EncoderLayer init_encoder_layer(int d, int n_heads,
                                       std::mt19937_64& rng) {
    const int d_head = d / n_heads;
    const int d_ff = 4 * d;
    const double sd = 0.02;
    EncoderLayer l;
    for (int h = 0; h < n_heads; ++h) {
        AttentionHead head;
        head.wq = random_normal(d, d_head, sd, rng);
        head.bq = Tensor(1, d_head);
        head.wk = random_normal(d, d_head, sd, rng);
        head.bk = Tensor(1, d_head);
        head.wv = random_normal(d, d_head, sd, rng);
        head.bv = Tensor(1, d_head);
        l.heads.push_back(std::move(head));
    }
    l.wo = random_normal(d, d, sd, rng);
    l.bo = Tensor(1, d);
    l.ln1_g = Tensor(1, d, 1.0);
    l.ln1_b = Tensor(1, d);
    l.w1 = random_normal(d, d_ff, sd, rng);
    l.b1 = Tensor(1, d_ff);
    l.w2 = random_normal(d_ff, d, sd, rng);
    l.b2 = Tensor(1, d);
    l.ln2_g = Tensor(1, d, 1.0);
    l.ln2_b = Tensor(1, d);
    return l;
}

template <class F>
void visit_encoder_layer(EncoderLayer& l, const std::string& prefix, F&& f) {
    for (std::size_t h = 0; h < l.heads.size(); ++h) {
        const std::string hp = prefix + ".h" + std::to_string(h);
        f(hp + ".wq", l.heads[h].wq);
        f(hp + ".bq", l.heads[h].bq);
        f(hp + ".wk", l.heads[h].wk);
        f(hp + ".bk", l.heads[h].bk);
        f(hp + ".wv", l.heads[h].wv);
        f(hp + ".bv", l.heads[h].bv);
    }
    f(prefix + ".wo", l.wo);
    f(prefix + ".bo", l.bo);
    f(prefix + ".ln1.g", l.ln1_g);
    f(prefix + ".ln1.b", l.ln1_b);
    f(prefix + ".ffn.w1", l.w1);
    f(prefix + ".ffn.b1", l.b1);
    f(prefix + ".ffn.w2", l.w2);
    f(prefix + ".ffn.b2", l.b2);
    f(prefix + ".ln2.g", l.ln2_g);
    f(prefix + ".ln2.b", l.ln2_b);
}

// Pre-LN residual layer: attention and feed-forward read normalized inputs
// while the residual stream stays unnormalized.
inline int encoder_layer_forward(Tape& tape, Binder& bind, EncoderLayer& l,
                                 int x, int d_head) {
    int a_in = tape.layer_norm(x, bind(l.ln1_g), bind(l.ln1_b));
    std::vector<int> head_outs;
    head_outs.reserve(l.heads.size());
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d_head));
    for (auto& h : l.heads) {
        int q = tape.add_rowvec(tape.matmul(a_in, bind(h.wq)), bind(h.bq));
        int k = tape.add_rowvec(tape.matmul(a_in, bind(h.wk)), bind(h.bk));
        int v = tape.add_rowvec(tape.matmul(a_in, bind(h.wv)), bind(h.bv));
        int attn = tape.softmax_rows(tape.scale(tape.matmul_t(q, k), inv_sqrt));
        head_outs.push_back(tape.matmul(attn, v));
    }
    int concat = head_outs.size() == 1 ? head_outs[0]
                                       : tape.concat_cols(head_outs);
    int proj = tape.add_rowvec(tape.matmul(concat, bind(l.wo)), bind(l.bo));
    x = tape.add(x, proj);
    int f_in = tape.layer_norm(x, bind(l.ln2_g), bind(l.ln2_b));
    int inner = tape.gelu(
        tape.add_rowvec(tape.matmul(f_in, bind(l.w1)), bind(l.b1)));
    int ffn = tape.add_rowvec(tape.matmul(inner, bind(l.w2)), bind(l.b2));
    return tape.add(x, ffn);
}

struct EncoderParams {
    int d = 0;
    int n_heads = 0;
    int max_len = 0;
    Tensor embeddings;  // vocab x d
    std::vector<EncoderLayer> layers;
    Tensor ln_final_g, ln_final_b;
    Tensor positional;  // fixed, not trained

    static EncoderParams init(int vocab_size, int d, int n_layers, int n_heads,
                              int max_len, std::mt19937_64& rng) {
        if (d % n_heads != 0) {
            throw DataError("encoder: hidden size not divisible by head count");
        }
        EncoderParams p;
        p.d = d;
        p.n_heads = n_heads;
        p.max_len = max_len;
        p.embeddings = random_normal(vocab_size, d, 0.02, rng);
        for (int i = 0; i < n_layers; ++i) {
            p.layers.push_back(init_encoder_layer(d, n_heads, rng));
        }
        p.ln_final_g = Tensor(1, d, 1.0);
        p.ln_final_b = Tensor(1, d);
        p.positional = sinusoidal_table(max_len, d);
        return p;
    }

    template <class F>
    void visit(const std::string& prefix, F&& f) {
        f(prefix + ".emb", embeddings);
        for (std::size_t i = 0; i < layers.size(); ++i) {
            visit_encoder_layer(layers[i], prefix + ".l" + std::to_string(i), f);
        }
        f(prefix + ".ln_f.g", ln_final_g);
        f(prefix + ".ln_f.b", ln_final_b);
    }

    Tensor positional_rows(int len) const {
        Tensor rows(len, d);
        for (int i = 0; i < len; ++i) {
            for (int j = 0; j < d; ++j) rows.at(i, j) = positional.at(i, j);
        }
        return rows;
    }
};

inline int encode_on_tape(Tape& tape, Binder& bind, EncoderParams& p,
                          const std::vector<int>& ids) {
    const int len = static_cast<int>(ids.size());
    if (len == 0) throw DataError("encode: empty input");
    if (len > p.max_len) {
        throw DataError("encode: input length " + std::to_string(len) +
                        " exceeds max_len " + std::to_string(p.max_len));
    }
    int x = tape.gather_rows(bind(p.embeddings), ids);
    int pos = tape.leaf(p.positional_rows(len));  // fixed, grads discarded
    x = tape.add(x, pos);
    const int d_head = p.d / p.n_heads;
    for (auto& layer : p.layers) {
        x = encoder_layer_forward(tape, bind, layer, x, d_head);
    }
    return tape.layer_norm(x, bind(p.ln_final_g), bind(p.ln_final_b));
}

}  // namespace felix
