// The two non-autoregressive models and their training loops.
//
// Tagger: encoder -> per-token tag logits, plus a pointer layer that scores
// next-token edges with softmax(QK^T / sqrt(d_k)) over h^{L+1} built from
// [h; e(tag); e(pos)].
//
// Insertion: a second encoder run as a masked LM over y^m, predicting every
// [MASK] in one pass.

#pragma once

#include "felix/align.hpp"
#include "felix/autodiff.hpp"
#include "felix/core.hpp"
#include "felix/edit.hpp"
#include "felix/encoder.hpp"
#include "felix/insertion.hpp"
#include "felix/realize.hpp"
#include "felix/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace felix {

struct Hyperparams {
    int d = 64;
    int layers = 2;
    int heads = 4;
    int max_len = 64;
    double lr = 0.05;
    double momentum = 0.0;
    int steps = 2000;
    int batch_size = 16;
    std::uint64_t seed = 1;
    SpanMode mode = SpanMode::Masking;
    int max_span = 8;
    bool pointing = true;
    int beam_size = 5;
    bool extra_pointer_layer = false;
    double clip_norm = 1.0;  // global gradient-norm clip; 0 disables

    AlignmentConfig align_config() const { return {mode, max_span, pointing}; }

    void validate() const {
        if (d < 1 || layers < 1 || heads < 1 || max_len < 1 || lr <= 0 ||
            steps < 1 || batch_size < 1 || max_span < 1 || beam_size < 1) {
            throw DataError("hyperparams: all sizes must be positive");
        }
        if (d % heads != 0) {
            throw DataError("hyperparams: d must be divisible by heads");
        }
    }
};

struct TaggerParams {
    Tensor w_tag, b_tag;       // d x n_tags
    Tensor tag_embeddings;     // n_tags x d
    Tensor w_comb, b_comb;     // 3d x d
    std::vector<EncoderLayer> pre_query;  // optional extra layer
    Tensor wq, bq, wk, bk;     // d x d (d_k = d)
};

struct TaggerModel {
    Hyperparams hp;
    Vocabulary vocab;
    TagVocab tag_vocab;
    EncoderParams encoder;
    TaggerParams head;

    TaggerModel(const Hyperparams& h, Vocabulary v, std::mt19937_64& rng)
        : hp(h), vocab(std::move(v)), tag_vocab(h.mode, h.max_span) {
        hp.validate();
        encoder = EncoderParams::init(vocab.size(), hp.d, hp.layers, hp.heads,
                                      hp.max_len, rng);
        const int n_tags = tag_vocab.size();
        const double sd = 0.02;
        head.w_tag = random_normal(hp.d, n_tags, sd, rng);
        head.b_tag = Tensor(1, n_tags);
        head.tag_embeddings = random_normal(n_tags, hp.d, sd, rng);
        head.w_comb = random_normal(3 * hp.d, hp.d, sd, rng);
        head.b_comb = Tensor(1, hp.d);
        if (hp.extra_pointer_layer) {
            head.pre_query.push_back(init_encoder_layer(hp.d, hp.heads, rng));
        }
        head.wq = random_normal(hp.d, hp.d, sd, rng);
        head.bq = Tensor(1, hp.d);
        head.wk = random_normal(hp.d, hp.d, sd, rng);
        head.bk = Tensor(1, hp.d);
    }

    template <class F>
    void visit(F&& f) {
        encoder.visit("enc", f);
        f("tag.w", head.w_tag);
        f("tag.b", head.b_tag);
        f("ptr.tag_emb", head.tag_embeddings);
        f("ptr.comb.w", head.w_comb);
        f("ptr.comb.b", head.b_comb);
        if (!head.pre_query.empty()) {
            visit_encoder_layer(head.pre_query[0], "ptr.pre", f);
        }
        f("ptr.wq", head.wq);
        f("ptr.bq", head.bq);
        f("ptr.wk", head.wk);
        f("ptr.bk", head.bk);
    }
};

struct InsertionModel {
    Hyperparams hp;
    Vocabulary vocab;
    EncoderParams encoder;
    Tensor w_mlm, b_mlm;  // d x vocab

    InsertionModel(const Hyperparams& h, Vocabulary v, std::mt19937_64& rng)
        : hp(h), vocab(std::move(v)) {
        hp.validate();
        encoder = EncoderParams::init(vocab.size(), hp.d, hp.layers, hp.heads,
                                      hp.max_len, rng);
        w_mlm = random_normal(hp.d, vocab.size(), 0.02, rng);
        b_mlm = Tensor(1, vocab.size());
    }

    template <class F>
    void visit(F&& f) {
        encoder.visit("enc", f);
        f("mlm.w", w_mlm);
        f("mlm.b", b_mlm);
    }
};

// ---------------------------------------------------------------------------
// Forward pieces
// ---------------------------------------------------------------------------

inline int tag_logits_on_tape(Tape& tape, Binder& bind, TaggerModel& m, int h) {
    return tape.add_rowvec(tape.matmul(h, bind(m.head.w_tag)),
                           bind(m.head.b_tag));
}

// h^{L+1} = affine([h; e(tag); e(pos)]); queries optionally pass one more
// transformer layer; scores are QK^T scaled by 1/sqrt(d_k).
inline int pointer_logits_on_tape(Tape& tape, Binder& bind, TaggerModel& m,
                                  int h, const std::vector<int>& tag_ids) {
    const int len = static_cast<int>(tag_ids.size());
    int e_tag = tape.gather_rows(bind(m.head.tag_embeddings), tag_ids);
    int e_pos = tape.leaf(m.encoder.positional_rows(len));
    int cat = tape.concat_cols({h, e_tag, e_pos});
    int h1 = tape.add_rowvec(tape.matmul(cat, bind(m.head.w_comb)),
                             bind(m.head.b_comb));
    int q_in = h1;
    if (!m.head.pre_query.empty()) {
        q_in = encoder_layer_forward(tape, bind, m.head.pre_query[0], h1,
                                     m.hp.d / m.hp.heads);
    }
    int q = tape.add_rowvec(tape.matmul(q_in, bind(m.head.wq)), bind(m.head.bq));
    int k = tape.add_rowvec(tape.matmul(h1, bind(m.head.wk)), bind(m.head.bk));
    return tape.scale(tape.matmul_t(q, k),
                      1.0 / std::sqrt(static_cast<double>(m.hp.d)));
}

inline int mlm_logits_on_tape(Tape& tape, Binder& bind, InsertionModel& m,
                              const std::vector<int>& ym_ids) {
    int h = encode_on_tape(tape, bind, m.encoder, ym_ids);
    return tape.add_rowvec(tape.matmul(h, bind(m.w_mlm)), bind(m.b_mlm));
}

// ---------------------------------------------------------------------------
// Inference-facing wrappers (single forward pass, no gradient tracking)
// ---------------------------------------------------------------------------

inline Tensor encode(const TokenSeq& tokens, EncoderParams& params,
                     const Vocabulary& vocab) {
    Tape tape(false);
    Binder bind(tape);
    return tape.val(encode_on_tape(tape, bind, params, vocab.encode(tokens)));
}

inline int argmax_row(const Tensor& t, int row) {
    int best = 0;
    for (int j = 1; j < t.cols; ++j) {
        if (t.at(row, j) > t.at(row, best)) best = j;
    }
    return best;
}

struct TagPrediction {
    Tensor logits;         // rows incl. [CLS]
    std::vector<int> ids;  // row-wise argmax, ties to the lowest id
};

inline TagPrediction predict_tags(const Tensor& h, TaggerModel& m) {
    Tape tape(false);
    Binder bind(tape);
    int logits = tag_logits_on_tape(tape, bind, m, tape.leaf(h));
    TagPrediction out;
    out.logits = tape.val(logits);
    for (int i = 0; i < out.logits.rows; ++i) {
        out.ids.push_back(argmax_row(out.logits, i));
    }
    return out;
}

// Row-stochastic pointer scores; each row is an independent distribution
// over candidate next positions.
inline Tensor pointer_scores(const Tensor& h, const std::vector<int>& tag_ids,
                             TaggerModel& m) {
    Tape tape(false);
    Binder bind(tape);
    int logits = pointer_logits_on_tape(tape, bind, m, tape.leaf(h), tag_ids);
    return tape.val(tape.softmax_rows(logits));
}

// One vocab distribution per [MASK], all predicted simultaneously.
inline Tensor insertion_logits(const MaskedSeq& masked, InsertionModel& m) {
    Tape tape(false);
    Binder bind(tape);
    int logits = mlm_logits_on_tape(tape, bind, m, m.vocab.encode(masked.tokens));
    const Tensor& all = tape.val(logits);
    Tensor out(static_cast<int>(masked.mask_positions.size()), all.cols);
    for (std::size_t i = 0; i < masked.mask_positions.size(); ++i) {
        const double* src = all.row(masked.mask_positions[i]);
        double* dst = out.row(static_cast<int>(i));
        for (int j = 0; j < all.cols; ++j) dst[j] = src[j];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

// One aligned pair with everything both models train on.
struct AlignedExample {
    TokenSeq source;
    TokenSeq target;
    EditPlan plan;
    MaskedSeq masked;
    TokenSeq labels;  // gold token per [MASK]
};

inline AlignedExample make_training_example(const TokenSeq& source,
                                            const TokenSeq& target,
                                            const EditPlan& plan,
                                            const AlignmentConfig& cfg) {
    AlignedExample ex;
    ex.source = source;
    ex.target = target;
    ex.plan = plan;
    Chain chain = daisy_chain(plan);
    Skeleton sk = chain_to_skeleton(chain, plan, source);
    ex.masked = build_insertion_input(sk, source, cfg);
    ex.labels = oracle_insertions(ex.masked, target, cfg);
    return ex;
}

struct EncodedExample {
    std::vector<int> src_ids;    // [CLS] + source tokens
    std::vector<int> gold_tags;  // per row incl. [CLS]
    std::vector<int> gold_next;  // pointer targets, -1 where inactive
    std::vector<char> next_active;
    std::vector<int> ym_ids;
    std::vector<int> ym_targets;  // -1 except at mask rows
    std::vector<char> ym_active;
};

inline EncodedExample encode_example(const AlignedExample& ex,
                                     const Vocabulary& vocab,
                                     const TagVocab& tag_vocab) {
    EncodedExample out;
    out.src_ids.push_back(Vocabulary::kClsId);
    for (int id : vocab.encode(ex.source)) out.src_ids.push_back(id);
    out.gold_tags.push_back(tag_vocab.id_of(ex.plan.cls_tag));
    for (const Tag& t : ex.plan.tags) out.gold_tags.push_back(tag_vocab.id_of(t));
    out.gold_next = ex.plan.pointer_next;
    for (int next : out.gold_next) {
        out.next_active.push_back(next != -1 ? 1 : 0);
    }
    out.ym_ids = vocab.encode(ex.masked.tokens);
    out.ym_targets.assign(out.ym_ids.size(), -1);
    out.ym_active.assign(out.ym_ids.size(), 0);
    for (std::size_t k = 0; k < ex.masked.mask_positions.size(); ++k) {
        const int row = ex.masked.mask_positions[k];
        out.ym_targets[row] = vocab.id_of(ex.labels[k]);
        out.ym_active[row] = 1;
    }
    return out;
}

// Tag cross-entropy over every row plus pointer cross-entropy over rows with
// a gold next position (teacher-forced gold tags feed e(T) during training).
inline int tagger_example_loss(Tape& tape, Binder& bind, TaggerModel& m,
                               const EncodedExample& ex) {
    int h = encode_on_tape(tape, bind, m.encoder, ex.src_ids);
    int tag_logits = tag_logits_on_tape(tape, bind, m, h);
    std::vector<char> all_active(ex.gold_tags.size(), 1);
    int loss = tape.mean_cross_entropy(tag_logits, ex.gold_tags, all_active);
    if (m.hp.pointing) {
        bool any = false;
        for (char a : ex.next_active) any = any || a != 0;
        if (any) {
            int ptr_logits =
                pointer_logits_on_tape(tape, bind, m, h, ex.gold_tags);
            int ptr_loss = tape.mean_cross_entropy(ptr_logits, ex.gold_next,
                                                   ex.next_active);
            loss = tape.sum_scalars({loss, ptr_loss}, 1.0);
        }
    }
    return loss;
}

inline int insertion_example_loss(Tape& tape, Binder& bind, InsertionModel& m,
                                  const EncodedExample& ex) {
    int logits = mlm_logits_on_tape(tape, bind, m, ex.ym_ids);
    return tape.mean_cross_entropy(logits, ex.ym_targets, ex.ym_active);
}

struct LossAndGrads {
    double loss = 0.0;
    std::vector<std::pair<std::string, Tensor>> grads;
};

namespace detail {

template <class Model, class LossFn>
LossAndGrads loss_and_gradients_impl(Model& m,
                                     const std::vector<EncodedExample>& batch,
                                     LossFn&& example_loss) {
    if (batch.empty()) throw DataError("loss: empty batch");
    Tape tape(true);
    Binder bind(tape);
    std::vector<int> losses;
    for (const auto& ex : batch) losses.push_back(example_loss(tape, bind, m, ex));
    int total = tape.sum_scalars(losses, 1.0 / static_cast<double>(batch.size()));
    LossAndGrads out;
    out.loss = tape.val(total).scalar();
    if (!std::isfinite(out.loss)) {
        throw NumericError("loss is not finite");
    }
    tape.backward(total);
    std::unordered_map<const Tensor*, const Tensor*> grad_of;
    bind.for_each_bound([&](Tensor& p, const Tensor& g) { grad_of[&p] = &g; });
    m.visit([&](const std::string& name, Tensor& p) {
        auto it = grad_of.find(&p);
        out.grads.emplace_back(name, it == grad_of.end() ? Tensor::zeros_like(p)
                                                         : *it->second);
    });
    return out;
}

}  // namespace detail

inline LossAndGrads tagger_loss_and_gradients(
    TaggerModel& m, const std::vector<EncodedExample>& batch) {
    return detail::loss_and_gradients_impl(
        m, batch, [](Tape& t, Binder& b, TaggerModel& mm, const EncodedExample& e) {
            return tagger_example_loss(t, b, mm, e);
        });
}

inline LossAndGrads insertion_loss_and_gradients(
    InsertionModel& m, const std::vector<EncodedExample>& batch) {
    return detail::loss_and_gradients_impl(
        m, batch,
        [](Tape& t, Binder& b, InsertionModel& mm, const EncodedExample& e) {
            return insertion_example_loss(t, b, mm, e);
        });
}

inline double tagger_batch_loss(TaggerModel& m,
                                const std::vector<EncodedExample>& batch) {
    Tape tape(false);
    Binder bind(tape);
    std::vector<int> losses;
    for (const auto& ex : batch) {
        losses.push_back(tagger_example_loss(tape, bind, m, ex));
    }
    return tape.val(tape.sum_scalars(losses, 1.0 / batch.size())).scalar();
}

inline double insertion_batch_loss(InsertionModel& m,
                                   const std::vector<EncodedExample>& batch) {
    Tape tape(false);
    Binder bind(tape);
    std::vector<int> losses;
    for (const auto& ex : batch) {
        losses.push_back(insertion_example_loss(tape, bind, m, ex));
    }
    return tape.val(tape.sum_scalars(losses, 1.0 / batch.size())).scalar();
}

struct TrainLogEntry {
    std::string model;
    int step = 0;
    double loss = 0.0;
};
using TrainLogger = std::function<void(const TrainLogEntry&)>;

namespace detail {

class Sgd {
public:
    Sgd(double lr, double momentum, double clip_norm)
        : lr_(lr), momentum_(momentum), clip_(clip_norm) {}

    void apply(Binder& bind) {
        double scale = 1.0;
        if (clip_ > 0.0) {
            double sq = 0.0;
            bind.for_each_bound([&](Tensor&, const Tensor& g) {
                for (double x : g.v) sq += x * x;
            });
            const double norm = std::sqrt(sq);
            if (norm > clip_) scale = clip_ / norm;
        }
        bind.for_each_bound([&](Tensor& p, const Tensor& g) {
            if (momentum_ == 0.0) {
                for (std::size_t i = 0; i < p.v.size(); ++i) {
                    p.v[i] -= lr_ * scale * g.v[i];
                }
                return;
            }
            Tensor& vel = velocity_.try_emplace(&p, Tensor::zeros_like(p))
                              .first->second;
            for (std::size_t i = 0; i < p.v.size(); ++i) {
                vel.v[i] = momentum_ * vel.v[i] + scale * g.v[i];
                p.v[i] -= lr_ * vel.v[i];
            }
        });
    }

private:
    double lr_, momentum_, clip_;
    std::unordered_map<Tensor*, Tensor> velocity_;
};

// Deterministic mini-batch schedule: full corpus when it fits, otherwise
// reshuffled epochs sliced in order.
class BatchSchedule {
public:
    BatchSchedule(int n, int batch_size, std::uint64_t seed)
        : n_(n), batch_(std::min(batch_size, n)), rng_(seed) {
        order_.resize(n);
        for (int i = 0; i < n; ++i) order_[i] = i;
    }

    std::vector<int> next() {
        if (batch_ == n_) return order_;
        if (pos_ + batch_ > n_) {
            std::shuffle(order_.begin(), order_.end(), rng_);
            pos_ = 0;
        }
        std::vector<int> out(order_.begin() + pos_, order_.begin() + pos_ + batch_);
        pos_ += batch_;
        return out;
    }

private:
    int n_, batch_, pos_ = 0;
    std::vector<int> order_;
    std::mt19937_64 rng_;
};

template <class Model, class LossFn>
void train_model(Model& m, const std::vector<EncodedExample>& examples,
                 const Hyperparams& hp, const std::string& name,
                 const TrainLogger& log, LossFn&& example_loss,
                 std::uint64_t schedule_seed) {
    Sgd opt(hp.lr, hp.momentum, hp.clip_norm);
    BatchSchedule schedule(static_cast<int>(examples.size()), hp.batch_size,
                           schedule_seed);
    for (int step = 0; step < hp.steps; ++step) {
        const std::vector<int> idx = schedule.next();
        Tape tape(true);
        Binder bind(tape);
        std::vector<int> losses;
        for (int i : idx) {
            losses.push_back(example_loss(tape, bind, m, examples[i]));
        }
        int total =
            tape.sum_scalars(losses, 1.0 / static_cast<double>(idx.size()));
        const double loss = tape.val(total).scalar();
        if (!std::isfinite(loss)) {
            throw NumericError(name + ": loss is not finite at step " +
                               std::to_string(step));
        }
        tape.backward(total);
        opt.apply(bind);
        if (log) log({name, step, loss});
    }
}

}  // namespace detail

struct TrainedModels {
    TaggerModel tagger;
    InsertionModel insertion;
};

inline Vocabulary build_vocabulary(const std::vector<AlignedExample>& corpus) {
    Vocabulary vocab;
    for (const auto& ex : corpus) {
        vocab.add_all(ex.source);
        vocab.add_all(ex.target);
    }
    return vocab;
}

// Trains the tagger and the insertion model independently; every random draw
// is fixed by hp.seed.
inline TrainedModels train(const std::vector<AlignedExample>& corpus,
                           const Hyperparams& hp, const TrainLogger& log = {}) {
    hp.validate();
    if (corpus.empty()) throw DataError("train: empty corpus");
    Vocabulary vocab = build_vocabulary(corpus);
    std::mt19937_64 init_rng(hp.seed);
    TrainedModels models{TaggerModel(hp, vocab, init_rng),
                         InsertionModel(hp, vocab, init_rng)};
    std::vector<EncodedExample> examples;
    examples.reserve(corpus.size());
    for (const auto& ex : corpus) {
        examples.push_back(encode_example(ex, vocab, models.tagger.tag_vocab));
    }
    detail::train_model(
        models.tagger, examples, hp, "tagger", log,
        [](Tape& t, Binder& b, TaggerModel& m, const EncodedExample& e) {
            return tagger_example_loss(t, b, m, e);
        },
        hp.seed + 1);
    detail::train_model(
        models.insertion, examples, hp, "insertion", log,
        [](Tape& t, Binder& b, InsertionModel& m, const EncodedExample& e) {
            return insertion_example_loss(t, b, m, e);
        },
        hp.seed + 2);
    return models;
}

// ---------------------------------------------------------------------------
// Prediction: exactly two decoding steps (tagging, insertion)
// ---------------------------------------------------------------------------

struct PredictResult {
    TokenSeq output;
    EditPlan plan;
    Chain chain;
    MaskedSeq masked;
    bool greedy_would_loop = false;  // beam-1 unconstrained diagnostic
};

inline PredictResult predict(const TokenSeq& source, TaggerModel& tagger,
                             InsertionModel& insertion) {
    if (tagger.vocab.tokens() != insertion.vocab.tokens()) {
        throw DataError("predict: tagger and insertion vocabularies differ");
    }
    PredictResult res;

    Tape tape(false);
    Binder bind(tape);
    std::vector<int> src_ids;
    src_ids.push_back(Vocabulary::kClsId);
    for (int id : tagger.vocab.encode(source)) src_ids.push_back(id);
    int h = encode_on_tape(tape, bind, tagger.encoder, src_ids);
    int tag_logits = tag_logits_on_tape(tape, bind, tagger, h);

    const Tensor& logits = tape.val(tag_logits);
    std::vector<int> tag_ids(logits.rows);
    for (int i = 0; i < logits.rows; ++i) tag_ids[i] = argmax_row(logits, i);
    // [CLS] heads every chain: honor only its insertion marker.
    Tag cls = tagger.tag_vocab.tag_of(tag_ids[0]);
    res.plan.cls_tag = Tag::keep(cls.ins);
    tag_ids[0] = tagger.tag_vocab.id_of(res.plan.cls_tag);
    for (int i = 1; i < logits.rows; ++i) {
        res.plan.tags.push_back(tagger.tag_vocab.tag_of(tag_ids[i]));
    }
    const int n = res.plan.n_source();
    res.plan.pointer_next.assign(n + 1, -1);

    if (tagger.hp.pointing) {
        int ptr_logits = pointer_logits_on_tape(tape, bind, tagger, h, tag_ids);
        Tensor scores = tape.val(tape.softmax_rows(ptr_logits));
        res.chain = beam_realize(scores, res.plan.tags, tagger.hp.beam_size);
        res.greedy_would_loop = greedy_decode_loops(scores, res.plan.tags);
    } else {
        res.chain.positions.push_back(0);
        for (int i = 1; i <= n; ++i) {
            if (res.plan.is_keep(i)) res.chain.positions.push_back(i);
        }
    }
    for (std::size_t c = 0; c + 1 < res.chain.positions.size(); ++c) {
        res.plan.pointer_next[res.chain.positions[c]] =
            res.chain.positions[c + 1];
    }

    Skeleton sk = chain_to_skeleton(res.chain, res.plan, source);
    res.masked = build_insertion_input(sk, source, tagger.hp.align_config());

    TokenSeq preds;
    if (!res.masked.mask_positions.empty()) {
        Tensor mask_logits = insertion_logits(res.masked, insertion);
        std::vector<char> allowed(insertion.vocab.size(), 1);
        allowed[Vocabulary::kClsId] = 0;
        allowed[Vocabulary::kMaskId] = 0;
        allowed[Vocabulary::kReplOpenId] = 0;
        allowed[Vocabulary::kReplCloseId] = 0;
        allowed[Vocabulary::kUnkId] = 0;
        if (insertion.hp.mode == SpanMode::Masking) {
            allowed[Vocabulary::kPadId] = 0;  // declared-length spans never pad
        }
        for (int i = 0; i < mask_logits.rows; ++i) {
            int best = -1;
            for (int j = 0; j < mask_logits.cols; ++j) {
                if (!allowed[j]) continue;
                if (best == -1 || mask_logits.at(i, j) > mask_logits.at(i, best)) {
                    best = j;
                }
            }
            if (best == -1) throw DataError("predict: no admissible token");
            preds.push_back(insertion.vocab.token_of(best));
        }
    }
    res.output = apply_insertion(res.masked, preds);
    return res;
}

}  // namespace felix
