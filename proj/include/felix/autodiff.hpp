// Reverse-mode tape over Tensor. Nodes are appended in topological order by
// construction; backward() walks them in reverse and accumulates gradients.
// Single-threaded and deterministic: identical inputs replay identical
// floating-point operation sequences.

#pragma once

#include "felix/core.hpp"
#include "felix/tensor.hpp"

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

namespace felix {

class Tape {
public:
    explicit Tape(bool track_gradients = true) : track_(track_gradients) {}

    bool tracking() const { return track_; }

    int leaf(const Tensor& t) { return push(t, nullptr); }

    const Tensor& val(int id) const { return nodes_[id].val; }
    const Tensor& grad(int id) const { return nodes_[id].grad; }

    int add(int a, int b) {
        const Tensor& ta = val(a);
        const Tensor& tb = val(b);
        if (!ta.same_shape(tb)) throw DataError("tape add: shape mismatch");
        Tensor out = ta;
        for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += tb.v[i];
        return push(std::move(out), [a, b](Tape& t, const Tensor& g) {
            t.accumulate(a, g);
            t.accumulate(b, g);
        });
    }

    // bias is 1 x c, added to every row.
    int add_rowvec(int a, int bias) {
        const Tensor& ta = val(a);
        const Tensor& tb = val(bias);
        if (tb.rows != 1 || tb.cols != ta.cols) {
            throw DataError("tape add_rowvec: bias shape mismatch");
        }
        Tensor out = ta;
        for (int i = 0; i < out.rows; ++i) {
            double* r = out.row(i);
            for (int j = 0; j < out.cols; ++j) r[j] += tb.v[j];
        }
        return push(std::move(out), [a, bias](Tape& t, const Tensor& g) {
            t.accumulate(a, g);
            Tensor& db = t.nodes_[bias].grad;
            for (int i = 0; i < g.rows; ++i) {
                const double* r = g.row(i);
                for (int j = 0; j < g.cols; ++j) db.v[j] += r[j];
            }
        });
    }

    int scale(int a, double s) {
        Tensor out = val(a);
        for (double& x : out.v) x *= s;
        return push(std::move(out), [a, s](Tape& t, const Tensor& g) {
            Tensor& da = t.nodes_[a].grad;
            for (std::size_t i = 0; i < g.v.size(); ++i) da.v[i] += s * g.v[i];
        });
    }

    int matmul(int a, int b) {
        const Tensor& ta = val(a);
        const Tensor& tb = val(b);
        if (ta.cols != tb.rows) throw DataError("tape matmul: shape mismatch");
        Tensor out(ta.rows, tb.cols);
        matmul_nn(ta, tb, out);
        return push(std::move(out), [a, b](Tape& t, const Tensor& g) {
            matmul_nt(g, t.val(b), t.nodes_[a].grad, true);
            matmul_tn(t.val(a), g, t.nodes_[b].grad, true);
        });
    }

    // a * b^T
    int matmul_t(int a, int b) {
        const Tensor& ta = val(a);
        const Tensor& tb = val(b);
        if (ta.cols != tb.cols) throw DataError("tape matmul_t: shape mismatch");
        Tensor out(ta.rows, tb.rows);
        matmul_nt(ta, tb, out);
        return push(std::move(out), [a, b](Tape& t, const Tensor& g) {
            matmul_nn(g, t.val(b), t.nodes_[a].grad, true);
            matmul_tn(g, t.val(a), t.nodes_[b].grad, true);
        });
    }

    int concat_cols(const std::vector<int>& parts) {
        if (parts.empty()) throw DataError("tape concat: no parts");
        int rows = val(parts[0]).rows;
        int cols = 0;
        for (int p : parts) {
            if (val(p).rows != rows) throw DataError("tape concat: row mismatch");
            cols += val(p).cols;
        }
        Tensor out(rows, cols);
        int off = 0;
        for (int p : parts) {
            const Tensor& tp = val(p);
            for (int i = 0; i < rows; ++i) {
                for (int j = 0; j < tp.cols; ++j) out.at(i, off + j) = tp.at(i, j);
            }
            off += tp.cols;
        }
        return push(std::move(out), [parts](Tape& t, const Tensor& g) {
            int off = 0;
            for (int p : parts) {
                Tensor& dp = t.nodes_[p].grad;
                for (int i = 0; i < g.rows; ++i) {
                    for (int j = 0; j < dp.cols; ++j) {
                        dp.at(i, j) += g.at(i, off + j);
                    }
                }
                off += dp.cols;
            }
        });
    }

    int gather_rows(int table, std::vector<int> ids) {
        const Tensor& tt = val(table);
        Tensor out(static_cast<int>(ids.size()), tt.cols);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (ids[i] < 0 || ids[i] >= tt.rows) {
                throw DataError("tape gather: row id out of range");
            }
            const double* src = tt.row(ids[i]);
            double* dst = out.row(static_cast<int>(i));
            for (int j = 0; j < tt.cols; ++j) dst[j] = src[j];
        }
        return push(std::move(out),
                    [table, ids = std::move(ids)](Tape& t, const Tensor& g) {
                        Tensor& dt = t.nodes_[table].grad;
                        for (std::size_t i = 0; i < ids.size(); ++i) {
                            double* dst = dt.row(ids[i]);
                            const double* src = g.row(static_cast<int>(i));
                            for (int j = 0; j < g.cols; ++j) dst[j] += src[j];
                        }
                    });
    }

    int softmax_rows(int a) {
        Tensor out = val(a);
        for (int i = 0; i < out.rows; ++i) {
            double* r = out.row(i);
            double mx = r[0];
            for (int j = 1; j < out.cols; ++j) mx = std::max(mx, r[j]);
            double sum = 0.0;
            for (int j = 0; j < out.cols; ++j) {
                r[j] = std::exp(r[j] - mx);
                sum += r[j];
            }
            for (int j = 0; j < out.cols; ++j) r[j] /= sum;
        }
        int self = push(std::move(out), nullptr);
        nodes_[self].back = [a, self](Tape& t, const Tensor& g) {
            const Tensor& y = t.val(self);
            Tensor& da = t.nodes_[a].grad;
            for (int i = 0; i < y.rows; ++i) {
                const double* yi = y.row(i);
                const double* gi = g.row(i);
                double dot = 0.0;
                for (int j = 0; j < y.cols; ++j) dot += gi[j] * yi[j];
                double* di = da.row(i);
                for (int j = 0; j < y.cols; ++j) di[j] += yi[j] * (gi[j] - dot);
            }
        };
        return self;
    }

    // Per-row normalization with learned gain/bias (each 1 x c).
    int layer_norm(int a, int gain, int bias, double eps = 1e-5) {
        const Tensor& x = val(a);
        const Tensor& gn = val(gain);
        const Tensor& bs = val(bias);
        if (gn.cols != x.cols || bs.cols != x.cols) {
            throw DataError("tape layer_norm: gain/bias shape mismatch");
        }
        Tensor norm(x.rows, x.cols);  // (x - mu) / sigma, kept for backward
        Tensor inv_sigma(x.rows, 1);
        Tensor out(x.rows, x.cols);
        for (int i = 0; i < x.rows; ++i) {
            const double* xi = x.row(i);
            double mu = 0.0;
            for (int j = 0; j < x.cols; ++j) mu += xi[j];
            mu /= x.cols;
            double var = 0.0;
            for (int j = 0; j < x.cols; ++j) {
                const double d = xi[j] - mu;
                var += d * d;
            }
            var /= x.cols;
            const double inv = 1.0 / std::sqrt(var + eps);
            inv_sigma.v[i] = inv;
            double* ni = norm.row(i);
            double* oi = out.row(i);
            for (int j = 0; j < x.cols; ++j) {
                ni[j] = (xi[j] - mu) * inv;
                oi[j] = ni[j] * gn.v[j] + bs.v[j];
            }
        }
        int self = push(std::move(out), nullptr);
        nodes_[self].back = [a, gain, bias, norm = std::move(norm),
                             inv_sigma = std::move(inv_sigma)](
                                Tape& t, const Tensor& g) {
            const Tensor& gn = t.val(gain);
            Tensor& da = t.nodes_[a].grad;
            Tensor& dg = t.nodes_[gain].grad;
            Tensor& db = t.nodes_[bias].grad;
            const int cols = g.cols;
            for (int i = 0; i < g.rows; ++i) {
                const double* gi = g.row(i);
                const double* ni = norm.row(i);
                double mean_dn = 0.0, mean_dn_n = 0.0;
                for (int j = 0; j < cols; ++j) {
                    const double dn = gi[j] * gn.v[j];
                    mean_dn += dn;
                    mean_dn_n += dn * ni[j];
                    dg.v[j] += gi[j] * ni[j];
                    db.v[j] += gi[j];
                }
                mean_dn /= cols;
                mean_dn_n /= cols;
                const double inv = inv_sigma.v[i];
                double* di = da.row(i);
                for (int j = 0; j < cols; ++j) {
                    const double dn = gi[j] * gn.v[j];
                    di[j] += inv * (dn - mean_dn - ni[j] * mean_dn_n);
                }
            }
        };
        return self;
    }

    // Smooth tanh-approximation GELU.
    int gelu(int a) {
        static constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
        static constexpr double kA = 0.044715;
        Tensor out = val(a);
        for (double& x : out.v) {
            const double u = kC * (x + kA * x * x * x);
            x = 0.5 * x * (1.0 + std::tanh(u));
        }
        return push(std::move(out), [a](Tape& t, const Tensor& g) {
            const Tensor& x = t.val(a);
            Tensor& da = t.nodes_[a].grad;
            for (std::size_t i = 0; i < x.v.size(); ++i) {
                const double xi = x.v[i];
                const double u = kC * (xi + kA * xi * xi * xi);
                const double th = std::tanh(u);
                const double du = kC * (1.0 + 3.0 * kA * xi * xi);
                const double dydx =
                    0.5 * (1.0 + th) + 0.5 * xi * (1.0 - th * th) * du;
                da.v[i] += g.v[i] * dydx;
            }
        });
    }

    // Mean of -log softmax(logits_row)[target] over rows with active != 0.
    // Rows with active == 0 contribute nothing. Returns a 1x1 node; if no row
    // is active the loss is exactly zero.
    int mean_cross_entropy(int logits, std::vector<int> targets,
                           std::vector<char> active) {
        const Tensor& x = val(logits);
        if (static_cast<int>(targets.size()) != x.rows ||
            static_cast<int>(active.size()) != x.rows) {
            throw DataError("tape cross_entropy: row count mismatch");
        }
        int n_active = 0;
        double loss = 0.0;
        for (int i = 0; i < x.rows; ++i) {
            if (!active[i]) continue;
            if (targets[i] < 0 || targets[i] >= x.cols) {
                throw DataError("tape cross_entropy: target out of range");
            }
            ++n_active;
            const double* r = x.row(i);
            double mx = r[0];
            for (int j = 1; j < x.cols; ++j) mx = std::max(mx, r[j]);
            double sum = 0.0;
            for (int j = 0; j < x.cols; ++j) sum += std::exp(r[j] - mx);
            loss += std::log(sum) + mx - r[targets[i]];
        }
        if (n_active > 0) loss /= n_active;
        Tensor out(1, 1);
        out.v[0] = loss;
        return push(std::move(out), [logits, targets = std::move(targets),
                                     active = std::move(active),
                                     n_active](Tape& t, const Tensor& g) {
            if (n_active == 0) return;
            const double scale = g.v[0] / n_active;
            const Tensor& x = t.val(logits);
            Tensor& dx = t.nodes_[logits].grad;
            for (int i = 0; i < x.rows; ++i) {
                if (!active[i]) continue;
                const double* r = x.row(i);
                double mx = r[0];
                for (int j = 1; j < x.cols; ++j) mx = std::max(mx, r[j]);
                double sum = 0.0;
                for (int j = 0; j < x.cols; ++j) sum += std::exp(r[j] - mx);
                double* di = dx.row(i);
                for (int j = 0; j < x.cols; ++j) {
                    const double p = std::exp(r[j] - mx) / sum;
                    di[j] += scale * (p - (j == targets[i] ? 1.0 : 0.0));
                }
            }
        });
    }

    // scale * sum of 1x1 nodes.
    int sum_scalars(const std::vector<int>& xs, double scale) {
        Tensor out(1, 1);
        for (int x : xs) out.v[0] += val(x).scalar();
        out.v[0] *= scale;
        return push(std::move(out), [xs, scale](Tape& t, const Tensor& g) {
            for (int x : xs) t.nodes_[x].grad.v[0] += scale * g.v[0];
        });
    }

    void backward(int node) {
        if (!track_) throw DataError("tape: backward on non-tracking tape");
        if (nodes_[node].val.rows != 1 || nodes_[node].val.cols != 1) {
            throw DataError("tape: backward seed must be scalar");
        }
        nodes_[node].grad.v[0] = 1.0;
        for (int i = node; i >= 0; --i) {
            if (nodes_[i].back) nodes_[i].back(*this, nodes_[i].grad);
        }
    }

private:
    struct Node {
        Tensor val;
        Tensor grad;
        std::function<void(Tape&, const Tensor&)> back;
    };

    int push(Tensor val, std::function<void(Tape&, const Tensor&)> back) {
        Node n;
        if (track_) n.grad = Tensor::zeros_like(val);
        n.val = std::move(val);
        n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    void accumulate(int id, const Tensor& g) {
        Tensor& dst = nodes_[id].grad;
        for (std::size_t i = 0; i < g.v.size(); ++i) dst.v[i] += g.v[i];
    }

    bool track_ = true;
    std::vector<Node> nodes_;
};

}  // namespace felix
