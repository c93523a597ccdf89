// Small-model fixtures and the finite-difference gradient oracle shared by
// the unit and acceptance suites.

#pragma once

#include <felix/felix.hpp>

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace testutil {

inline felix::Hyperparams tiny_hyperparams() {
    felix::Hyperparams hp;
    hp.d = 8;
    hp.layers = 1;
    hp.heads = 2;
    hp.max_len = 32;
    hp.max_span = 3;
    hp.steps = 1;
    hp.batch_size = 4;
    return hp;
}

inline std::vector<felix::AlignedExample> aligned_corpus(
    const std::vector<std::pair<std::string, std::string>>& pairs,
    const felix::AlignmentConfig& cfg) {
    std::vector<felix::AlignedExample> out;
    for (const auto& [src, tgt] : pairs) {
        const felix::TokenSeq s = felix::tokenize(src);
        const felix::TokenSeq t = felix::tokenize(tgt);
        const auto aligned = felix::align(s, t, cfg);
        if (!aligned.ok()) {
            throw felix::DataError("fixture pair unalignable: " + src);
        }
        out.push_back(felix::make_training_example(s, t, *aligned.plan, cfg));
    }
    return out;
}

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst;
};

// Central finite differences over every parameter element.
template <class Model, class AnalyticFn, class LossFn>
GradCheckReport finite_difference_check(Model& model, AnalyticFn&& analytic,
                                        LossFn&& loss_only,
                                        double eps = 1e-4) {
    const felix::LossAndGrads lg = analytic(model);
    std::vector<std::pair<std::string, felix::Tensor*>> params;
    model.visit([&](const std::string& name, felix::Tensor& t) {
        params.emplace_back(name, &t);
    });
    GradCheckReport report;
    for (std::size_t p = 0; p < params.size(); ++p) {
        felix::Tensor& t = *params[p].second;
        const felix::Tensor& g = lg.grads[p].second;
        for (std::size_t i = 0; i < t.v.size(); ++i) {
            const double saved = t.v[i];
            t.v[i] = saved + eps;
            const double up = loss_only(model);
            t.v[i] = saved - eps;
            const double down = loss_only(model);
            t.v[i] = saved;
            const double fd = (up - down) / (2.0 * eps);
            const double rel = std::fabs(fd - g.v[i]) /
                               std::max({std::fabs(fd), std::fabs(g.v[i]), 1e-6});
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst = params[p].first + "[" + std::to_string(i) + "]";
            }
        }
    }
    return report;
}

}  // namespace testutil
