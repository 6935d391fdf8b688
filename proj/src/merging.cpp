#include "wdlab/merging.hpp"

#include <cmath>

namespace wdlab::merging {

using model::InvalidInput;

Params merge_params(const Params& a, const Params& b) {
    if (a.weights.size() != b.weights.size() || a.head.dim() != b.head.dim())
        throw InvalidInput("merge_params: architecture mismatch");
    Params out = a;
    for (std::size_t k = 0; k < a.weights.size(); ++k) {
        if (a.weights[k].rows != b.weights[k].rows || a.weights[k].cols != b.weights[k].cols)
            throw InvalidInput("merge_params: layer shape mismatch");
        linalg::axpy(1.0, b.weights[k], out.weights[k]);
    }
    linalg::axpy(1.0, b.head, out.head);
    return out;
}

double cross_task_epsilon(const std::vector<Vector>& xs,
                          const std::vector<Vector>& xs_other) {
    if (xs.empty() || xs_other.empty())
        throw InvalidInput("cross_task_epsilon: empty input set");
    double eps = 0.0;
    for (const auto& x : xs)
        for (const auto& xp : xs_other)
            eps = std::max(eps, std::abs(linalg::dot(x, xp)));
    return eps;
}

MergeGap merge_gap_eval(const Params& a, const Params& b, const Architecture& arch,
                        const std::vector<Vector>& probes,
                        const std::vector<int>* labels) {
    Params merged = merge_params(a, b);
    MergeGap out;
    for (std::size_t i = 0; i < probes.size(); ++i) {
        double fa = model::forward(a, arch, probes[i]).f;
        double fm = model::forward(merged, arch, probes[i]).f;
        double gap = std::abs(fm - fa);
        out.prediction_gaps.push_back(gap);
        out.max_gap = std::max(out.max_gap, gap);
        if (labels) {
            double y = static_cast<double>((*labels)[i]);
            out.loss_original += model::logistic_pair(y * fa).loss;
            out.loss_merged += model::logistic_pair(y * fm).loss;
        }
    }
    if (labels && !probes.empty()) {
        out.loss_original /= static_cast<double>(probes.size());
        out.loss_merged /= static_cast<double>(probes.size());
        out.loss_gap = out.loss_merged - out.loss_original;
    }
    return out;
}

BoundValue bound_eval(const MergeBoundInputs& inp) {
    BoundValue out;
    switch (inp.kind) {
        case BoundKind::linear:
        case BoundKind::shallow: {
            if (inp.lambda <= 0.0) throw InvalidRegime("bound_eval: lambda must be > 0");
            if (inp.eta * inp.lambda >= 1.0)
                throw InvalidRegime("bound_eval: eta * lambda must be < 1");
            double decay_factor = std::pow(1.0 - inp.eta * inp.lambda, inp.t);
            out.decay_term = inp.init_term * decay_factor;
            out.eps_term = inp.epsilon * (1.0 - decay_factor) / inp.lambda;
            out.value = out.decay_term + out.eps_term;
            break;
        }
        case BoundKind::deep_linear: {
            if (inp.lambda <= 0.0) throw InvalidRegime("bound_eval: lambda must be > 0");
            if (inp.K < 2) throw InvalidRegime("bound_eval: deep_linear needs K >= 2");
            double K = static_cast<double>(inp.K);
            out.B = inp.w0_norm_sq + inp.C / inp.lambda;
            double bpow = std::pow(out.B, 2.0 - 2.0 / K);
            out.A1 = std::exp(bpow * (K - 1.0) * (1.0 + inp.lambda * K) * inp.C /
                              (2.0 * inp.lambda * K));
            out.A2 = 2.0 * bpow * inp.C * out.A1 *
                     (1.0 - std::exp(-inp.lambda * K * inp.t / 2.0)) / (inp.lambda * K);
            out.decay_term = inp.init_term * out.A1 * std::exp(-inp.lambda * K * inp.t);
            out.eps_term = out.A2 * inp.epsilon;
            out.value = out.decay_term + out.eps_term;
            break;
        }
        case BoundKind::loss_transfer: {
            out.value = inp.base_loss + inp.avg_cross_norm;
            out.decay_term = inp.base_loss;
            out.eps_term = inp.avg_cross_norm;
            break;
        }
    }
    return out;
}

}  // namespace wdlab::merging
