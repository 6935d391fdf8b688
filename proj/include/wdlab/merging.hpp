#pragma once

#include "wdlab/model.hpp"

namespace wdlab::merging {

using model::Architecture;
using model::Dataset;
using model::Params;
using linalg::Vector;

struct TaskPair {
    Dataset data_a;
    Dataset data_b;
    double epsilon = 0.0;  // max_{i,j} |<x_i, x_j'>|, always computed
};

struct InvalidRegime : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

enum class BoundKind { linear, shallow, deep_linear, loss_transfer };

struct MergeBoundInputs {
    BoundKind kind = BoundKind::shallow;
    double eta = 0.0;
    double lambda = 0.0;
    double t = 0.0;       // step count (discrete kinds) or time (deep_linear)
    double epsilon = 0.0;
    double init_term = 0.0;  // |<theta0, x'>|, |W0' x|, or |f_{theta(0)}(x)|
    double C = 0.0;          // loss bound at init (deep_linear)
    double w0_norm_sq = 0.0; // |w(0)|^2 (deep_linear)
    int K = 2;
    double base_loss = 0.0;      // L(theta_t) (loss_transfer)
    double avg_cross_norm = 0.0; // (1/n) sum_i |W_t' x_i| (loss_transfer)
};

struct BoundValue {
    double value = 0.0;
    double decay_term = 0.0;
    double eps_term = 0.0;
    double A1 = 0.0;
    double A2 = 0.0;
    double B = 0.0;
};

Params merge_params(const Params& a, const Params& b);

double cross_task_epsilon(const std::vector<Vector>& xs,
                          const std::vector<Vector>& xs_other);

struct MergeGap {
    std::vector<double> prediction_gaps;  // |f_{a+b}(x) - f_a(x)| per probe
    double max_gap = 0.0;
    double loss_merged = 0.0;   // when labels supplied
    double loss_original = 0.0;
    double loss_gap = 0.0;
};

MergeGap merge_gap_eval(const Params& a, const Params& b, const Architecture& arch,
                        const std::vector<Vector>& probes,
                        const std::vector<int>* labels = nullptr);

BoundValue bound_eval(const MergeBoundInputs& inp);

}  // namespace wdlab::merging
