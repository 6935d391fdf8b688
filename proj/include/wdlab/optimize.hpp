#pragma once

#include <cstdint>
#include <optional>

#include "wdlab/model.hpp"

namespace wdlab::optimize {

using model::Architecture;
using model::Dataset;
using model::Params;
using linalg::Matrix;
using linalg::Vector;

enum class InitKind { xavier, scaled_gaussian, zeros, balanced_rank1 };

struct TrainConfig {
    double eta = 0.1;
    double lambda = 0.0;
    std::uint64_t steps = 0;   // GD steps, or epochs when batch_size > 0
    std::uint64_t seed = 0;
    std::uint64_t checkpoint_every = 0;  // 0 -> max(steps/200, 1)
    InitKind init = InitKind::xavier;
    double init_param = 1.0;   // sigma for scaled_gaussian, s for balanced_rank1
    std::size_t batch_size = 0;  // 0 = full-batch GD, > 0 = shuffled SGD
    bool train_head = true;      // false for fixed-head shallow nets

    void validate() const;
};

enum class GFMode { per_layer, end_to_end };

struct GFConfig {
    double lambda = 0.0;
    double h = 1e-3;
    double T = 1.0;
    GFMode mode = GFMode::per_layer;
    std::uint64_t record_every = 0;  // in steps; 0 -> max(steps/200, 1)

    void validate() const;
};

struct TrajPoint {
    double t = 0.0;  // step index or continuous time
    double L = 0.0;
    double L_lambda = 0.0;
    std::vector<double> layer_srank;
    double balancedness = 0.0;  // max_k ||W_{k+1}^T W_{k+1} - W_k W_k^T||_F
    double integral = 0.0;      // accumulated (K-1) |w|^{1-1/K} |<grad L1(w), w>|
    bool has_params = false;
    Params params;
    bool has_w = false;
    Vector w;  // end-to-end vector when defined
};

struct Trajectory {
    std::vector<TrajPoint> checkpoints;
};

struct DivergenceError : std::runtime_error {
    Trajectory so_far;
    explicit DivergenceError(std::string msg, Trajectory traj)
        : std::runtime_error(std::move(msg)), so_far(std::move(traj)) {}
};

Params init_params(const Architecture& arch, InitKind kind, double param,
                   std::uint64_t seed);

// Exactly balanced rank-1 init: W_k = s u_{k+1} u_k^T, head = s u_K.
Params balanced_rank1_init(const Architecture& arch, double s, std::uint64_t seed);

double balancedness_defect(const Params& p);

Trajectory gd_train(const Params& params0, const Architecture& arch,
                    const Dataset& data, const TrainConfig& cfg);

struct PolishResult {
    Params params;
    double residual = 0.0;
    bool converged = false;
    std::uint64_t iterations = 0;
};

// Armijo backtracking gradient descent on L_lambda until
// ||grad L_lambda|| <= tol * max(1, ||theta||).
PolishResult polish_to_stationary(const Params& start, const Architecture& arch,
                                  const Dataset& data, double lambda, double tol,
                                  std::uint64_t max_iters = 2'000'000);

// Per-layer mode starts from Params; end-to-end mode starts from a vector w(0)
// and integrates the product dynamics of deep linear networks.
Trajectory gf_integrate(const Params& start, const Architecture& arch,
                        const Dataset& data, const GFConfig& cfg);
Trajectory gf_integrate_end_to_end(const Vector& w0, int K, const Dataset& data,
                                   const GFConfig& cfg);

}  // namespace wdlab::optimize
