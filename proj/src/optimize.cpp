#include "wdlab/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wdlab/rng.hpp"

namespace wdlab::optimize {

using model::InvalidInput;

void TrainConfig::validate() const {
    if (eta <= 0.0) throw InvalidInput("TrainConfig: eta must be > 0");
    if (lambda < 0.0) throw InvalidInput("TrainConfig: lambda must be >= 0");
}

void GFConfig::validate() const {
    if (h <= 0.0) throw InvalidInput("GFConfig: h must be > 0");
    if (T <= 0.0) throw InvalidInput("GFConfig: T must be > 0");
    if (lambda < 0.0) throw InvalidInput("GFConfig: lambda must be >= 0");
}

namespace {

void p_axpy(double c, const Params& x, Params& y) {
    for (std::size_t k = 0; k < x.weights.size(); ++k)
        linalg::axpy(c, x.weights[k], y.weights[k]);
    linalg::axpy(c, x.head, y.head);
}

void p_scale(Params& p, double c) {
    for (auto& w : p.weights) linalg::scale(w, c);
    linalg::scale(p.head, c);
}

bool p_finite(const Params& p) {
    for (const auto& w : p.weights)
        if (!linalg::all_finite(w)) return false;
    return linalg::all_finite(p.head);
}

Vector random_unit(Rng& rng, std::size_t dim) {
    Vector u(dim);
    double n = 0.0;
    while (n == 0.0) {
        for (auto& x : u.data) x = rng.normal();
        n = linalg::norm(u);
    }
    linalg::scale(u, 1.0 / n);
    return u;
}

}  // namespace

Params init_params(const Architecture& arch, InitKind kind, double param,
                   std::uint64_t seed) {
    if (kind == InitKind::balanced_rank1) return balanced_rank1_init(arch, param, seed);
    Params p = Params::zeros(arch);
    if (kind == InitKind::zeros) return p;
    Rng rng(seed);
    for (std::size_t k = 0; k < p.weights.size(); ++k) {
        Matrix& w = p.weights[k];
        double sigma = kind == InitKind::xavier
                           ? std::sqrt(2.0 / static_cast<double>(w.rows + w.cols))
                           : param;
        Rng stream = rng.split(k);
        for (auto& x : w.data) x = sigma * stream.normal();
    }
    {
        double sigma = kind == InitKind::xavier
                           ? std::sqrt(2.0 / static_cast<double>(p.head.dim() + 1))
                           : param;
        Rng stream = rng.split(p.weights.size());
        for (auto& x : p.head.data) x = sigma * stream.normal();
    }
    return p;
}

Params balanced_rank1_init(const Architecture& arch, double s, std::uint64_t seed) {
    arch.validate();
    if (arch.activation.kind != model::ActivationKind::identity)
        throw model::UnsupportedOperation("balanced_rank1_init: identity activation required");
    if (s <= 0.0) throw InvalidInput("balanced_rank1_init: scale must be > 0");
    Rng rng(seed);
    std::vector<Vector> dirs;  // u_1 .. u_K
    dirs.push_back(random_unit(rng, arch.input_dim));
    for (int k = 0; k < arch.K - 1; ++k) dirs.push_back(random_unit(rng, arch.widths[k]));
    Params p = Params::zeros(arch);
    for (int k = 0; k < arch.K - 1; ++k) {
        p.weights[k] = linalg::outer(dirs[k + 1], dirs[k]);
        linalg::scale(p.weights[k], s);
    }
    p.head = dirs.back();
    linalg::scale(p.head, s);
    return p;
}

double balancedness_defect(const Params& p) {
    double worst = 0.0;
    auto gram_gap = [&](const Matrix& upper, const Matrix& lower) {
        // ||upper^T upper - lower lower^T||_F
        Matrix a = linalg::matmul(linalg::transpose(upper), upper);
        Matrix b = linalg::matmul(lower, linalg::transpose(lower));
        linalg::axpy(-1.0, b, a);
        return linalg::frobenius_norm(a);
    };
    for (std::size_t k = 0; k + 1 < p.weights.size(); ++k)
        worst = std::max(worst, gram_gap(p.weights[k + 1], p.weights[k]));
    if (!p.weights.empty()) {
        Matrix head_row(1, p.head.dim());
        head_row.data = p.head.data;
        worst = std::max(worst, gram_gap(head_row, p.weights.back()));
    }
    return worst;
}

namespace {

void record_point(Trajectory& traj, double t, const Params& p,
                  const Architecture& arch, const Dataset& data, double lambda) {
    TrajPoint pt;
    pt.t = t;
    if (data.size() > 0) {
        double L = 0.0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            auto fwd = model::forward(p, arch, data.inputs[i]);
            L += model::logistic_pair(data.labels[i] * fwd.f).loss;
        }
        pt.L = L / static_cast<double>(data.size());
    }
    pt.L_lambda = pt.L + 0.5 * lambda * p.squared_norm();
    for (const auto& w : p.weights) {
        double fro = linalg::frobenius_norm(w);
        pt.layer_srank.push_back(fro > 0.0 ? fro / linalg::spectral_norm(w) : 0.0);
    }
    if (!p.weights.empty()) pt.balancedness = balancedness_defect(p);
    pt.has_params = true;
    pt.params = p;
    if (arch.activation.kind == model::ActivationKind::identity) {
        pt.has_w = true;
        pt.w = model::end_to_end_vector(p, arch);
    }
    traj.checkpoints.push_back(std::move(pt));
}

void gd_update(Params& p, const Params& gradL, double eta, double lambda,
               bool train_head) {
    const double decay = 1.0 - eta * lambda;
    for (std::size_t k = 0; k < p.weights.size(); ++k) {
        linalg::scale(p.weights[k], decay);
        linalg::axpy(-eta, gradL.weights[k], p.weights[k]);
    }
    if (train_head) {
        linalg::scale(p.head, decay);
        linalg::axpy(-eta, gradL.head, p.head);
    }
}

}  // namespace

Trajectory gd_train(const Params& params0, const Architecture& arch,
                    const Dataset& data, const TrainConfig& cfg) {
    cfg.validate();
    model::check_shapes(params0, arch);
    Params p = params0;
    Trajectory traj;
    const std::uint64_t ce =
        cfg.checkpoint_every > 0 ? cfg.checkpoint_every : std::max<std::uint64_t>(cfg.steps / 200, 1);
    record_point(traj, 0.0, p, arch, data, cfg.lambda);

    if (cfg.batch_size == 0) {
        for (std::uint64_t s = 0; s < cfg.steps; ++s) {
            model::LossGrad lg;
            try {
                lg = model::regularized_loss_and_grad(p, arch, data, 0.0);
            } catch (const model::InvalidInput&) {
                throw DivergenceError("gd_train: non-finite loss", traj);
            }
            if (!std::isfinite(lg.L)) throw DivergenceError("gd_train: non-finite loss", traj);
            gd_update(p, lg.gradL, cfg.eta, cfg.lambda, cfg.train_head);
            if (!p_finite(p)) throw DivergenceError("gd_train: non-finite parameters", traj);
            if ((s + 1) % ce == 0 || s + 1 == cfg.steps) {
                try {
                    record_point(traj, static_cast<double>(s + 1), p, arch, data, cfg.lambda);
                } catch (const model::InvalidInput&) {
                    throw DivergenceError("gd_train: non-finite prediction", traj);
                }
            }
        }
    } else {
        // Shuffled single-pass minibatch SGD; cfg.steps counts epochs.
        Rng shuffle_rng = Rng(cfg.seed).split(0x5u);
        std::vector<std::size_t> order(data.size());
        std::iota(order.begin(), order.end(), 0);
        for (std::uint64_t epoch = 0; epoch < cfg.steps; ++epoch) {
            for (std::size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[shuffle_rng.below(i)]);
            for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
                Dataset batch;
                for (std::size_t i = start; i < std::min(start + cfg.batch_size, order.size()); ++i) {
                    batch.inputs.push_back(data.inputs[order[i]]);
                    batch.labels.push_back(data.labels[order[i]]);
                }
                model::LossGrad lg;
                try {
                    lg = model::regularized_loss_and_grad(p, arch, batch, 0.0);
                } catch (const model::InvalidInput&) {
                    throw DivergenceError("gd_train: non-finite loss", traj);
                }
                if (!std::isfinite(lg.L)) throw DivergenceError("gd_train: non-finite loss", traj);
                gd_update(p, lg.gradL, cfg.eta, cfg.lambda, cfg.train_head);
            }
            if (!p_finite(p)) throw DivergenceError("gd_train: non-finite parameters", traj);
            if ((epoch + 1) % ce == 0 || epoch + 1 == cfg.steps)
                record_point(traj, static_cast<double>(epoch + 1), p, arch, data, cfg.lambda);
        }
    }
    return traj;
}

PolishResult polish_to_stationary(const Params& start, const Architecture& arch,
                                  const Dataset& data, double lambda, double tol,
                                  std::uint64_t max_iters) {
    if (lambda <= 0.0) throw InvalidInput("polish_to_stationary: lambda must be > 0");
    if (tol <= 0.0) throw InvalidInput("polish_to_stationary: tol must be > 0");
    Params p = start;
    auto lg = model::regularized_loss_and_grad(p, arch, data, lambda);
    double step = 1.0;
    const double c_armijo = 1e-4;
    PolishResult out;
    for (std::uint64_t it = 0; it < max_iters; ++it) {
        double gnorm2 = lg.grad.squared_norm();
        double gnorm = std::sqrt(gnorm2);
        double theta_norm = std::sqrt(p.squared_norm());
        if (gnorm <= tol * std::max(1.0, theta_norm)) {
            out.params = p;
            out.residual = gnorm;
            out.converged = true;
            out.iterations = it;
            return out;
        }
        bool accepted = false;
        while (step >= 1e-18) {
            Params trial = p;
            p_axpy(-step, lg.grad, trial);
            auto trial_lg = model::regularized_loss_and_grad(trial, arch, data, lambda);
            if (std::isfinite(trial_lg.L_lambda) &&
                trial_lg.L_lambda <= lg.L_lambda - c_armijo * step * gnorm2) {
                p = std::move(trial);
                lg = std::move(trial_lg);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;  // line search stalled (non-smooth point)
        step = std::min(step * 2.0, 1.0);
    }
    out.params = p;
    out.residual = std::sqrt(lg.grad.squared_norm());
    out.converged = false;
    out.iterations = max_iters;
    return out;
}

namespace {

// Gradient of the end-to-end logistic loss L1(w); empty dataset means a pure
// weight-decay flow.
Vector l1_grad(const Vector& w, const Dataset& data, double* loss_out) {
    Vector g(w.dim());
    double L = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        double y = static_cast<double>(data.labels[i]);
        double z = y * linalg::dot(w, data.inputs[i]);
        auto lp = model::logistic_pair(z);
        L += lp.loss;
        linalg::axpy(lp.slope * y / static_cast<double>(data.size()), data.inputs[i], g);
    }
    if (loss_out) *loss_out = data.size() > 0 ? L / static_cast<double>(data.size()) : 0.0;
    return g;
}

double integral_rate(const Vector& w, const Dataset& data, int K) {
    if (K < 2 || data.size() == 0) return 0.0;
    Vector g = l1_grad(w, data, nullptr);
    double wn = linalg::norm(w);
    return (K - 1) * std::pow(wn, 1.0 - 1.0 / K) * std::abs(linalg::dot(g, w));
}

}  // namespace

Trajectory gf_integrate(const Params& start, const Architecture& arch,
                        const Dataset& data, const GFConfig& cfg) {
    cfg.validate();
    model::check_shapes(start, arch);
    const std::uint64_t n_steps =
        static_cast<std::uint64_t>(std::llround(cfg.T / cfg.h));
    const std::uint64_t re =
        cfg.record_every > 0 ? cfg.record_every : std::max<std::uint64_t>(n_steps / 200, 1);
    const bool linear = arch.activation.kind == model::ActivationKind::identity;

    auto deriv = [&](const Params& p, Params& dp, double& dI) {
        dp = p;
        p_scale(dp, -cfg.lambda);
        if (data.size() > 0) {
            auto lg = model::regularized_loss_and_grad(p, arch, data, 0.0);
            p_axpy(-1.0, lg.gradL, dp);
        }
        dI = linear && arch.K >= 2 ? integral_rate(model::end_to_end_vector(p, arch), data, arch.K)
                                   : 0.0;
    };

    Params p = start;
    double I = 0.0;
    Trajectory traj;
    auto record = [&](double t) {
        record_point(traj, t, p, arch, data, cfg.lambda);
        traj.checkpoints.back().integral = I;
    };
    record(0.0);
    Params k1, k2, k3, k4, tmp;
    double i1, i2, i3, i4;
    for (std::uint64_t s = 0; s < n_steps; ++s) {
        deriv(p, k1, i1);
        tmp = p; p_axpy(0.5 * cfg.h, k1, tmp);
        deriv(tmp, k2, i2);
        tmp = p; p_axpy(0.5 * cfg.h, k2, tmp);
        deriv(tmp, k3, i3);
        tmp = p; p_axpy(cfg.h, k3, tmp);
        deriv(tmp, k4, i4);
        p_axpy(cfg.h / 6.0, k1, p);
        p_axpy(cfg.h / 3.0, k2, p);
        p_axpy(cfg.h / 3.0, k3, p);
        p_axpy(cfg.h / 6.0, k4, p);
        I += cfg.h / 6.0 * (i1 + 2.0 * i2 + 2.0 * i3 + i4);
        if (!p_finite(p)) throw DivergenceError("gf_integrate: non-finite state", traj);
        if ((s + 1) % re == 0 || s + 1 == n_steps)
            record(static_cast<double>(s + 1) * cfg.h);
    }
    return traj;
}

Trajectory gf_integrate_end_to_end(const Vector& w0, int K, const Dataset& data,
                                   const GFConfig& cfg) {
    cfg.validate();
    if (K < 1) throw InvalidInput("gf_integrate_end_to_end: K must be >= 1");
    const std::uint64_t n_steps =
        static_cast<std::uint64_t>(std::llround(cfg.T / cfg.h));
    const std::uint64_t re =
        cfg.record_every > 0 ? cfg.record_every : std::max<std::uint64_t>(n_steps / 200, 1);

    // Product dynamics of a balanced deep linear network:
    //   dw/dt = (-lambda K - (K-1) |w|^{-2/K} <grad L1, w>) w - |w|^{2-2/K} grad L1
    // The w-aligned term is |w|^{2-2/K} grad L1^T (w w^T / |w|^2), i.e. the
    // rank-1 projection keeps its 1/|w|^2 normalization.
    auto deriv = [&](const Vector& w, Vector& dw, double& dI) {
        Vector g = l1_grad(w, data, nullptr);
        double wn = linalg::norm(w);
        double pow_term = wn > 0.0 ? std::pow(wn * wn, 1.0 - 1.0 / K) : 0.0;
        double proj_term = wn > 0.0 ? std::pow(wn * wn, -1.0 / K) : 0.0;
        double gw = linalg::dot(g, w);
        dw = w;
        linalg::scale(dw, -cfg.lambda * K - (K - 1) * proj_term * gw);
        linalg::axpy(-pow_term, g, dw);
        dI = K >= 2 ? (K - 1) * std::pow(wn, 1.0 - 1.0 / K) * std::abs(gw) : 0.0;
    };

    Vector w = w0;
    double I = 0.0;
    Trajectory traj;
    auto record = [&](double t) {
        TrajPoint pt;
        pt.t = t;
        Vector g = l1_grad(w, data, &pt.L);
        pt.L_lambda = pt.L + 0.5 * cfg.lambda * linalg::dot(w, w);
        pt.integral = I;
        pt.has_w = true;
        pt.w = w;
        traj.checkpoints.push_back(std::move(pt));
    };
    record(0.0);
    Vector k1, k2, k3, k4, tmp;
    double i1, i2, i3, i4;
    for (std::uint64_t s = 0; s < n_steps; ++s) {
        deriv(w, k1, i1);
        tmp = w; linalg::axpy(0.5 * cfg.h, k1, tmp);
        deriv(tmp, k2, i2);
        tmp = w; linalg::axpy(0.5 * cfg.h, k2, tmp);
        deriv(tmp, k3, i3);
        tmp = w; linalg::axpy(cfg.h, k3, tmp);
        deriv(tmp, k4, i4);
        linalg::axpy(cfg.h / 6.0, k1, w);
        linalg::axpy(cfg.h / 3.0, k2, w);
        linalg::axpy(cfg.h / 3.0, k3, w);
        linalg::axpy(cfg.h / 6.0, k4, w);
        I += cfg.h / 6.0 * (i1 + 2.0 * i2 + 2.0 * i3 + i4);
        if (!linalg::all_finite(w))
            throw DivergenceError("gf_integrate_end_to_end: non-finite state", traj);
        if ((s + 1) % re == 0 || s + 1 == n_steps)
            record(static_cast<double>(s + 1) * cfg.h);
    }
    return traj;
}

}  // namespace wdlab::optimize
