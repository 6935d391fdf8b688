#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <thread>

#include "doctest.h"
#include "wdlab/datagen.hpp"
#include "wdlab/diagnostics.hpp"
#include "wdlab/experiments.hpp"
#include "wdlab/inspect.hpp"
#include "wdlab/merging.hpp"
#include "wdlab/optimize.hpp"
#include "wdlab/rng.hpp"

using namespace wdlab;
using linalg::Matrix;
using linalg::Vector;
using model::Architecture;
using model::Dataset;
using model::Params;

namespace {

struct Criterion {
    int id;
    bool ok = true;
    std::string first_failure;

    explicit Criterion(int n) : id(n) {}
    void check(bool cond, const std::string& what) {
        if (!cond && ok) first_failure = what;
        ok = ok && cond;
    }
    ~Criterion() {
        std::printf("criterion %d: %s%s%s\n", id, ok ? "PASS" : "FAIL",
                    ok ? "" : " — ", first_failure.c_str());
        std::fflush(stdout);
        CHECK_MESSAGE(ok, "criterion ", id, ": ", first_failure);
    }
};

Architecture arch_of(int K, std::size_t d, std::size_t width,
                     model::Activation act = model::Activation::identity()) {
    Architecture arch;
    arch.K = K;
    arch.input_dim = d;
    for (int k = 0; k < K - 1; ++k) arch.widths.push_back(width);
    arch.activation = act;
    return arch;
}

Params random_params(const Architecture& arch, Rng& rng, double scale) {
    Params p = Params::zeros(arch);
    for (auto& w : p.weights)
        for (auto& x : w.data) x = scale * rng.normal();
    for (auto& x : p.head.data) x = scale * rng.normal();
    return p;
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

double* param_at(Params& p, std::size_t idx) {
    for (auto& w : p.weights) {
        if (idx < w.data.size()) return &w.data[idx];
        idx -= w.data.size();
    }
    return &p.head.data[idx];
}

double min_abs_preactivation(const model::ForwardResult& fwd) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& pre : fwd.pre_activations)
        for (double v : pre.data) m = std::min(m, std::abs(v));
    return m;
}

double least_squares_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        num += (xs[i] - mx) * (ys[i] - my);
        den += (xs[i] - mx) * (xs[i] - mx);
    }
    return num / den;
}

double spearman_rho(const std::vector<double>& xs, const std::vector<double>& ys) {
    auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(),
                  [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i);
        return r;
    };
    auto rx = ranks(xs), ry = ranks(ys);
    double n = static_cast<double>(xs.size());
    double d2 = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
    return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

double logistic_loss(double z) { return model::logistic_pair(z).loss; }

double shallow_loss(const Matrix& W, const Vector& u, const Dataset& data) {
    model::ShallowConfig sc{W, u};
    double L = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i)
        L += logistic_loss(data.labels[i] * model::shallow_forward(sc, data.inputs[i]));
    return L / static_cast<double>(data.size());
}

Matrix matrix_sum(const Matrix& a, const Matrix& b) {
    Matrix out = a;
    linalg::axpy(1.0, b, out);
    return out;
}

Vector sign_head(std::size_t m, std::uint64_t seed) {
    Rng rng(seed);
    Vector u(m);
    double scale = 1.0 / std::sqrt(static_cast<double>(m));
    for (auto& x : u.data) x = rng.uniform() < 0.5 ? -scale : scale;
    return u;
}

}  // namespace

TEST_CASE("criterion 1: backprop vs central finite differences") {
    Criterion crit(1);
    const model::Activation acts[] = {model::Activation::identity(),
                                      model::Activation::relu(),
                                      model::Activation::relu_power(2)};
    Rng rng(101);
    for (const auto& act : acts) {
        for (int pair = 0; pair < 50; ++pair) {
            int K = 2 + static_cast<int>(rng.below(2));
            Architecture arch = arch_of(K, 4, 3, act);
            Params p;
            Vector x(4);
            model::ForwardResult fwd;
            do {  // keep pre-activations at least 1e-3 from the kink
                p = random_params(arch, rng, 0.8);
                for (auto& v : x.data) v = rng.normal();
                fwd = model::forward(p, arch, x);
            } while (min_abs_preactivation(fwd) < 1e-3);

            Params grad = model::prediction_grad(p, arch, x);
            const double h = 1e-6;
            double num2 = 0.0, den2 = 0.0;
            for (std::size_t i = 0; i < p.num_scalars(); ++i) {
                Params pp = p;
                double* slot = param_at(pp, i);
                double orig = *slot;
                *slot = orig + h;
                double up = model::forward(pp, arch, x).f;
                *slot = orig - h;
                double dn = model::forward(pp, arch, x).f;
                double fd = (up - dn) / (2.0 * h);
                double got = *param_at(grad, i);
                num2 += (got - fd) * (got - fd);
                den2 += fd * fd;
            }
            double rel = std::sqrt(num2) / std::max(std::sqrt(den2), 1e-12);
            crit.check(rel <= 1e-6, "finite-difference mismatch, rel " + std::to_string(rel));
        }
    }
}

TEST_CASE("criterion 2: homogeneity and per-layer trace identities") {
    Criterion crit(2);
    Rng rng(202);
    for (int K : {2, 3, 4}) {
        for (int H : {1, 2}) {
            model::Activation act =
                H == 1 ? model::Activation::relu() : model::Activation::relu_power(2);
            Architecture arch = arch_of(K, 5, 4, act);
            for (int trial = 0; trial < 20; ++trial) {
                Params p = random_params(arch, rng, 0.8);
                Vector x(5);
                double f;
                do {
                    for (auto& v : x.data) v = rng.normal();
                    f = model::forward(p, arch, x).f;
                } while (std::abs(f) < 1e-3);

                double degree = std::pow(static_cast<double>(H), K - 1);
                for (double alpha : {0.5, 2.0}) {
                    Vector ax = x;
                    linalg::scale(ax, alpha);
                    double fa = model::forward(p, arch, ax).f;
                    double rel = std::abs(fa - std::pow(alpha, degree) * f) /
                                 std::max(std::abs(fa), 1e-12);
                    crit.check(rel <= 1e-9, "input homogeneity defect " + std::to_string(rel));
                }
                try {
                    auto defects = diagnostics::euler_identity_check(p, arch, x);
                    for (double d : defects)
                        crit.check(d <= 1e-8, "trace identity defect " + std::to_string(d));
                } catch (const diagnostics::KinkHit&) {
                    // astronomically unlikely for continuous random inputs; retry-free skip
                }
            }
        }
    }
}

TEST_CASE("criterion 3: structure of polished stationary points") {
    Criterion crit(3);
    datagen::TaskSpec task;
    task.d = 10;
    task.n = 20;
    for (std::size_t i = 0; i < 10; ++i) task.subspace.push_back(i);
    task.seed = 67;  // a task whose classes separate with a wide margin
    Dataset data = datagen::gen_task(task);

    // deep linear
    {
        Architecture arch = arch_of(3, 10, 8);
        double lambda = 1e-3;
        Params p0 = optimize::init_params(arch, optimize::InitKind::xavier, 1.0, 304);
        auto res = optimize::polish_to_stationary(p0, arch, data, lambda, 1e-8);
        crit.check(res.converged, "linear polish did not reach residual 1e-8");

        for (double r : diagnostics::rank1_check(res.params))
            crit.check(r <= 1e-4, "sigma2/sigma1 ratio " + std::to_string(r));

        auto np = diagnostics::norm_preservation_report(res.params, arch, data, lambda);
        for (double r : np.residuals)
            crit.check(r <= 1e-3, "norm preservation residual " + std::to_string(r));
        for (std::size_t k = 1; k < np.fro_norms.size(); ++k) {
            double rel = std::abs(np.fro_norms[k] - np.fro_norms[0]) / np.fro_norms[0];
            crit.check(rel <= 1e-3, "layer norms differ by " + std::to_string(rel));
        }

        auto pr = diagnostics::pseudo_rank_report(res.params, arch, data, lambda);
        crit.check(pr.slack >= 0.0, "inverse-rank inequality violated, slack " +
                                        std::to_string(pr.slack));
    }

    // relu, looser stationarity.  Generic inits drift into non-smooth valleys
    // where the line search stalls, so start from a pair of one-sided rank-1
    // chains along a separating direction: every active sample is correctly
    // classified there and the landscape stays differentiable.
    {
        Architecture lin1 = arch_of(1, 10, 0);
        Params q0 = optimize::init_params(lin1, optimize::InitKind::zeros, 1.0, 0);
        auto qres = optimize::polish_to_stationary(q0, lin1, data, 1e-4, 1e-6, 200000);
        Vector u = qres.params.head;
        linalg::scale(u, 1.0 / linalg::norm(u));

        Architecture arch = arch_of(3, 10, 8, model::Activation::relu());
        double lambda = 1e-3;
        Params p0 = Params::zeros(arch);
        for (std::size_t c = 0; c < 10; ++c) {
            p0.weights[0].data[0 * 10 + c] = u[c];
            p0.weights[0].data[1 * 10 + c] = -u[c];
        }
        p0.weights[1].data[0 * 8 + 0] = 1.0;
        p0.weights[1].data[1 * 8 + 1] = 1.0;
        p0.head[0] = 1.0;
        p0.head[1] = -1.0;
        auto res = optimize::polish_to_stationary(p0, arch, data, lambda, 1e-5);
        crit.check(res.converged, "relu polish did not reach residual 1e-5");

        auto np = diagnostics::norm_preservation_report(res.params, arch, data, lambda);
        for (double r : np.residuals)
            crit.check(r <= 1e-2, "relu norm preservation residual " + std::to_string(r));
        for (std::size_t k = 1; k < np.fro_norms.size(); ++k) {
            double rel = std::abs(np.fro_norms[k] - np.fro_norms[0]) / np.fro_norms[0];
            crit.check(rel <= 1e-2, "relu layer norms differ by " + std::to_string(rel));
        }
        auto pr = diagnostics::pseudo_rank_report(res.params, arch, data, lambda);
        crit.check(pr.lhs >= pr.rhs - 1e-2, "relu inverse-rank inequality, slack " +
                                                std::to_string(pr.slack));
    }
}

TEST_CASE("criterion 4: per-layer vs end-to-end gradient flow") {
    Criterion crit(4);
    Architecture arch = arch_of(3, 6, 5);
    Params p0 = optimize::balanced_rank1_init(arch, 0.5, 404);
    datagen::TaskSpec task;
    task.d = 6;
    task.n = 10;
    for (std::size_t i = 0; i < 6; ++i) task.subspace.push_back(i);
    task.seed = 405;
    Dataset data = datagen::gen_task(task);

    optimize::GFConfig cfg;
    cfg.lambda = 0.1;
    cfg.h = 1e-3;
    cfg.T = 10.0;
    cfg.record_every = 50;
    auto per_layer = optimize::gf_integrate(p0, arch, data, cfg);
    Vector w0 = model::end_to_end_vector(p0, arch);
    auto e2e = optimize::gf_integrate_end_to_end(w0, arch.K, data, cfg);
    crit.check(per_layer.checkpoints.size() == e2e.checkpoints.size(),
               "checkpoint counts differ");

    double scale = 0.0;
    for (const auto& pt : e2e.checkpoints)
        for (const auto& x : data.inputs)
            scale = std::max(scale, std::abs(linalg::dot(pt.w, x)));

    double L1_0 = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i)
        L1_0 += logistic_loss(data.labels[i] * linalg::dot(w0, data.inputs[i]));
    L1_0 /= static_cast<double>(data.size());

    for (std::size_t c = 0; c < per_layer.checkpoints.size(); ++c) {
        const auto& a = per_layer.checkpoints[c];
        const auto& b = e2e.checkpoints[c];
        for (const auto& x : data.inputs) {
            double diff = std::abs(linalg::dot(a.w, x) - linalg::dot(b.w, x));
            crit.check(diff <= 1e-3 * scale,
                       "trajectories disagree by " + std::to_string(diff));
        }
        crit.check(a.balancedness <= 1e-6,
                   "balancedness defect " + std::to_string(a.balancedness));
        double cap = std::sqrt((arch.K - 1) * (1.0 + cfg.lambda * arch.K) * L1_0 * a.t);
        crit.check(a.integral <= cap + 1e-12,
                   "integral bound violated at t=" + std::to_string(a.t));
        crit.check(b.integral <= cap + 1e-12,
                   "integral bound violated (end-to-end) at t=" + std::to_string(b.t));
    }
}

TEST_CASE("criterion 5: hidden null-space decay bound on gd runs") {
    Criterion crit(5);
    datagen::TaskSpec ta, tb;
    ta.d = tb.d = 40;
    ta.n = tb.n = 50;
    for (std::size_t i = 0; i < 20; ++i) ta.subspace.push_back(i);
    for (std::size_t i = 20; i < 40; ++i) tb.subspace.push_back(i);
    ta.seed = 505;
    tb.seed = 506;
    auto pair = datagen::gen_task_pair(ta, tb);
    crit.check(pair.epsilon == 0.0, "subspaces not orthogonal");

    Architecture arch = arch_of(2, 40, 64, model::Activation::relu());
    Vector u = sign_head(64, 507);

    optimize::TrainConfig cfg;
    cfg.eta = 0.5;
    cfg.lambda = 1e-3;
    cfg.steps = 20000;
    cfg.checkpoint_every = 100;
    cfg.train_head = false;
    cfg.seed = 508;

    Params pb0 = optimize::init_params(arch, optimize::InitKind::xavier, 1.0, 509);
    pb0.head = u;
    auto traj_b = optimize::gd_train(pb0, arch, pair.data_b, cfg);

    std::vector<double> ts, log_norms;
    for (const auto& pt : traj_b.checkpoints) {
        double max_norm = 0.0;
        for (std::size_t i = 0; i < pair.data_a.size(); ++i) {
            const Vector& x = pair.data_a.inputs[i];
            double measured = linalg::norm(linalg::matvec(pt.params.weights[0], x));
            double init = linalg::norm(linalg::matvec(pb0.weights[0], x));
            merging::MergeBoundInputs bi;
            bi.kind = merging::BoundKind::shallow;
            bi.eta = cfg.eta;
            bi.lambda = cfg.lambda;
            bi.t = pt.t;
            bi.epsilon = 0.0;
            bi.init_term = init;
            double bound = merging::bound_eval(bi).value;
            crit.check(bound - measured >= -1e-9,
                       "decay bound violated at t=" + std::to_string(pt.t));
            max_norm = std::max(max_norm, measured);
        }
        if (pt.t <= 5000.0 && max_norm > 0.0) {
            ts.push_back(pt.t);
            log_norms.push_back(std::log(max_norm));
        }
    }
    double slope = least_squares_slope(ts, log_norms);
    double expect = std::log(1.0 - cfg.eta * cfg.lambda);
    crit.check(std::abs(slope - expect) <= 0.1 * std::abs(expect),
               "decay slope " + std::to_string(slope) + " vs " + std::to_string(expect));

    // with a zero-initialized other model the merged gap vanishes
    optimize::TrainConfig cfg_a = cfg;
    cfg_a.seed = 510;
    Params pa0 = optimize::init_params(arch, optimize::InitKind::xavier, 1.0, 511);
    pa0.head = u;
    auto traj_a = optimize::gd_train(pa0, arch, pair.data_a, cfg_a);

    optimize::TrainConfig cfg_z = cfg;
    cfg_z.seed = 512;
    Params pz0 = Params::zeros(arch);
    pz0.head = u;
    auto traj_z = optimize::gd_train(pz0, arch, pair.data_b, cfg_z);
    for (std::size_t c = 0; c < traj_a.checkpoints.size(); ++c) {
        const Matrix& wa = traj_a.checkpoints[c].params.weights[0];
        const Matrix& wz = traj_z.checkpoints[c].params.weights[0];
        Matrix merged = matrix_sum(wa, wz);
        for (const auto& x : pair.data_a.inputs) {
            double fa = model::shallow_forward({wa, u}, x);
            double fm = model::shallow_forward({merged, u}, x);
            crit.check(std::abs(fm - fa) <= 1e-10,
                       "zero-init merged gap " + std::to_string(std::abs(fm - fa)));
        }
    }
}

TEST_CASE("criterion 6: merged deep linear gap under the flow bound") {
    Criterion crit(6);
    datagen::TaskSpec ta, tb;
    ta.d = tb.d = 8;
    ta.n = tb.n = 8;
    for (std::size_t i = 0; i < 4; ++i) ta.subspace.push_back(i);
    for (std::size_t i = 4; i < 8; ++i) tb.subspace.push_back(i);
    ta.seed = 606;
    tb.seed = 607;
    auto pair = datagen::gen_task_pair(ta, tb);
    crit.check(pair.epsilon == 0.0, "subspaces not orthogonal");

    Architecture arch = arch_of(3, 8, 6);
    const double s = 0.5;
    Rng rng(608);

    // model a: a balanced product with its first direction inside task a's subspace
    Vector ua1(8), ua2 = random_unit(rng, 6), ua3 = random_unit(rng, 6);
    {
        Vector sub = random_unit(rng, 4);
        for (std::size_t i = 0; i < 4; ++i) ua1[i] = sub[i];
    }
    Params pa = Params::zeros(arch);
    pa.weights[0] = linalg::outer(ua2, ua1);
    pa.weights[1] = linalg::outer(ua3, ua2);
    linalg::scale(pa.weights[0], s);
    linalg::scale(pa.weights[1], s);
    pa.head = ua3;
    linalg::scale(pa.head, s);

    // model b: hidden directions orthogonalized against model a's, but a first
    // direction that leans into task a's subspace so the cross output is nonzero
    auto orth_unit = [&](const Vector& against) {
        Vector v = random_unit(rng, against.dim());
        linalg::axpy(-linalg::dot(v, against), against, v);
        linalg::scale(v, 1.0 / linalg::norm(v));
        return v;
    };
    Vector ub2 = orth_unit(ua2), ub3 = orth_unit(ua3);
    Vector ub1(8);
    {
        Vector sub_a = random_unit(rng, 4), sub_b = random_unit(rng, 4);
        for (std::size_t i = 0; i < 4; ++i) {
            ub1[i] = 0.4 * sub_a[i];
            ub1[4 + i] = sub_b[i];
        }
        linalg::scale(ub1, 1.0 / linalg::norm(ub1));
    }
    Params pb = Params::zeros(arch);
    pb.weights[0] = linalg::outer(ub2, ub1);
    pb.weights[1] = linalg::outer(ub3, ub2);
    linalg::scale(pb.weights[0], s);
    linalg::scale(pb.weights[1], s);
    pb.head = ub3;
    linalg::scale(pb.head, s);
    crit.check(optimize::balancedness_defect(pb) <= 1e-14, "init not balanced");

    optimize::GFConfig cfg;
    cfg.lambda = 0.1;
    cfg.h = 1e-3;
    cfg.T = 10.0;
    cfg.record_every = 100;
    auto traj_a = optimize::gf_integrate(pa, arch, pair.data_a, cfg);
    auto traj_b = optimize::gf_integrate(pb, arch, pair.data_b, cfg);

    Vector wb0 = model::end_to_end_vector(pb, arch);
    double C = 0.0;
    for (std::size_t i = 0; i < pair.data_b.size(); ++i)
        C += logistic_loss(pair.data_b.labels[i] *
                           linalg::dot(wb0, pair.data_b.inputs[i]));
    C /= static_cast<double>(pair.data_b.size());

    bool any_positive_init = false;
    for (std::size_t c = 0; c < traj_a.checkpoints.size(); ++c) {
        const auto& ca = traj_a.checkpoints[c];
        const auto& cb = traj_b.checkpoints[c];
        Params merged = merging::merge_params(ca.params, cb.params);
        for (const auto& x : pair.data_a.inputs) {
            double gap = std::abs(model::forward(merged, arch, x).f -
                                  model::forward(ca.params, arch, x).f);
            merging::MergeBoundInputs bi;
            bi.kind = merging::BoundKind::deep_linear;
            bi.lambda = cfg.lambda;
            bi.K = arch.K;
            bi.t = ca.t;
            bi.epsilon = 0.0;
            bi.C = C;
            bi.w0_norm_sq = linalg::dot(wb0, wb0);
            bi.init_term = std::abs(linalg::dot(wb0, x));
            if (bi.init_term > 0.0) any_positive_init = true;
            double bound = merging::bound_eval(bi).value;
            crit.check(gap <= bound + 1e-12,
                       "flow bound violated at t=" + std::to_string(ca.t) + ", gap " +
                           std::to_string(gap));
        }
    }
    crit.check(any_positive_init, "degenerate construction: all init terms zero");
}

TEST_CASE("criterion 7: inverse stable rank grows with weight decay") {
    Criterion crit(7);
    Architecture arch = arch_of(3, 100, 10, model::Activation::relu());
    datagen::TaskSpec task;
    task.d = 100;
    task.n = 1000;
    for (std::size_t i = 0; i < 100; ++i) task.subspace.push_back(i);

    optimize::TrainConfig base;
    base.eta = 0.5;
    base.steps = 5000;  // epochs
    base.batch_size = 500;
    base.init = optimize::InitKind::scaled_gaussian;
    base.init_param = 1.0;

    const std::vector<double> grid = {1e-4, 1e-3, 1e-2, 1e-1};
    const std::vector<std::uint64_t> seeds = {701, 702, 703};
    struct Job {
        double lambda;
        std::uint64_t seed;
        double value = 0.0;
        std::string error;
    };
    std::vector<Job> jobs;
    for (double lam : grid)
        for (auto s : seeds) jobs.push_back({lam, s});

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            try {
                auto row = experiments::sweep_point(arch, task, base, jobs[i].lambda,
                                                    jobs[i].seed);
                jobs[i].value = row.avg_inv_stable_rank;
            } catch (const std::exception& e) {
                jobs[i].error = e.what();
            }
        }
    };
    unsigned n_workers = std::max(2u, std::min(8u, std::thread::hardware_concurrency()));
    std::vector<std::thread> pool;
    for (unsigned i = 1; i < n_workers; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    for (const auto& j : jobs)
        crit.check(j.error.empty(), "sweep run failed: " + j.error);

    double rho_sum = 0.0;
    for (std::size_t si = 0; si < seeds.size(); ++si) {
        std::vector<double> lambdas, values;
        for (const auto& j : jobs)
            if (j.seed == seeds[si]) {
                lambdas.push_back(j.lambda);
                values.push_back(j.value);
            }
        double rho = spearman_rho(lambdas, values);
        rho_sum += rho;
        std::printf("  lambda sweep seed %llu: inv stable ranks %.4f %.4f %.4f %.4f (rho %.2f)\n",
                    static_cast<unsigned long long>(seeds[si]), values[0], values[1],
                    values[2], values[3], rho);
    }
    double rho_mean = rho_sum / static_cast<double>(seeds.size());
    crit.check(rho_mean >= 0.8, "mean Spearman rho " + std::to_string(rho_mean));
}

TEST_CASE("criterion 8: desk-scale merging losses") {
    Criterion crit(8);
    datagen::TaskSpec ta, tb;
    ta.d = tb.d = 40;
    ta.n = tb.n = 50;
    for (std::size_t i = 0; i < 20; ++i) ta.subspace.push_back(i);
    for (std::size_t i = 20; i < 40; ++i) tb.subspace.push_back(i);
    ta.label_freq = tb.label_freq = 4.0;  // hard enough that errors remain
    ta.seed = 805;
    tb.seed = 806;
    auto pair = datagen::gen_task_pair(ta, tb);

    Architecture arch = arch_of(2, 40, 64, model::Activation::relu());
    Vector u = sign_head(64, 807);

    optimize::TrainConfig cfg;
    cfg.eta = 0.5;
    cfg.lambda = 1e-3;
    cfg.steps = 20000;
    cfg.checkpoint_every = 20000;
    cfg.train_head = false;

    auto train = [&](const Dataset& data, std::uint64_t seed, double lambda) {
        optimize::TrainConfig c = cfg;
        c.lambda = lambda;
        c.seed = seed;
        Params p0 = optimize::init_params(arch, optimize::InitKind::xavier, 1.0, seed);
        p0.head = u;
        auto traj = optimize::gd_train(p0, arch, data, c);
        return traj.checkpoints.back().params.weights[0];
    };

    Matrix wa = train(pair.data_a, 808, 1e-3);
    Matrix wb = train(pair.data_b, 809, 1e-3);
    Matrix wa2 = train(pair.data_a, 810, 1e-3);  // same-task control
    Matrix wa0 = train(pair.data_a, 808, 0.0);
    Matrix wb0 = train(pair.data_b, 809, 0.0);

    double la = shallow_loss(wa, u, pair.data_a);
    double lb = shallow_loss(wb, u, pair.data_b);
    double la_merged = shallow_loss(matrix_sum(wa, wb), u, pair.data_a);
    double lb_merged = shallow_loss(matrix_sum(wa, wb), u, pair.data_b);
    double gap_a = std::abs(la_merged - la);
    double gap_b = std::abs(lb_merged - lb);
    std::printf("  task a: own %.9f merged %.9f | task b: own %.9f merged %.9f\n", la,
                la_merged, lb, lb_merged);
    crit.check(gap_a <= 0.05, "task-a merged gap " + std::to_string(gap_a));
    crit.check(gap_b <= 0.05, "task-b merged gap " + std::to_string(gap_b));

    double control_gap = std::abs(shallow_loss(matrix_sum(wa, wa2), u, pair.data_a) - la);
    std::printf("  same-task control gap %.9f\n", control_gap);
    crit.check(control_gap > 5.0 * 0.05,
               "same-task control gap " + std::to_string(control_gap));

    double la_nodecay = shallow_loss(wa0, u, pair.data_a);
    double gap_nodecay =
        std::abs(shallow_loss(matrix_sum(wa0, wb0), u, pair.data_a) - la_nodecay);
    std::printf("  no-decay orthogonal gap %.9f vs decayed %.9f\n", gap_nodecay, gap_a);
    crit.check(gap_nodecay >= 2.0 * gap_a,
               "no-decay gap " + std::to_string(gap_nodecay) + " not 2x " +
                   std::to_string(gap_a));

    // pinned reference-run values; reruns must reproduce them
    struct Pin {
        double got, want;
        const char* name;
    } pins[] = {
        {la, 0.300075602, "task-a own loss"},
        {lb, 0.263983289, "task-b own loss"},
        {la_merged, 0.300075513, "task-a merged loss"},
        {lb_merged, 0.263983409, "task-b merged loss"},
        {control_gap, 0.060485450, "same-task control gap"},
        {gap_nodecay, 0.003754856, "no-decay gap"},
    };
    for (const auto& p : pins)
        crit.check(std::abs(p.got - p.want) <= 1e-6,
                   std::string(p.name) + " drifted from pinned reference value");
}

TEST_CASE("criterion 9: checkpoint format fidelity") {
    Criterion crit(9);
    // native round trip, bit exact
    {
        inspect::Checkpoint ckpt;
        inspect::Tensor t;
        t.dtype = inspect::DType::f64;
        t.shape = {2, 2};
        t.values = {1.0 / 3.0, -2.5e-300, 7.0, 0.1};
        ckpt.tensors.emplace_back("W1", t);
        std::string path = "/tmp/wdlab_acc_roundtrip.ckpt";
        inspect::write_native(path, ckpt);
        auto back = inspect::read_checkpoint(path);
        crit.check(back.tensors.size() == 1 &&
                       back.tensors[0].second.values == t.values &&
                       back.tensors[0].second.shape == t.shape,
                   "native round trip not bit-exact");
        std::remove(path.c_str());
    }
    // safetensors fixture with exact values
    {
        std::string header =
            R"({"a":{"dtype":"F32","shape":[2,2],"data_offsets":[0,16]}})";
        std::vector<unsigned char> bytes;
        std::uint64_t len = header.size();
        for (int i = 0; i < 8; ++i)
            bytes.push_back(static_cast<unsigned char>(len >> (8 * i)));
        bytes.insert(bytes.end(), header.begin(), header.end());
        for (float f : {1.0f, 2.0f, 3.0f, 4.0f}) {
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            for (int i = 0; i < 4; ++i)
                bytes.push_back(static_cast<unsigned char>(bits >> (8 * i)));
        }
        std::string path = "/tmp/wdlab_acc_fixture.safetensors";
        {
            std::ofstream out(path, std::ios::binary);
            out.write(reinterpret_cast<const char*>(bytes.data()),
                      static_cast<std::streamsize>(bytes.size()));
        }
        auto ckpt = inspect::read_checkpoint(path);
        crit.check(ckpt.tensors.size() == 1 &&
                       ckpt.tensors[0].second.values ==
                           std::vector<double>({1.0, 2.0, 3.0, 4.0}),
                   "safetensors fixture mismatch");
        std::remove(path.c_str());
    }
    // fuzz: only clean format errors
    {
        Rng rng(909);
        std::string path = "/tmp/wdlab_acc_fuzz.bin";
        for (int trial = 0; trial < 1000; ++trial) {
            std::size_t len = 8 + rng.below(100);
            std::vector<unsigned char> bytes(len);
            for (auto& b : bytes) b = static_cast<unsigned char>(rng.below(256));
            if (trial % 2 == 0) std::memcpy(bytes.data(), "NWT1", 4);
            {
                std::ofstream out(path, std::ios::binary);
                out.write(reinterpret_cast<const char*>(bytes.data()),
                          static_cast<std::streamsize>(bytes.size()));
            }
            try {
                auto ckpt = inspect::read_checkpoint(path);
                (void)ckpt;
            } catch (const inspect::FormatError&) {
            } catch (...) {
                crit.check(false, "fuzz trial " + std::to_string(trial) +
                                      " threw a non-format error");
            }
        }
        std::remove(path.c_str());
    }
}

TEST_CASE("criterion 10: slope and loss inequalities of the logistic loss") {
    Criterion crit(10);
    Rng rng(1010);
    for (int i = 0; i < 100000; ++i) {
        double z = 100.0 * (rng.uniform() - 0.5);
        auto lp = model::logistic_pair(z);
        bool ok = std::abs(lp.slope) <= lp.loss + 1e-15 &&
                  z * lp.slope <= lp.loss + 1e-15 &&
                  -z * lp.slope <= std::sqrt(lp.loss) + 1e-12;
        crit.check(ok, "inequality violated at z=" + std::to_string(z));
        if (!ok) break;
    }
}
