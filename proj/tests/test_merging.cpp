#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "wdlab/merging.hpp"
#include "wdlab/optimize.hpp"
#include "wdlab/rng.hpp"

using namespace wdlab;
using model::Architecture;
using model::Params;

namespace {

Architecture arch_of(int K, std::size_t d, std::size_t width,
                     model::Activation act = model::Activation::identity()) {
    Architecture arch;
    arch.K = K;
    arch.input_dim = d;
    for (int k = 0; k < K - 1; ++k) arch.widths.push_back(width);
    arch.activation = act;
    return arch;
}

Params random_params(const Architecture& arch, std::uint64_t seed) {
    return optimize::init_params(arch, optimize::InitKind::scaled_gaussian, 0.6, seed);
}

}  // namespace

TEST_CASE("merge is an elementwise sum: zero identity and commutativity") {
    Architecture arch = arch_of(3, 4, 3, model::Activation::relu());
    Params a = random_params(arch, 1);
    Params z = Params::zeros(arch);

    Params az = merging::merge_params(a, z);
    for (std::size_t k = 0; k < a.weights.size(); ++k)
        CHECK(az.weights[k].data == a.weights[k].data);
    CHECK(az.head.data == a.head.data);

    Params b = random_params(arch, 2);
    Params ab = merging::merge_params(a, b);
    Params ba = merging::merge_params(b, a);
    for (std::size_t k = 0; k < a.weights.size(); ++k)
        CHECK(ab.weights[k].data == ba.weights[k].data);
    CHECK(ab.head.data == ba.head.data);

    Architecture other = arch_of(3, 4, 5, model::Activation::relu());
    CHECK_THROWS_AS(merging::merge_params(a, random_params(other, 3)),
                    linalg::InvalidInput);
}

TEST_CASE("cross-task epsilon: hand values") {
    std::vector<linalg::Vector> a = {{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}};
    std::vector<linalg::Vector> orth = {{0.0, 0.0, 1.0}};
    CHECK(merging::cross_task_epsilon(a, orth) == 0.0);

    // unit vectors at 60 degrees
    std::vector<linalg::Vector> b = {{0.5, std::sqrt(3.0) / 2.0, 0.0}};
    CHECK(merging::cross_task_epsilon({{1.0, 0.0, 0.0}}, b) ==
          doctest::Approx(0.5).epsilon(1e-15));

    // sign is discarded, max over all pairs
    std::vector<linalg::Vector> c = {{-0.9, 0.0, 0.0}, {0.2, 0.0, 0.0}};
    CHECK(merging::cross_task_epsilon({{1.0, 0.0, 0.0}}, c) ==
          doctest::Approx(0.9).epsilon(1e-15));

    CHECK_THROWS_AS(merging::cross_task_epsilon({}, a), linalg::InvalidInput);
}

TEST_CASE("prediction gap of a linear model equals the other model's output") {
    Architecture arch = arch_of(1, 5, 0);
    Params a = random_params(arch, 4);
    Params b = random_params(arch, 5);
    Rng rng(6);
    std::vector<linalg::Vector> probes;
    for (int i = 0; i < 20; ++i) {
        linalg::Vector x(5);
        for (auto& v : x.data) v = rng.normal();
        probes.push_back(x);
    }
    auto gap = merging::merge_gap_eval(a, b, arch, probes);
    double expect = 0.0;
    for (const auto& x : probes)
        expect = std::max(expect, std::abs(model::forward(b, arch, x).f));
    CHECK(gap.max_gap == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("gap evaluation uses full merged forward passes, with losses") {
    Architecture arch = arch_of(3, 4, 3, model::Activation::relu());
    Params a = random_params(arch, 7);
    Params b = random_params(arch, 8);
    Rng rng(9);
    std::vector<linalg::Vector> probes;
    std::vector<int> labels;
    for (int i = 0; i < 10; ++i) {
        linalg::Vector x(4);
        for (auto& v : x.data) v = rng.normal();
        probes.push_back(x);
        labels.push_back(i % 2 == 0 ? 1 : -1);
    }
    auto gap = merging::merge_gap_eval(a, b, arch, probes, &labels);
    Params merged = merging::merge_params(a, b);
    double lm = 0.0, lo = 0.0, mg = 0.0;
    for (int i = 0; i < 10; ++i) {
        double fa = model::forward(a, arch, probes[i]).f;
        double fm = model::forward(merged, arch, probes[i]).f;
        mg = std::max(mg, std::abs(fm - fa));
        lo += model::logistic_pair(labels[i] * fa).loss / 10.0;
        lm += model::logistic_pair(labels[i] * fm).loss / 10.0;
    }
    CHECK(gap.max_gap == doctest::Approx(mg).epsilon(1e-14));
    CHECK(gap.loss_original == doctest::Approx(lo).epsilon(1e-14));
    CHECK(gap.loss_merged == doctest::Approx(lm).epsilon(1e-14));
    CHECK(gap.loss_gap == doctest::Approx(lm - lo).epsilon(1e-12));
    CHECK(gap.prediction_gaps.size() == 10);
}

TEST_CASE("discrete-time bound: hand-computed value") {
    merging::MergeBoundInputs inp;
    inp.kind = merging::BoundKind::shallow;
    inp.eta = 1.0;
    inp.lambda = 0.25;
    inp.t = 2.0;
    inp.epsilon = 0.5;
    inp.init_term = 1.0;
    auto b = merging::bound_eval(inp);
    CHECK(b.decay_term == doctest::Approx(0.5625).epsilon(1e-15));   // 0.75^2
    CHECK(b.eps_term == doctest::Approx(0.875).epsilon(1e-15));      // 0.5*(1-0.5625)/0.25
    CHECK(b.value == doctest::Approx(1.4375).epsilon(1e-15));

    inp.t = 0.0;
    auto b0 = merging::bound_eval(inp);
    CHECK(b0.value == 1.0);  // pure init term at t=0

    // long-horizon limit -> epsilon / lambda
    inp.eta = 0.1;
    inp.lambda = 1e-3;
    inp.t = 1e7;
    auto binf = merging::bound_eval(inp);
    CHECK(binf.value == doctest::Approx(0.5 / 1e-3).epsilon(1e-6));
}

TEST_CASE("discrete-time bound: regime checks and monotonicity") {
    merging::MergeBoundInputs inp;
    inp.kind = merging::BoundKind::linear;
    inp.eta = 1.0;
    inp.lambda = 1.0;
    CHECK_THROWS_AS(merging::bound_eval(inp), merging::InvalidRegime);
    inp.lambda = 0.0;
    CHECK_THROWS_AS(merging::bound_eval(inp), merging::InvalidRegime);

    inp.lambda = 0.01;
    inp.eta = 0.5;
    inp.init_term = 2.0;
    inp.epsilon = 0.0;
    double prev = std::numeric_limits<double>::infinity();
    for (double t : {0.0, 10.0, 100.0, 1000.0}) {
        inp.t = t;
        double v = merging::bound_eval(inp).value;
        CHECK(v < prev + 1e-15);
        prev = v;
    }
    inp.t = 50.0;
    inp.epsilon = 0.1;
    double with_eps = merging::bound_eval(inp).value;
    inp.epsilon = 0.2;
    CHECK(merging::bound_eval(inp).value > with_eps);
}

TEST_CASE("continuous-time deep bound: cross-checked constants") {
    merging::MergeBoundInputs inp;
    inp.kind = merging::BoundKind::deep_linear;
    inp.lambda = 0.1;
    inp.K = 2;
    inp.C = std::log(2.0);
    inp.w0_norm_sq = 1.0;
    inp.t = 3.0;
    inp.epsilon = 0.05;
    inp.init_term = 0.2;
    auto b = merging::bound_eval(inp);

    double B = 1.0 + std::log(2.0) / 0.1;
    CHECK(b.B == doctest::Approx(B).epsilon(1e-15));
    CHECK(B == doctest::Approx(7.93147180559945).epsilon(1e-12));
    double bpow = std::pow(B, 2.0 - 2.0 / 2.0);
    double A1 = std::exp(bpow * 1.0 * (1.0 + 0.1 * 2.0) * std::log(2.0) / (2.0 * 0.1 * 2.0));
    double A2 = 2.0 * bpow * std::log(2.0) * A1 * (1.0 - std::exp(-0.1 * 2.0 * 3.0 / 2.0)) /
                (0.1 * 2.0);
    CHECK(b.A1 == doctest::Approx(A1).epsilon(1e-14));
    CHECK(b.A2 == doctest::Approx(A2).epsilon(1e-14));
    CHECK(b.value ==
          doctest::Approx(0.2 * A1 * std::exp(-0.1 * 2.0 * 3.0) + A2 * 0.05).epsilon(1e-14));

    inp.K = 1;
    CHECK_THROWS_AS(merging::bound_eval(inp), merging::InvalidRegime);
}

TEST_CASE("continuous-time deep bound: decay and saturation behavior") {
    merging::MergeBoundInputs inp;
    inp.kind = merging::BoundKind::deep_linear;
    inp.lambda = 0.2;
    inp.K = 3;
    inp.C = 0.5;
    inp.w0_norm_sq = 0.3;
    inp.init_term = 1.0;
    inp.epsilon = 0.0;
    double prev = std::numeric_limits<double>::infinity();
    for (double t : {0.0, 1.0, 5.0, 20.0}) {
        inp.t = t;
        double v = merging::bound_eval(inp).value;
        CHECK(v < prev + 1e-15);
        prev = v;
    }
    // with epsilon = 0 the bound vanishes as t -> infinity
    inp.t = 1e4;
    CHECK(merging::bound_eval(inp).value < 1e-100);
    // A2 saturates in t
    inp.epsilon = 1.0;
    inp.t = 1e4;
    double sat = merging::bound_eval(inp).eps_term;
    inp.t = 2e4;
    CHECK(merging::bound_eval(inp).eps_term == doctest::Approx(sat).epsilon(1e-12));
}

TEST_CASE("loss-transfer bound is the plain sum of its terms") {
    merging::MergeBoundInputs inp;
    inp.kind = merging::BoundKind::loss_transfer;
    inp.base_loss = 0.3;
    inp.avg_cross_norm = 0.05;
    auto b = merging::bound_eval(inp);
    CHECK(b.value == doctest::Approx(0.35).epsilon(1e-15));
    CHECK(b.decay_term == 0.3);
    CHECK(b.eps_term == 0.05);
}
