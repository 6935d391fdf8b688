#include "wdlab/diagnostics.hpp"

#include <cmath>
#include <sstream>

#include "json.hpp"

namespace wdlab::diagnostics {

using linalg::DegenerateInput;
using linalg::Matrix;
using model::InvalidInput;

namespace {

double pow_int(double base, int e) {
    double r = 1.0;
    for (int i = 0; i < e; ++i) r *= base;
    return r;
}

// H^{K-k} for k = 1..K.
std::vector<double> homogeneity_factors(const Architecture& arch) {
    std::vector<double> f;
    for (int k = 1; k <= arch.K; ++k)
        f.push_back(pow_int(static_cast<double>(arch.activation.H), arch.K - k));
    return f;
}

double b_squared(const Params& p, const Architecture& arch, const Dataset& data) {
    double s = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        double y = static_cast<double>(data.labels[i]);
        double f = model::forward(p, arch, data.inputs[i]).f;
        s += model::logistic_pair(y * f).slope * y * f;
    }
    return -s / static_cast<double>(data.size());
}

// Frobenius norm per layer, head counted as layer K.
std::vector<double> layer_fro(const Params& p) {
    std::vector<double> out;
    for (const auto& w : p.weights) out.push_back(linalg::frobenius_norm(w));
    out.push_back(linalg::norm(p.head));
    return out;
}

}  // namespace

double alignment_residual(const Params& p, const Architecture& arch,
                          const Dataset& data, double lambda) {
    if (lambda <= 0.0) throw InvalidInput("alignment_residual: lambda must be > 0");
    auto lg = model::regularized_loss_and_grad(p, arch, data, lambda);
    return std::sqrt(lg.grad.squared_norm());
}

NormPreservation norm_preservation_report(const Params& p, const Architecture& arch,
                                          const Dataset& data, double lambda) {
    if (lambda <= 0.0) throw InvalidInput("norm_preservation_report: lambda must be > 0");
    if (p.squared_norm() == 0.0)
        throw DegenerateInput("norm_preservation_report: theta = 0");
    NormPreservation out;
    out.B2 = b_squared(p, arch, data);
    out.fro_norms = layer_fro(p);
    auto hf = homogeneity_factors(arch);
    for (int k = 0; k < arch.K; ++k) {
        double lhs = lambda * out.fro_norms[k] * out.fro_norms[k];
        double rhs = hf[k] * out.B2;
        out.residuals.push_back(std::abs(lhs - rhs) /
                                std::max(lhs, std::numeric_limits<double>::epsilon()));
        out.predicted_fro.push_back(std::sqrt(std::max(rhs, 0.0) / lambda));
    }
    return out;
}

PseudoRankReport pseudo_rank_report(const Params& p, const Architecture& arch,
                                    const Dataset& data, double lambda,
                                    const Params* theta0) {
    if (arch.K < 2) throw InvalidInput("pseudo_rank_report: K must be >= 2");
    if (lambda <= 0.0) throw InvalidInput("pseudo_rank_report: lambda must be > 0");
    PseudoRankReport out;
    auto hf = homogeneity_factors(arch);
    for (double f : hf) out.Z += f;
    for (double f : hf) out.weights.push_back(std::pow(f, 1.5) / out.Z);

    // Inverse stable rank per layer; the head is a rank-1 row so its ratio is 1.
    std::vector<double> inv_srank;
    for (const auto& w : p.weights) {
        auto sr = linalg::stable_rank(w);  // throws DegenerateInput on zero layer
        inv_srank.push_back(sr.spec / sr.fro);
    }
    if (linalg::norm(p.head) == 0.0)
        throw DegenerateInput("pseudo_rank_report: zero head layer");
    inv_srank.push_back(1.0);

    for (int k = 0; k < arch.K; ++k) out.lhs += out.weights[k] * inv_srank[k];
    double L = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        double f = model::forward(p, arch, data.inputs[i]).f;
        L += model::logistic_pair(data.labels[i] * f).loss;
    }
    L /= static_cast<double>(data.size());
    out.rhs = std::sqrt(lambda) * std::pow(L, -(0.25 + 0.5 / out.Z));
    out.pseudo_rank = 1.0 / out.lhs;
    out.slack = out.lhs - out.rhs;
    out.holds = out.slack >= 0.0;
    if (theta0) {
        double L0 = 0.0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            double f = model::forward(*theta0, arch, data.inputs[i]).f;
            L0 += model::logistic_pair(data.labels[i] * f).loss;
        }
        L0 /= static_cast<double>(data.size());
        out.corollary_rhs = std::sqrt(lambda / (L0 + lambda * theta0->squared_norm()));
        out.corollary_holds = out.lhs >= *out.corollary_rhs;
    }
    return out;
}

std::vector<double> rank1_check(const Params& p) {
    if (p.weights.empty()) throw InvalidInput("rank1_check: no matrix layers");
    std::vector<double> ratios;
    for (const auto& w : p.weights) {
        auto t2 = linalg::top2_singular_values(w);
        ratios.push_back(t2.sigma1 > 0.0 ? t2.sigma2 / t2.sigma1 : 0.0);
    }
    return ratios;
}

std::vector<double> euler_identity_check(const Params& p, const Architecture& arch,
                                         const Vector& x) {
    auto fwd = model::forward(p, arch, x);
    for (const auto& pre : fwd.pre_activations)
        for (double v : pre.data)
            if (v == 0.0) throw KinkHit("euler_identity_check: pre-activation exactly 0");
    Params grad = model::prediction_grad(p, arch, x);
    auto hf = homogeneity_factors(arch);
    double denom = std::max(std::abs(fwd.f), 1e-12);
    std::vector<double> defects;
    for (std::size_t k = 0; k < p.weights.size(); ++k) {
        double trace = 0.0;
        for (std::size_t i = 0; i < p.weights[k].data.size(); ++i)
            trace += grad.weights[k].data[i] * p.weights[k].data[i];
        defects.push_back(std::abs(trace - hf[k] * fwd.f) / denom);
    }
    defects.push_back(std::abs(linalg::dot(grad.head, p.head) - hf.back() * fwd.f) / denom);
    return defects;
}

namespace {

// Derivative of the Remark's lower radial proxy
//   g_-(r) = (lambda/2) r^2 + l(r^K K^{-K/2})
double g_minus_deriv(double r, double lambda, int K) {
    double scale = std::pow(static_cast<double>(K), -K / 2.0);
    double s = std::pow(r, K) * scale;
    double slope = model::logistic_pair(s).slope;
    return lambda * r + slope * K * std::pow(r, K - 1) * scale;
}

bool has_nonzero_critical_point(double lambda, int K) {
    double r_max = std::sqrt(10.0 * K / lambda);
    const int grid = 4000;
    double lo = std::log(1e-8), hi = std::log(r_max);
    for (int i = 0; i <= grid; ++i) {
        double r = std::exp(lo + (hi - lo) * i / grid);
        if (g_minus_deriv(r, lambda, K) < 0.0) return true;
    }
    return false;
}

}  // namespace

ZeroSolutionDiagnostic zero_solution_diagnostic(double lambda, int K, int H) {
    (void)H;  // the Remark's proxy is stated for H = 1
    if (lambda <= 0.0) throw InvalidInput("zero_solution_diagnostic: lambda must be > 0");
    ZeroSolutionDiagnostic out;
    if (K == 1) {
        out.status = ZeroSolutionDiagnostic::Status::not_applicable_K1;
        return out;
    }
    if (K < 1) throw InvalidInput("zero_solution_diagnostic: K must be >= 1");
    out.nonzero_critical_point = has_nonzero_critical_point(lambda, K);

    // Bisect over lambda for the existence threshold.
    double lam_lo = 1e-12;
    double lam_hi = std::max(lambda, 1.0);
    while (has_nonzero_critical_point(lam_hi, K) && lam_hi < 1e12) lam_hi *= 2.0;
    if (!has_nonzero_critical_point(lam_lo, K)) {
        out.threshold_estimate = lam_lo;
        return out;
    }
    for (int i = 0; i < 80; ++i) {
        double mid = std::sqrt(lam_lo * lam_hi);
        if (has_nonzero_critical_point(mid, K)) lam_lo = mid;
        else lam_hi = mid;
    }
    out.threshold_estimate = std::sqrt(lam_lo * lam_hi);
    return out;
}

StationarityReport full_report(const Params& p, const Architecture& arch,
                               const Dataset& data, double lambda,
                               const Params* theta0) {
    StationarityReport rep;
    auto lg = model::regularized_loss_and_grad(p, arch, data, lambda);
    rep.residual = std::sqrt(lg.grad.squared_norm());
    rep.L = lg.L;
    rep.L_lambda = lg.L_lambda;
    for (const auto& w : p.weights) {
        auto sr = linalg::stable_rank(w);
        rep.layers.push_back({sr.fro, sr.spec, sr.srank});
    }
    double hn = linalg::norm(p.head);
    rep.layers.push_back({hn, hn, 1.0});
    auto np = norm_preservation_report(p, arch, data, lambda);
    rep.B2 = np.B2;
    rep.lemma2_residuals = np.residuals;
    if (arch.K >= 2) {
        auto pr = pseudo_rank_report(p, arch, data, lambda, theta0);
        rep.Z = pr.Z;
        rep.lemma3_lhs = pr.lhs;
        rep.lemma3_rhs = pr.rhs;
        rep.pseudo_rank = pr.pseudo_rank;
        rep.corollary_rhs = pr.corollary_rhs;
    }
    return rep;
}

std::string StationarityReport::to_json() const {
    nlohmann::json j;
    j["residual"] = residual;
    j["loss"] = L;
    j["reg_loss"] = L_lambda;
    j["B2"] = B2;
    j["Z"] = Z;
    j["lemma3_lhs"] = lemma3_lhs;
    j["lemma3_rhs"] = lemma3_rhs;
    j["pseudo_rank"] = pseudo_rank;
    if (corollary_rhs) j["corollary_rhs"] = *corollary_rhs;
    j["lemma2_residuals"] = lemma2_residuals;
    auto arr = nlohmann::json::array();
    for (const auto& l : layers)
        arr.push_back({{"fro", l.fro}, {"spec", l.spec}, {"srank", l.srank}});
    j["layers"] = arr;
    return j.dump(2);
}

std::string StationarityReport::csv_header() const {
    std::ostringstream os;
    os << "residual,loss,reg_loss,B2,Z,lemma3_lhs,lemma3_rhs,pseudo_rank";
    for (std::size_t k = 0; k < layers.size(); ++k)
        os << ",fro_" << k + 1 << ",spec_" << k + 1 << ",srank_" << k + 1;
    return os.str();
}

std::string StationarityReport::csv_row() const {
    std::ostringstream os;
    os.precision(17);
    os << residual << ',' << L << ',' << L_lambda << ',' << B2 << ',' << Z << ','
       << lemma3_lhs << ',' << lemma3_rhs << ',' << pseudo_rank;
    for (const auto& l : layers) os << ',' << l.fro << ',' << l.spec << ',' << l.srank;
    return os.str();
}

}  // namespace wdlab::diagnostics
