#pragma once

#include <optional>
#include <string>

#include "wdlab/model.hpp"

namespace wdlab::diagnostics {

using model::Architecture;
using model::Dataset;
using model::Params;
using linalg::Vector;

struct LayerNorms {
    double fro = 0.0;
    double spec = 0.0;
    double srank = 0.0;
};

struct StationarityReport {
    double residual = 0.0;  // ||lambda theta + grad L(theta)||
    double L = 0.0;
    double L_lambda = 0.0;
    std::vector<LayerNorms> layers;  // W_1..W_{K-1} then the head as a row
    double B2 = 0.0;  // -(1/n) sum_i l'(y_i f(x_i)) y_i f(x_i)
    std::vector<double> lemma2_residuals;  // per layer, relative
    double Z = 0.0;   // sum_k H^{K-k}
    double lemma3_lhs = 0.0;
    double lemma3_rhs = 0.0;
    double pseudo_rank = 0.0;  // 1 / lemma3_lhs
    std::optional<double> corollary_rhs;

    std::string to_json() const;
    std::string csv_header() const;
    std::string csv_row() const;
};

double alignment_residual(const Params& p, const Architecture& arch,
                          const Dataset& data, double lambda);

struct NormPreservation {
    double B2 = 0.0;
    std::vector<double> fro_norms;      // all K layers (head counted as layer K)
    std::vector<double> residuals;      // |lambda |W_k|_F^2 - H^{K-k} B2| / max(lambda |W_k|_F^2, eps)
    std::vector<double> predicted_fro;  // sqrt(H^{K-k} B2 / lambda)
};
NormPreservation norm_preservation_report(const Params& p, const Architecture& arch,
                                          const Dataset& data, double lambda);

struct PseudoRankReport {
    double Z = 0.0;
    std::vector<double> weights;  // (H^{K-k})^{3/2} / Z
    double lhs = 0.0;             // weighted sum of inverse stable ranks
    double rhs = 0.0;             // sqrt(lambda) L^{-(1/4 + 1/(2Z))}
    double pseudo_rank = 0.0;
    bool holds = false;
    double slack = 0.0;  // lhs - rhs
    std::optional<double> corollary_rhs;  // sqrt(lambda / (L(t0) + lambda |t0|^2))
    std::optional<bool> corollary_holds;
};
PseudoRankReport pseudo_rank_report(const Params& p, const Architecture& arch,
                                    const Dataset& data, double lambda,
                                    const Params* theta0 = nullptr);

// sigma2/sigma1 per matrix layer.
std::vector<double> rank1_check(const Params& p);

// Per-layer |tr(grad_{W_k} f * W_k^T) - H^{K-k} f(x)| / max(|f(x)|, 1e-12),
// including the head as layer K.
struct KinkHit : std::runtime_error {
    using std::runtime_error::runtime_error;
};
std::vector<double> euler_identity_check(const Params& p, const Architecture& arch,
                                         const Vector& x);

struct ZeroSolutionDiagnostic {
    enum class Status { applicable, not_applicable_K1 };
    Status status = Status::applicable;
    bool nonzero_critical_point = false;
    double threshold_estimate = 0.0;  // lambda above which only theta = 0 survives
};
// Scans the Remark's radial proxy g_-(r) for non-zero critical points.
ZeroSolutionDiagnostic zero_solution_diagnostic(double lambda, int K, int H = 1);

StationarityReport full_report(const Params& p, const Architecture& arch,
                               const Dataset& data, double lambda,
                               const Params* theta0 = nullptr);

}  // namespace wdlab::diagnostics
