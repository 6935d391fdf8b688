#pragma once

#include <cstdint>
#include <vector>

#include "wdlab/linalg.hpp"

namespace wdlab::model {

using linalg::InvalidInput;
using linalg::Matrix;
using linalg::Vector;

struct UnsupportedOperation : std::logic_error {
    using std::logic_error::logic_error;
};

enum class ActivationKind { identity, relu, relu_power };

struct Activation {
    ActivationKind kind = ActivationKind::identity;
    int H = 1;  // homogeneity degree; 1 for identity/relu

    static Activation identity() { return {ActivationKind::identity, 1}; }
    static Activation relu() { return {ActivationKind::relu, 1}; }
    static Activation relu_power(int h) { return {ActivationKind::relu_power, h}; }

    double apply(double x) const;
    double deriv(double x) const;  // min-norm Clarke choice: 0 at the kink
};

// K parameterized layers: matrices W_1..W_{K-1} plus vector head w_K.
// Layer 1 maps input_dim -> widths[0], layer k maps widths[k-2] -> widths[k-1],
// the head has dimension widths[K-2] (or input_dim when K = 1).
struct Architecture {
    int K = 1;
    std::size_t input_dim = 1;
    std::vector<std::size_t> widths;  // K-1 entries
    Activation activation;

    std::size_t head_dim() const;
    void validate() const;
};

struct Params {
    std::vector<Matrix> weights;  // W_1..W_{K-1}
    Vector head;                  // w_K

    static Params zeros(const Architecture& arch);
    std::size_t num_scalars() const;
    double squared_norm() const;
};

void check_shapes(const Params& p, const Architecture& arch);

struct Dataset {
    std::vector<Vector> inputs;
    std::vector<int> labels;  // +-1

    std::size_t size() const { return inputs.size(); }
};

// Shallow fixed-head ReLU net f(x) = <u, (W x)_+>; u is never trained.
struct ShallowConfig {
    Matrix W;  // m x d
    Vector u;  // m, ||u|| <= 1
};

struct ForwardResult {
    double f = 0.0;
    std::vector<Vector> activations;       // h_0 = x, h_1, ..., h_{K-1}
    std::vector<Vector> pre_activations;   // W_k h_{k-1} for k = 1..K-1
};

ForwardResult forward(const Params& p, const Architecture& arch, const Vector& x);

struct LogisticPair {
    double loss = 0.0;   // ln(1 + e^{-z}), stable branch form
    double slope = 0.0;  // l'(z) = -1/(1+e^z), in (-1, 0)
};
LogisticPair logistic_pair(double z);

struct LossGrad {
    double L = 0.0;        // unregularized empirical loss
    double L_lambda = 0.0; // L + (lambda/2) ||theta||^2
    Params grad;           // gradient of L_lambda
    Params gradL;          // gradient of L alone
};

LossGrad regularized_loss_and_grad(const Params& p, const Architecture& arch,
                                   const Dataset& data, double lambda);

// Gradient of x -> f_theta(x) with respect to all parameters (no loss term).
Params prediction_grad(const Params& p, const Architecture& arch, const Vector& x);

// w with <w, x> = f_theta(x) for identity-activation networks.
Vector end_to_end_vector(const Params& p, const Architecture& arch);

double shallow_forward(const ShallowConfig& sc, const Vector& x);

}  // namespace wdlab::model
