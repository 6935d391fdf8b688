#include "wdlab/model.hpp"

#include <cmath>

namespace wdlab::model {

double Activation::apply(double x) const {
    switch (kind) {
        case ActivationKind::identity: return x;
        case ActivationKind::relu: return x > 0.0 ? x : 0.0;
        case ActivationKind::relu_power: return x > 0.0 ? std::pow(x, H) : 0.0;
    }
    return x;
}

double Activation::deriv(double x) const {
    switch (kind) {
        case ActivationKind::identity: return 1.0;
        case ActivationKind::relu: return x > 0.0 ? 1.0 : 0.0;
        case ActivationKind::relu_power:
            return x > 0.0 ? H * std::pow(x, H - 1) : 0.0;
    }
    return 1.0;
}

std::size_t Architecture::head_dim() const {
    return K == 1 ? input_dim : widths.back();
}

void Architecture::validate() const {
    if (K < 1) throw InvalidInput("Architecture: K must be >= 1");
    if (input_dim < 1) throw InvalidInput("Architecture: input_dim must be >= 1");
    if (widths.size() != static_cast<std::size_t>(K - 1))
        throw InvalidInput("Architecture: need K-1 hidden widths");
    for (auto w : widths)
        if (w < 1) throw InvalidInput("Architecture: widths must be >= 1");
    if (activation.H < 1) throw InvalidInput("Architecture: H must be >= 1");
    if (activation.kind != ActivationKind::relu_power && activation.H != 1)
        throw InvalidInput("Architecture: H != 1 requires relu_power");
}

Params Params::zeros(const Architecture& arch) {
    arch.validate();
    Params p;
    std::size_t in = arch.input_dim;
    for (int k = 0; k < arch.K - 1; ++k) {
        p.weights.emplace_back(arch.widths[k], in);
        in = arch.widths[k];
    }
    p.head = Vector(arch.head_dim());
    return p;
}

std::size_t Params::num_scalars() const {
    std::size_t n = head.dim();
    for (const auto& w : weights) n += w.data.size();
    return n;
}

double Params::squared_norm() const {
    double s = 0.0;
    for (const auto& w : weights)
        for (double x : w.data) s += x * x;
    for (double x : head.data) s += x * x;
    return s;
}

void check_shapes(const Params& p, const Architecture& arch) {
    arch.validate();
    if (p.weights.size() != static_cast<std::size_t>(arch.K - 1))
        throw InvalidInput("Params: wrong number of weight matrices");
    std::size_t in = arch.input_dim;
    for (int k = 0; k < arch.K - 1; ++k) {
        if (p.weights[k].rows != arch.widths[k] || p.weights[k].cols != in)
            throw InvalidInput("Params: layer shape mismatch");
        in = arch.widths[k];
    }
    if (p.head.dim() != arch.head_dim())
        throw InvalidInput("Params: head dimension mismatch");
}

ForwardResult forward(const Params& p, const Architecture& arch, const Vector& x) {
    check_shapes(p, arch);
    if (x.dim() != arch.input_dim) throw InvalidInput("forward: input dimension mismatch");
    ForwardResult out;
    out.activations.push_back(x);
    for (int k = 0; k < arch.K - 1; ++k) {
        Vector pre = linalg::matvec(p.weights[k], out.activations.back());
        Vector h(pre.dim());
        for (std::size_t i = 0; i < pre.dim(); ++i) h[i] = arch.activation.apply(pre[i]);
        out.pre_activations.push_back(std::move(pre));
        out.activations.push_back(std::move(h));
    }
    out.f = linalg::dot(p.head, out.activations.back());
    return out;
}

LogisticPair logistic_pair(double z) {
    if (!std::isfinite(z)) throw InvalidInput("logistic_pair: non-finite input");
    LogisticPair out;
    // softplus(-z) = max(-z, 0) + log1p(exp(-|z|))
    out.loss = std::max(-z, 0.0) + std::log1p(std::exp(-std::abs(z)));
    out.slope = z >= 0.0 ? -std::exp(-z) / (1.0 + std::exp(-z))
                         : -1.0 / (1.0 + std::exp(z));
    return out;
}

namespace {

// Backward pass from a precomputed forward; scale multiplies the whole
// parameter gradient of f. Accumulates into grad.
void accumulate_prediction_grad(const Params& p, const Architecture& arch,
                                const ForwardResult& fwd, double scale, Params& grad) {
    linalg::axpy(scale, fwd.activations.back(), grad.head);
    Vector delta = p.head;  // d f / d h_{K-1}
    for (int k = arch.K - 2; k >= 0; --k) {
        const Vector& pre = fwd.pre_activations[k];
        Vector dpre(pre.dim());
        for (std::size_t i = 0; i < pre.dim(); ++i)
            dpre[i] = delta[i] * arch.activation.deriv(pre[i]);
        const Vector& hprev = fwd.activations[k];
        Matrix& gw = grad.weights[k];
        for (std::size_t i = 0; i < gw.rows; ++i) {
            double di = scale * dpre[i];
            if (di == 0.0) continue;
            for (std::size_t j = 0; j < gw.cols; ++j) gw(i, j) += di * hprev[j];
        }
        if (k > 0) delta = linalg::matvec_t(p.weights[k], dpre);
    }
}

}  // namespace

Params prediction_grad(const Params& p, const Architecture& arch, const Vector& x) {
    ForwardResult fwd = forward(p, arch, x);
    Params grad = Params::zeros(arch);
    accumulate_prediction_grad(p, arch, fwd, 1.0, grad);
    return grad;
}

LossGrad regularized_loss_and_grad(const Params& p, const Architecture& arch,
                                   const Dataset& data, double lambda) {
    check_shapes(p, arch);
    if (data.size() == 0) throw InvalidInput("regularized_loss_and_grad: empty dataset");
    if (data.labels.size() != data.inputs.size())
        throw InvalidInput("regularized_loss_and_grad: label count mismatch");
    if (lambda < 0.0) throw InvalidInput("regularized_loss_and_grad: lambda < 0");

    LossGrad out;
    out.gradL = Params::zeros(arch);
    const double inv_n = 1.0 / static_cast<double>(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        double y = static_cast<double>(data.labels[i]);
        ForwardResult fwd = forward(p, arch, data.inputs[i]);
        LogisticPair lp = logistic_pair(y * fwd.f);
        out.L += inv_n * lp.loss;
        accumulate_prediction_grad(p, arch, fwd, inv_n * lp.slope * y, out.gradL);
    }
    out.L_lambda = out.L + 0.5 * lambda * p.squared_norm();
    out.grad = out.gradL;
    for (std::size_t k = 0; k < p.weights.size(); ++k)
        linalg::axpy(lambda, p.weights[k], out.grad.weights[k]);
    linalg::axpy(lambda, p.head, out.grad.head);
    return out;
}

Vector end_to_end_vector(const Params& p, const Architecture& arch) {
    check_shapes(p, arch);
    if (arch.activation.kind != ActivationKind::identity)
        throw UnsupportedOperation("end_to_end_vector: identity activation required");
    Vector w = p.head;  // w^T = w_K^T W_{K-1} ... W_1, built right to left
    for (int k = arch.K - 2; k >= 0; --k) w = linalg::matvec_t(p.weights[k], w);
    return w;
}

double shallow_forward(const ShallowConfig& sc, const Vector& x) {
    Vector h = linalg::matvec(sc.W, x);
    double f = 0.0;
    for (std::size_t i = 0; i < h.dim(); ++i)
        f += sc.u[i] * (h[i] > 0.0 ? h[i] : 0.0);
    return f;
}

}  // namespace wdlab::model
