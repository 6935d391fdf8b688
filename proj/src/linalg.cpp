#include "wdlab/linalg.hpp"

#include <cmath>

namespace wdlab::linalg {

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

bool all_finite(const Matrix& a) {
    for (double x : a.data)
        if (!std::isfinite(x)) return false;
    return true;
}

bool all_finite(const Vector& v) {
    for (double x : v.data)
        if (!std::isfinite(x)) return false;
    return true;
}

double dot(const Vector& a, const Vector& b) {
    if (a.dim() != b.dim()) throw InvalidInput("dot: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) s += a[i] * b[i];
    return s;
}

double norm(const Vector& v) { return std::sqrt(dot(v, v)); }

Vector matvec(const Matrix& a, const Vector& x) {
    if (a.cols != x.dim()) throw InvalidInput("matvec: dimension mismatch");
    Vector y(a.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        double s = 0.0;
        const double* row = &a.data[i * a.cols];
        for (std::size_t j = 0; j < a.cols; ++j) s += row[j] * x[j];
        y[i] = s;
    }
    return y;
}

Vector matvec_t(const Matrix& a, const Vector& x) {
    if (a.rows != x.dim()) throw InvalidInput("matvec_t: dimension mismatch");
    Vector y(a.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* row = &a.data[i * a.cols];
        for (std::size_t j = 0; j < a.cols; ++j) y[j] += row[j] * x[i];
    }
    return y;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw InvalidInput("matmul: dimension mismatch");
    Matrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = 0; k < a.cols; ++k) {
            double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

Matrix outer(const Vector& u, const Vector& v) {
    Matrix m(u.dim(), v.dim());
    for (std::size_t i = 0; i < u.dim(); ++i)
        for (std::size_t j = 0; j < v.dim(); ++j) m(i, j) = u[i] * v[j];
    return m;
}

void axpy(double c, const Matrix& x, Matrix& y) {
    if (x.rows != y.rows || x.cols != y.cols) throw InvalidInput("axpy: shape mismatch");
    for (std::size_t i = 0; i < x.data.size(); ++i) y.data[i] += c * x.data[i];
}

void axpy(double c, const Vector& x, Vector& y) {
    if (x.dim() != y.dim()) throw InvalidInput("axpy: dimension mismatch");
    for (std::size_t i = 0; i < x.data.size(); ++i) y.data[i] += c * x.data[i];
}

void scale(Matrix& a, double c) {
    for (double& x : a.data) x *= c;
}

void scale(Vector& v, double c) {
    for (double& x : v.data) x *= c;
}

double frobenius_norm(const Matrix& a) {
    double s = 0.0;
    for (double x : a.data) s += x * x;
    return std::sqrt(s);
}

namespace {

// Power iteration for the top eigenpair of the Gram matrix of A (whichever of
// A^T A, A A^T is smaller). Returns sigma_1 and fills the corresponding
// singular vectors when requested.
struct TopPair {
    double sigma = 0.0;
    Vector u;  // left singular vector (dim rows)
    Vector v;  // right singular vector (dim cols)
};

TopPair top_singular_pair(const Matrix& a) {
    const bool use_cols = a.cols <= a.rows;  // iterate in the smaller space
    const std::size_t n = use_cols ? a.cols : a.rows;

    Vector z(n, 1.0 / std::sqrt(static_cast<double>(n)));
    double rq = 0.0;
    const int max_iter = 10000;
    for (int it = 0; it < max_iter; ++it) {
        Vector w = use_cols ? matvec_t(a, matvec(a, z)) : matvec(a, matvec_t(a, z));
        double wn = norm(w);
        if (wn == 0.0) return {0.0, Vector(a.rows), Vector(a.cols)};
        scale(w, 1.0 / wn);
        double rq_new = use_cols ? dot(w, matvec_t(a, matvec(a, w)))
                                 : dot(w, matvec(a, matvec_t(a, w)));
        z = w;
        if (it > 0 && std::abs(rq_new - rq) <= 1e-14 * std::max(rq_new, 1e-300)) {
            rq = rq_new;
            break;
        }
        rq = rq_new;
    }
    TopPair out;
    out.sigma = std::sqrt(std::max(rq, 0.0));
    if (use_cols) {
        out.v = z;
        out.u = matvec(a, z);
        double un = norm(out.u);
        if (un > 0.0) scale(out.u, 1.0 / un);
        else out.u = Vector(a.rows);
    } else {
        out.u = z;
        out.v = matvec_t(a, z);
        double vn = norm(out.v);
        if (vn > 0.0) scale(out.v, 1.0 / vn);
        else out.v = Vector(a.cols);
    }
    return out;
}

void check_finite(const Matrix& a, const char* op) {
    if (a.rows < 1 || a.cols < 1) throw InvalidInput(std::string(op) + ": empty matrix");
    if (!all_finite(a)) throw InvalidInput(std::string(op) + ": non-finite entries");
}

}  // namespace

double spectral_norm(const Matrix& a) {
    check_finite(a, "spectral_norm");
    return top_singular_pair(a).sigma;
}

Top2 top2_singular_values(const Matrix& a) {
    check_finite(a, "top2_singular_values");
    TopPair top = top_singular_pair(a);
    Top2 out;
    out.sigma1 = top.sigma;
    if (std::min(a.rows, a.cols) == 1 || top.sigma == 0.0) {
        out.sigma2 = 0.0;
        return out;
    }
    Matrix deflated = a;
    axpy(-top.sigma, outer(top.u, top.v), deflated);
    out.sigma2 = top_singular_pair(deflated).sigma;
    if (out.sigma2 > out.sigma1) out.sigma2 = out.sigma1;
    return out;
}

StableRank stable_rank(const Matrix& a) {
    check_finite(a, "stable_rank");
    StableRank r;
    r.fro = frobenius_norm(a);
    if (r.fro == 0.0) throw DegenerateInput("stable_rank: zero matrix");
    r.spec = spectral_norm(a);
    r.srank = r.fro / r.spec;
    return r;
}

}  // namespace wdlab::linalg
