#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace wdlab::linalg {

struct InvalidInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct DegenerateInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct Vector {
    std::vector<double> data;

    Vector() = default;
    explicit Vector(std::size_t dim, double fill = 0.0) : data(dim, fill) {}
    Vector(std::initializer_list<double> xs) : data(xs) {}

    std::size_t dim() const { return data.size(); }
    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }
};

// Row-major dense matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    static Matrix identity(std::size_t n);
};

bool all_finite(const Matrix& a);
bool all_finite(const Vector& v);

double dot(const Vector& a, const Vector& b);
double norm(const Vector& v);
Vector matvec(const Matrix& a, const Vector& x);         // A x
Vector matvec_t(const Matrix& a, const Vector& x);       // A^T x
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix outer(const Vector& u, const Vector& v);          // u v^T
void axpy(double c, const Matrix& x, Matrix& y);         // y += c x
void axpy(double c, const Vector& x, Vector& y);
void scale(Matrix& a, double c);
void scale(Vector& v, double c);

double frobenius_norm(const Matrix& a);

// Largest singular value by deterministic power iteration on the smaller Gram
// matrix (all-ones normalized start, Rayleigh stop at 1e-14 relative).
double spectral_norm(const Matrix& a);

struct Top2 {
    double sigma1 = 0.0;
    double sigma2 = 0.0;
};
// Top two singular values, second one by Hotelling deflation of the top pair.
Top2 top2_singular_values(const Matrix& a);

struct StableRank {
    double fro = 0.0;
    double spec = 0.0;
    double srank = 0.0;  // fro / spec
};
StableRank stable_rank(const Matrix& a);

}  // namespace wdlab::linalg
