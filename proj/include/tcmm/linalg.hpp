#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tcmm {

/// Fixed-dimension embedding vector. All similarity math in this project
/// runs in double precision on these.
using FeatureVec = std::vector<double>;

/// Thrown when operand shapes disagree.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown when a computation produces NaN/Inf where a finite value is required.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

struct NormalizeResult {
    FeatureVec vec;
    bool degenerate = false;  // input had zero norm; vec is the input unchanged
};

/// v / ||v||. A zero vector comes back unchanged with `degenerate` set.
NormalizeResult l2_normalize_checked(std::span<const double> v);

/// Same as l2_normalize_checked but reports the degenerate case through
/// degenerate_norm_count() instead of a flag.
FeatureVec l2_normalize(std::span<const double> v);

/// Process-wide count of zero-norm inputs seen by l2_normalize.
std::size_t degenerate_norm_count();

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

/// out += scale * v
void axpy(double scale, std::span<const double> v, std::span<double> out);

/// y = W x
FeatureVec matvec(const Matrix& w, std::span<const double> x);

/// W += scale * u v^T
void add_outer(Matrix& w, double scale, std::span<const double> u, std::span<const double> v);

/// Jacobian-vector product of normalize(u) at u, applied to g:
/// (I - n n^T) g / ||u|| where n = u / ||u||. Zero when ||u|| == 0.
FeatureVec normalize_backward(std::span<const double> u, std::span<const double> g);

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate.
/// Throws NumericError naming the coordinate if f is non-finite at a probe point.
std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& f,
                                     std::span<const double> x, double h);

/// ||a - b|| / max(||a||, ||b||), or 0 when both are zero.
double relative_error(std::span<const double> a, std::span<const double> b);

}  // namespace tcmm
