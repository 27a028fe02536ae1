#include "tcmm/linalg.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace tcmm {

namespace {

std::atomic<std::size_t> g_degenerate_norms{0};

void require_same_dim(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw ShapeError(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                         " vs " + std::to_string(b) + ")");
    }
}

}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
    require_same_dim(a.size(), b.size(), "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

NormalizeResult l2_normalize_checked(std::span<const double> v) {
    NormalizeResult out{FeatureVec(v.begin(), v.end()), false};
    const double n = l2_norm(v);
    if (n == 0.0) {
        out.degenerate = true;
        return out;
    }
    for (double& x : out.vec) x /= n;
    return out;
}

FeatureVec l2_normalize(std::span<const double> v) {
    auto r = l2_normalize_checked(v);
    if (r.degenerate) g_degenerate_norms.fetch_add(1, std::memory_order_relaxed);
    return std::move(r.vec);
}

std::size_t degenerate_norm_count() { return g_degenerate_norms.load(std::memory_order_relaxed); }

void axpy(double scale, std::span<const double> v, std::span<double> out) {
    require_same_dim(v.size(), out.size(), "axpy");
    for (std::size_t i = 0; i < v.size(); ++i) out[i] += scale * v[i];
}

FeatureVec matvec(const Matrix& w, std::span<const double> x) {
    require_same_dim(w.cols(), x.size(), "matvec");
    FeatureVec y(w.rows(), 0.0);
    for (std::size_t r = 0; r < w.rows(); ++r) {
        const auto row = w.row(r);
        double s = 0.0;
        for (std::size_t c = 0; c < x.size(); ++c) s += row[c] * x[c];
        y[r] = s;
    }
    return y;
}

void add_outer(Matrix& w, double scale, std::span<const double> u, std::span<const double> v) {
    require_same_dim(w.rows(), u.size(), "add_outer rows");
    require_same_dim(w.cols(), v.size(), "add_outer cols");
    for (std::size_t r = 0; r < u.size(); ++r) {
        const double ur = scale * u[r];
        auto row = w.row(r);
        for (std::size_t c = 0; c < v.size(); ++c) row[c] += ur * v[c];
    }
}

FeatureVec normalize_backward(std::span<const double> u, std::span<const double> g) {
    require_same_dim(u.size(), g.size(), "normalize_backward");
    FeatureVec out(u.size(), 0.0);
    const double n = l2_norm(u);
    if (n == 0.0) return out;
    double proj = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) proj += (u[i] / n) * g[i];
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = (g[i] - proj * (u[i] / n)) / n;
    return out;
}

std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& f,
                                     std::span<const double> x, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_diff_grad: step must be positive");
    std::vector<double> probe(x.begin(), x.end());
    std::vector<double> grad(x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + h;
        const double fp = f(probe);
        probe[i] = orig - h;
        const double fm = f(probe);
        probe[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw NumericError("finite_diff_grad: non-finite function value at coordinate " +
                               std::to_string(i));
        }
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

double relative_error(std::span<const double> a, std::span<const double> b) {
    require_same_dim(a.size(), b.size(), "relative_error");
    double diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) diff += (a[i] - b[i]) * (a[i] - b[i]);
    const double scale = std::max(l2_norm(a), l2_norm(b));
    if (scale == 0.0) return 0.0;
    return std::sqrt(diff) / scale;
}

}  // namespace tcmm
