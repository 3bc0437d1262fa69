#include "pcn/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "pcn/errors.hpp"

namespace pcn {

namespace {

constexpr std::size_t kColumnBlock = 256;

[[noreturn]] void shape_fail(const char* op, const Matrix& a, const Matrix& b) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                     b.shape_string());
}

// c (m×n) = a (m×k) · b (k×n); caller guarantees shapes. Each c[i][j] sums in
// ascending k; the column blocking only changes which j are live at a time.
void gemm_rowmajor(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                   std::size_t n) {
    for (std::size_t j0 = 0; j0 < n; j0 += kColumnBlock) {
        const std::size_t j1 = std::min(n, j0 + kColumnBlock);
        for (std::size_t i = 0; i < m; ++i) {
            double* crow = c + i * n;
            const double* arow = a + i * k;
            for (std::size_t p = 0; p < k; ++p) {
                const double aip = arow[p];
                const double* brow = b + p * n;
                for (std::size_t j = j0; j < j1; ++j) crow[j] += aip * brow[j];
            }
        }
    }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
        throw ShapeError("Matrix: data length " + std::to_string(data_.size()) +
                         " does not match " + shape_string());
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw ShapeError("Matrix: ragged initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::column(std::span<const double> values) {
    return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

std::string Matrix::shape_string() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

bool operator==(const Matrix& a, const Matrix& b) noexcept {
    if (!a.same_shape(b)) return false;
    return a.data_.empty() ||
           std::memcmp(a.data_.data(), b.data_.data(), a.data_.size() * sizeof(double)) == 0;
}

bool all_finite(const Matrix& m) noexcept {
    for (double v : m.data())
        if (!std::isfinite(v)) return false;
    return true;
}

void require_finite(const Matrix& m, const char* what, long layer) {
    if (all_finite(m)) return;
    std::string msg = std::string("non-finite value in ") + what;
    if (layer >= 0) msg += " at layer " + std::to_string(layer);
    throw DivergenceError(msg, layer);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) shape_fail("matmul", a, b);
    Matrix c(a.rows(), b.cols());
    gemm_rowmajor(a.data().data(), b.data().data(), c.data().data(), a.rows(), a.cols(), b.cols());
    require_finite(c, "matmul");
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) shape_fail("matmul_tn", a, b);
    const std::size_t m = a.cols(), k = a.rows(), n = b.cols();
    Matrix c(m, n);
    double* cd = c.data().data();
    // k outermost keeps every c[i][j] accumulating in ascending k.
    for (std::size_t p = 0; p < k; ++p) {
        const auto arow = a.row(p);
        const double* brow = b.row(p).data();
        for (std::size_t i = 0; i < m; ++i) {
            const double api = arow[i];
            double* crow = cd + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += api * brow[j];
        }
    }
    require_finite(c, "matmul_tn");
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) shape_fail("matmul_nt", a, b);
    const Matrix bt = transpose(b);
    Matrix c(a.rows(), b.rows());
    gemm_rowmajor(a.data().data(), bt.data().data(), c.data().data(), a.rows(), a.cols(),
                  bt.cols());
    require_finite(c, "matmul_nt");
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) shape_fail("hadamard", a, b);
    Matrix c(a.rows(), a.cols());
    auto cd = c.data();
    auto ad = a.data(), bd = b.data();
    for (std::size_t i = 0; i < cd.size(); ++i) cd[i] = ad[i] * bd[i];
    require_finite(c, "hadamard");
    return c;
}

Matrix outer(const Matrix& u, const Matrix& v) {
    if (u.cols() != 1 || v.cols() != 1) shape_fail("outer", u, v);
    Matrix c(u.rows(), v.rows());
    for (std::size_t i = 0; i < u.rows(); ++i)
        for (std::size_t j = 0; j < v.rows(); ++j) c(i, j) = u(i, 0) * v(j, 0);
    require_finite(c, "outer");
    return c;
}

Matrix add(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) shape_fail("add", a, b);
    Matrix c = a;
    auto cd = c.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < cd.size(); ++i) cd[i] += bd[i];
    require_finite(c, "add");
    return c;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) shape_fail("subtract", a, b);
    Matrix c = a;
    auto cd = c.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < cd.size(); ++i) cd[i] -= bd[i];
    require_finite(c, "subtract");
    return c;
}

Matrix scale(const Matrix& a, double s) {
    Matrix c = a;
    for (double& v : c.data()) v *= s;
    require_finite(c, "scale");
    return c;
}

Matrix gather_columns(const Matrix& m, std::span<const std::size_t> idx) {
    Matrix out(m.rows(), idx.size());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto src = m.row(r);
        auto dst = out.row(r);
        for (std::size_t j = 0; j < idx.size(); ++j) {
            if (idx[j] >= m.cols()) throw ShapeError("gather_columns: index out of range");
            dst[j] = src[idx[j]];
        }
    }
    return out;
}

void scatter_columns(Matrix& dst, const Matrix& src, std::span<const std::size_t> idx) {
    if (src.rows() != dst.rows() || src.cols() != idx.size())
        throw ShapeError("scatter_columns: shape mismatch");
    for (std::size_t r = 0; r < src.rows(); ++r) {
        const auto s = src.row(r);
        auto d = dst.row(r);
        for (std::size_t j = 0; j < idx.size(); ++j) {
            if (idx[j] >= dst.cols()) throw ShapeError("scatter_columns: index out of range");
            d[idx[j]] = s[j];
        }
    }
}

double sum_squares(const Matrix& m) noexcept {
    double s = 0.0;
    for (double v : m.data()) s += v * v;
    return s;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) shape_fail("max_abs_diff", a, b);
    double worst = 0.0;
    auto ad = a.data(), bd = b.data();
    for (std::size_t i = 0; i < ad.size(); ++i) worst = std::max(worst, std::abs(ad[i] - bd[i]));
    return worst;
}

}  // namespace pcn
