#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "dispat/errors.hpp"

namespace dispat {

/// Dense row-major matrix of 64-bit floats. Rank is fixed at two: scalars
/// are 1x1 and vectors are 1xd rows. All learned state and every
/// intermediate of the forward pass lives in one of these.
class Tensor {
public:
    Tensor() = default;

    Tensor(int rows, int cols)
        : shape_{checked_extent(rows), checked_extent(cols)},
          data_(static_cast<std::size_t>(rows) * cols, 0.0) {}

    static Tensor zeros(int rows, int cols) { return Tensor(rows, cols); }

    static Tensor full(int rows, int cols, double v) {
        Tensor t(rows, cols);
        for (auto& x : t.data_) x = v;
        return t;
    }

    static Tensor scalar(double v) { return full(1, 1, v); }

    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows_init) {
        const int r = static_cast<int>(rows_init.size());
        if (r == 0) throw ShapeError("Tensor::from_rows: empty");
        const int c = static_cast<int>(rows_init.begin()->size());
        Tensor t(r, c);
        int i = 0;
        for (const auto& row : rows_init) {
            if (static_cast<int>(row.size()) != c) throw ShapeError("Tensor::from_rows: ragged rows");
            int j = 0;
            for (double v : row) t.at(i, j++) = v;
            ++i;
        }
        return t;
    }

    int rows() const { return empty() ? 0 : shape_[0]; }
    int cols() const { return empty() ? 0 : shape_[1]; }
    const std::vector<int>& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& at(int i, int j) { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }
    double at(int i, int j) const { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    std::span<double> row(int i) { return {data_.data() + static_cast<std::size_t>(i) * shape_[1], static_cast<std::size_t>(shape_[1])}; }
    std::span<const double> row(int i) const { return {data_.data() + static_cast<std::size_t>(i) * shape_[1], static_cast<std::size_t>(shape_[1])}; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    void fill(double v) {
        for (auto& x : data_) x = v;
    }

    /// Marks a tensor as a leaf the reverse pass should reach.
    bool requires_grad = false;

private:
    static int checked_extent(int n) {
        if (n <= 0) throw ShapeError("Tensor: extents must be positive");
        return n;
    }

    std::vector<int> shape_;
    std::vector<double> data_;
};

inline bool all_finite(const Tensor& t) {
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!std::isfinite(t.data()[i])) return false;
    }
    return true;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// Cosine of two equal-length vectors. A zero-norm input yields 0 instead of
/// NaN; `degenerate`, when supplied, is set in that case.
inline double cosine_similarity(std::span<const double> a, std::span<const double> b, bool* degenerate = nullptr) {
    if (a.size() != b.size()) throw ShapeError("cosine_similarity: length mismatch");
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0) {
        if (degenerate) *degenerate = true;
        return 0.0;
    }
    return dot(a, b) / (na * nb);
}

/// Mean over the rows of `h` whose mask entry is true. Padded rows contribute
/// nothing. Throws EmptyPoolError when the mask selects no row.
inline Tensor masked_mean_pool(const Tensor& h, const std::vector<bool>& mask) {
    if (static_cast<int>(mask.size()) != h.rows()) throw ShapeError("masked_mean_pool: mask length != rows");
    int count = 0;
    for (bool m : mask)
        if (m) ++count;
    if (count == 0) throw EmptyPoolError("masked_mean_pool: empty mask");
    Tensor out(1, h.cols());
    for (int i = 0; i < h.rows(); ++i) {
        if (!mask[i]) continue;
        for (int j = 0; j < h.cols(); ++j) out.at(0, j) += h.at(i, j);
    }
    for (int j = 0; j < h.cols(); ++j) out.at(0, j) /= count;
    return out;
}

} // namespace dispat
