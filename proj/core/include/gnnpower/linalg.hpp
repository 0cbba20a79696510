#pragma once

#include <vector>

namespace gnnpower {

using Vec = std::vector<double>;

/// Dense row-major matrix, sized for per-slot channel work (K <= a few dozen).
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

    double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

/// out = G x
void matvec(const Mat& g, const Vec& x, Vec& out);

/// out = G^T x (no transpose is materialized)
void matvec_t(const Mat& g, const Vec& x, Vec& out);

double dot(const Vec& a, const Vec& b);

Vec ones(int n);

/// Checks perm is a bijection on {0..n-1}; throws InvalidPermutation.
void validate_permutation(const std::vector<int>& perm, int n);

/// y[i] = x[perm[i]]
Vec apply_permutation(const std::vector<int>& perm, const Vec& x);

/// inv[perm[i]] = i
std::vector<int> invert_permutation(const std::vector<int>& perm);

} // namespace gnnpower
