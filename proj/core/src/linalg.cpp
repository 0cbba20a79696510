#include "gnnpower/linalg.hpp"

#include "gnnpower/errors.hpp"

namespace gnnpower {

void matvec(const Mat& g, const Vec& x, Vec& out) {
    if (static_cast<int>(x.size()) != g.cols)
        throw ShapeMismatch("matvec: vector length does not match matrix columns");
    out.assign(g.rows, 0.0);
    const double* row = g.a.data();
    for (int i = 0; i < g.rows; ++i, row += g.cols) {
        double acc = 0.0;
        for (int j = 0; j < g.cols; ++j) acc += row[j] * x[j];
        out[i] = acc;
    }
}

void matvec_t(const Mat& g, const Vec& x, Vec& out) {
    if (static_cast<int>(x.size()) != g.rows)
        throw ShapeMismatch("matvec_t: vector length does not match matrix rows");
    out.assign(g.cols, 0.0);
    const double* row = g.a.data();
    for (int i = 0; i < g.rows; ++i, row += g.cols) {
        const double xi = x[i];
        for (int j = 0; j < g.cols; ++j) out[j] += row[j] * xi;
    }
}

double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw ShapeMismatch("dot: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

Vec ones(int n) {
    return Vec(static_cast<std::size_t>(n), 1.0);
}

void validate_permutation(const std::vector<int>& perm, int n) {
    if (static_cast<int>(perm.size()) != n)
        throw InvalidPermutation("permutation length does not match K");
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    for (int p : perm) {
        if (p < 0 || p >= n || seen[static_cast<std::size_t>(p)])
            throw InvalidPermutation("permutation is not a bijection");
        seen[static_cast<std::size_t>(p)] = 1;
    }
}

Vec apply_permutation(const std::vector<int>& perm, const Vec& x) {
    validate_permutation(perm, static_cast<int>(x.size()));
    Vec y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[static_cast<std::size_t>(perm[i])];
    return y;
}

std::vector<int> invert_permutation(const std::vector<int>& perm) {
    validate_permutation(perm, static_cast<int>(perm.size()));
    std::vector<int> inv(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) inv[static_cast<std::size_t>(perm[i])] = static_cast<int>(i);
    return inv;
}

} // namespace gnnpower
