#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace gnnpower {

/// Deterministic pseudo-random stream, splittable into independent child
/// streams by label. Children are derived from the parent's seed, not its
/// draw position, so splitting commutes with drawing and labeled subtrees
/// can be evaluated in any order (or in parallel) without changing output.
///
/// All variate transforms are hand-rolled from raw 64-bit draws; output is
/// bit-identical across platforms and standard library implementations.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed);

    RngStream child(std::string_view label) const;
    RngStream child(std::uint64_t index) const;

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64();

    /// Uniform on [0, 1), 53-bit resolution.
    double uniform();

    /// Uniform on the open interval (0, 1); zero draws are rejected.
    double uniform_open();

    /// Uniform on [lo, hi].
    double uniform_range(double lo, double hi);

    /// Uniform integer on [lo, hi], inclusive, bias-free.
    int uniform_int(int lo, int hi);

    /// Rayleigh with scale sigma: sigma * sqrt(-2 ln U), U ~ (0,1).
    double rayleigh(double sigma);

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

/// -log(-log(u)) for u in (0,1): the standard Gumbel(0,1) quantile map.
double gumbel_from_uniform(double u);

} // namespace gnnpower
