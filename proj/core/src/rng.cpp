#include "gnnpower/rng.hpp"

#include <cmath>

namespace gnnpower {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

} // namespace

RngStream::RngStream(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

RngStream RngStream::child(std::string_view label) const {
    return RngStream(splitmix64(seed_ ^ fnv1a(label)));
}

RngStream RngStream::child(std::uint64_t index) const {
    return RngStream(splitmix64(seed_ ^ splitmix64(index + 0x51a3d7e4f2c90b17ull)));
}

std::uint64_t RngStream::next_u64() {
    return engine_();
}

double RngStream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_open() {
    double u = uniform();
    while (u == 0.0) u = uniform();
    return u;
}

double RngStream::uniform_range(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

int RngStream::uniform_int(int lo, int hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % span;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return lo + static_cast<int>(x % span);
}

double RngStream::rayleigh(double sigma) {
    return sigma * std::sqrt(-2.0 * std::log(uniform_open()));
}

double gumbel_from_uniform(double u) {
    return -std::log(-std::log(u));
}

} // namespace gnnpower
