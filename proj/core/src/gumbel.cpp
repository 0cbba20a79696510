#include "gnnpower/gumbel.hpp"

#include <algorithm>

#include "gnnpower/errors.hpp"

namespace gnnpower {

double TemperatureSchedule::at(int step) const {
    return std::max(lambda0 * std::pow(decay, static_cast<double>(step)), lambda_min);
}

void TemperatureSchedule::validate() const {
    if (!(lambda_min > 0.0) || !(lambda0 >= lambda_min))
        throw ValidationError("temperature schedule requires lambda0 >= lambda_min > 0");
    if (!(decay > 0.0) || !(decay <= 1.0))
        throw ValidationError("temperature decay factor must be in (0, 1]");
}

Mat gumbel_noise(int depth, int modules, RngStream& rng) {
    Mat eps(depth, modules);
    for (double& e : eps.a) e = gumbel_from_uniform(rng.uniform_open());
    return eps;
}

namespace {

int argmax_row(const double* row, int m) {
    int best = 0;
    for (int i = 1; i < m; ++i)
        if (row[i] > row[best]) best = i;
    return best;
}

} // namespace

HardAssignment sample_hard(const AssignmentLogits& eta, const Mat& eps) {
    if (!eta.eta.same_shape(eps)) throw ShapeMismatch("sample_hard: logit/noise shape mismatch");
    HardAssignment s;
    s.s.resize(static_cast<std::size_t>(eta.depth()));
    Vec noisy(static_cast<std::size_t>(eta.modules()));
    for (int l = 0; l < eta.depth(); ++l) {
        for (int i = 0; i < eta.modules(); ++i) noisy[i] = eta.eta(l, i) + eps(l, i);
        s.s[l] = argmax_row(noisy.data(), eta.modules());
    }
    return s;
}

SoftAssignment sample_soft(const AssignmentLogits& eta, const Mat& eps, double lambda) {
    if (!eta.eta.same_shape(eps)) throw ShapeMismatch("sample_soft: logit/noise shape mismatch");
    if (!(lambda > 0.0)) throw ValidationError("sample_soft: temperature must be positive");
    SoftAssignment s;
    s.s_tilde = Mat(eta.depth(), eta.modules());
    const int m = eta.modules();
    Vec scaled(static_cast<std::size_t>(m));
    for (int l = 0; l < eta.depth(); ++l) {
        double hi = -1e300;
        for (int i = 0; i < m; ++i) {
            scaled[i] = (eta.eta(l, i) + eps(l, i)) / lambda;
            hi = std::max(hi, scaled[i]);
        }
        double total = 0.0;
        for (int i = 0; i < m; ++i) {
            scaled[i] = std::exp(scaled[i] - hi);
            total += scaled[i];
        }
        for (int i = 0; i < m; ++i) s.s_tilde(l, i) = scaled[i] / total;
    }
    return s;
}

HardAssignment select_mode(const AssignmentLogits& eta) {
    HardAssignment s;
    s.s.resize(static_cast<std::size_t>(eta.depth()));
    for (int l = 0; l < eta.depth(); ++l)
        s.s[l] = argmax_row(&eta.eta.a[static_cast<std::size_t>(l) * eta.modules()], eta.modules());
    return s;
}

} // namespace gnnpower
