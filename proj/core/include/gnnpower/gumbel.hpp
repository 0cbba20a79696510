#pragma once

#include <cmath>

#include "gnnpower/linalg.hpp"
#include "gnnpower/rng.hpp"

namespace gnnpower {

/// L x M matrix of real assignment logits, one row per network layer.
struct AssignmentLogits {
    Mat eta;

    static AssignmentLogits zeros(int depth, int modules) {
        return AssignmentLogits{Mat(depth, modules)};
    }
    int depth() const { return eta.rows; }
    int modules() const { return eta.cols; }
};

/// Per-layer module choice, 0-based indices into the module set.
struct HardAssignment {
    std::vector<int> s;

    int depth() const { return static_cast<int>(s.size()); }
};

/// Row-stochastic L x M concrete samples.
struct SoftAssignment {
    Mat s_tilde;

    int depth() const { return s_tilde.rows; }
    int modules() const { return s_tilde.cols; }
};

/// Geometric temperature decay with a floor: temperature at annealing step
/// t is max(lambda0 * decay^t, lambda_min).
struct TemperatureSchedule {
    double lambda0 = 1.0;
    double decay = std::exp(-0.025);
    double lambda_min = 0.5;

    double at(int step) const;
    void validate() const;

    static TemperatureSchedule constant(double lambda) { return {lambda, 1.0, lambda}; }
};

/// L x M i.i.d. Gumbel(0,1) draws: -log(-log(u)), u ~ Uniform(0,1) open.
Mat gumbel_noise(int depth, int modules, RngStream& rng);

/// Per-layer argmax_i (eta + eps); ties break to the lowest index.
HardAssignment sample_hard(const AssignmentLogits& eta, const Mat& eps);

/// Row l = softmax((eta_l + eps_l) / lambda), computed with max-subtraction.
SoftAssignment sample_soft(const AssignmentLogits& eta, const Mat& eps, double lambda);

/// Per-layer argmax of the logits themselves (the distribution mode);
/// ties break to the lowest index.
HardAssignment select_mode(const AssignmentLogits& eta);

} // namespace gnnpower
