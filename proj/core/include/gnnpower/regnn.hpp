#pragma once

#include <utility>
#include <vector>

#include "gnnpower/linalg.hpp"
#include "gnnpower/netsim.hpp"
#include "gnnpower/rng.hpp"

namespace gnnpower {

/// One graph filter: taps phi_1..phi_N applied to powers G^1..G^N.
struct FilterTaps {
    Vec taps;

    int size() const { return static_cast<int>(taps.size()); }
};

/// Full policy: L filters plus the per-link power ceiling (linear mW).
/// A single pmax entry broadcasts to every link, so one parameter set
/// serves topologies of any size.
struct ReGnnParams {
    std::vector<FilterTaps> layers;
    Vec pmax;

    int depth() const { return static_cast<int>(layers.size()); }
    int taps_per_layer() const { return layers.empty() ? 0 : layers.front().size(); }
    double pmax_at(int i) const { return pmax.size() == 1 ? pmax[0] : pmax[static_cast<std::size_t>(i)]; }
    void validate() const;
};

/// Per-link transmit powers in linear mW, each within [0, pmax].
struct PowerVector {
    Vec p;
};

/// Reverse-mode cache from one forward pass: activations z_0..z_L,
/// pre-activations, and the iterated powers G^n z_{l-1} each layer consumed.
struct ForwardTrace {
    std::vector<Vec> z;                    // z[0]=input, z[l]=activation of layer l
    std::vector<Vec> preact;               // preact[l-1] = v_l
    std::vector<std::vector<Vec>> gpow;    // gpow[l-1][n-1] = G^n z_{l-1}
};

/// d(objective)/d(phi_{l,n}), same shape as ReGnnParams::layers.
struct ParamGrads {
    std::vector<Vec> layers;

    static ParamGrads zeros(int depth, int taps);
    void accumulate(const ParamGrads& other, double weight);
    void scale(double s);
};

/// sum_{n=1..N} phi_n G^n x via iterated matrix-vector products.
/// The sum starts at n = 1: there is no identity tap.
Vec graph_filter(const FilterTaps& taps, const ChannelRealization& g, const Vec& x);

/// Layered forward pass: ReLU after each hidden filter, sigmoid at the
/// output scaled elementwise by pmax. Pass `trace` to capture the
/// reverse-mode cache.
PowerVector regnn_forward(const ReGnnParams& params, const ChannelRealization& g, const Vec& x,
                          ForwardTrace* trace = nullptr);

/// Forward pass with the default all-ones input signal.
PowerVector regnn_forward(const ReGnnParams& params, const ChannelRealization& g,
                          ForwardTrace* trace = nullptr);

/// sum_k log2(1 + g_kk p_k / (sigma2 + sum_{j != k} g_jk p_j)), bits/use.
double sum_rate(const ChannelRealization& g, const PowerVector& p, double sigma2);

/// Exact gradient of sum_rate with respect to the power vector.
Vec sum_rate_grad_p(const ChannelRealization& g, const PowerVector& p, double sigma2);

/// Exact reverse-mode gradient of the objective through the forward trace.
/// ReLU propagates gradient only where the pre-activation is strictly
/// positive (subgradient 0 at the kink).
ParamGrads regnn_backward(const ReGnnParams& params, const ChannelRealization& g,
                          const ForwardTrace& trace, const Vec& grad_p);

/// Mean sum-rate and mean gradient over a non-empty batch of slots.
std::pair<double, ParamGrads> batch_objective_and_grad(const ReGnnParams& params,
                                                       const PeriodDataset::Batch& batch,
                                                       double sigma2);

/// Mean sum-rate over a batch without gradients.
double batch_objective(const ReGnnParams& params, const PeriodDataset::Batch& batch,
                       double sigma2);

enum class OptMethod { gd, adam };

/// Stateful first-order optimizer performing gradient *ascent* on flat
/// parameter vectors. Plain-GD mode is theta += lr * grad; adaptive-moment
/// mode is Adam with the usual (0.9, 0.999, 1e-8) constants.
struct OptimizerState {
    OptMethod method = OptMethod::adam;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step_count = 0;
    Vec m;
    Vec v;

    void step(Vec& theta, const Vec& grad);
};

Vec flatten(const ReGnnParams& params);
void unflatten(const Vec& flat, ReGnnParams& params);
Vec flatten(const ParamGrads& grads);

/// One ascent step on the taps; pmax is not trainable.
void optimizer_step(OptimizerState& state, ReGnnParams& params, const ParamGrads& grads);

/// Pi^T G Pi relabeling: out(i,j) = g(perm[i], perm[j]).
ChannelRealization permute_channel(const ChannelRealization& g, const std::vector<int>& perm);

/// Taps i.i.d. uniform on [-1/sqrt(N), 1/sqrt(N)].
ReGnnParams init_regnn_params(int depth, int taps, const Vec& pmax, RngStream& rng);

} // namespace gnnpower
