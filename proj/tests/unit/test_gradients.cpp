// Finite-difference oracles for every hand-written gradient path: plain
// REGNN taps, module taps at a fixed soft assignment, and assignment logits
// through the concrete relaxation. Instances whose pre-activations sit too
// close to the ReLU kink are redrawn so the central difference is valid.

#include <cmath>

#include "doctest.h"
#include "gnnpower/gumbel.hpp"
#include "gnnpower/modular.hpp"
#include "gnnpower/regnn.hpp"
#include "test_util.hpp"

using namespace gnnpower;
using namespace testutil;

namespace {

constexpr double kKinkMargin = 1e-4;

} // namespace

TEST_CASE("plain tap gradients match central finite differences") {
    const RngStream root(1001);
    int accepted = 0;
    int attempt = 0;
    while (accepted < 40 && attempt < 400) {
        RngStream rng = root.child(static_cast<std::uint64_t>(attempt++));
        const int k = rng.uniform_int(2, 6);
        const ChannelRealization g = random_channel(k, rng);
        ReGnnParams p = random_params(2, 4, 1.0, rng);

        ForwardTrace trace;
        PowerVector out = regnn_forward(p, g, &trace);
        if (min_preact_margin(trace) < kKinkMargin) continue;
        ++accepted;

        const Vec gp = sum_rate_grad_p(g, out, 1.0);
        const ParamGrads exact = regnn_backward(p, g, trace, gp);
        auto objective = [&] { return sum_rate(g, regnn_forward(p, g), 1.0); };
        for (int l = 0; l < 2; ++l) {
            for (int n = 0; n < 4; ++n) {
                const double fd = central_diff(&p.layers[l].taps[n], objective);
                CHECK(grad_close(exact.layers[l][n], fd));
            }
        }
    }
    CHECK(accepted == 40);
}

TEST_CASE("module tap gradients match central finite differences") {
    const RngStream root(2002);
    int accepted = 0;
    int attempt = 0;
    while (accepted < 30 && attempt < 300) {
        RngStream rng = root.child(static_cast<std::uint64_t>(attempt++));
        const int k = rng.uniform_int(2, 6);
        const int m = rng.uniform_int(2, 3);
        const ChannelRealization g = random_channel(k, rng);
        ModuleSet mods = random_modules(m, 4, 1.0, rng);
        AssignmentLogits eta = AssignmentLogits::zeros(2, m);
        for (double& e : eta.eta.a) e = rng.uniform_range(-1.0, 1.0);
        const Mat eps = gumbel_noise(2, m, rng);
        const SoftAssignment soft = sample_soft(eta, eps, 0.7);

        ModularTrace trace;
        const PowerVector out = modular_forward_soft(mods, soft, g, &trace);
        if (min_preact_margin(trace) < kKinkMargin) continue;
        ++accepted;

        const Vec gp = sum_rate_grad_p(g, out, 1.0);
        const ModularGrads exact = modular_backward_soft(mods, soft, g, trace, gp);
        auto objective = [&] {
            return sum_rate(g, modular_forward_soft(mods, soft, g), 1.0);
        };
        for (int i = 0; i < m; ++i) {
            for (int n = 0; n < 4; ++n) {
                const double fd = central_diff(&mods.modules[i].taps[n], objective);
                CHECK(grad_close(exact.module_taps[i][n], fd));
            }
        }
    }
    CHECK(accepted == 30);
}

TEST_CASE("assignment-logit gradients match central finite differences") {
    const RngStream root(3003);
    int accepted = 0;
    int attempt = 0;
    while (accepted < 30 && attempt < 300) {
        RngStream rng = root.child(static_cast<std::uint64_t>(attempt++));
        const int k = rng.uniform_int(2, 6);
        const int m = rng.uniform_int(2, 3);
        const double lambda = rng.uniform_range(0.5, 1.5);
        const ChannelRealization g = random_channel(k, rng);
        const ModuleSet mods = random_modules(m, 4, 1.0, rng);
        AssignmentLogits eta = AssignmentLogits::zeros(2, m);
        for (double& e : eta.eta.a) e = rng.uniform_range(-1.0, 1.0);
        const Mat eps = gumbel_noise(2, m, rng);

        auto objective = [&] {
            const SoftAssignment soft = sample_soft(eta, eps, lambda);
            return sum_rate(g, modular_forward_soft(mods, soft, g), 1.0);
        };

        const SoftAssignment soft = sample_soft(eta, eps, lambda);
        ModularTrace trace;
        const PowerVector out = modular_forward_soft(mods, soft, g, &trace);
        if (min_preact_margin(trace) < kKinkMargin) continue;
        ++accepted;

        const Vec gp = sum_rate_grad_p(g, out, 1.0);
        const ModularGrads grads = modular_backward_soft(mods, soft, g, trace, gp);
        const Mat exact = eta_grad_from_soft(soft, grads.mixture, lambda);
        for (int l = 0; l < 2; ++l) {
            for (int i = 0; i < m; ++i) {
                const double fd = central_diff(&eta.eta(l, i), objective);
                CHECK(grad_close(exact(l, i), fd));
            }
        }
    }
    CHECK(accepted == 30);
}

TEST_CASE("eta gradient vanishes when all modules are identical") {
    RngStream rng(4004);
    const ChannelRealization g = random_channel(4, rng);
    ModuleSet mods = random_modules(3, 4, 1.0, rng);
    mods.modules[1] = mods.modules[0];
    mods.modules[2] = mods.modules[0];
    AssignmentLogits eta = AssignmentLogits::zeros(2, 3);
    for (double& e : eta.eta.a) e = rng.uniform_range(-1.0, 1.0);
    const Mat eps = gumbel_noise(2, 3, rng);
    const SoftAssignment soft = sample_soft(eta, eps, 0.8);

    ModularTrace trace;
    const PowerVector out = modular_forward_soft(mods, soft, g, &trace);
    const Vec gp = sum_rate_grad_p(g, out, 1.0);
    const ModularGrads grads = modular_backward_soft(mods, soft, g, trace, gp);
    const Mat eg = eta_grad_from_soft(soft, grads.mixture, 0.8);
    for (double v : eg.a) CHECK(std::abs(v) < 1e-12);
}
