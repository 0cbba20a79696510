#include "gnnpower/regnn.hpp"

#include <cmath>

#include "gnnpower/errors.hpp"

namespace gnnpower {

namespace {

constexpr double kLn2 = 0.6931471805599453;

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

} // namespace

void ReGnnParams::validate() const {
    if (layers.empty()) throw ShapeMismatch("params need at least one layer");
    const int n = layers.front().size();
    if (n < 1) throw ShapeMismatch("filters need at least one tap");
    for (const auto& l : layers)
        if (l.size() != n) throw ShapeMismatch("all layers must share the tap count");
    if (pmax.empty()) throw ShapeMismatch("pmax is empty");
    for (double p : pmax)
        if (!(p > 0.0)) throw ShapeMismatch("pmax entries must be positive");
}

ParamGrads ParamGrads::zeros(int depth, int taps) {
    ParamGrads g;
    g.layers.assign(static_cast<std::size_t>(depth), Vec(static_cast<std::size_t>(taps), 0.0));
    return g;
}

void ParamGrads::accumulate(const ParamGrads& other, double weight) {
    for (std::size_t l = 0; l < layers.size(); ++l)
        for (std::size_t n = 0; n < layers[l].size(); ++n)
            layers[l][n] += weight * other.layers[l][n];
}

void ParamGrads::scale(double s) {
    for (auto& l : layers)
        for (double& v : l) v *= s;
}

Vec graph_filter(const FilterTaps& taps, const ChannelRealization& g, const Vec& x) {
    const int k = g.k();
    if (static_cast<int>(x.size()) != k)
        throw ShapeMismatch("graph_filter: input length does not match K");
    Vec acc(static_cast<std::size_t>(k), 0.0);
    Vec power = x;
    Vec tmp;
    for (double tap : taps.taps) {
        matvec(g.gains, power, tmp); // G^n x by iterated multiply
        power.swap(tmp);
        for (int i = 0; i < k; ++i) acc[i] += tap * power[i];
    }
    return acc;
}

PowerVector regnn_forward(const ReGnnParams& params, const ChannelRealization& g, const Vec& x,
                          ForwardTrace* trace) {
    params.validate();
    const int k = g.k();
    if (static_cast<int>(x.size()) != k)
        throw ShapeMismatch("regnn_forward: input length does not match K");
    if (params.pmax.size() != 1 && static_cast<int>(params.pmax.size()) != k)
        throw ShapeMismatch("regnn_forward: pmax length does not match K");
    const int depth = params.depth();
    const int taps = params.taps_per_layer();

    if (trace) {
        trace->z.assign(1, x);
        trace->preact.clear();
        trace->gpow.assign(static_cast<std::size_t>(depth), {});
    }

    Vec z = x;
    Vec power;
    Vec tmp;
    for (int l = 0; l < depth; ++l) {
        Vec v(static_cast<std::size_t>(k), 0.0);
        power = z;
        if (trace) trace->gpow[l].reserve(static_cast<std::size_t>(taps));
        for (int n = 0; n < taps; ++n) {
            matvec(g.gains, power, tmp);
            power.swap(tmp);
            if (trace) trace->gpow[l].push_back(power);
            const double tap = params.layers[l].taps[n];
            for (int i = 0; i < k; ++i) v[i] += tap * power[i];
        }
        if (trace) trace->preact.push_back(v);
        const bool last = (l == depth - 1);
        Vec out(static_cast<std::size_t>(k));
        if (last) {
            for (int i = 0; i < k; ++i) out[i] = params.pmax_at(i) * sigmoid(v[i]);
        } else {
            for (int i = 0; i < k; ++i) out[i] = v[i] > 0.0 ? v[i] : 0.0;
        }
        if (trace) {
            if (last) {
                // store the sigmoid output pre-scaling; backward rescales
                Vec sig(static_cast<std::size_t>(k));
                for (int i = 0; i < k; ++i) sig[i] = sigmoid(v[i]);
                trace->z.push_back(sig);
            } else {
                trace->z.push_back(out);
            }
        }
        z.swap(out);
    }
    return PowerVector{std::move(z)};
}

PowerVector regnn_forward(const ReGnnParams& params, const ChannelRealization& g,
                          ForwardTrace* trace) {
    return regnn_forward(params, g, ones(g.k()), trace);
}

double sum_rate(const ChannelRealization& g, const PowerVector& p, double sigma2) {
    const int k = g.k();
    if (static_cast<int>(p.p.size()) != k)
        throw ShapeMismatch("sum_rate: power length does not match K");
    double total = 0.0;
    for (int i = 0; i < k; ++i) {
        double interf = 0.0;
        for (int j = 0; j < k; ++j)
            if (j != i) interf += g.gains(j, i) * p.p[j];
        total += std::log2(1.0 + g.gains(i, i) * p.p[i] / (sigma2 + interf));
    }
    return total;
}

Vec sum_rate_grad_p(const ChannelRealization& g, const PowerVector& p, double sigma2) {
    const int k = g.k();
    if (static_cast<int>(p.p.size()) != k)
        throw ShapeMismatch("sum_rate_grad_p: power length does not match K");
    // rate_k = log2(1 + S_k / D_k), S_k = g_kk p_k, D_k = sigma2 + I_k
    Vec grad(static_cast<std::size_t>(k), 0.0);
    Vec denom(static_cast<std::size_t>(k), 0.0); // D_k
    Vec signal(static_cast<std::size_t>(k), 0.0);
    for (int i = 0; i < k; ++i) {
        double interf = 0.0;
        for (int j = 0; j < k; ++j)
            if (j != i) interf += g.gains(j, i) * p.p[j];
        denom[i] = sigma2 + interf;
        signal[i] = g.gains(i, i) * p.p[i];
    }
    for (int j = 0; j < k; ++j) {
        double acc = g.gains(j, j) / (kLn2 * (denom[j] + signal[j]));
        for (int i = 0; i < k; ++i) {
            if (i == j) continue;
            const double gji = g.gains(j, i);
            if (gji == 0.0) continue;
            acc -= gji * signal[i] / (kLn2 * denom[i] * (denom[i] + signal[i]));
        }
        grad[j] = acc;
    }
    return grad;
}

ParamGrads regnn_backward(const ReGnnParams& params, const ChannelRealization& g,
                          const ForwardTrace& trace, const Vec& grad_p) {
    const int depth = params.depth();
    const int taps = params.taps_per_layer();
    const int k = g.k();
    if (static_cast<int>(trace.z.size()) != depth + 1 ||
        static_cast<int>(trace.preact.size()) != depth ||
        static_cast<int>(trace.gpow.size()) != depth)
        throw TraceMismatch("trace layer count does not match params");
    for (int l = 0; l < depth; ++l)
        if (static_cast<int>(trace.gpow[l].size()) != taps ||
            static_cast<int>(trace.preact[l].size()) != k)
            throw TraceMismatch("trace shapes do not match params/channel");
    if (static_cast<int>(grad_p.size()) != k)
        throw TraceMismatch("grad_p length does not match K");

    ParamGrads grads = ParamGrads::zeros(depth, taps);

    // output layer: p_i = pmax_i * s(v_i)
    Vec up(static_cast<std::size_t>(k));
    {
        const Vec& sig = trace.z[static_cast<std::size_t>(depth)];
        for (int i = 0; i < k; ++i)
            up[i] = grad_p[i] * params.pmax_at(i) * sig[i] * (1.0 - sig[i]);
    }

    Vec t, tmp;
    for (int l = depth - 1; l >= 0; --l) {
        for (int n = 0; n < taps; ++n) grads.layers[l][n] = dot(up, trace.gpow[l][n]);
        if (l == 0) break;
        // dJ/dz_{l-1} = sum_n phi_{l,n} (G^T)^n up, Horner form
        t.assign(static_cast<std::size_t>(k), 0.0);
        for (int i = 0; i < k; ++i) t[i] = params.layers[l].taps[taps - 1] * up[i];
        for (int n = taps - 2; n >= 0; --n) {
            matvec_t(g.gains, t, tmp);
            const double tap = params.layers[l].taps[n];
            for (int i = 0; i < k; ++i) tmp[i] += tap * up[i];
            t.swap(tmp);
        }
        matvec_t(g.gains, t, tmp);
        const Vec& pre = trace.preact[static_cast<std::size_t>(l - 1)];
        for (int i = 0; i < k; ++i) up[i] = pre[i] > 0.0 ? tmp[i] : 0.0;
    }
    return grads;
}

double batch_objective(const ReGnnParams& params, const PeriodDataset::Batch& batch,
                       double sigma2) {
    if (batch.empty()) throw EmptyBatch("batch_objective: empty batch");
    double total = 0.0;
    for (const ChannelRealization* g : batch)
        total += sum_rate(*g, regnn_forward(params, *g), sigma2);
    return total / static_cast<double>(batch.size());
}

std::pair<double, ParamGrads> batch_objective_and_grad(const ReGnnParams& params,
                                                       const PeriodDataset::Batch& batch,
                                                       double sigma2) {
    if (batch.empty()) throw EmptyBatch("batch_objective_and_grad: empty batch");
    ParamGrads total = ParamGrads::zeros(params.depth(), params.taps_per_layer());
    double obj = 0.0;
    ForwardTrace trace;
    for (const ChannelRealization* g : batch) {
        const PowerVector p = regnn_forward(params, *g, &trace);
        obj += sum_rate(*g, p, sigma2);
        const Vec gp = sum_rate_grad_p(*g, p, sigma2);
        total.accumulate(regnn_backward(params, *g, trace, gp), 1.0);
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    total.scale(inv);
    return {obj * inv, total};
}

void OptimizerState::step(Vec& theta, const Vec& grad) {
    if (theta.size() != grad.size()) throw ShapeMismatch("optimizer step: size mismatch");
    if (method == OptMethod::gd) {
        for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += lr * grad[i];
        return;
    }
    if (m.size() != theta.size()) {
        m.assign(theta.size(), 0.0);
        v.assign(theta.size(), 0.0);
        step_count = 0;
    }
    ++step_count;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    for (std::size_t i = 0; i < theta.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
        theta[i] += lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
}

Vec flatten(const ReGnnParams& params) {
    Vec flat;
    flat.reserve(static_cast<std::size_t>(params.depth()) * params.taps_per_layer());
    for (const auto& l : params.layers) flat.insert(flat.end(), l.taps.begin(), l.taps.end());
    return flat;
}

void unflatten(const Vec& flat, ReGnnParams& params) {
    std::size_t i = 0;
    for (auto& l : params.layers)
        for (double& t : l.taps) t = flat[i++];
}

Vec flatten(const ParamGrads& grads) {
    Vec flat;
    for (const auto& l : grads.layers) flat.insert(flat.end(), l.begin(), l.end());
    return flat;
}

void optimizer_step(OptimizerState& state, ReGnnParams& params, const ParamGrads& grads) {
    Vec theta = flatten(params);
    state.step(theta, flatten(grads));
    unflatten(theta, params);
}

ChannelRealization permute_channel(const ChannelRealization& g, const std::vector<int>& perm) {
    const int k = g.k();
    validate_permutation(perm, k);
    ChannelRealization out;
    out.slot = g.slot;
    out.period_id = g.period_id;
    out.gains = Mat(k, k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) out.gains(i, j) = g.gains(perm[i], perm[j]);
    return out;
}

ReGnnParams init_regnn_params(int depth, int taps, const Vec& pmax, RngStream& rng) {
    const double a = 1.0 / std::sqrt(static_cast<double>(taps));
    ReGnnParams p;
    p.layers.resize(static_cast<std::size_t>(depth));
    for (auto& l : p.layers) {
        l.taps.resize(static_cast<std::size_t>(taps));
        // First and last taps are drawn nonnegative: with an all-ones input
        // and a nonnegative GSO those terms dominate the weak- and
        // strong-gain tails, so a negative sign there can zero out the ReLU
        // on every slot and freeze training at an exactly-zero gradient.
        for (std::size_t n = 0; n < l.taps.size(); ++n) {
            const bool edge = (n == 0 || n + 1 == l.taps.size());
            l.taps[n] = edge ? rng.uniform_range(0.0, a) : rng.uniform_range(-a, a);
        }
    }
    p.pmax = pmax;
    p.validate();
    return p;
}

} // namespace gnnpower
