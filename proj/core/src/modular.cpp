#include "gnnpower/modular.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "gnnpower/errors.hpp"
#include "gnnpower/fomaml.hpp"

namespace gnnpower {

namespace {

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double pmax_at(const Vec& pmax, int i) {
    return pmax.size() == 1 ? pmax[0] : pmax[static_cast<std::size_t>(i)];
}

} // namespace

void ModuleSet::validate() const {
    if (modules.empty()) throw ShapeMismatch("module set needs at least one module");
    const int n = modules.front().size();
    if (n < 1) throw ShapeMismatch("modules need at least one tap");
    for (const auto& m : modules)
        if (m.size() != n) throw ShapeMismatch("all modules must share the tap count");
    if (pmax.empty()) throw ShapeMismatch("pmax is empty");
}

ReGnnParams assemble(const ModuleSet& mods, const HardAssignment& s) {
    mods.validate();
    ReGnnParams p;
    p.layers.reserve(s.s.size());
    for (int idx : s.s) {
        if (idx < 0 || idx >= mods.size())
            throw IndexOutOfRange("assignment index " + std::to_string(idx) +
                                  " outside module set of size " + std::to_string(mods.size()));
        p.layers.push_back(mods.modules[static_cast<std::size_t>(idx)]);
    }
    p.pmax = mods.pmax;
    return p;
}

PowerVector modular_forward_soft(const ModuleSet& mods, const SoftAssignment& s,
                                 const ChannelRealization& g, const Vec& x,
                                 ModularTrace* trace) {
    mods.validate();
    const int k = g.k();
    const int depth = s.depth();
    const int m = mods.size();
    const int taps = mods.taps_per_module();
    if (s.modules() != m)
        throw ShapeMismatch("modular_forward_soft: assignment width does not match module count");
    if (static_cast<int>(x.size()) != k)
        throw ShapeMismatch("modular_forward_soft: input length does not match K");
    if (mods.pmax.size() != 1 && static_cast<int>(mods.pmax.size()) != k)
        throw ShapeMismatch("modular_forward_soft: pmax length does not match K");

    if (trace) {
        trace->z.assign(1, x);
        trace->gpow.assign(static_cast<std::size_t>(depth), {});
        trace->preact.assign(static_cast<std::size_t>(depth), {});
        trace->act.assign(static_cast<std::size_t>(depth), {});
    }

    Vec z = x;
    Vec power, tmp;
    std::vector<Vec> gpow(static_cast<std::size_t>(taps));
    for (int l = 0; l < depth; ++l) {
        // iterated powers G^n z_{l-1} are shared by every module
        power = z;
        for (int n = 0; n < taps; ++n) {
            matvec(g.gains, power, tmp);
            power.swap(tmp);
            gpow[n] = power;
        }
        if (trace) trace->gpow[l] = gpow;

        const bool last = (l == depth - 1);
        Vec mix(static_cast<std::size_t>(k), 0.0);
        for (int i = 0; i < m; ++i) {
            Vec v(static_cast<std::size_t>(k), 0.0);
            for (int n = 0; n < taps; ++n) {
                const double tap = mods.modules[i].taps[n];
                for (int q = 0; q < k; ++q) v[q] += tap * gpow[n][q];
            }
            Vec a(static_cast<std::size_t>(k));
            if (last) {
                for (int q = 0; q < k; ++q) a[q] = sigmoid(v[q]);
            } else {
                for (int q = 0; q < k; ++q) a[q] = v[q] > 0.0 ? v[q] : 0.0;
            }
            const double w = s.s_tilde(l, i);
            for (int q = 0; q < k; ++q) mix[q] += w * a[q];
            if (trace) {
                trace->preact[l].push_back(std::move(v));
                trace->act[l].push_back(std::move(a));
            }
        }
        if (trace) trace->z.push_back(mix);
        z.swap(mix);
    }
    for (int q = 0; q < k; ++q) z[q] *= pmax_at(mods.pmax, q);
    return PowerVector{std::move(z)};
}

PowerVector modular_forward_soft(const ModuleSet& mods, const SoftAssignment& s,
                                 const ChannelRealization& g, ModularTrace* trace) {
    return modular_forward_soft(mods, s, g, ones(g.k()), trace);
}

PowerVector modular_forward_hard(const ModuleSet& mods, const HardAssignment& s,
                                 const ChannelRealization& g, const Vec& x) {
    return regnn_forward(assemble(mods, s), g, x);
}

PowerVector modular_forward_hard(const ModuleSet& mods, const HardAssignment& s,
                                 const ChannelRealization& g) {
    return regnn_forward(assemble(mods, s), g, ones(g.k()));
}

ModularGrads ModularGrads::zeros(int modules, int taps, int depth) {
    ModularGrads g;
    g.module_taps.assign(static_cast<std::size_t>(modules),
                         Vec(static_cast<std::size_t>(taps), 0.0));
    g.mixture = Mat(depth, modules);
    return g;
}

void ModularGrads::accumulate(const ModularGrads& other, double weight) {
    for (std::size_t i = 0; i < module_taps.size(); ++i)
        for (std::size_t n = 0; n < module_taps[i].size(); ++n)
            module_taps[i][n] += weight * other.module_taps[i][n];
    for (std::size_t i = 0; i < mixture.a.size(); ++i) mixture.a[i] += weight * other.mixture.a[i];
}

void ModularGrads::scale(double s) {
    for (auto& m : module_taps)
        for (double& v : m) v *= s;
    for (double& v : mixture.a) v *= s;
}

ModularGrads modular_backward_soft(const ModuleSet& mods, const SoftAssignment& s,
                                   const ChannelRealization& g, const ModularTrace& trace,
                                   const Vec& grad_p) {
    const int k = g.k();
    const int depth = s.depth();
    const int m = mods.size();
    const int taps = mods.taps_per_module();
    if (static_cast<int>(trace.z.size()) != depth + 1 ||
        static_cast<int>(trace.gpow.size()) != depth ||
        static_cast<int>(trace.preact.size()) != depth)
        throw TraceMismatch("modular trace does not match assignment depth");
    if (static_cast<int>(grad_p.size()) != k)
        throw TraceMismatch("grad_p length does not match K");

    ModularGrads grads = ModularGrads::zeros(m, taps, depth);

    // dJ/dz_L through the pmax scaling
    Vec dz(static_cast<std::size_t>(k));
    for (int q = 0; q < k; ++q) dz[q] = grad_p[q] * pmax_at(mods.pmax, q);

    Vec dv(static_cast<std::size_t>(k)), t, tmp;
    std::vector<Vec> qn(static_cast<std::size_t>(taps));
    for (int l = depth - 1; l >= 0; --l) {
        const bool last = (l == depth - 1);
        for (auto& q : qn) q.assign(static_cast<std::size_t>(k), 0.0);
        for (int i = 0; i < m; ++i) {
            const double w = s.s_tilde(l, i);
            const Vec& pre = trace.preact[l][i];
            const Vec& act = trace.act[l][i];
            grads.mixture(l, i) = dot(dz, act);
            for (int q = 0; q < k; ++q) {
                const double da = w * dz[q];
                dv[q] = last ? da * act[q] * (1.0 - act[q]) : (pre[q] > 0.0 ? da : 0.0);
            }
            for (int n = 0; n < taps; ++n)
                grads.module_taps[i][n] += dot(dv, trace.gpow[l][n]);
            if (l > 0) {
                for (int n = 0; n < taps; ++n) {
                    const double tap = mods.modules[i].taps[n];
                    for (int q = 0; q < k; ++q) qn[n][q] += tap * dv[q];
                }
            }
        }
        if (l == 0) break;
        // dJ/dz_{l-1} = sum_n (G^T)^n q_n, Horner form
        t = qn[static_cast<std::size_t>(taps - 1)];
        for (int n = taps - 2; n >= 0; --n) {
            matvec_t(g.gains, t, tmp);
            for (int q = 0; q < k; ++q) tmp[q] += qn[n][q];
            t.swap(tmp);
        }
        matvec_t(g.gains, t, tmp);
        dz.swap(tmp);
    }
    return grads;
}

Mat eta_grad_from_soft(const SoftAssignment& s, const Mat& mixture_grad, double lambda) {
    if (!s.s_tilde.same_shape(mixture_grad))
        throw ShapeMismatch("eta_grad_from_soft: shape mismatch");
    Mat out(s.depth(), s.modules());
    for (int l = 0; l < s.depth(); ++l) {
        double inner = 0.0;
        for (int i = 0; i < s.modules(); ++i) inner += mixture_grad(l, i) * s.s_tilde(l, i);
        for (int i = 0; i < s.modules(); ++i)
            out(l, i) = s.s_tilde(l, i) * (mixture_grad(l, i) - inner) / lambda;
    }
    return out;
}

SoftBatchResult soft_batch_objective_and_grad(const ModuleSet& mods, const SoftAssignment& s,
                                              const PeriodDataset::Batch& batch, double sigma2) {
    if (batch.empty()) throw EmptyBatch("soft_batch_objective_and_grad: empty batch");
    SoftBatchResult res;
    res.grads = ModularGrads::zeros(mods.size(), mods.taps_per_module(), s.depth());
    ModularTrace trace;
    for (const ChannelRealization* g : batch) {
        const PowerVector p = modular_forward_soft(mods, s, *g, &trace);
        res.objective += sum_rate(*g, p, sigma2);
        const Vec gp = sum_rate_grad_p(*g, p, sigma2);
        res.grads.accumulate(modular_backward_soft(mods, s, *g, trace, gp), 1.0);
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    res.objective *= inv;
    res.grads.scale(inv);
    return res;
}

double mean_sum_rate_hard(const ModuleSet& mods, const HardAssignment& s,
                          const PeriodDataset::Batch& batch, double sigma2) {
    if (batch.empty()) throw EmptyBatch("mean_sum_rate_hard: empty batch");
    const ReGnnParams params = assemble(mods, s);
    double total = 0.0;
    for (const ChannelRealization* g : batch)
        total += sum_rate(*g, regnn_forward(params, *g), sigma2);
    return total / static_cast<double>(batch.size());
}

namespace {

double mean_row_entropy(const AssignmentLogits& eta) {
    double total = 0.0;
    const int m = eta.modules();
    Vec e(static_cast<std::size_t>(m));
    for (int l = 0; l < eta.depth(); ++l) {
        double hi = -1e300;
        for (int i = 0; i < m; ++i) hi = std::max(hi, eta.eta(l, i));
        double z = 0.0;
        for (int i = 0; i < m; ++i) {
            e[i] = std::exp(eta.eta(l, i) - hi);
            z += e[i];
        }
        double h = 0.0;
        for (int i = 0; i < m; ++i) {
            const double p = e[i] / z;
            if (p > 0.0) h -= p * std::log(p);
        }
        total += h;
    }
    return total / static_cast<double>(eta.depth());
}

} // namespace

AssignmentLogits adapt_logits(const ModuleSet& mods, AssignmentLogits eta,
                              const PeriodDataset::Batch& slots, int steps, double gamma,
                              const TemperatureSchedule& schedule, RngStream& rng, double sigma2,
                              std::vector<AdaptLogRow>* log) {
    if (steps > 0 && slots.empty()) throw EmptyBatch("adapt_logits: empty slot batch");
    for (int step = 0; step < steps; ++step) {
        const double lambda = schedule.at(step);
        const Mat eps = gumbel_noise(eta.depth(), eta.modules(), rng);
        const SoftAssignment soft = sample_soft(eta, eps, lambda);
        const SoftBatchResult res = soft_batch_objective_and_grad(mods, soft, slots, sigma2);
        const Mat eg = eta_grad_from_soft(soft, res.grads.mixture, lambda);
        for (std::size_t i = 0; i < eta.eta.a.size(); ++i) eta.eta.a[i] += gamma * eg.a[i];
        if (log) log->push_back({step, lambda, res.objective, mean_row_entropy(eta)});
    }
    return eta;
}

Vec flatten_modules(const ModuleSet& mods) {
    Vec flat;
    flat.reserve(static_cast<std::size_t>(mods.size()) * mods.taps_per_module());
    for (const auto& m : mods.modules) flat.insert(flat.end(), m.taps.begin(), m.taps.end());
    return flat;
}

void unflatten_modules(const Vec& flat, ModuleSet& mods) {
    std::size_t i = 0;
    for (auto& m : mods.modules)
        for (double& t : m.taps) t = flat[i++];
}

void modules_outer_step(ModuleSet& mods, std::span<const AssignmentLogits> adapted,
                        std::span<const PeriodDataset* const> periods, double lambda,
                        OptimizerState& opt, RngStream& rng, double sigma2) {
    if (adapted.size() != periods.size())
        throw ShapeMismatch("modules_outer_step: one adapted logit set per period required");
    if (periods.empty()) throw EmptyBatch("modules_outer_step: no periods");
    ModularGrads mean = ModularGrads::zeros(mods.size(), mods.taps_per_module(),
                                            adapted.front().depth());
    for (std::size_t t = 0; t < periods.size(); ++t) {
        RngStream prng = rng.child(static_cast<std::uint64_t>(t));
        const Mat eps = gumbel_noise(adapted[t].depth(), adapted[t].modules(), prng);
        const SoftAssignment soft = sample_soft(adapted[t], eps, lambda);
        const SoftBatchResult res =
            soft_batch_objective_and_grad(mods, soft, periods[t]->test_batch(), sigma2);
        mean.accumulate(res.grads, 1.0);
    }
    mean.scale(1.0 / static_cast<double>(periods.size()));
    Vec theta = flatten_modules(mods);
    Vec grad;
    grad.reserve(theta.size());
    for (const auto& m : mean.module_taps) grad.insert(grad.end(), m.begin(), m.end());
    opt.step(theta, grad);
    unflatten_modules(theta, mods);
}

namespace {

std::vector<const PeriodDataset*> select_periods(std::span<const PeriodDataset> meta_data,
                                                 int meta_batch, RngStream& rng) {
    const int n = static_cast<int>(meta_data.size());
    std::vector<const PeriodDataset*> out;
    if (meta_batch <= 0 || meta_batch >= n) {
        out.reserve(static_cast<std::size_t>(n));
        for (const auto& p : meta_data) out.push_back(&p);
        return out;
    }
    // sample without replacement, order preserved
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[i] = i;
    for (int i = 0; i < meta_batch; ++i) {
        const int j = rng.uniform_int(i, n - 1);
        std::swap(idx[i], idx[j]);
    }
    std::vector<int> chosen(idx.begin(), idx.begin() + meta_batch);
    std::sort(chosen.begin(), chosen.end());
    for (int i : chosen) out.push_back(&meta_data[static_cast<std::size_t>(i)]);
    return out;
}

} // namespace

ModuleSet meta_train_modular(std::span<const PeriodDataset> meta_data, const MetaConfig& cfg,
                             const ModularTrainConfig& mcfg, const Vec& pmax,
                             const RngStream& root, double sigma2,
                             std::vector<TrainLogRow>* log, bool timing) {
    cfg.validate();
    mcfg.schedule.validate();
    if (meta_data.empty()) throw EmptyBatch("meta_train_modular: no periods");
    const auto start = std::chrono::steady_clock::now();

    RngStream init_rng = root.child("init");
    ModuleSet mods = init_module_set(mcfg.modules, mcfg.taps, pmax, init_rng);
    OptimizerState outer{OptMethod::adam, cfg.delta};
    const RngStream run_root = root.child("train");

    for (int iter = 0; iter < cfg.n_meta_iters; ++iter) {
        const double lambda = mcfg.schedule.at(iter);
        const TemperatureSchedule fixed = TemperatureSchedule::constant(lambda);
        std::vector<const PeriodDataset*> periods;
        std::vector<AssignmentLogits> etas;
        for (int rep = 0; rep < cfg.outer_steps_per_iter; ++rep) {
            RngStream cycle = run_root.child(static_cast<std::uint64_t>(iter))
                                  .child(static_cast<std::uint64_t>(rep));
            RngStream sel = cycle.child("select");
            periods = select_periods(meta_data, cfg.meta_batch, sel);
            etas.clear();
            etas.reserve(periods.size());
            for (std::size_t t = 0; t < periods.size(); ++t) {
                RngStream prng = cycle.child("adapt").child(static_cast<std::uint64_t>(t));
                etas.push_back(adapt_logits(mods,
                                            AssignmentLogits::zeros(mcfg.depth, mcfg.modules),
                                            periods[t]->train_batch(), cfg.inner_steps, cfg.gamma,
                                            fixed, prng, sigma2));
            }
            RngStream orng = cycle.child("outer");
            modules_outer_step(mods, etas, periods, lambda, outer, orng, sigma2);
        }
        if (log) {
            double obj = 0.0;
            for (std::size_t t = 0; t < periods.size(); ++t)
                obj += mean_sum_rate_hard(mods, select_mode(etas[t]), periods[t]->test_batch(),
                                          sigma2);
            obj /= static_cast<double>(periods.size());
            const long ms =
                timing ? std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - start)
                             .count()
                       : 0;
            log->push_back({iter, obj, ms});
        }
    }
    return mods;
}

ModuleSet init_module_set(int modules, int taps, const Vec& pmax, RngStream& rng) {
    const double a = 1.0 / std::sqrt(static_cast<double>(taps));
    ModuleSet m;
    m.modules.resize(static_cast<std::size_t>(modules));
    for (auto& mod : m.modules) {
        // nonnegative edge taps, same reasoning as init_regnn_params
        mod.taps.resize(static_cast<std::size_t>(taps));
        for (std::size_t n = 0; n < mod.taps.size(); ++n) {
            const bool edge = (n == 0 || n + 1 == mod.taps.size());
            mod.taps[n] = edge ? rng.uniform_range(0.0, a) : rng.uniform_range(-a, a);
        }
    }
    m.pmax = pmax;
    m.validate();
    return m;
}

HardAssignment runtime_adapt_modular(const ModuleSet& mods, int depth,
                                     const PeriodDataset::Batch& budget_slots, int steps,
                                     double gamma, const TemperatureSchedule& schedule,
                                     RngStream& rng, double sigma2,
                                     std::vector<AdaptLogRow>* log) {
    AssignmentLogits eta = AssignmentLogits::zeros(depth, mods.size());
    if (!budget_slots.empty() && steps > 0)
        eta = adapt_logits(mods, eta, budget_slots, steps, gamma, schedule, rng, sigma2, log);
    return select_mode(eta);
}

std::pair<HardAssignment, double> exhaustive_assignment(const ModuleSet& mods, int depth,
                                                        const PeriodDataset::Batch& slots,
                                                        double sigma2, std::int64_t cap) {
    mods.validate();
    const int m = mods.size();
    std::int64_t count = 1;
    for (int l = 0; l < depth; ++l) {
        count *= m;
        if (count > cap)
            throw SearchSpaceTooLarge("M^L = " + std::to_string(m) + "^" + std::to_string(depth) +
                                      " exceeds cap " + std::to_string(cap));
    }
    if (slots.empty()) throw EmptyBatch("exhaustive_assignment: empty slot batch");

    HardAssignment current;
    current.s.assign(static_cast<std::size_t>(depth), 0);
    HardAssignment best = current;
    double best_value = mean_sum_rate_hard(mods, current, slots, sigma2);
    // odometer enumeration, last layer fastest; strict > keeps the
    // lexicographically smallest argmax
    while (true) {
        int pos = depth - 1;
        while (pos >= 0 && current.s[pos] == m - 1) {
            current.s[pos] = 0;
            --pos;
        }
        if (pos < 0) break;
        ++current.s[pos];
        const double value = mean_sum_rate_hard(mods, current, slots, sigma2);
        if (value > best_value) {
            best_value = value;
            best = current;
        }
    }
    return {best, best_value};
}

} // namespace gnnpower
