#include "gnnpower/fomaml.hpp"

#include <algorithm>
#include <chrono>

#include "gnnpower/errors.hpp"
#include "gnnpower/modular.hpp"

namespace gnnpower {

void MetaConfig::validate() const {
    if (n_meta_iters < 0) throw ValidationError("n_meta_iters must be >= 0");
    if (inner_steps < 0) throw ValidationError("inner_steps must be >= 0");
    if (outer_steps_per_iter < 1) throw ValidationError("outer_steps_per_iter must be >= 1");
    if (!(gamma > 0.0) || !(delta > 0.0)) throw ValidationError("step sizes must be positive");
    if (meta_batch < 0) throw ValidationError("meta_batch must be >= 0");
}

ReGnnParams inner_adapt(const ReGnnParams& init, const PeriodDataset::Batch& train, int steps,
                        double gamma, double sigma2) {
    if (steps == 0) return init;
    if (train.empty()) throw EmptyBatch("inner_adapt: empty train batch");
    ReGnnParams params = init;
    for (int s = 0; s < steps; ++s) {
        const auto [obj, grads] = batch_objective_and_grad(params, train, sigma2);
        (void)obj;
        for (int l = 0; l < params.depth(); ++l)
            for (int n = 0; n < params.taps_per_layer(); ++n)
                params.layers[l].taps[n] += gamma * grads.layers[l][n];
    }
    return params;
}

double fomaml_meta_step(ReGnnParams& phi0, std::span<const PeriodDataset* const> periods,
                        const MetaConfig& cfg, OptimizerState& outer, double sigma2) {
    if (periods.empty()) throw EmptyBatch("fomaml_meta_step: no periods");
    ParamGrads mean = ParamGrads::zeros(phi0.depth(), phi0.taps_per_layer());
    double mean_obj = 0.0;
    for (const PeriodDataset* period : periods) {
        const ReGnnParams adapted =
            inner_adapt(phi0, period->train_batch(), cfg.inner_steps, cfg.gamma, sigma2);
        const auto [obj, grads] =
            batch_objective_and_grad(adapted, period->test_batch(), sigma2);
        mean.accumulate(grads, 1.0);
        mean_obj += obj;
    }
    const double inv = 1.0 / static_cast<double>(periods.size());
    mean.scale(inv);
    optimizer_step(outer, phi0, mean);
    return mean_obj * inv;
}

double fomaml_meta_step(ReGnnParams& phi0, std::span<const PeriodDataset> periods,
                        const MetaConfig& cfg, OptimizerState& outer, double sigma2) {
    std::vector<const PeriodDataset*> view;
    view.reserve(periods.size());
    for (const PeriodDataset& p : periods) view.push_back(&p);
    return fomaml_meta_step(phi0, view, cfg, outer, sigma2);
}

namespace {

std::vector<const PeriodDataset*> pick_periods(std::span<const PeriodDataset> meta_data,
                                               int meta_batch, RngStream& rng) {
    const int n = static_cast<int>(meta_data.size());
    std::vector<const PeriodDataset*> out;
    if (meta_batch <= 0 || meta_batch >= n) {
        for (const auto& p : meta_data) out.push_back(&p);
        return out;
    }
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[i] = i;
    for (int i = 0; i < meta_batch; ++i) std::swap(idx[i], idx[rng.uniform_int(i, n - 1)]);
    std::vector<int> chosen(idx.begin(), idx.begin() + meta_batch);
    std::sort(chosen.begin(), chosen.end());
    for (int i : chosen) out.push_back(&meta_data[static_cast<std::size_t>(i)]);
    return out;
}

long elapsed_ms(const std::chrono::steady_clock::time_point& start) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - start)
        .count();
}

} // namespace

ReGnnParams meta_train_fomaml(std::span<const PeriodDataset> meta_data, const MetaConfig& cfg,
                              int depth, int taps, const Vec& pmax, const RngStream& root,
                              double sigma2, std::vector<TrainLogRow>* log, bool timing) {
    cfg.validate();
    if (meta_data.empty()) throw EmptyBatch("meta_train_fomaml: no periods");
    const auto start = std::chrono::steady_clock::now();

    RngStream init_rng = root.child("init");
    ReGnnParams phi0 = init_regnn_params(depth, taps, pmax, init_rng);
    OptimizerState outer{OptMethod::adam, cfg.delta};
    const RngStream run_root = root.child("train");

    for (int iter = 0; iter < cfg.n_meta_iters; ++iter) {
        double obj = 0.0;
        for (int rep = 0; rep < cfg.outer_steps_per_iter; ++rep) {
            RngStream sel = run_root.child(static_cast<std::uint64_t>(iter))
                                .child(static_cast<std::uint64_t>(rep));
            const auto periods = pick_periods(meta_data, cfg.meta_batch, sel);
            obj = fomaml_meta_step(phi0, periods, cfg, outer, sigma2);
        }
        if (log) log->push_back({iter, obj, timing ? elapsed_ms(start) : 0});
    }
    return phi0;
}

ReGnnParams joint_train(std::span<const PeriodDataset> meta_data, const JointConfig& cfg,
                        int depth, int taps, const Vec& pmax, const RngStream& root,
                        double sigma2, std::vector<TrainLogRow>* log, bool timing) {
    if (meta_data.empty()) throw EmptyBatch("joint_train: no periods");
    if (cfg.batch_size < 1) throw ValidationError("joint_train: batch_size must be >= 1");
    const auto start = std::chrono::steady_clock::now();

    PeriodDataset::Batch pool;
    for (const PeriodDataset& p : meta_data)
        for (const ChannelRealization* g : p.train_batch()) pool.push_back(g);
    if (pool.empty()) throw EmptyBatch("joint_train: no train slots");

    RngStream init_rng = root.child("init");
    ReGnnParams params = init_regnn_params(depth, taps, pmax, init_rng);
    OptimizerState opt{OptMethod::adam, cfg.lr};
    RngStream batch_rng = root.child("batch");

    const int bsz = std::min<int>(cfg.batch_size, static_cast<int>(pool.size()));
    PeriodDataset::Batch batch(static_cast<std::size_t>(bsz));
    for (int step = 0; step < cfg.steps; ++step) {
        for (int i = 0; i < bsz; ++i)
            batch[i] = pool[static_cast<std::size_t>(
                batch_rng.uniform_int(0, static_cast<int>(pool.size()) - 1))];
        const auto [obj, grads] = batch_objective_and_grad(params, batch, sigma2);
        optimizer_step(opt, params, grads);
        if (log) log->push_back({step, obj, timing ? elapsed_ms(start) : 0});
    }
    return params;
}

ReGnnParams runtime_finetune(const ReGnnParams& params, const PeriodDataset::Batch& adaptation,
                             int steps, double gamma, double sigma2) {
    if (adaptation.empty() || steps == 0) return params;
    return inner_adapt(params, adaptation, steps, gamma, sigma2);
}

} // namespace gnnpower
