#pragma once

#include <span>
#include <vector>

#include "gnnpower/regnn.hpp"

namespace gnnpower {

/// One row of a training log CSV.
struct TrainLogRow {
    int iter = 0;
    double objective = 0.0;
    long wall_ms = 0;
};

/// Meta-training schedule shared by both meta-learners. One meta-iteration
/// performs outer_steps_per_iter full cycles; a cycle adapts task-specific
/// parameters on every selected period and applies one shared update.
struct MetaConfig {
    int n_meta_iters = 200;
    int inner_steps = 5;
    int outer_steps_per_iter = 5;
    double gamma = 1e-4; // task-specific (inner) step size, plain GD
    double delta = 1e-4; // shared (outer) step size, Adam
    int meta_batch = 0;  // periods per cycle; 0 = all

    void validate() const;
};

/// Plain-GD ascent from `init` on the mean sum-rate of the given slots.
/// steps == 0 returns the initialization unchanged.
ReGnnParams inner_adapt(const ReGnnParams& init, const PeriodDataset::Batch& train, int steps,
                        double gamma, double sigma2);

/// One first-order meta-cycle: adapt each selected period from phi0 on its
/// train slots, evaluate the test-slot gradient at the adapted parameters,
/// average over periods, and take one shared ascent step. Returns the mean
/// adapted test objective (before the update).
double fomaml_meta_step(ReGnnParams& phi0, std::span<const PeriodDataset* const> periods,
                        const MetaConfig& cfg, OptimizerState& outer, double sigma2);
double fomaml_meta_step(ReGnnParams& phi0, std::span<const PeriodDataset> periods,
                        const MetaConfig& cfg, OptimizerState& outer, double sigma2);

/// Algorithm: n_meta_iters iterations of outer_steps_per_iter meta-cycles.
ReGnnParams meta_train_fomaml(std::span<const PeriodDataset> meta_data, const MetaConfig& cfg,
                              int depth, int taps, const Vec& pmax, const RngStream& root,
                              double sigma2, std::vector<TrainLogRow>* log = nullptr,
                              bool timing = false);

struct JointConfig {
    int steps = 1000;
    int batch_size = 64;
    double lr = 1e-4; // Adam
};

/// Pooled-data baseline: one parameter set trained by ascent on mini-batches
/// of (period, slot) pairs sampled uniformly from all periods' train slots.
ReGnnParams joint_train(std::span<const PeriodDataset> meta_data, const JointConfig& cfg,
                        int depth, int taps, const Vec& pmax, const RngStream& root,
                        double sigma2, std::vector<TrainLogRow>* log = nullptr,
                        bool timing = false);

/// Runtime fine-tuning on the adaptation slots only; an empty budget leaves
/// the parameters unchanged.
ReGnnParams runtime_finetune(const ReGnnParams& params, const PeriodDataset::Batch& adaptation,
                             int steps, double gamma, double sigma2);

} // namespace gnnpower
