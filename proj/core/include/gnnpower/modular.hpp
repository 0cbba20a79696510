#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "gnnpower/fomaml.hpp"
#include "gnnpower/gumbel.hpp"
#include "gnnpower/regnn.hpp"

namespace gnnpower {

/// Shared repository of M graph filters, any of which may serve any layer.
struct ModuleSet {
    std::vector<FilterTaps> modules;
    Vec pmax;

    int size() const { return static_cast<int>(modules.size()); }
    int taps_per_module() const { return modules.empty() ? 0 : modules.front().size(); }
    void validate() const;
};

/// Plain parameters assembled from a hard layer-to-module assignment.
ReGnnParams assemble(const ModuleSet& mods, const HardAssignment& s);

/// Reverse-mode cache for the soft modular forward: per layer the shared
/// iterated powers G^n z_{l-1} plus every module's pre-activation and
/// post-activation output.
struct ModularTrace {
    std::vector<Vec> z;                        // mixture activations, z[0] = input
    std::vector<std::vector<Vec>> gpow;        // [l][n] = G^(n+1) z_l
    std::vector<std::vector<Vec>> preact;      // [l][i]
    std::vector<std::vector<Vec>> act;         // [l][i] = sigma(preact), pre-pmax on last layer
};

/// Soft modular forward pass: each layer is the convex mixture, with
/// weights s_tilde_l, of the modules' post-activation outputs; the output
/// layer mixes sigmoid outputs and then scales by pmax.
PowerVector modular_forward_soft(const ModuleSet& mods, const SoftAssignment& s,
                                 const ChannelRealization& g, const Vec& x,
                                 ModularTrace* trace = nullptr);
PowerVector modular_forward_soft(const ModuleSet& mods, const SoftAssignment& s,
                                 const ChannelRealization& g, ModularTrace* trace = nullptr);

/// Hard modular forward: identical to the plain forward on assemble(mods, s).
PowerVector modular_forward_hard(const ModuleSet& mods, const HardAssignment& s,
                                 const ChannelRealization& g, const Vec& x);
PowerVector modular_forward_hard(const ModuleSet& mods, const HardAssignment& s,
                                 const ChannelRealization& g);

/// Gradients of one slot's objective through the soft forward.
struct ModularGrads {
    std::vector<Vec> module_taps; // [i][n]
    Mat mixture;                  // dJ/d s_tilde, L x M

    static ModularGrads zeros(int modules, int taps, int depth);
    void accumulate(const ModularGrads& other, double weight);
    void scale(double s);
};

ModularGrads modular_backward_soft(const ModuleSet& mods, const SoftAssignment& s,
                                   const ChannelRealization& g, const ModularTrace& trace,
                                   const Vec& grad_p);

/// Pull a mixture gradient back through row-wise softmax((eta + eps)/lambda).
Mat eta_grad_from_soft(const SoftAssignment& s, const Mat& mixture_grad, double lambda);

/// Mean objective and gradients over a batch at a fixed soft assignment.
struct SoftBatchResult {
    double objective = 0.0;
    ModularGrads grads;
};
SoftBatchResult soft_batch_objective_and_grad(const ModuleSet& mods, const SoftAssignment& s,
                                              const PeriodDataset::Batch& batch, double sigma2);

double mean_sum_rate_hard(const ModuleSet& mods, const HardAssignment& s,
                          const PeriodDataset::Batch& batch, double sigma2);

/// One row per adaptation step of the assignment-logit ascent.
struct AdaptLogRow {
    int step = 0;
    double temperature = 0.0;
    double train_sum_rate = 0.0;
    double entropy = 0.0; // mean softmax(eta) row entropy, nats
};

/// Plain-GD ascent on the logits: per step one fresh Gumbel draw, one soft
/// assignment at the scheduled temperature, exact backprop into eta.
/// The module set is read-only throughout.
AssignmentLogits adapt_logits(const ModuleSet& mods, AssignmentLogits eta,
                              const PeriodDataset::Batch& slots, int steps, double gamma,
                              const TemperatureSchedule& schedule, RngStream& rng, double sigma2,
                              std::vector<AdaptLogRow>* log = nullptr);

Vec flatten_modules(const ModuleSet& mods);
void unflatten_modules(const Vec& flat, ModuleSet& mods);

/// First-order outer update: for each period draw one Gumbel sample, form
/// the soft assignment from its adapted logits (treated as constants), take
/// the mean over periods of the test-slot gradients with respect to every
/// module's taps, and apply one ascent step.
void modules_outer_step(ModuleSet& mods, std::span<const AssignmentLogits> adapted,
                        std::span<const PeriodDataset* const> periods, double lambda,
                        OptimizerState& opt, RngStream& rng, double sigma2);

struct ModularTrainConfig {
    int modules = 6;
    int depth = 2;
    int taps = 4;
    TemperatureSchedule schedule;
};

/// Alternating meta-training: each cycle adapts fresh logits per period on
/// its train slots at the current temperature, then updates the module set
/// on the test slots; the temperature anneals once per meta-iteration.
ModuleSet meta_train_modular(std::span<const PeriodDataset> meta_data, const MetaConfig& cfg,
                             const ModularTrainConfig& mcfg, const Vec& pmax,
                             const RngStream& root, double sigma2,
                             std::vector<TrainLogRow>* log = nullptr, bool timing = false);

/// Runtime adaptation against a frozen module set: logits start at zero,
/// ascend on the budgeted slots with per-step temperature annealing, and
/// the mode of the final distribution is returned.
HardAssignment runtime_adapt_modular(const ModuleSet& mods, int depth,
                                     const PeriodDataset::Batch& budget_slots, int steps,
                                     double gamma, const TemperatureSchedule& schedule,
                                     RngStream& rng, double sigma2,
                                     std::vector<AdaptLogRow>* log = nullptr);

/// Enumerates all M^L assignments in lexicographic order and returns the
/// train-slot argmax with its value; ties keep the first (smallest) vector.
std::pair<HardAssignment, double> exhaustive_assignment(const ModuleSet& mods, int depth,
                                                        const PeriodDataset::Batch& slots,
                                                        double sigma2,
                                                        std::int64_t cap = 4096);

/// Modules i.i.d. uniform on [-1/sqrt(N), 1/sqrt(N)], independent draws.
ModuleSet init_module_set(int modules, int taps, const Vec& pmax, RngStream& rng);

} // namespace gnnpower
