#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "gnnpower/analysis.hpp"
#include "gnnpower/fomaml.hpp"
#include "gnnpower/modular.hpp"
#include "gnnpower/netsim.hpp"

namespace gnnpower {

enum class SweepVar { adaptation_samples, adaptation_iters, meta_periods, interference_radius };

struct MethodSpec {
    enum class Kind { joint, fomaml, modular, modular_exhaustive };
    Kind kind = Kind::joint;
    int modules = 0; // for the modular kinds

    /// CSV label: joint, fomaml, modular-m<M>, modular-exhaustive-m<M>.
    std::string label() const;
    /// Methods sharing a trained artifact share this key (exhaustive reuses
    /// the module set trained for the plain modular method of the same M).
    std::string train_key() const;
};

struct ExperimentConfig {
    std::string experiment_id = "experiment";
    std::uint64_t seed = 1;
    std::filesystem::path out_dir = "out";
    int threads = 0;   // 0 = hardware concurrency
    bool timing = false;

    SimConfig sim;
    int meta_periods = 10;

    int layers = 2;
    int filter_taps = 4;

    double inner_lr = 1e-4; // task-specific steps during meta-training
    double adapt_lr = 1e-4; // runtime adaptation steps
    double outer_lr = 1e-4;
    int meta_iters = 200;
    int outer_steps_per_iter = 5;
    int fomaml_inner_steps = 5;
    int modular_inner_steps = 2;
    int jl_steps = 0; // 0 = meta_iters * outer_steps_per_iter
    int batch_size = 64;
    int modules = 6;
    TemperatureSchedule schedule;

    int adaptation_samples = 10;
    int fomaml_adapt_steps = 5;
    int modular_adapt_steps = 2;
    int jl_adapt_steps = 5;
    int adapt_repeats = 1;
    std::int64_t exhaustive_cap = 4096;

    int trials = 10;
    SweepVar sweep = SweepVar::adaptation_samples;
    std::vector<double> sweep_values = {10};
    std::vector<MethodSpec> methods = {{MethodSpec::Kind::joint, 0},
                                       {MethodSpec::Kind::fomaml, 0},
                                       {MethodSpec::Kind::modular, 6}};
    std::set<std::string> emit; // subset of {"gain","cka","histogram"}

    int effective_jl_steps() const { return jl_steps > 0 ? jl_steps : meta_iters * outer_steps_per_iter; }
    void validate() const;
};

/// Flat key = value text; unknown keys and malformed values raise ParseError
/// with file/line diagnostics, inconsistent values raise ValidationError.
/// Omitted keys take the defaults above.
ExperimentConfig parse_config(const std::filesystem::path& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin = "<text>");

/// Built-in experiment definitions fig4..fig9.
ExperimentConfig preset(const std::string& name);

struct ResultRow {
    std::string experiment;
    double sweep_value = 0.0;
    std::string method;
    int trial = 0;
    double mean_test_sum_rate = 0.0;
    long wall_ms = 0;
};

struct ExperimentOutput {
    std::vector<ResultRow> rows;
    /// mean-over-trials CKA matrix, keyed by method label then sweep value
    std::map<std::string, std::map<double, Mat>> cka;
    /// selection histograms per sweep value plus the run-wide aggregate
    std::map<std::string, std::map<double, Vec>> histograms;
    std::map<std::string, Vec> histogram_all;
    /// relative rate gain vs joint learning, one curve per meta method
    std::map<std::string, std::vector<GainRow>> gains;
};

/// Runs the full trial x sweep x method grid, writing results.csv, rates.csv,
/// per-method training logs, checkpoints, and any emit artifacts under
/// out_dir. Byte-identical outputs for identical config and seed.
ExperimentOutput run_experiment(const ExperimentConfig& cfg);

const char* sweep_name(SweepVar v);

} // namespace gnnpower
