// Command-line harness for REGNN power control: data generation, training,
// meta-training, runtime adaptation, evaluation, and preset experiments.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "gnnpower/analysis.hpp"
#include "gnnpower/checkpoint.hpp"
#include "gnnpower/dataset_io.hpp"
#include "gnnpower/errors.hpp"
#include "gnnpower/experiment.hpp"
#include "gnnpower/fomaml.hpp"
#include "gnnpower/modular.hpp"

namespace fs = std::filesystem;
using namespace gnnpower;

namespace {

struct GlobalOpts {
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    int threads = 0;
    bool timing = false;
};

SimConfig sim_from_config_file(const std::string& config_path, std::uint64_t seed) {
    ExperimentConfig cfg =
        config_path.empty() ? ExperimentConfig{} : parse_config(config_path);
    cfg.sim.seed = seed;
    return cfg.sim;
}

MetaConfig meta_from_experiment(const ExperimentConfig& cfg, bool modular) {
    return MetaConfig{cfg.meta_iters, modular ? cfg.modular_inner_steps : cfg.fomaml_inner_steps,
                      cfg.outer_steps_per_iter, cfg.inner_lr, cfg.outer_lr, 0};
}

const PeriodDataset& pick_period(const std::vector<PeriodDataset>& periods, int index) {
    if (index < 0 || index >= static_cast<int>(periods.size()))
        throw ValidationError("period index out of range (dataset has " +
                              std::to_string(periods.size()) + " periods)");
    return periods[static_cast<std::size_t>(index)];
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"REGNN power control with black-box and modular meta-learning"};
    app.require_subcommand(1);
    app.fallthrough(); // global flags may follow the subcommand

    GlobalOpts g;
    app.add_option("--seed", g.seed, "global RNG seed");
    app.add_option("--out-dir", g.out_dir, "output directory");
    app.add_option("--threads", g.threads, "worker threads (0 = hardware)");
    app.add_flag("--timing", g.timing, "record wall-clock columns in CSV outputs");

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a meta-dataset fixture");
    std::string gen_config, gen_out = "dataset.txt";
    int gen_periods = 10;
    gen->add_option("--config", gen_config, "experiment config supplying channel settings");
    gen->add_option("--periods", gen_periods, "number of periods");
    gen->add_option("--out", gen_out, "output dataset path")->required();

    // train-joint
    auto* tj = app.add_subcommand("train-joint", "train the pooled-data baseline");
    std::string tj_config, tj_data, tj_out = "joint.params", tj_log;
    tj->add_option("--config", tj_config, "experiment config for hyperparameters");
    tj->add_option("--data", tj_data, "dataset file")->required();
    tj->add_option("--out", tj_out, "checkpoint path");
    tj->add_option("--log", tj_log, "training-log CSV path");

    // meta-train-fomaml
    auto* tf = app.add_subcommand("meta-train-fomaml", "meta-train a shared initialization");
    std::string tf_config, tf_data, tf_out = "fomaml.params", tf_log;
    tf->add_option("--config", tf_config, "experiment config for hyperparameters");
    tf->add_option("--data", tf_data, "dataset file")->required();
    tf->add_option("--out", tf_out, "checkpoint path");
    tf->add_option("--log", tf_log, "training-log CSV path");

    // meta-train-modular
    auto* tm = app.add_subcommand("meta-train-modular", "meta-train a module repository");
    std::string tm_config, tm_data, tm_out = "modules.modules", tm_log;
    tm->add_option("--config", tm_config, "experiment config for hyperparameters");
    tm->add_option("--data", tm_data, "dataset file")->required();
    tm->add_option("--out", tm_out, "checkpoint path");
    tm->add_option("--log", tm_log, "training-log CSV path");

    // adapt
    auto* ad = app.add_subcommand("adapt", "adapt a checkpoint to one period's train slots");
    std::string ad_config, ad_data, ad_ckpt, ad_out = "adapted.params", ad_assignment, ad_log;
    int ad_period = 0, ad_budget = 10, ad_steps = -1;
    ad->add_option("--config", ad_config, "experiment config for hyperparameters");
    ad->add_option("--data", ad_data, "dataset file")->required();
    ad->add_option("--checkpoint", ad_ckpt, "params or module-set checkpoint")->required();
    ad->add_option("--period", ad_period, "period index within the dataset");
    ad->add_option("--budget", ad_budget, "adaptation slots (from the train split)");
    ad->add_option("--steps", ad_steps, "adaptation steps (-1 = method default)");
    ad->add_option("--out", ad_out, "adapted params checkpoint path");
    ad->add_option("--assignment-out", ad_assignment, "selected assignment path (modular)");
    ad->add_option("--log", ad_log, "adaptation-log CSV path (modular)");

    // eval
    auto* ev = app.add_subcommand("eval", "mean sum-rate of a params checkpoint on test slots");
    std::string ev_data, ev_ckpt;
    int ev_period = 0;
    std::string ev_slots = "test";
    ev->add_option("--data", ev_data, "dataset file")->required();
    ev->add_option("--checkpoint", ev_ckpt, "params checkpoint")->required();
    ev->add_option("--period", ev_period, "period index within the dataset");
    ev->add_option("--slots", ev_slots, "test | train | all");

    // experiment
    auto* ex = app.add_subcommand("experiment", "run a preset or configured experiment grid");
    std::string ex_preset, ex_config;
    ex->add_option("--preset", ex_preset, "fig4 | fig5 | fig6 | fig7 | fig8 | fig9");
    ex->add_option("--config", ex_config, "experiment config file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            SimConfig sim = sim_from_config_file(gen_config, g.seed);
            const auto periods =
                generate_meta_dataset(sim, gen_periods, RngStream(g.seed).child("meta"));
            write_dataset(gen_out, sim, periods);
            std::cout << "wrote " << periods.size() << " periods to " << gen_out << "\n";
        } else if (*tj || *tf || *tm) {
            const std::string cfg_path = *tj ? tj_config : (*tf ? tf_config : tm_config);
            const std::string data_path = *tj ? tj_data : (*tf ? tf_data : tm_data);
            const std::string out_path = *tj ? tj_out : (*tf ? tf_out : tm_out);
            const std::string log_path = *tj ? tj_log : (*tf ? tf_log : tm_log);
            ExperimentConfig cfg =
                cfg_path.empty() ? ExperimentConfig{} : parse_config(cfg_path);
            const auto [sim, periods] = read_dataset(data_path);
            const double sigma2 = sim.sigma2_linear();
            const Vec pmax = {sim.pmax_linear()};
            const RngStream root = RngStream(g.seed).child("train");
            std::vector<TrainLogRow> log;
            const std::string provenance = "seed=" + std::to_string(g.seed);
            if (*tj) {
                JointConfig jc{cfg.effective_jl_steps(), cfg.batch_size, cfg.outer_lr};
                const ReGnnParams p = joint_train(periods, jc, cfg.layers, cfg.filter_taps,
                                                  pmax, root, sigma2, &log, g.timing);
                save_params(out_path, p, provenance);
            } else if (*tf) {
                const ReGnnParams p =
                    meta_train_fomaml(periods, meta_from_experiment(cfg, false), cfg.layers,
                                      cfg.filter_taps, pmax, root, sigma2, &log, g.timing);
                save_params(out_path, p, provenance);
            } else {
                ModularTrainConfig tc{cfg.modules, cfg.layers, cfg.filter_taps, cfg.schedule};
                const ModuleSet mods =
                    meta_train_modular(periods, meta_from_experiment(cfg, true), tc, pmax,
                                       root, sigma2, &log, g.timing);
                save_module_set(out_path, mods, provenance);
            }
            if (!log_path.empty()) write_train_log_csv(log_path, log);
            std::cout << "wrote checkpoint " << out_path << "\n";
        } else if (*ad) {
            ExperimentConfig cfg =
                ad_config.empty() ? ExperimentConfig{} : parse_config(ad_config);
            const auto [sim, periods] = read_dataset(ad_data);
            const double sigma2 = sim.sigma2_linear();
            const PeriodDataset& period = pick_period(periods, ad_period);
            const std::string kind = checkpoint_kind(ad_ckpt);
            const std::string provenance =
                "seed=" + std::to_string(g.seed) + ";period=" + std::to_string(ad_period) +
                ";budget=" + std::to_string(ad_budget);
            if (kind == "params") {
                const int steps = ad_steps >= 0 ? ad_steps : cfg.fomaml_adapt_steps;
                const ReGnnParams adapted =
                    runtime_finetune(load_params(ad_ckpt), period.train_batch(ad_budget),
                                     steps, cfg.adapt_lr, sigma2);
                save_params(ad_out, adapted, provenance);
            } else if (kind == "modules") {
                const int steps = ad_steps >= 0 ? ad_steps : cfg.modular_adapt_steps;
                const ModuleSet mods = load_module_set(ad_ckpt);
                RngStream rng = RngStream(g.seed).child("adapt");
                std::vector<AdaptLogRow> alog;
                const HardAssignment s = runtime_adapt_modular(
                    mods, cfg.layers, period.train_batch(ad_budget), steps, cfg.adapt_lr,
                    cfg.schedule, rng, sigma2, ad_log.empty() ? nullptr : &alog);
                save_params(ad_out, assemble(mods, s), provenance);
                if (!ad_assignment.empty()) save_assignment(ad_assignment, s, provenance);
                if (!ad_log.empty()) write_adapt_log_csv(ad_log, alog);
                std::cout << "selected assignment:";
                for (int idx : s.s) std::cout << ' ' << idx;
                std::cout << "\n";
            } else {
                throw ValidationError("cannot adapt a checkpoint of kind '" + kind + "'");
            }
            std::cout << "wrote checkpoint " << ad_out << "\n";
        } else if (*ev) {
            const auto [sim, periods] = read_dataset(ev_data);
            const PeriodDataset& period = pick_period(periods, ev_period);
            const ReGnnParams params = load_params(ev_ckpt);
            PeriodDataset::Batch batch;
            if (ev_slots == "test") batch = period.test_batch();
            else if (ev_slots == "train") batch = period.train_batch();
            else if (ev_slots == "all") {
                for (const ChannelRealization& r : period.realizations) batch.push_back(&r);
            } else {
                throw ValidationError("--slots must be test, train, or all");
            }
            const double rate = batch_objective(params, batch, sim.sigma2_linear());
            std::printf("mean_sum_rate_bits_per_use %.9g\n", rate);
        } else if (*ex) {
            if (ex_preset.empty() == ex_config.empty())
                throw ValidationError("experiment needs exactly one of --preset or --config");
            ExperimentConfig cfg =
                ex_preset.empty() ? parse_config(ex_config) : preset(ex_preset);
            if (app.count("--seed")) cfg.seed = g.seed;
            if (app.count("--out-dir")) cfg.out_dir = g.out_dir;
            else if (!ex_preset.empty()) cfg.out_dir = fs::path(g.out_dir) / ex_preset;
            cfg.threads = g.threads;
            cfg.timing = g.timing;
            const ExperimentOutput out = run_experiment(cfg);
            std::cout << "wrote " << out.rows.size() << " result rows under "
                      << cfg.out_dir.string() << "\n";
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
