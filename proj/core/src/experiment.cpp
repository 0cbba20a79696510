#include "gnnpower/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

#include "gnnpower/checkpoint.hpp"
#include "gnnpower/errors.hpp"

namespace gnnpower {

std::string MethodSpec::label() const {
    switch (kind) {
        case Kind::joint: return "joint";
        case Kind::fomaml: return "fomaml";
        case Kind::modular: return "modular-m" + std::to_string(modules);
        case Kind::modular_exhaustive: return "modular-exhaustive-m" + std::to_string(modules);
    }
    return "?";
}

std::string MethodSpec::train_key() const {
    if (kind == Kind::modular || kind == Kind::modular_exhaustive)
        return "modular-m" + std::to_string(modules);
    return label();
}

const char* sweep_name(SweepVar v) {
    switch (v) {
        case SweepVar::adaptation_samples: return "adaptation_samples";
        case SweepVar::adaptation_iters: return "adaptation_iters";
        case SweepVar::meta_periods: return "meta_periods";
        case SweepVar::interference_radius: return "interference_radius";
    }
    return "?";
}

void ExperimentConfig::validate() const {
    sim.validate();
    schedule.validate();
    if (trials < 1) throw ValidationError("trials must be >= 1");
    if (meta_periods < 1) throw ValidationError("meta_periods must be >= 1");
    if (layers < 1 || filter_taps < 1)
        throw ValidationError("layers and filter_taps must be >= 1");
    if (!(inner_lr > 0.0) || !(adapt_lr > 0.0) || !(outer_lr > 0.0))
        throw ValidationError("learning rates must be positive");
    if (meta_iters < 0) throw ValidationError("meta_iters must be >= 0");
    if (outer_steps_per_iter < 1) throw ValidationError("outer_steps_per_iter must be >= 1");
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (modules < 1) throw ValidationError("modules must be >= 1");
    if (adaptation_samples < 0) throw ValidationError("adaptation_samples must be >= 0");
    if (adapt_repeats < 1) throw ValidationError("adapt_repeats must be >= 1");
    if (sweep_values.empty()) throw ValidationError("sweep_values must be nonempty");
    if (methods.empty()) throw ValidationError("methods must be nonempty");
    for (double v : sweep_values) {
        switch (sweep) {
            case SweepVar::adaptation_samples:
            case SweepVar::adaptation_iters:
                if (v < 0 || v != std::floor(v))
                    throw ValidationError("sweep values must be nonnegative integers");
                break;
            case SweepVar::meta_periods:
                if (v < 1 || v != std::floor(v))
                    throw ValidationError("meta_periods sweep values must be positive integers");
                break;
            case SweepVar::interference_radius:
                if (!(v >= 0)) throw ValidationError("radius sweep values must be >= 0");
                break;
        }
    }
    for (const std::string& e : emit)
        if (e != "gain" && e != "cka" && e != "histogram")
            throw ValidationError("unknown emit kind: " + e);
    if (emit.count("gain")) {
        bool has_joint = false;
        for (const auto& m : methods) has_joint |= (m.kind == MethodSpec::Kind::joint);
        if (!has_joint) throw ValidationError("gain emit requires the joint method");
    }
    for (const auto& m : methods)
        if ((m.kind == MethodSpec::Kind::modular ||
             m.kind == MethodSpec::Kind::modular_exhaustive) &&
            m.modules < 1)
            throw ValidationError("modular methods need a module count");
}

// --- config text ------------------------------------------------------------

namespace {

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

double to_double(const std::string& s, const std::string& where) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') throw ParseError(where + ": bad number '" + s + "'");
    return v;
}

long to_long(const std::string& s, const std::string& where) {
    char* end = nullptr;
    const long v = std::strtol(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0') throw ParseError(where + ": bad integer '" + s + "'");
    return v;
}

MethodSpec parse_method(const std::string& tok, const std::string& where) {
    MethodSpec m;
    const auto colon = tok.find(':');
    const std::string base = tok.substr(0, colon);
    if (base == "joint") m.kind = MethodSpec::Kind::joint;
    else if (base == "fomaml") m.kind = MethodSpec::Kind::fomaml;
    else if (base == "modular") m.kind = MethodSpec::Kind::modular;
    else if (base == "exhaustive" || base == "modular-exhaustive")
        m.kind = MethodSpec::Kind::modular_exhaustive;
    else throw ParseError(where + ": unknown method '" + tok + "'");
    if (colon != std::string::npos)
        m.modules = static_cast<int>(to_long(tok.substr(colon + 1), where));
    return m;
}

} // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        const std::string where = origin + ":" + std::to_string(lineno);
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(where + ": expected 'key = value'");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (value.empty()) throw ParseError(where + ": empty value for key '" + key + "'");

        if (key == "experiment_id") cfg.experiment_id = value;
        else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(to_long(value, where));
        else if (key == "out_dir") cfg.out_dir = value;
        else if (key == "pathloss_exponent") cfg.sim.pathloss_exponent = to_double(value, where);
        else if (key == "sigma2_dbm") cfg.sim.sigma2_dbm = to_double(value, where);
        else if (key == "pmax_dbm") cfg.sim.pmax_dbm = to_double(value, where);
        else if (key == "network_size") {
            const auto toks = split_ws(value);
            if (toks.size() == 2 && toks[0] == "fixed")
                cfg.sim.size_policy = SizePolicy::fixed(static_cast<int>(to_long(toks[1], where)));
            else if (toks.size() == 3 && toks[0] == "uniform")
                cfg.sim.size_policy =
                    SizePolicy::uniform(static_cast<int>(to_long(toks[1], where)),
                                        static_cast<int>(to_long(toks[2], where)));
            else
                throw ParseError(where + ": network_size wants 'fixed K' or 'uniform LO HI'");
        } else if (key == "slots_per_period")
            cfg.sim.slots_per_period = static_cast<int>(to_long(value, where));
        else if (key == "train_slots") cfg.sim.train_slots = static_cast<int>(to_long(value, where));
        else if (key == "test_slots") cfg.sim.test_slots = static_cast<int>(to_long(value, where));
        else if (key == "interference_radius") {
            if (value == "none") cfg.sim.interference_radius.reset();
            else cfg.sim.interference_radius = to_double(value, where);
        } else if (key == "meta_periods") cfg.meta_periods = static_cast<int>(to_long(value, where));
        else if (key == "layers") cfg.layers = static_cast<int>(to_long(value, where));
        else if (key == "filter_taps") cfg.filter_taps = static_cast<int>(to_long(value, where));
        else if (key == "inner_lr") cfg.inner_lr = to_double(value, where);
        else if (key == "adapt_lr") cfg.adapt_lr = to_double(value, where);
        else if (key == "outer_lr") cfg.outer_lr = to_double(value, where);
        else if (key == "meta_iters") cfg.meta_iters = static_cast<int>(to_long(value, where));
        else if (key == "outer_steps_per_iter")
            cfg.outer_steps_per_iter = static_cast<int>(to_long(value, where));
        else if (key == "fomaml_inner_steps")
            cfg.fomaml_inner_steps = static_cast<int>(to_long(value, where));
        else if (key == "modular_inner_steps")
            cfg.modular_inner_steps = static_cast<int>(to_long(value, where));
        else if (key == "jl_steps") cfg.jl_steps = static_cast<int>(to_long(value, where));
        else if (key == "batch_size") cfg.batch_size = static_cast<int>(to_long(value, where));
        else if (key == "modules") cfg.modules = static_cast<int>(to_long(value, where));
        else if (key == "lambda0") cfg.schedule.lambda0 = to_double(value, where);
        else if (key == "lambda_decay") cfg.schedule.decay = to_double(value, where);
        else if (key == "lambda_min") cfg.schedule.lambda_min = to_double(value, where);
        else if (key == "adaptation_samples")
            cfg.adaptation_samples = static_cast<int>(to_long(value, where));
        else if (key == "fomaml_adapt_steps")
            cfg.fomaml_adapt_steps = static_cast<int>(to_long(value, where));
        else if (key == "modular_adapt_steps")
            cfg.modular_adapt_steps = static_cast<int>(to_long(value, where));
        else if (key == "jl_adapt_steps")
            cfg.jl_adapt_steps = static_cast<int>(to_long(value, where));
        else if (key == "adapt_repeats") cfg.adapt_repeats = static_cast<int>(to_long(value, where));
        else if (key == "exhaustive_cap") cfg.exhaustive_cap = to_long(value, where);
        else if (key == "trials") cfg.trials = static_cast<int>(to_long(value, where));
        else if (key == "sweep") {
            if (value == "adaptation_samples") cfg.sweep = SweepVar::adaptation_samples;
            else if (value == "adaptation_iters") cfg.sweep = SweepVar::adaptation_iters;
            else if (value == "meta_periods") cfg.sweep = SweepVar::meta_periods;
            else if (value == "interference_radius") cfg.sweep = SweepVar::interference_radius;
            else throw ParseError(where + ": unknown sweep variable '" + value + "'");
        } else if (key == "sweep_values") {
            cfg.sweep_values.clear();
            for (const std::string& tok : split_ws(value))
                cfg.sweep_values.push_back(to_double(tok, where));
        } else if (key == "methods") {
            cfg.methods.clear();
            for (const std::string& tok : split_ws(value))
                cfg.methods.push_back(parse_method(tok, where));
        } else if (key == "emit") {
            cfg.emit.clear();
            for (const std::string& tok : split_ws(value)) cfg.emit.insert(tok);
        } else {
            throw ParseError(where + ": unknown key '" + key + "'");
        }
    }
    // a bare "modular" method token inherits the modules key
    for (auto& m : cfg.methods)
        if ((m.kind == MethodSpec::Kind::modular ||
             m.kind == MethodSpec::Kind::modular_exhaustive) &&
            m.modules == 0)
            m.modules = cfg.modules;
    cfg.validate();
    return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path.filename().string());
}

ExperimentConfig preset(const std::string& name) {
    ExperimentConfig cfg;
    cfg.experiment_id = name;
    if (name == "fig4") {
        cfg.meta_periods = 5;
        cfg.sweep = SweepVar::adaptation_iters;
        cfg.sweep_values = {1, 2, 3, 4, 5, 8, 10};
        cfg.methods = {{MethodSpec::Kind::modular, 2},
                       {MethodSpec::Kind::modular_exhaustive, 2}};
        cfg.modules = 2;
        cfg.meta_iters = 300;
    } else if (name == "fig5") {
        cfg.sweep = SweepVar::adaptation_samples;
        cfg.sweep_values = {1, 2, 5, 10, 20, 50};
        cfg.methods = {{MethodSpec::Kind::joint, 0},
                       {MethodSpec::Kind::fomaml, 0},
                       {MethodSpec::Kind::modular, 4},
                       {MethodSpec::Kind::modular, 6}};
        cfg.meta_iters = 400;
    } else if (name == "fig6") {
        cfg.sweep = SweepVar::meta_periods;
        cfg.sweep_values = {2, 5, 10, 15, 20};
        cfg.methods = {{MethodSpec::Kind::joint, 0},
                       {MethodSpec::Kind::fomaml, 0},
                       {MethodSpec::Kind::modular, 6}};
        cfg.meta_iters = 300;
    } else if (name == "fig7" || name == "fig8" || name == "fig9") {
        cfg.sim.size_policy = SizePolicy::fixed(10);
        cfg.sweep = SweepVar::interference_radius;
        cfg.meta_iters = 150;
        if (name == "fig7") {
            cfg.sweep_values = {2, 4, 6, 8, 10, 14, 18};
            cfg.methods = {{MethodSpec::Kind::joint, 0},
                           {MethodSpec::Kind::fomaml, 0},
                           {MethodSpec::Kind::modular, 4},
                           {MethodSpec::Kind::modular, 6}};
            cfg.emit = {"gain"};
        } else {
            cfg.sweep_values = {2, 6, 10, 18};
            cfg.methods = {{MethodSpec::Kind::modular, 6}};
            cfg.emit = {name == "fig8" ? "cka" : "histogram"};
            if (name == "fig9") cfg.adapt_repeats = 5;
        }
    } else {
        throw UnknownPreset("unknown preset '" + name + "'");
    }
    cfg.validate();
    return cfg;
}

// --- experiment engine ------------------------------------------------------

namespace {

std::string value_tag(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    std::string s(buf);
    for (char& c : s)
        if (c == '.') c = 'p';
    return s;
}

struct TrainedArtifact {
    ReGnnParams params; // joint / fomaml
    ModuleSet mods;     // modular
    bool is_modular = false;
};

struct TrialAux {
    // per sweep value index
    std::vector<std::map<std::string, Mat>> cka;
    std::vector<std::map<std::string, std::vector<HardAssignment>>> assignments;
};

struct TrialOut {
    std::vector<ResultRow> rows;
    TrialAux aux;
};

struct EngineContext {
    const ExperimentConfig& cfg;
    double sigma2;
    Vec pmax;
};

bool training_depends_on_value(SweepVar sweep) {
    return sweep == SweepVar::meta_periods || sweep == SweepVar::interference_radius;
}

TrainedArtifact train_method(const EngineContext& ctx, const MethodSpec& m,
                             std::span<const PeriodDataset> meta, const RngStream& rng,
                             const std::filesystem::path& log_path,
                             const std::filesystem::path& ckpt_path) {
    const ExperimentConfig& cfg = ctx.cfg;
    TrainedArtifact art;
    std::vector<TrainLogRow> log;
    const std::string provenance =
        "seed=" + std::to_string(rng.seed()) + ";method=" + m.train_key();
    switch (m.kind) {
        case MethodSpec::Kind::joint: {
            JointConfig jc{cfg.effective_jl_steps(), cfg.batch_size, cfg.outer_lr};
            art.params = joint_train(meta, jc, cfg.layers, cfg.filter_taps, ctx.pmax, rng,
                                     ctx.sigma2, &log, cfg.timing);
            save_params(ckpt_path, art.params, provenance);
            break;
        }
        case MethodSpec::Kind::fomaml: {
            MetaConfig mc{cfg.meta_iters, cfg.fomaml_inner_steps, cfg.outer_steps_per_iter,
                          cfg.inner_lr, cfg.outer_lr, 0};
            art.params = meta_train_fomaml(meta, mc, cfg.layers, cfg.filter_taps, ctx.pmax, rng,
                                           ctx.sigma2, &log, cfg.timing);
            save_params(ckpt_path, art.params, provenance);
            break;
        }
        case MethodSpec::Kind::modular:
        case MethodSpec::Kind::modular_exhaustive: {
            MetaConfig mc{cfg.meta_iters, cfg.modular_inner_steps, cfg.outer_steps_per_iter,
                          cfg.inner_lr, cfg.outer_lr, 0};
            ModularTrainConfig tc{m.modules, cfg.layers, cfg.filter_taps, cfg.schedule};
            art.mods = meta_train_modular(meta, mc, tc, ctx.pmax, rng, ctx.sigma2, &log,
                                          cfg.timing);
            art.is_modular = true;
            save_module_set(ckpt_path, art.mods, provenance);
            break;
        }
    }
    write_train_log_csv(log_path, log);
    return art;
}

double adapt_and_eval(const EngineContext& ctx, const MethodSpec& m, const TrainedArtifact& art,
                      const PeriodDataset& test, int budget, int steps, RngStream rng,
                      std::vector<HardAssignment>* collect) {
    const ExperimentConfig& cfg = ctx.cfg;
    const PeriodDataset::Batch adapt_slots = test.train_batch(budget);
    switch (m.kind) {
        case MethodSpec::Kind::joint:
        case MethodSpec::Kind::fomaml: {
            const ReGnnParams tuned =
                runtime_finetune(art.params, adapt_slots, steps, cfg.adapt_lr, ctx.sigma2);
            return batch_objective(tuned, test.test_batch(), ctx.sigma2);
        }
        case MethodSpec::Kind::modular: {
            const HardAssignment s =
                runtime_adapt_modular(art.mods, cfg.layers, adapt_slots, steps, cfg.adapt_lr,
                                      cfg.schedule, rng, ctx.sigma2);
            if (collect) collect->push_back(s);
            return mean_sum_rate_hard(art.mods, s, test.test_batch(), ctx.sigma2);
        }
        case MethodSpec::Kind::modular_exhaustive: {
            if (adapt_slots.empty()) {
                const HardAssignment s{std::vector<int>(static_cast<std::size_t>(cfg.layers), 0)};
                if (collect) collect->push_back(s);
                return mean_sum_rate_hard(art.mods, s, test.test_batch(), ctx.sigma2);
            }
            const auto [s, value] = exhaustive_assignment(art.mods, cfg.layers, adapt_slots,
                                                          ctx.sigma2, cfg.exhaustive_cap);
            (void)value;
            if (collect) collect->push_back(s);
            return mean_sum_rate_hard(art.mods, s, test.test_batch(), ctx.sigma2);
        }
    }
    return 0.0;
}

int method_adapt_steps(const ExperimentConfig& cfg, const MethodSpec& m) {
    switch (m.kind) {
        case MethodSpec::Kind::joint: return cfg.jl_adapt_steps;
        case MethodSpec::Kind::fomaml: return cfg.fomaml_adapt_steps;
        default: return cfg.modular_adapt_steps;
    }
}

TrialOut run_trial(const EngineContext& ctx, int trial, const RngStream& trial_rng,
                   std::uint64_t probe_seed) {
    const ExperimentConfig& cfg = ctx.cfg;
    TrialOut out;
    out.aux.cka.resize(cfg.sweep_values.size());
    out.aux.assignments.resize(cfg.sweep_values.size());

    const bool retrain_per_value = training_depends_on_value(cfg.sweep);
    std::map<std::string, TrainedArtifact> cache;

    for (std::size_t vi = 0; vi < cfg.sweep_values.size(); ++vi) {
        const double value = cfg.sweep_values[vi];

        SimConfig sim = cfg.sim;
        int n_periods = cfg.meta_periods;
        if (cfg.sweep == SweepVar::interference_radius) sim.interference_radius = value;
        if (cfg.sweep == SweepVar::meta_periods) n_periods = static_cast<int>(value);

        const std::vector<PeriodDataset> meta =
            generate_meta_dataset(sim, n_periods, trial_rng.child("meta"));
        const PeriodDataset test = generate_period(sim, n_periods, trial_rng.child("test"));

        if (retrain_per_value) cache.clear();

        for (const MethodSpec& m : cfg.methods) {
            const std::string key = m.train_key();
            auto it = cache.find(key);
            if (it == cache.end()) {
                const std::string suffix = retrain_per_value ? "_s" + value_tag(value) : "";
                const std::string stem =
                    "trial" + std::to_string(trial) + suffix + "_" + key;
                const std::filesystem::path logp = cfg.out_dir / "logs" / (stem + "_train.csv");
                const std::filesystem::path ckpt =
                    cfg.out_dir / "checkpoints" /
                    (stem + (m.kind == MethodSpec::Kind::joint ||
                                     m.kind == MethodSpec::Kind::fomaml
                                 ? ".params"
                                 : ".modules"));
                it = cache
                         .emplace(key, train_method(ctx, m, meta,
                                                    trial_rng.child("train").child(key), logp,
                                                    ckpt))
                         .first;
            }
            const TrainedArtifact& art = it->second;

            const int budget = cfg.sweep == SweepVar::adaptation_samples
                                   ? static_cast<int>(value)
                                   : cfg.adaptation_samples;
            const int steps = cfg.sweep == SweepVar::adaptation_iters
                                  ? static_cast<int>(value)
                                  : method_adapt_steps(cfg, m);

            const auto row_start = std::chrono::steady_clock::now();
            double rate_total = 0.0;
            std::vector<HardAssignment>* collect =
                art.is_modular ? &out.aux.assignments[vi][m.label()] : nullptr;
            for (int rep = 0; rep < cfg.adapt_repeats; ++rep) {
                RngStream arng = trial_rng.child("adapt").child(m.label()).child(
                    static_cast<std::uint64_t>(rep));
                rate_total +=
                    adapt_and_eval(ctx, m, art, test, budget, steps, arng, collect);
            }
            const double rate = rate_total / static_cast<double>(cfg.adapt_repeats);
            long ms = 0;
            if (cfg.timing)
                ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - row_start)
                         .count();
            out.rows.push_back({cfg.experiment_id, value, m.label(), trial, rate, ms});

            if (cfg.emit.count("cka") && art.is_modular &&
                m.kind == MethodSpec::Kind::modular &&
                out.aux.cka[vi].find(m.label()) == out.aux.cka[vi].end()) {
                const ProbeBatch probe = make_probe_batch(probe_seed);
                out.aux.cka[vi][m.label()] = cka_matrix(art.mods, probe);
            }
        }
    }
    return out;
}

void parallel_for(int n, int threads, const std::function<void(int)>& body) {
    if (threads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    auto worker = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= n) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const int count = std::min(threads, n);
    pool.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

} // namespace

ExperimentOutput run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    fs::create_directories(cfg.out_dir / "logs");
    fs::create_directories(cfg.out_dir / "checkpoints");

    EngineContext ctx{cfg, cfg.sim.sigma2_linear(), Vec{cfg.sim.pmax_linear()}};
    const RngStream root(cfg.seed);
    const std::uint64_t probe_seed = root.child("probe").seed();

    std::vector<TrialOut> trials(static_cast<std::size_t>(cfg.trials));
    std::vector<char> done(static_cast<std::size_t>(cfg.trials), 0);
    int threads = cfg.threads;
    if (threads == 0) {
        threads = static_cast<int>(std::thread::hardware_concurrency());
        if (threads == 0) threads = 1;
    }

    std::ofstream results(cfg.out_dir / "results.csv");
    if (!results) throw IoError("cannot open results.csv for writing");
    results << "experiment,sweep_value,method,trial,mean_test_sum_rate,wall_ms\n";
    int written = 0;
    auto flush_rows = [&](int upto) {
        for (; written < upto; ++written)
            for (const ResultRow& r : trials[static_cast<std::size_t>(written)].rows)
                results << r.experiment << ',' << format_csv_double(r.sweep_value) << ','
                        << r.method << ',' << r.trial << ','
                        << format_csv_double(r.mean_test_sum_rate) << ',' << r.wall_ms << '\n';
        results.flush();
    };

    try {
        parallel_for(cfg.trials, threads, [&](int t) {
            trials[static_cast<std::size_t>(t)] =
                run_trial(ctx, t, root.child("trial").child(static_cast<std::uint64_t>(t)),
                          probe_seed);
            done[static_cast<std::size_t>(t)] = 1;
        });
    } catch (...) {
        // flush the completed prefix before propagating
        int prefix = 0;
        while (prefix < cfg.trials && done[static_cast<std::size_t>(prefix)]) ++prefix;
        flush_rows(prefix);
        throw;
    }
    flush_rows(cfg.trials);

    ExperimentOutput out;
    for (const TrialOut& t : trials)
        out.rows.insert(out.rows.end(), t.rows.begin(), t.rows.end());

    // rates.csv: mean and stderr over trials per (sweep value, method)
    {
        std::ofstream rates(cfg.out_dir / "rates.csv");
        if (!rates) throw IoError("cannot open rates.csv for writing");
        rates << "sweep_value,method,mean,stderr,trials\n";
        for (double v : cfg.sweep_values) {
            for (const MethodSpec& m : cfg.methods) {
                std::vector<double> xs;
                for (const ResultRow& r : out.rows)
                    if (r.sweep_value == v && r.method == m.label())
                        xs.push_back(r.mean_test_sum_rate);
                rates << format_csv_double(v) << ',' << m.label() << ','
                      << format_csv_double(mean(xs)) << ','
                      << format_csv_double(stderr_of_mean(xs)) << ',' << xs.size() << '\n';
            }
        }
    }

    if (cfg.emit.count("gain")) {
        for (const MethodSpec& m : cfg.methods) {
            if (m.kind == MethodSpec::Kind::joint) continue;
            std::vector<GainRow> curve;
            for (double v : cfg.sweep_values) {
                std::vector<double> gains;
                for (int t = 0; t < cfg.trials; ++t) {
                    double ml = 0.0, jl = 0.0;
                    for (const ResultRow& r : out.rows) {
                        if (r.trial != t || r.sweep_value != v) continue;
                        if (r.method == m.label()) ml = r.mean_test_sum_rate;
                        if (r.method == "joint") jl = r.mean_test_sum_rate;
                    }
                    gains.push_back(relative_rate_gain(ml, jl));
                }
                curve.push_back({v, mean(gains), stderr_of_mean(gains)});
            }
            out.gains[m.label()] = curve;
            write_gain_csv(cfg.out_dir / ("gain_" + m.label() + ".csv"), curve);
        }
    }

    if (cfg.emit.count("cka")) {
        for (std::size_t vi = 0; vi < cfg.sweep_values.size(); ++vi) {
            const double v = cfg.sweep_values[vi];
            // mean over trials per method
            std::map<std::string, Mat> acc;
            for (const TrialOut& t : trials) {
                for (const auto& [label, mat] : t.aux.cka[vi]) {
                    auto it = acc.find(label);
                    if (it == acc.end()) {
                        acc[label] = mat;
                    } else {
                        for (std::size_t i = 0; i < mat.a.size(); ++i) it->second.a[i] += mat.a[i];
                    }
                }
            }
            for (auto& [label, mat] : acc) {
                for (double& x : mat.a) x /= static_cast<double>(cfg.trials);
                out.cka[label][v] = mat;
                write_cka_csv(cfg.out_dir / ("cka_" + label + "_r" + value_tag(v) + ".csv"),
                              mat);
            }
        }
    }

    if (cfg.emit.count("histogram")) {
        std::map<std::string, std::vector<HardAssignment>> all;
        for (std::size_t vi = 0; vi < cfg.sweep_values.size(); ++vi) {
            const double v = cfg.sweep_values[vi];
            std::map<std::string, std::vector<HardAssignment>> per_value;
            for (const TrialOut& t : trials) {
                for (const auto& [label, runs] : t.aux.assignments[vi]) {
                    auto& dst = per_value[label];
                    dst.insert(dst.end(), runs.begin(), runs.end());
                    auto& dsta = all[label];
                    dsta.insert(dsta.end(), runs.begin(), runs.end());
                }
            }
            for (const auto& [label, runs] : per_value) {
                int modules = 0;
                for (const MethodSpec& m : cfg.methods)
                    if (m.label() == label) modules = m.modules;
                const Vec h = assignment_histogram(runs, modules);
                out.histograms[label][v] = h;
                write_histogram_csv(
                    cfg.out_dir / ("hist_" + label + "_r" + value_tag(v) + ".csv"), h);
            }
        }
        for (const auto& [label, runs] : all) {
            int modules = 0;
            for (const MethodSpec& m : cfg.methods)
                if (m.label() == label) modules = m.modules;
            const Vec h = assignment_histogram(runs, modules);
            out.histogram_all[label] = h;
            write_histogram_csv(cfg.out_dir / ("hist_" + label + "_all.csv"), h);
        }
    }

    return out;
}

} // namespace gnnpower
