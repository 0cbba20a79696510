#include <cmath>

#include "doctest.h"
#include "gnnpower/errors.hpp"
#include "gnnpower/fomaml.hpp"
#include "gnnpower/modular.hpp"
#include "test_util.hpp"

using namespace gnnpower;
using namespace testutil;

namespace {

/// Period with every gain zero: rates and gradients vanish identically.
PeriodDataset dead_period(int k, int slots, int train, int test) {
    PeriodDataset p;
    p.topology.k = k;
    for (int s = 0; s < slots; ++s) {
        ChannelRealization r;
        r.gains = Mat(k, k);
        r.slot = s;
        p.realizations.push_back(r);
    }
    for (int s = 0; s < train; ++s) p.train_idx.push_back(s);
    for (int s = train; s < train + test; ++s) p.test_idx.push_back(s);
    return p;
}

PeriodDataset permute_period(const PeriodDataset& p, const std::vector<int>& perm) {
    PeriodDataset out = p;
    for (auto& r : out.realizations) r = permute_channel(r, perm);
    return out;
}

} // namespace

TEST_CASE("inner_adapt") {
    const PeriodDataset period = small_period(101, 4, 10, 10, 0);
    RngStream rng(101);
    const ReGnnParams init = init_regnn_params(2, 4, {0.5}, rng);

    SUBCASE("zero steps is the identity") {
        const ReGnnParams out = inner_adapt(init, period.train_batch(), 0, 1e-4, 1.0);
        CHECK(flatten(out) == flatten(init));
    }
    SUBCASE("zero gradient leaves parameters unchanged") {
        const PeriodDataset dead = dead_period(3, 4, 4, 0);
        const ReGnnParams out = inner_adapt(init, dead.train_batch(), 1, 1e-2, 1.0);
        CHECK(flatten(out) == flatten(init));
    }
    SUBCASE("five steps do not hurt the train objective") {
        const double sigma2 = dbm_to_linear(-70.0);
        RngStream r2(7);
        const ReGnnParams phys = init_regnn_params(2, 4, {dbm_to_linear(-35.0)}, r2);
        const double before = batch_objective(phys, period.train_batch(), sigma2);
        const ReGnnParams out = inner_adapt(phys, period.train_batch(), 5, 1e-4, sigma2);
        const double after = batch_objective(out, period.train_batch(), sigma2);
        CHECK(after >= before - 1e-6);
    }
    SUBCASE("empty batch rejected") {
        CHECK_THROWS_AS(inner_adapt(init, {}, 1, 1e-4, 1.0), EmptyBatch);
    }
}

TEST_CASE("fomaml_meta_step") {
    MetaConfig cfg;
    cfg.inner_steps = 2;
    cfg.gamma = 1e-3;
    cfg.delta = 1e-3;

    SUBCASE("all-zero outer gradients leave phi0 unchanged") {
        const PeriodDataset dead = dead_period(3, 8, 4, 4);
        RngStream rng(5);
        ReGnnParams phi0 = init_regnn_params(2, 4, {1.0}, rng);
        const Vec before = flatten(phi0);
        OptimizerState outer{OptMethod::adam, cfg.delta};
        fomaml_meta_step(phi0, std::vector<PeriodDataset>{dead}, cfg, outer, 1.0);
        CHECK(flatten(phi0) == before);
    }
    SUBCASE("duplicated periods do not change the update") {
        const PeriodDataset p = small_period(102, 4, 8, 4, 4);
        RngStream rng(6);
        ReGnnParams a = init_regnn_params(2, 4, {1.0}, rng);
        ReGnnParams b = a;
        OptimizerState oa{OptMethod::adam, cfg.delta};
        OptimizerState ob{OptMethod::adam, cfg.delta};
        fomaml_meta_step(a, std::vector<PeriodDataset>{p}, cfg, oa, 1.0);
        fomaml_meta_step(b, std::vector<PeriodDataset>{p, p}, cfg, ob, 1.0);
        const Vec fa = flatten(a), fb = flatten(b);
        for (std::size_t i = 0; i < fa.size(); ++i)
            CHECK(fa[i] == doctest::Approx(fb[i]).epsilon(1e-14));
    }
    SUBCASE("zero inner steps collapse to one pooled step on test slots") {
        const PeriodDataset p0 = small_period(103, 4, 8, 4, 4);
        const PeriodDataset p1 = small_period(104, 4, 8, 4, 4);
        MetaConfig degenerate = cfg;
        degenerate.inner_steps = 0;

        RngStream rng(7);
        ReGnnParams phi0 = init_regnn_params(2, 4, {1.0}, rng);
        ReGnnParams manual = phi0;

        OptimizerState outer{OptMethod::adam, cfg.delta};
        fomaml_meta_step(phi0, std::vector<PeriodDataset>{p0, p1}, degenerate, outer, 1.0);

        // equal test-slot counts: the mean of per-period means is the pooled mean
        PeriodDataset::Batch pooled = p0.test_batch();
        for (const ChannelRealization* g : p1.test_batch()) pooled.push_back(g);
        const auto [obj, grads] = batch_objective_and_grad(manual, pooled, 1.0);
        (void)obj;
        OptimizerState manual_outer{OptMethod::adam, cfg.delta};
        optimizer_step(manual_outer, manual, grads);

        const Vec fa = flatten(phi0), fb = flatten(manual);
        for (std::size_t i = 0; i < fa.size(); ++i)
            CHECK(fa[i] == doctest::Approx(fb[i]).epsilon(1e-12));
    }
}

TEST_CASE("meta_train_fomaml") {
    SimConfig scfg;
    scfg.size_policy = SizePolicy::fixed(4);
    scfg.slots_per_period = 12;
    scfg.train_slots = 6;
    scfg.test_slots = 6;
    const auto meta = generate_meta_dataset(scfg, 3, RngStream(11).child("meta"));
    const double sigma2 = scfg.sigma2_linear();
    const Vec pmax = {scfg.pmax_linear()};

    MetaConfig cfg;
    cfg.inner_steps = 3;
    cfg.outer_steps_per_iter = 1;

    SUBCASE("zero iterations return the seeded initialization") {
        cfg.n_meta_iters = 0;
        const ReGnnParams out = meta_train_fomaml(meta, cfg, 2, 4, pmax, RngStream(3), sigma2);
        RngStream init = RngStream(3).child("init");
        CHECK(flatten(out) == flatten(init_regnn_params(2, 4, pmax, init)));
    }
    SUBCASE("determinism") {
        cfg.n_meta_iters = 5;
        const ReGnnParams a = meta_train_fomaml(meta, cfg, 2, 4, pmax, RngStream(3), sigma2);
        const ReGnnParams b = meta_train_fomaml(meta, cfg, 2, 4, pmax, RngStream(3), sigma2);
        CHECK(flatten(a) == flatten(b));
    }
    SUBCASE("meta objective trend is non-decreasing over windows") {
        cfg.n_meta_iters = 60;
        std::vector<TrainLogRow> log;
        meta_train_fomaml(meta, cfg, 2, 4, pmax, RngStream(3), sigma2, &log);
        REQUIRE(log.size() == 60);
        double prev = -1e300;
        for (int w = 0; w < 3; ++w) {
            double acc = 0.0;
            for (int i = 0; i < 20; ++i) acc += log[static_cast<std::size_t>(w * 20 + i)].objective;
            acc /= 20.0;
            CHECK(acc >= prev - 1e-3 * std::abs(prev));
            prev = acc;
        }
    }
    SUBCASE("meta-training is invariant to per-period link relabeling") {
        SimConfig five = scfg;
        five.size_policy = SizePolicy::fixed(5);
        const auto base = generate_meta_dataset(five, 2, RngStream(12).child("meta"));
        RngStream perm_rng(13);
        std::vector<PeriodDataset> relabeled;
        for (const auto& p : base)
            relabeled.push_back(permute_period(p, random_permutation(5, perm_rng)));

        cfg.n_meta_iters = 4;
        const ReGnnParams a = meta_train_fomaml(base, cfg, 2, 4, pmax, RngStream(3), sigma2);
        const ReGnnParams b = meta_train_fomaml(relabeled, cfg, 2, 4, pmax, RngStream(3), sigma2);
        const Vec fa = flatten(a), fb = flatten(b);
        for (std::size_t i = 0; i < fa.size(); ++i) CHECK(std::abs(fa[i] - fb[i]) <= 1e-9);
    }
}

TEST_CASE("joint_train") {
    SimConfig scfg;
    scfg.size_policy = SizePolicy::fixed(4);
    scfg.slots_per_period = 12;
    scfg.train_slots = 6;
    scfg.test_slots = 6;
    const auto meta = generate_meta_dataset(scfg, 2, RngStream(21).child("meta"));
    const double sigma2 = scfg.sigma2_linear();
    const Vec pmax = {scfg.pmax_linear()};

    SUBCASE("zero steps return the initialization") {
        JointConfig cfg{0, 64, 1e-4};
        const ReGnnParams out = joint_train(meta, cfg, 2, 4, pmax, RngStream(4), sigma2);
        RngStream init = RngStream(4).child("init");
        CHECK(flatten(out) == flatten(init_regnn_params(2, 4, pmax, init)));
    }
    SUBCASE("pooled objective does not degrade over training") {
        // evaluate the full pooled train objective before and after; the
        // per-step log rows carry minibatch noise and are only length-checked
        JointConfig cfg{80, 64, 1e-3};
        std::vector<TrainLogRow> log;
        const ReGnnParams trained = joint_train(meta, cfg, 2, 4, pmax, RngStream(4), sigma2, &log);
        REQUIRE(log.size() == 80);

        RngStream init = RngStream(4).child("init");
        const ReGnnParams start = init_regnn_params(2, 4, pmax, init);
        PeriodDataset::Batch pool;
        for (const auto& p : meta)
            for (const ChannelRealization* g : p.train_batch()) pool.push_back(g);
        const double before = batch_objective(start, pool, sigma2);
        const double after = batch_objective(trained, pool, sigma2);
        CHECK(after >= before - 1e-3 * std::abs(before));
    }
}

TEST_CASE("runtime_finetune data hygiene") {
    const PeriodDataset period = small_period(105, 4, 30, 20, 10);
    RngStream rng(9);
    const ReGnnParams params = init_regnn_params(2, 4, {1.0}, rng);

    SUBCASE("zero budget returns the input") {
        const ReGnnParams out = runtime_finetune(params, {}, 5, 1e-3, 1.0);
        CHECK(flatten(out) == flatten(params));
    }
    SUBCASE("only the first `budget` train slots are read") {
        PeriodDataset poisoned = period;
        for (std::size_t i = 10; i < poisoned.realizations.size(); ++i)
            for (double& g : poisoned.realizations[i].gains.a) g = 1e12;
        const ReGnnParams a = runtime_finetune(params, period.train_batch(10), 5, 1e-3, 1.0);
        const ReGnnParams b = runtime_finetune(params, poisoned.train_batch(10), 5, 1e-3, 1.0);
        CHECK(flatten(a) == flatten(b));
    }
    SUBCASE("test slots are never read during adaptation") {
        PeriodDataset poisoned = period;
        for (int idx : poisoned.test_idx)
            for (double& g : poisoned.realizations[static_cast<std::size_t>(idx)].gains.a)
                g = 1e12;
        const ReGnnParams a = runtime_finetune(params, period.train_batch(), 5, 1e-3, 1.0);
        const ReGnnParams b = runtime_finetune(params, poisoned.train_batch(), 5, 1e-3, 1.0);
        CHECK(flatten(a) == flatten(b));
    }
    SUBCASE("modular runtime adaptation never reads test slots") {
        RngStream mr(10);
        const ModuleSet mods = random_modules(2, 4, 1.0, mr);
        PeriodDataset poisoned = period;
        for (int idx : poisoned.test_idx)
            for (double& g : poisoned.realizations[static_cast<std::size_t>(idx)].gains.a)
                g = 1e12;
        const TemperatureSchedule sched{1.0, std::exp(-0.025), 0.5};
        RngStream r1(11), r2(11);
        const HardAssignment a =
            runtime_adapt_modular(mods, 2, period.train_batch(10), 4, 1e-2, sched, r1, 1.0);
        const HardAssignment b =
            runtime_adapt_modular(mods, 2, poisoned.train_batch(10), 4, 1e-2, sched, r2, 1.0);
        CHECK(a.s == b.s);
    }
}
