#include <cmath>

#include "doctest.h"
#include "gnnpower/analysis.hpp"
#include "gnnpower/errors.hpp"
#include "test_util.hpp"

using namespace gnnpower;
using namespace testutil;

TEST_CASE("module_outputs") {
    const ProbeBatch probe = make_probe_batch(7, 4, 8);
    RngStream rng(70);
    ModuleSet mods = random_modules(3, 4, 1.0, rng);

    SUBCASE("identical modules give identical matrices") {
        mods.modules[1] = mods.modules[0];
        const auto z = module_outputs(mods, probe);
        CHECK(z[0].a == z[1].a);
    }
    SUBCASE("zero-tap module responds with zeros") {
        mods.modules[2] = FilterTaps{{0, 0, 0, 0}};
        const auto z = module_outputs(mods, probe);
        for (double v : z[2].a) CHECK(v == 0.0);
    }
    SUBCASE("rows compose graph_filter with ReLU") {
        const auto z = module_outputs(mods, probe);
        const Vec f = graph_filter(mods.modules[0], probe.realizations[3], probe.x);
        for (int q = 0; q < 4; ++q)
            CHECK(z[0](3, q) == doctest::Approx(f[q] > 0.0 ? f[q] : 0.0));
    }
}

TEST_CASE("linear_cka") {
    Mat z(3, 2);
    z(0, 0) = 1.0; z(0, 1) = -0.5;
    z(1, 0) = 0.2; z(1, 1) = 0.8;
    z(2, 0) = -0.3; z(2, 1) = 0.1;

    SUBCASE("self similarity is one") {
        CHECK(linear_cka(z, z) == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("scale invariance") {
        Mat scaled = z;
        for (double& v : scaled.a) v *= -3.7;
        CHECK(linear_cka(z, scaled) == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("orthogonal column spaces give zero") {
        Mat a(2, 1), b(2, 1);
        a(0, 0) = 1.0;
        b(1, 0) = 1.0;
        CHECK(linear_cka(a, b) == doctest::Approx(0.0));
    }
    SUBCASE("zero Gram norm rejected") {
        Mat zero(3, 2);
        CHECK_THROWS_AS(linear_cka(z, zero), DegenerateInput);
    }
}

TEST_CASE("cka_matrix") {
    const ProbeBatch probe = make_probe_batch(8, 5, 16);
    RngStream rng(71);

    SUBCASE("equal modules give the all-ones matrix") {
        ModuleSet mods = init_module_set(3, 4, {1.0}, rng);
        mods.modules[1] = mods.modules[0];
        mods.modules[2] = mods.modules[0];
        const Mat cka = cka_matrix(mods, probe);
        for (double v : cka.a) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("symmetric, unit diagonal, bounded") {
        const ModuleSet mods = init_module_set(4, 4, {1.0}, rng);
        const Mat cka = cka_matrix(mods, probe);
        for (int i = 0; i < 4; ++i) {
            CHECK(cka(i, i) == doctest::Approx(1.0).epsilon(1e-9));
            for (int j = 0; j < 4; ++j) {
                CHECK(std::abs(cka(i, j) - cka(j, i)) <= 1e-12);
                CHECK(cka(i, j) >= 0.0);
                CHECK(cka(i, j) <= 1.0 + 1e-12);
            }
        }
    }
}

TEST_CASE("assignment_histogram") {
    SUBCASE("single run concentrates the mass") {
        const std::vector<HardAssignment> runs = {HardAssignment{{0, 0}}};
        CHECK(assignment_histogram(runs, 2) == Vec{1.0, 0.0});
    }
    SUBCASE("mixed runs split evenly") {
        const std::vector<HardAssignment> runs = {HardAssignment{{0, 1}},
                                                  HardAssignment{{1, 0}}};
        CHECK(assignment_histogram(runs, 2) == Vec{0.5, 0.5});
    }
    SUBCASE("normalization") {
        RngStream rng(72);
        std::vector<HardAssignment> runs;
        for (int r = 0; r < 37; ++r) {
            HardAssignment s;
            for (int l = 0; l < 3; ++l) s.s.push_back(rng.uniform_int(0, 5));
            runs.push_back(s);
        }
        const Vec h = assignment_histogram(runs, 6);
        double total = 0.0;
        for (double v : h) total += v;
        CHECK(std::abs(total - 1.0) <= 1e-12);
    }
    SUBCASE("permuting labels permutes the histogram") {
        const std::vector<HardAssignment> runs = {HardAssignment{{0, 1}},
                                                  HardAssignment{{2, 0}}};
        const Vec h = assignment_histogram(runs, 3);
        std::vector<HardAssignment> renamed;
        for (const auto& r : runs) {
            HardAssignment s = r;
            for (int& v : s.s) v = (v + 1) % 3;
            renamed.push_back(s);
        }
        const Vec h2 = assignment_histogram(renamed, 3);
        CHECK(h2[1] == h[0]);
        CHECK(h2[2] == h[1]);
        CHECK(h2[0] == h[2]);
    }
    SUBCASE("empty input rejected") {
        CHECK_THROWS_AS(assignment_histogram({}, 2), EmptyInput);
    }
}

TEST_CASE("relative_rate_gain") {
    CHECK(relative_rate_gain(2.0, 2.0) == 0.0);
    CHECK(relative_rate_gain(2.0, 1.0) == doctest::Approx(0.5));
    CHECK(relative_rate_gain(1.0, 2.0) == doctest::Approx(-1.0));
    CHECK_THROWS_AS(relative_rate_gain(0.0, 1.0), NonpositiveReference);
}

TEST_CASE("empirical_sinr_stats") {
    PeriodDataset p;
    p.topology.k = 1;
    ChannelRealization r;
    r.gains = Mat(1, 1);
    r.gains(0, 0) = 1.0;
    p.realizations.push_back(r);

    const double pmax = dbm_to_linear(-35.0);
    const double sigma2 = dbm_to_linear(-70.0);
    const SinrStats st = empirical_sinr_stats(p, pmax, sigma2);
    CHECK(st.mean_db == doctest::Approx(35.0).epsilon(1e-12));
    CHECK(st.count == 1);

    SUBCASE("doubling pmax shifts every statistic by 3.0103 dB") {
        const SinrStats st2 = empirical_sinr_stats(p, 2.0 * pmax, sigma2);
        CHECK(st2.mean_db - st.mean_db == doctest::Approx(10.0 * std::log10(2.0)).epsilon(1e-12));
    }
    SUBCASE("invariant under link relabeling") {
        const PeriodDataset big = testutil::small_period(73, 5, 6, 3, 3);
        PeriodDataset shuffled = big;
        const std::vector<int> perm = {3, 1, 4, 0, 2};
        for (auto& g : shuffled.realizations) g = permute_channel(g, perm);
        const SinrStats a = empirical_sinr_stats(big, pmax, sigma2);
        const SinrStats b = empirical_sinr_stats(shuffled, pmax, sigma2);
        CHECK(a.mean_db == doctest::Approx(b.mean_db).epsilon(1e-12));
        CHECK(a.max_db == doctest::Approx(b.max_db).epsilon(1e-12));
    }
}

TEST_CASE("sign test p-values") {
    CHECK(sign_test_pvalue(10, 10) == doctest::Approx(std::pow(0.5, 10)).epsilon(1e-12));
    CHECK(sign_test_pvalue(9, 10) == doctest::Approx(11.0 / 1024.0).epsilon(1e-12));
    CHECK(sign_test_pvalue(0, 10) == doctest::Approx(1.0));
    CHECK(sign_test_pvalue(5, 10) > 0.05);
}
