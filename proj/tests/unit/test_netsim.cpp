#include <cmath>

#include "doctest.h"
#include "gnnpower/errors.hpp"
#include "gnnpower/netsim.hpp"
#include "test_util.hpp"

using namespace gnnpower;

TEST_CASE("dbm_to_linear") {
    CHECK(dbm_to_linear(0.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(dbm_to_linear(-70.0) == doctest::Approx(1e-7).epsilon(1e-12));
    CHECK(dbm_to_linear(-35.0) == doctest::Approx(3.1622776601683794e-4).epsilon(1e-12));
}

TEST_CASE("config validation") {
    SimConfig cfg;
    cfg.validate();
    SimConfig bad = cfg;
    bad.train_slots = 60;
    bad.test_slots = 60;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = cfg;
    bad.pathloss_exponent = 0.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = cfg;
    bad.size_policy = {8, 4};
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("draw_topology fixed size and bounds") {
    SimConfig cfg;
    cfg.size_policy = SizePolicy::fixed(10);
    RngStream rng(42);
    const Topology t = draw_topology(cfg, 0, rng);
    CHECK(t.k == 10);
    for (int i = 0; i < t.k; ++i) {
        CHECK(std::abs(t.tx[i][0]) <= 10.0);
        CHECK(std::abs(t.tx[i][1]) <= 10.0);
        CHECK(std::abs(t.rx[i][0] - t.tx[i][0]) <= 2.5);
        CHECK(std::abs(t.rx[i][1] - t.tx[i][1]) <= 2.5);
    }
}

TEST_CASE("adjacency rules") {
    SimConfig cfg;
    cfg.size_policy = SizePolicy::fixed(6);

    SUBCASE("zero radius keeps only the diagonal") {
        cfg.interference_radius = 0.0;
        RngStream rng(7);
        const Topology t = draw_topology(cfg, 0, rng);
        for (int j = 0; j < t.k; ++j)
            for (int k2 = 0; k2 < t.k; ++k2) CHECK(t.adjacent(j, k2) == (j == k2));
    }
    SUBCASE("absent radius connects everything") {
        RngStream rng(7);
        const Topology t = draw_topology(cfg, 0, rng);
        for (int j = 0; j < t.k; ++j)
            for (int k2 = 0; k2 < t.k; ++k2) CHECK(t.adjacent(j, k2));
    }
    SUBCASE("finite radius gives a symmetric mask with full diagonal") {
        cfg.interference_radius = 5.0;
        RngStream rng(7);
        const Topology t = draw_topology(cfg, 0, rng);
        for (int j = 0; j < t.k; ++j) {
            CHECK(t.adjacent(j, j));
            for (int k2 = 0; k2 < t.k; ++k2) CHECK(t.adjacent(j, k2) == t.adjacent(k2, j));
        }
    }
}

TEST_CASE("monotone connectivity in the radius") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        SimConfig a;
        a.size_policy = SizePolicy::fixed(10);
        a.interference_radius = 3.0;
        SimConfig b = a;
        b.interference_radius = 6.0;
        RngStream ra(seed), rb(seed);
        const Topology ta = draw_topology(a, 0, ra);
        const Topology tb = draw_topology(b, 0, rb);
        for (std::size_t i = 0; i < ta.adj.size(); ++i)
            if (ta.adj[i]) CHECK(tb.adj[i]);
    }
}

TEST_CASE("pathloss_matrix values and errors") {
    Topology t;
    t.k = 2;
    t.tx = {{0.0, 0.0}, {4.0, 4.0}};
    t.rx = {{1.0, 0.0}, {4.0, 0.0}};
    t.adj = {1, 1, 1, 1};
    const Mat pl = pathloss_matrix(t, 2.2);
    CHECK(pl(0, 0) == doctest::Approx(1.0)); // unit direct distance
    CHECK(pl(1, 1) == doctest::Approx(std::pow(4.0, -2.2)));
    CHECK(pl(0, 1) == doctest::Approx(0.047366).epsilon(1e-4)); // distance 4
    CHECK(pl(1, 0) == doctest::Approx(std::pow(5.0, -2.2)));

    SUBCASE("masked edge stays zero") {
        t.adj = {1, 0, 0, 1};
        const Mat masked = pathloss_matrix(t, 2.2);
        CHECK(masked(0, 1) == 0.0);
        CHECK(masked(1, 0) == 0.0);
    }
    SUBCASE("coincident required pair is rejected") {
        t.rx[0] = t.tx[0];
        CHECK_THROWS_AS(pathloss_matrix(t, 2.2), DegenerateGeometry);
    }
}

TEST_CASE("draw_fading determinism and statistics") {
    RngStream a(5), b(5);
    const Mat fa = draw_fading(4, a);
    const Mat fb = draw_fading(4, b);
    CHECK(fa.a == fb.a);
    for (double v : fa.a) CHECK(v > 0.0);

    RngStream tiny(9);
    const Mat one = draw_fading(1, tiny);
    CHECK(one.a.size() == 1);
    CHECK(one.a[0] > 0.0);

    // Rayleigh(1) second moment is 2
    RngStream mc(123);
    const int n = 1000000;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = mc.rayleigh(1.0);
        acc += x * x;
    }
    CHECK(acc / n == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("transmitter placement is quadrant-uniform") {
    SimConfig cfg;
    cfg.size_policy = SizePolicy::fixed(10);
    const RngStream root(77);
    long q[4] = {0, 0, 0, 0};
    long n = 0;
    for (int rep = 0; rep < 200; ++rep) {
        RngStream rng = root.child(static_cast<std::uint64_t>(rep));
        const Topology t = draw_topology(cfg, rep, rng);
        for (int i = 0; i < t.k; ++i) {
            const int qi = (t.tx[i][0] >= 0.0 ? 1 : 0) + (t.tx[i][1] >= 0.0 ? 2 : 0);
            ++q[qi];
            ++n;
        }
    }
    const double expect = static_cast<double>(n) / 4.0;
    const double sigma = std::sqrt(static_cast<double>(n) * 0.25 * 0.75);
    for (long c : q) CHECK(std::abs(static_cast<double>(c) - expect) <= 3.0 * sigma);
}

TEST_CASE("realize_channel combines pathloss and fading") {
    Topology t;
    t.k = 2;
    t.tx = {{0.0, 0.0}, {3.0, 0.0}};
    t.rx = {{1.0, 0.0}, {4.0, 0.0}};
    t.adj = {1, 1, 1, 1};
    Mat pl(2, 2), fad(2, 2);
    pl(0, 0) = 1.0;
    pl(1, 1) = 0.5;
    fad(0, 0) = 1.0;
    fad(1, 1) = 2.0;
    fad(0, 1) = fad(1, 0) = 3.0;
    const ChannelRealization r = realize_channel(t, pl, fad, 0);
    CHECK(r.gains(0, 0) == doctest::Approx(1.0));
    CHECK(r.gains(1, 1) == doctest::Approx(1.0)); // (0.5 * 2)^2
    CHECK(r.gains(0, 1) == 0.0);                  // zero pathloss propagates

    Mat bad(3, 3);
    CHECK_THROWS_AS(realize_channel(t, pl, bad, 0), ShapeMismatch);
}

TEST_CASE("generate_period split") {
    SimConfig cfg;
    cfg.size_policy = SizePolicy::fixed(3);
    cfg.slots_per_period = 100;
    cfg.train_slots = 50;
    cfg.test_slots = 50;
    const PeriodDataset d = generate_period(cfg, 0, RngStream(3));
    CHECK(d.train_idx.size() == 50);
    CHECK(d.test_idx.size() == 50);
    for (int idx : d.train_idx)
        CHECK(std::find(d.test_idx.begin(), d.test_idx.end(), idx) == d.test_idx.end());

    SimConfig tiny = cfg;
    tiny.slots_per_period = 2;
    tiny.train_slots = 1;
    tiny.test_slots = 1;
    const PeriodDataset d2 = generate_period(tiny, 0, RngStream(3));
    CHECK(d2.train_idx == std::vector<int>{0});
    CHECK(d2.test_idx == std::vector<int>{1});
}

TEST_CASE("generation is deterministic and masked") {
    SimConfig cfg;
    cfg.size_policy = SizePolicy::uniform(4, 20);
    cfg.slots_per_period = 10;
    cfg.train_slots = 5;
    cfg.test_slots = 5;
    cfg.interference_radius = 8.0;
    const auto a = generate_meta_dataset(cfg, 10, RngStream(11));
    const auto b = generate_meta_dataset(cfg, 10, RngStream(11));
    CHECK(a.size() == 10);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].topology.k >= 4);
        CHECK(a[i].topology.k <= 20);
        REQUIRE(a[i].realizations.size() == b[i].realizations.size());
        for (std::size_t s = 0; s < a[i].realizations.size(); ++s) {
            CHECK(a[i].realizations[s].gains.a == b[i].realizations[s].gains.a);
            // masking soundness: positive gain implies adjacency
            const auto& g = a[i].realizations[s];
            for (int j = 0; j < g.k(); ++j)
                for (int k2 = 0; k2 < g.k(); ++k2)
                    if (g.gains(j, k2) > 0.0) CHECK(a[i].topology.adjacent(j, k2));
        }
    }

    const auto single = generate_meta_dataset(cfg, 1, RngStream(11));
    CHECK(single.size() == 1);
}
