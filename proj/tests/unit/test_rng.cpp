#include "doctest.h"
#include "gnnpower/rng.hpp"

using namespace gnnpower;

TEST_CASE("identical seeds give identical sequences") {
    RngStream a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("child streams are independent of parent draw position") {
    RngStream a(42), b(42);
    a.next_u64();
    a.next_u64();
    RngStream ca = a.child("x");
    RngStream cb = b.child("x");
    for (int i = 0; i < 10; ++i) CHECK(ca.next_u64() == cb.next_u64());
}

TEST_CASE("distinct labels give distinct streams") {
    RngStream root(7);
    RngStream a = root.child("alpha");
    RngStream b = root.child("beta");
    RngStream c = root.child(std::uint64_t{0});
    RngStream d = root.child(std::uint64_t{1});
    CHECK(a.next_u64() != b.next_u64());
    CHECK(c.next_u64() != d.next_u64());
}

TEST_CASE("uniform bounds") {
    RngStream rng(1);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        const double o = rng.uniform_open();
        CHECK(o > 0.0);
        CHECK(o < 1.0);
    }
}

TEST_CASE("uniform_int covers the range inclusively") {
    RngStream rng(2);
    bool lo_seen = false, hi_seen = false;
    for (int i = 0; i < 10000; ++i) {
        const int v = rng.uniform_int(4, 20);
        CHECK(v >= 4);
        CHECK(v <= 20);
        lo_seen |= (v == 4);
        hi_seen |= (v == 20);
    }
    CHECK(lo_seen);
    CHECK(hi_seen);
}
