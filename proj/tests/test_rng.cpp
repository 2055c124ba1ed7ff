#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "bcrf/rng.hpp"

using namespace bcrf;

TEST_SUITE("rng") {

TEST_CASE("engine matches std::mt19937_64 for the same seed") {
    Rng rng(12345);
    std::mt19937_64 ref(12345);
    for (int i = 0; i < 16; ++i) CHECK(rng.next_u64() == ref());
}

TEST_CASE("same seed, same stream; different seed, different stream") {
    Rng a(9), b(9), c(10);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 64; ++i) {
        auto x = a.next_u64(), y = b.next_u64(), z = c.next_u64();
        all_equal = all_equal && (x == y);
        any_diff = any_diff || (x != z);
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("uniform stays in [0, 1) and looks flat") {
    Rng rng(31);
    double sum = 0.0;
    for (int i = 0; i < 20000; ++i) {
        double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(sum / 20000 == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("uniform_int covers its range") {
    Rng rng(5);
    std::set<int> seen;
    for (int i = 0; i < 1000; ++i) {
        int v = rng.uniform_int(5);
        REQUIRE(v >= 0);
        REQUIRE(v < 5);
        seen.insert(v);
    }
    CHECK(seen.size() == 5);
    for (int i = 0; i < 200; ++i) {
        int v = rng.uniform_range(-3, 3);
        REQUIRE(v >= -3);
        REQUIRE(v <= 3);
    }
}

TEST_CASE("normal has roughly unit moments") {
    Rng rng(77);
    const int n = 40000;
    double mean = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        double x = rng.normal();
        mean += x;
        sq += x * x;
    }
    mean /= n;
    const double var = sq / n - mean * mean;
    CHECK(mean == doctest::Approx(0.0).epsilon(1).scale(0.05));
    CHECK(var == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("shuffle is a permutation") {
    Rng rng(3);
    std::vector<int> v(100);
    std::iota(v.begin(), v.end(), 0);
    rng.shuffle(v);
    auto sorted = v;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> expect(100);
    std::iota(expect.begin(), expect.end(), 0);
    CHECK(sorted == expect);
    CHECK(v != expect); // astronomically unlikely to be identity
}

TEST_CASE("sample_without_replacement yields k distinct in-range values") {
    Rng rng(8);
    auto s = rng.sample_without_replacement(20, 7);
    CHECK(s.size() == 7);
    std::set<int> uniq(s.begin(), s.end());
    CHECK(uniq.size() == 7);
    for (int v : s) {
        CHECK(v >= 0);
        CHECK(v < 20);
    }
}

TEST_CASE("derive_seed separates streams deterministically") {
    CHECK(derive_seed(1, 2) == derive_seed(1, 2));
    CHECK(derive_seed(1, 2) != derive_seed(1, 3));
    CHECK(derive_seed(1, 2) != derive_seed(2, 2));
    CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
    CHECK(derive_seed(1, 2, 3) != derive_seed(1, 2, 4));
    CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 2));
}

} // TEST_SUITE
