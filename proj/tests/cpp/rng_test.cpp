#include "doctest.h"

#include <cmath>

#include "gtsad/rng.hpp"

using gtsad::Rng;

TEST_CASE("identical seeds give identical streams") {
    Rng a(42);
    Rng b(42);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.uniform() == b.uniform());
        CHECK(a.normal() == b.normal());
        CHECK(a.below(17) == b.below(17));
    }
}

TEST_CASE("different seeds diverge") {
    Rng a(1);
    Rng b(2);
    int same = 0;
    for (int i = 0; i < 50; ++i) {
        if (a.uniform() == b.uniform()) ++same;
    }
    CHECK(same == 0);
}

TEST_CASE("uniform stays in [0, 1) and below stays in range") {
    Rng rng(7);
    for (int i = 0; i < 10000; ++i) {
        double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        int k = rng.below(13);
        CHECK(k >= 0);
        CHECK(k < 13);
    }
}

TEST_CASE("normal draws have plausible first two moments") {
    Rng rng(2024);
    const int n = 200000;
    double sum = 0.0;
    double sumSq = 0.0;
    for (int i = 0; i < n; ++i) {
        double x = rng.normal();
        sum += x;
        sumSq += x * x;
    }
    double mean = sum / n;
    double var = sumSq / n - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("stream mixing is deterministic and sensitive to both arguments") {
    CHECK(Rng::mix(1, 2) == Rng::mix(1, 2));
    CHECK(Rng::mix(1, 2) != Rng::mix(2, 1));
    CHECK(Rng::mix(1, 2) != Rng::mix(1, 3));
    CHECK(Rng::mix(0, 0) != Rng::mix(0, 1));
}
