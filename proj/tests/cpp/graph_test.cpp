#include "doctest.h"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "gtsad/graph.hpp"
#include "gtsad/rng.hpp"
#include "gtsad/tape.hpp"
#include "support/oracles.hpp"

using gtsad::ChebyshevFilter;
using gtsad::ScaledLaplacian;
using gtsad::Tape;
using gtsad::Tensor;
using gtsad::Val;
using gtsad::WeightedGraph;

TEST_CASE("grid graph has 4-neighborhood structure") {
    WeightedGraph g = gtsad::buildGridGraph(2, 3);
    CHECK(g.nodeCount() == 6);
    // corners degree 2, edge middles degree 3
    Tensor d = g.degrees();
    CHECK(d[0] == 2.0);
    CHECK(d[1] == 3.0);
    CHECK(d[2] == 2.0);
    CHECK(g.weights().at(0, 1) == 1.0);
    CHECK(g.weights().at(0, 3) == 1.0);
    CHECK(g.weights().at(0, 4) == 0.0);
    CHECK(g.weights().at(0, 2) == 0.0);

    CHECK_THROWS_AS(gtsad::buildGridGraph(1, 1), std::invalid_argument);
    CHECK_THROWS_AS(gtsad::buildGridGraph(0, 5), std::invalid_argument);
}

TEST_CASE("weighted graph validation") {
    Tensor asym = Tensor::of({2, 2}, {0, 1, 2, 0});
    CHECK_THROWS_AS(WeightedGraph(2, asym), std::invalid_argument);

    Tensor neg = Tensor::of({2, 2}, {0, -1, -1, 0});
    CHECK_THROWS_AS(WeightedGraph(2, neg), std::invalid_argument);

    Tensor diag = Tensor::of({2, 2}, {1, 1, 1, 0});
    CHECK_THROWS_AS(WeightedGraph(2, diag), std::invalid_argument);

    Tensor disconnected = Tensor::of({3, 3}, {0, 1, 0, 1, 0, 0, 0, 0, 0});
    CHECK_THROWS_AS(WeightedGraph(3, disconnected), std::invalid_argument);

    CHECK_THROWS_AS(WeightedGraph(1, Tensor::zeros({1, 1})), std::invalid_argument);
}

TEST_CASE("normalized Laplacian of the two-node path") {
    WeightedGraph g = gtsad::buildGridGraph(1, 2);
    Tensor l = gtsad::normalizedLaplacian(g);
    CHECK(l.at(0, 0) == 1.0);
    CHECK(l.at(0, 1) == -1.0);
    CHECK(l.at(1, 0) == -1.0);
    CHECK(l.at(1, 1) == 1.0);
}

TEST_CASE("power iteration finds the dominant eigenvalue") {
    // the two-node path is the trap case: its dominant eigenvector (1, -1)
    // is orthogonal to a naive all-ones start vector
    WeightedGraph path = gtsad::buildGridGraph(1, 2);
    double lm = gtsad::estimateLambdaMax(gtsad::normalizedLaplacian(path));
    CHECK(lm == doctest::Approx(2.0).epsilon(1e-5));

    Tensor a = Tensor::of({2, 2}, {2, 1, 1, 2});
    CHECK(gtsad::estimateLambdaMax(a) == doctest::Approx(3.0).epsilon(1e-6));

    // bipartite grid: normalized Laplacian spectrum peaks at exactly 2
    WeightedGraph grid = gtsad::buildGridGraph(2, 2);
    CHECK(gtsad::estimateLambdaMax(gtsad::normalizedLaplacian(grid)) ==
          doctest::Approx(2.0).epsilon(1e-4));

    CHECK_THROWS_AS(gtsad::estimateLambdaMax(Tensor::of({2, 2}, {2, 1, 1, 2}), 1e-16, 3),
                    gtsad::PowerIterationError);
    try {
        gtsad::estimateLambdaMax(Tensor::of({2, 2}, {2, 1, 1, 2}), 1e-16, 3);
    } catch (const gtsad::PowerIterationError& e) {
        CHECK(e.bestEstimate == doctest::Approx(3.0).epsilon(0.5));
    }
}

TEST_CASE("rescaled Laplacian of the two-node path") {
    ScaledLaplacian sl(gtsad::buildGridGraph(1, 2));
    CHECK(sl.lambdaMax() == doctest::Approx(2.0).epsilon(1e-5));
    CHECK(sl.dense().at(0, 0) == doctest::Approx(0.0).epsilon(1e-5));
    CHECK(sl.dense().at(0, 1) == doctest::Approx(-1.0).epsilon(1e-5));
    CHECK(sl.dense().at(1, 0) == doctest::Approx(-1.0).epsilon(1e-5));
    CHECK(sl.dense().at(1, 1) == doctest::Approx(0.0).epsilon(1e-5));

    // sparse entries reproduce the dense matrix
    Tensor rebuilt = Tensor::zeros({2, 2});
    const gtsad::SparseMatrix& m = sl.matrix();
    for (size_t e = 0; e < m.entryCount(); ++e) {
        rebuilt.at(m.rows[e], m.cols[e]) += m.weights[e];
    }
    for (int i = 0; i < 4; ++i) CHECK(rebuilt[static_cast<size_t>(i)] == sl.dense()[static_cast<size_t>(i)]);
}

TEST_CASE("order-2 filter on the two-node path swaps and negates the signal") {
    ScaledLaplacian sl(gtsad::buildGridGraph(1, 2));
    ChebyshevFilter f{Tensor::of({2, 1, 1}, {0.0, 1.0})};
    Tensor x = Tensor::of({2, 1}, {3.0, -5.0});
    Tensor y = gtsad::chebyshevApply(f, sl, x);
    CHECK(y.at(0, 0) == doctest::Approx(5.0).epsilon(1e-5));
    CHECK(y.at(1, 0) == doctest::Approx(-3.0).epsilon(1e-5));
}

TEST_CASE("order-1 filter scales the signal") {
    ScaledLaplacian sl(gtsad::buildGridGraph(2, 2));
    ChebyshevFilter f{Tensor::of({1, 1, 1}, {(2.5)})};
    Tensor x = Tensor::of({4, 1}, {1.0, 2.0, 3.0, 4.0});
    Tensor y = gtsad::chebyshevApply(f, sl, x);
    for (int i = 0; i < 4; ++i) CHECK(y.at(i, 0) == 2.5 * x.at(i, 0));
}

TEST_CASE("filter matches the dense spectral oracle on random graphs") {
    gtsad::Rng rng(314159);
    for (int trial = 0; trial < 40; ++trial) {
        int n = 2 + rng.below(11);
        int k = 1 + rng.below(4);
        WeightedGraph g = gtsad::testsupport::randomConnectedGraph(rng, n);
        ScaledLaplacian sl(g);

        Tensor coeff = Tensor::zeros({k, 1, 1});
        for (int i = 0; i < k; ++i) coeff[static_cast<size_t>(i)] = rng.uniform(-1.0, 1.0);
        Tensor x = Tensor::zeros({n, 1});
        for (int i = 0; i < n; ++i) x[static_cast<size_t>(i)] = rng.normal();

        Tensor got = gtsad::chebyshevApply(ChebyshevFilter{coeff}, sl, x);

        Tensor chebVec = Tensor::zeros({k});
        for (int i = 0; i < k; ++i) chebVec[static_cast<size_t>(i)] = coeff[static_cast<size_t>(i)];
        Tensor mono = gtsad::testsupport::chebyshevToMonomial(chebVec);
        Tensor want = gtsad::spectralOracle(sl.dense(), mono, x);

        for (int i = 0; i < n; ++i) {
            CHECK(std::abs(got.at(i, 0) - want[static_cast<size_t>(i)]) < 1e-8);
        }
    }
}

TEST_CASE("multichannel filter mixes channels like per-pair spectral filters") {
    gtsad::Rng rng(2718);
    int n = 7;
    int k = 3;
    int cIn = 2;
    int cOut = 2;
    WeightedGraph g = gtsad::testsupport::randomConnectedGraph(rng, n);
    ScaledLaplacian sl(g);

    Tensor coeff = Tensor::zeros({k, cIn, cOut});
    for (int i = 0; i < coeff.size(); ++i) coeff[static_cast<size_t>(i)] = rng.uniform(-1.0, 1.0);
    Tensor x = Tensor::zeros({n, cIn});
    for (int i = 0; i < x.size(); ++i) x[static_cast<size_t>(i)] = rng.normal();

    Tensor got = gtsad::chebyshevApply(ChebyshevFilter{coeff}, sl, x);

    for (int co = 0; co < cOut; ++co) {
        Tensor want = Tensor::zeros({n});
        for (int ci = 0; ci < cIn; ++ci) {
            Tensor chebVec = Tensor::zeros({k});
            for (int o = 0; o < k; ++o) {
                chebVec[static_cast<size_t>(o)] = coeff[static_cast<size_t>((o * cIn + ci) * cOut + co)];
            }
            Tensor mono = gtsad::testsupport::chebyshevToMonomial(chebVec);
            Tensor xc = Tensor::zeros({n});
            for (int i = 0; i < n; ++i) xc[static_cast<size_t>(i)] = x.at(i, ci);
            Tensor part = gtsad::spectralOracle(sl.dense(), mono, xc);
            for (int i = 0; i < n; ++i) want[static_cast<size_t>(i)] += part[static_cast<size_t>(i)];
        }
        for (int i = 0; i < n; ++i) {
            CHECK(std::abs(got.at(i, co) - want[static_cast<size_t>(i)]) < 1e-8);
        }
    }
}

TEST_CASE("filter gradients match finite differences") {
    gtsad::Rng rng(555);
    int n = 5;
    int k = 3;
    WeightedGraph g = gtsad::testsupport::randomConnectedGraph(rng, n);
    ScaledLaplacian sl(g);

    Tensor coeff = Tensor::zeros({k, 2, 2});
    for (int i = 0; i < coeff.size(); ++i) coeff[static_cast<size_t>(i)] = rng.uniform(-1.0, 1.0);
    Tensor x = Tensor::zeros({n, 2});
    for (int i = 0; i < x.size(); ++i) x[static_cast<size_t>(i)] = rng.normal();

    auto scalarOut = [&sl](Tape& t, Val c, Val xv) {
        Val y = gtsad::chebyshevApply(t, c, sl, xv);
        return t.sum(t.mul(y, y));
    };

    Tape tape;
    Val c = tape.input(coeff);
    Val xv = tape.input(x);
    Val out = scalarOut(tape, c, xv);
    tape.backward(out);
    std::vector<Tensor> analytic{tape.grad(c), tape.grad(xv)};

    auto f = [&](const std::vector<Tensor>& p) {
        Tape scratch;
        Val cc = scratch.input(p[0]);
        Val xx = scratch.input(p[1]);
        return scratch.value(scalarOut(scratch, cc, xx)).asScalar();
    };
    CHECK(gtsad::testsupport::maxGradRelError(f, {coeff, x}, analytic) < 1e-6);
}

TEST_CASE("Jacobi eigendecomposition reconstructs the input") {
    Tensor a = Tensor::of({2, 2}, {2, 1, 1, 2});
    Tensor lambda, u;
    gtsad::jacobiEigen(a, lambda, u);
    CHECK(lambda[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(lambda[1] == doctest::Approx(3.0).epsilon(1e-12));

    gtsad::Rng rng(77);
    int n = 6;
    Tensor s = Tensor::zeros({n, n});
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            double v = rng.normal();
            s.at(i, j) = v;
            s.at(j, i) = v;
        }
    }
    gtsad::jacobiEigen(s, lambda, u);
    // A = U diag(lambda) U^T and U orthonormal
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            double rebuilt = 0.0;
            double dot = 0.0;
            for (int e = 0; e < n; ++e) {
                rebuilt += u.at(i, e) * lambda[static_cast<size_t>(e)] * u.at(j, e);
                dot += u.at(e, i) * u.at(e, j);
            }
            CHECK(std::abs(rebuilt - s.at(i, j)) < 1e-10);
            CHECK(std::abs(dot - (i == j ? 1.0 : 0.0)) < 1e-10);
        }
    }
}

TEST_CASE("spectral oracle basics and refusal") {
    // constant polynomial g = 1 reproduces the signal for any symmetric matrix
    Tensor a = Tensor::of({3, 3}, {1, 0.5, 0, 0.5, 2, -0.25, 0, -0.25, 1.5});
    Tensor x = Tensor::of({3}, {1.0, -2.0, 0.5});
    Tensor y = gtsad::spectralOracle(a, Tensor::of({1}, {1.0}), x);
    for (int i = 0; i < 3; ++i) CHECK(y[static_cast<size_t>(i)] == doctest::Approx(x[static_cast<size_t>(i)]).epsilon(1e-12));

    // g(l) = l acts as the matrix itself
    Tensor y2 = gtsad::spectralOracle(a, Tensor::of({2}, {0.0, 1.0}), x);
    CHECK(y2[0] == doctest::Approx(1.0 * 1.0 + 0.5 * -2.0).epsilon(1e-10));

    CHECK_THROWS_AS(gtsad::spectralOracle(Tensor::zeros({65, 65}), Tensor::of({1}, {1.0}),
                                          Tensor::zeros({65})),
                    std::invalid_argument);
}

TEST_CASE("edge list round trip") {
    gtsad::Rng rng(4242);
    WeightedGraph g = gtsad::testsupport::randomConnectedGraph(rng, 9);
    std::stringstream buf;
    gtsad::writeEdgeList(g, buf);
    WeightedGraph back = gtsad::readEdgeList(buf);
    REQUIRE(back.nodeCount() == g.nodeCount());
    for (int i = 0; i < g.nodeCount(); ++i) {
        for (int j = 0; j < g.nodeCount(); ++j) {
            CHECK(back.weights().at(i, j) == g.weights().at(i, j));
        }
    }

    std::stringstream bad("0 0 1.0\n");
    CHECK_THROWS_AS(gtsad::readEdgeList(bad), std::invalid_argument);
    std::stringstream dup("0 1 1.0\n1 0 2.0\n");
    CHECK_THROWS_AS(gtsad::readEdgeList(dup), std::invalid_argument);
    std::stringstream empty("");
    CHECK_THROWS_AS(gtsad::readEdgeList(empty), std::invalid_argument);
    std::stringstream negw("0 1 -1.0\n");
    CHECK_THROWS_AS(gtsad::readEdgeList(negw), std::invalid_argument);
}
