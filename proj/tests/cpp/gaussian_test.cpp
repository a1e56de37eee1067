#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "gtsad/gaussian.hpp"
#include "gtsad/tape.hpp"
#include "gtsad/tensor.hpp"
#include "support/oracles.hpp"

using gtsad::GaussianParams;
using gtsad::GaussianVal;
using gtsad::Tape;
using gtsad::Tensor;
using gtsad::Val;

TEST_CASE("scalar normal log-density reference points") {
    CHECK(gtsad::normalLogPdf(0.0, 0.0, 1.0) ==
          doctest::Approx(-0.91893853320467274).epsilon(1e-15));
    // traffic-count example: under N(100, 200) an observation of 30
    CHECK(gtsad::normalLogPdf(30.0, 100.0, 200.0) ==
          doctest::Approx(-15.818097216478691).epsilon(1e-14));
    CHECK_THROWS_AS(gtsad::normalLogPdf(0.0, 0.0, 0.0), std::domain_error);
    CHECK_THROWS_AS(gtsad::normalLogPdf(0.0, 0.0, -1.0), std::domain_error);
}

TEST_CASE("diagonal log-density sums element terms") {
    Tensor x = Tensor::of({3}, {0.5, -0.2, 1.0});
    Tensor mean = Tensor::of({3}, {0.4, 0.0, 1.2});
    Tensor stddev = Tensor::of({3}, {0.1, 0.2, 0.3});
    double got = gtsad::gaussianLogDensity(x, mean, stddev);
    CHECK(got == doctest::Approx(1.1369579879178416).epsilon(1e-13));

    double bySum = gtsad::normalLogPdf(0.5, 0.4, 0.01) + gtsad::normalLogPdf(-0.2, 0.0, 0.04) +
                   gtsad::normalLogPdf(1.0, 1.2, 0.09);
    CHECK(got == doctest::Approx(bySum).epsilon(1e-13));

    Tensor badStd = Tensor::of({3}, {0.1, 0.0, 0.3});
    CHECK_THROWS_AS(gtsad::gaussianLogDensity(x, mean, badStd), std::domain_error);
}

TEST_CASE("tape and plain log-density agree and differentiate") {
    Tensor x = Tensor::of({4}, {0.5, -0.2, 1.0, 2.5});
    Tensor mean = Tensor::of({4}, {0.4, 0.0, 1.2, 2.0});
    Tensor stddev = Tensor::of({4}, {0.6, 0.9, 1.1, 0.7});

    Tape tape;
    Val vx = tape.input(x);
    Val vm = tape.input(mean);
    Val vs = tape.input(stddev);
    Val out = gtsad::gaussianLogDensity(tape, vx, vm, vs);
    CHECK(tape.value(out).asScalar() ==
          doctest::Approx(gtsad::gaussianLogDensity(x, mean, stddev)).epsilon(1e-14));

    tape.backward(out);
    std::vector<Tensor> analytic{tape.grad(vx), tape.grad(vm), tape.grad(vs)};
    auto f = [](const std::vector<Tensor>& p) { return gtsad::gaussianLogDensity(p[0], p[1], p[2]); };
    CHECK(gtsad::testsupport::maxGradRelError(f, {x, mean, stddev}, analytic) < 1e-6);
}

TEST_CASE("KL closed form: identity, unit shift, frozen vector example") {
    GaussianParams q{Tensor::of({2}, {0.3, -1.0}), Tensor::of({2}, {0.7, 1.3})};
    CHECK(gtsad::klDiagGaussians(q, q) == 0.0);

    GaussianParams shifted{Tensor::of({1}, {1.0}), Tensor::of({1}, {1.0})};
    GaussianParams standard{Tensor::of({1}, {0.0}), Tensor::of({1}, {1.0})};
    CHECK(gtsad::klDiagGaussians(shifted, standard) == doctest::Approx(0.5).epsilon(1e-15));

    GaussianParams q3{Tensor::of({3}, {0.3, -1.0, 2.0}), Tensor::of({3}, {0.8, 1.2, 0.5})};
    GaussianParams p3{Tensor::of({3}, {-0.1, 0.0, 1.5}), Tensor::of({3}, {1.5, 1.0, 2.0})};
    CHECK(gtsad::klDiagGaussians(q3, p3) == doctest::Approx(1.7928592415260879).epsilon(1e-13));
}

TEST_CASE("KL closed form sits inside a Monte Carlo confidence band") {
    Tensor meanQ = Tensor::of({3}, {0.3, -1.0, 2.0});
    Tensor stdQ = Tensor::of({3}, {0.8, 1.2, 0.5});
    Tensor meanP = Tensor::of({3}, {-0.1, 0.0, 1.5});
    Tensor stdP = Tensor::of({3}, {1.5, 1.0, 2.0});
    double exact = gtsad::klDiagGaussians({meanQ, stdQ}, {meanP, stdP});
    double mc = gtsad::testsupport::mcKlDiagGaussians(meanQ, stdQ, meanP, stdP, 200000, 99);
    CHECK(std::abs(exact - mc) < 0.02);
}

TEST_CASE("KL on tape matches the plain form and differentiates") {
    Tensor meanQ = Tensor::of({3}, {0.3, -1.0, 2.0});
    Tensor stdQ = Tensor::of({3}, {0.8, 1.2, 0.5});
    Tensor meanP = Tensor::of({3}, {-0.1, 0.0, 1.5});
    Tensor stdP = Tensor::of({3}, {1.5, 1.0, 2.0});

    Tape tape;
    GaussianVal q{tape.input(meanQ), tape.input(stdQ)};
    GaussianVal p{tape.input(meanP), tape.input(stdP)};
    Val out = gtsad::klDiagGaussians(tape, q, p);
    CHECK(tape.value(out).asScalar() ==
          doctest::Approx(gtsad::klDiagGaussians({meanQ, stdQ}, {meanP, stdP})).epsilon(1e-13));

    tape.backward(out);
    std::vector<Tensor> analytic{tape.grad(q.mean), tape.grad(q.stddev), tape.grad(p.mean),
                                 tape.grad(p.stddev)};
    auto f = [](const std::vector<Tensor>& t) {
        return gtsad::klDiagGaussians({t[0], t[1]}, {t[2], t[3]});
    };
    CHECK(gtsad::testsupport::maxGradRelError(f, {meanQ, stdQ, meanP, stdP}, analytic) < 1e-6);
}

TEST_CASE("reparameterization is mean + stddev * noise") {
    Tape tape;
    GaussianVal g{tape.input(Tensor::of({3}, {1.0, -2.0, 0.5})),
                  tape.input(Tensor::of({3}, {0.1, 2.0, 1.0}))};
    Val noise = tape.constant(Tensor::of({3}, {0.5, -1.0, 0.0}));
    Tensor z = tape.value(gtsad::reparameterize(tape, g, noise));
    CHECK(z[0] == 1.05);
    CHECK(z[1] == -4.0);
    CHECK(z[2] == 0.5);

    // gradient flows through both heads scaled by the right factors
    Val out = tape.sum(gtsad::reparameterize(tape, g, noise));
    tape.backward(out);
    CHECK(tape.grad(g.mean)[1] == 1.0);
    CHECK(tape.grad(g.stddev)[0] == 0.5);
    CHECK(tape.grad(g.stddev)[1] == -1.0);
}
