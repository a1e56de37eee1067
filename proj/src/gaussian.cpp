#include "gtsad/gaussian.hpp"

#include <cmath>
#include <stdexcept>

namespace gtsad {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112; // log(2*pi)

void checkPositive(const Tensor& stddev, const char* who) {
    for (int i = 0; i < stddev.size(); ++i) {
        if (!(stddev[i] > 0.0)) {
            throw std::domain_error(std::string(who) + ": nonpositive stddev " +
                                    std::to_string(stddev[i]) + " at index " + std::to_string(i));
        }
    }
}

} // namespace

double normalLogPdf(double x, double mean, double variance) {
    if (!(variance > 0.0)) {
        throw std::domain_error("normalLogPdf: nonpositive variance " + std::to_string(variance));
    }
    const double d = x - mean;
    return -0.5 * (kLog2Pi + std::log(variance)) - d * d / (2.0 * variance);
}

Val gaussianLogDensity(Tape& tape, Val x, Val mean, Val stddev) {
    const Tensor& sx = tape.value(x);
    const Tensor& sm = tape.value(mean);
    const Tensor& ss = tape.value(stddev);
    if (!sx.sameShape(sm) || !sx.sameShape(ss)) {
        throw std::invalid_argument("gaussianLogDensity: shape mismatch " + sx.shapeString() + " vs " +
                                    sm.shapeString() + " vs " + ss.shapeString());
    }
    checkPositive(ss, "gaussianLogDensity");
    const int n = sx.size();
    Val z = tape.div(tape.sub(x, mean), stddev);
    Val quad = tape.scale(tape.sum(tape.mul(z, z)), 0.5);
    Val logs = tape.sum(tape.log(stddev));
    Val c = tape.constant(Tensor::scalar(-0.5 * kLog2Pi * n));
    return tape.sub(c, tape.add(logs, quad));
}

double gaussianLogDensity(const Tensor& x, const Tensor& mean, const Tensor& stddev) {
    Tape tape;
    Val v = gaussianLogDensity(tape, tape.constantRef(&x), tape.constantRef(&mean), tape.constantRef(&stddev));
    return tape.value(v).asScalar();
}

Val klDiagGaussians(Tape& tape, const GaussianVal& q, const GaussianVal& p) {
    const Tensor& mq = tape.value(q.mean);
    const Tensor& sq = tape.value(q.stddev);
    const Tensor& mp = tape.value(p.mean);
    const Tensor& sp = tape.value(p.stddev);
    if (!mq.sameShape(sq) || !mq.sameShape(mp) || !mq.sameShape(sp)) {
        throw std::invalid_argument("klDiagGaussians: shape mismatch " + mq.shapeString() + "/" +
                                    sq.shapeString() + " vs " + mp.shapeString() + "/" + sp.shapeString());
    }
    checkPositive(sq, "klDiagGaussians(q)");
    checkPositive(sp, "klDiagGaussians(p)");
    const int n = mq.size();
    Val logRatio = tape.sub(tape.log(p.stddev), tape.log(q.stddev));
    Val dm = tape.sub(q.mean, p.mean);
    Val num = tape.add(tape.mul(q.stddev, q.stddev), tape.mul(dm, dm));
    Val den = tape.scale(tape.mul(p.stddev, p.stddev), 2.0);
    Val terms = tape.add(logRatio, tape.div(num, den));
    return tape.sub(tape.sum(terms), tape.constant(Tensor::scalar(0.5 * n)));
}

double klDiagGaussians(const GaussianParams& q, const GaussianParams& p) {
    Tape tape;
    GaussianVal qv{tape.constantRef(&q.mean), tape.constantRef(&q.stddev)};
    GaussianVal pv{tape.constantRef(&p.mean), tape.constantRef(&p.stddev)};
    return tape.value(klDiagGaussians(tape, qv, pv)).asScalar();
}

Val reparameterize(Tape& tape, const GaussianVal& g, Val noise) {
    const Tensor& sm = tape.value(g.mean);
    const Tensor& sn = tape.value(noise);
    if (!sm.sameShape(sn)) {
        throw std::invalid_argument("reparameterize: noise shape " + sn.shapeString() +
                                    " does not match mean " + sm.shapeString());
    }
    return tape.add(g.mean, tape.mul(g.stddev, noise));
}

} // namespace gtsad
