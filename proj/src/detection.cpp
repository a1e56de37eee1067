#include "gtsad/detection.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "gtsad/rng.hpp"

namespace gtsad {

StepScore scoreStep(const Vrnn& model, const ModelParams& params, const RnnState& state,
                    const Tensor& xt, const ExternalRecord& et, int sampleCount, uint64_t seed) {
    if (sampleCount < 1) throw std::invalid_argument("sample count must be at least 1");
    const ModelConfig& cfg = model.config();
    const int dz = cfg.latentDim;
    const int nc = cfg.flatInputDim();

    GaussianParams prior = model.priorStep(params, state);
    GaussianParams posterior = model.encodeStep(params, xt, et, state);
    double kl = klDiagGaussians(posterior, prior);

    Tensor xFlat = Tensor::of({nc}, xt.values()); // (n, C) row-major is node-major flat

    Rng rng(seed);
    double recon = 0.0;
    Tensor z = Tensor::zeros({dz});
    for (int s = 0; s < sampleCount; ++s) {
        for (int j = 0; j < dz; ++j) z[j] = posterior.mean[j] + posterior.stddev[j] * rng.normal();
        GaussianParams dec = model.decodeStep(params, z, state);
        recon += gaussianLogDensity(xFlat, dec.mean, dec.stddev);
    }
    recon /= sampleCount;

    Tensor predMean = Tensor::zeros({nc});
    Tensor meanSq = Tensor::zeros({nc});
    Tensor varSum = Tensor::zeros({nc});
    for (int s = 0; s < sampleCount; ++s) {
        for (int j = 0; j < dz; ++j) z[j] = prior.mean[j] + prior.stddev[j] * rng.normal();
        GaussianParams dec = model.decodeStep(params, z, state);
        for (int k = 0; k < nc; ++k) {
            predMean[k] += dec.mean[k];
            meanSq[k] += dec.mean[k] * dec.mean[k];
            varSum[k] += dec.stddev[k] * dec.stddev[k];
        }
    }
    Tensor predStd = Tensor::zeros({nc});
    for (int k = 0; k < nc; ++k) {
        predMean[k] /= sampleCount;
        double within = varSum[k] / sampleCount;
        double between = std::max(0.0, meanSq[k] / sampleCount - predMean[k] * predMean[k]);
        predStd[k] = std::sqrt(within + between);
    }

    StepScore out;
    out.score = recon - kl;
    out.next = model.recurrenceStep(params, xt, posterior.mean, state);
    out.predictive = {std::move(predMean), std::move(predStd)};
    return out;
}

ThresholdCalibration calibrateThreshold(const std::vector<double>& cleanScores, double quantile) {
    if (!(quantile > 0.0 && quantile < 1.0)) {
        throw std::invalid_argument("calibration quantile must lie in (0, 1)");
    }
    if (cleanScores.size() < 100) {
        throw std::invalid_argument("threshold calibration needs at least 100 clean scores, got " +
                                    std::to_string(cleanScores.size()));
    }
    std::vector<double> sorted = cleanScores;
    std::sort(sorted.begin(), sorted.end());
    double pos = quantile * static_cast<double>(sorted.size() - 1);
    size_t lo = static_cast<size_t>(pos);
    double frac = pos - static_cast<double>(lo);
    double tau = sorted[lo];
    if (lo + 1 < sorted.size()) tau += frac * (sorted[lo + 1] - sorted[lo]);

    ThresholdCalibration cal;
    cal.scoreThreshold = tau;
    cal.quantile = quantile;
    return cal;
}

double lrtStatistic(double x, double mean, double variance) {
    if (!(variance > 0.0)) throw std::domain_error("predictive variance must be positive");
    constexpr double epsRatio = 1e-3;
    constexpr double epsVar = 1e-6;
    double altVar;
    if (mean > 0.0 && x > epsRatio * mean) {
        altVar = (variance / mean) * x;
    } else {
        altVar = std::max(variance * epsRatio, epsVar);
    }
    double lambda = -2.0 * (normalLogPdf(x, mean, variance) - normalLogPdf(x, x, altVar));
    return std::max(0.0, lambda);
}

namespace {

// regularized lower incomplete gamma P(a, x): series for x < a+1, else the
// Lentz continued fraction of the upper tail
double lowerGammaSeries(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int n = 0; n < 500; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double upperGammaContinuedFraction(double a, double x) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-16) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

} // namespace

double chiSquareCdf(double x, int df) {
    if (df < 1) throw std::invalid_argument("degrees of freedom must be at least 1");
    if (x < 0.0) throw std::domain_error("chi-square statistic must be nonnegative");
    if (x == 0.0) return 0.0;
    double a = 0.5 * df;
    double half = 0.5 * x;
    double p = half < a + 1.0 ? lowerGammaSeries(a, half) : 1.0 - upperGammaContinuedFraction(a, half);
    return std::clamp(p, 0.0, 1.0);
}

std::vector<LocalizedEntry> localize(const GaussianParams& predictive, const Tensor& xt,
                                     double odThreshold) {
    if (xt.rank() != 2) {
        throw std::invalid_argument("observed signal must be rank-2 (nodes, channels), got " +
                                    xt.shapeString());
    }
    if (!(odThreshold > 0.0 && odThreshold < 1.0)) {
        throw std::invalid_argument("anomalous-degree threshold must lie in (0, 1)");
    }
    const int nodes = xt.shape()[0];
    const int channels = xt.shape()[1];
    if (predictive.mean.size() != xt.size() || predictive.stddev.size() != xt.size()) {
        throw std::invalid_argument("predictive distribution covers " +
                                    std::to_string(predictive.mean.size()) + " entries, signal has " +
                                    std::to_string(xt.size()));
    }
    std::vector<LocalizedEntry> entries;
    for (int i = 0; i < nodes; ++i) {
        for (int c = 0; c < channels; ++c) {
            size_t k = static_cast<size_t>(i) * channels + c;
            double sd = predictive.stddev[k];
            double od = chiSquareCdf(lrtStatistic(xt[k], predictive.mean[k], sd * sd), 1);
            if (od > odThreshold) entries.push_back({i, c, od});
        }
    }
    std::sort(entries.begin(), entries.end(), [](const LocalizedEntry& a, const LocalizedEntry& b) {
        if (a.od != b.od) return a.od > b.od;
        if (a.node != b.node) return a.node < b.node;
        return a.channel < b.channel;
    });
    return entries;
}

DetectionReport detectSeries(const Vrnn& model, const ModelParams& params, const GraphSeries& x,
                             const ExternalSeries& e, const ThresholdCalibration& calibration,
                             int sampleCount, uint64_t seed, const RnnState* initialState) {
    if (x.steps != e.size()) {
        throw std::invalid_argument("series has " + std::to_string(x.steps) + " steps but " +
                                    std::to_string(e.size()) + " external records");
    }
    DetectionReport report;
    report.predictiveMean = GraphSeries::zeros(x.steps, x.channels, x.nodes);
    report.predictiveStddev = GraphSeries::zeros(x.steps, x.channels, x.nodes);
    RnnState state = initialState ? *initialState : model.zeroState();
    for (int t = 0; t < x.steps; ++t) {
        Tensor xt = x.stepSignal(t);
        StepScore step = scoreStep(model, params, state, xt, e.records[static_cast<size_t>(t)],
                                   sampleCount, Rng::mix(seed, static_cast<uint64_t>(t)));
        bool flag = step.score < calibration.scoreThreshold;
        report.scores.push_back(step.score);
        report.flagged.push_back(flag ? 1 : 0);
        report.localized.push_back(flag ? localize(step.predictive, xt, calibration.odThreshold)
                                        : std::vector<LocalizedEntry>{});
        for (int i = 0; i < x.nodes; ++i) {
            for (int c = 0; c < x.channels; ++c) {
                size_t k = static_cast<size_t>(i) * x.channels + c;
                report.predictiveMean.at(t, c, i) = step.predictive.mean[k];
                report.predictiveStddev.at(t, c, i) = step.predictive.stddev[k];
            }
        }
        state = std::move(step.next);
    }
    return report;
}

RnnState warmupState(const Vrnn& model, const ModelParams& params, const GraphSeries& x,
                     const ExternalSeries& e, const RnnState* initialState) {
    if (x.steps != e.size()) {
        throw std::invalid_argument("series has " + std::to_string(x.steps) + " steps but " +
                                    std::to_string(e.size()) + " external records");
    }
    RnnState state = initialState ? *initialState : model.zeroState();
    for (int t = 0; t < x.steps; ++t) {
        Tensor xt = x.stepSignal(t);
        GaussianParams posterior = model.encodeStep(params, xt, e.records[static_cast<size_t>(t)], state);
        state = model.recurrenceStep(params, xt, posterior.mean, state);
    }
    return state;
}

} // namespace gtsad
