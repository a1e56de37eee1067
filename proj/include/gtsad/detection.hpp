#pragma once

#include <cstdint>
#include <vector>

#include "gtsad/gaussian.hpp"
#include "gtsad/model.hpp"
#include "gtsad/series.hpp"

namespace gtsad {

/// Score threshold and the knobs it was derived with. Steps scoring below
/// scoreThreshold are flagged.
struct ThresholdCalibration {
    double scoreThreshold = 0.0;
    double quantile = 0.01;   // calibration quantile q
    double odThreshold = 0.95; // anomalous-degree cut for localization
};

struct LocalizedEntry {
    int node = 0;
    int channel = 0;
    double od = 0.0;
};

struct StepScore {
    double score = 0.0;        // per-step ELBO bound b_t
    RnnState next;             // state advanced with the observed signal
    GaussianParams predictive; // prior-predictive over the flat (n*C) signal
};

struct DetectionReport {
    std::vector<double> scores;
    std::vector<uint8_t> flagged;
    std::vector<std::vector<LocalizedEntry>> localized; // empty unless flagged
    GraphSeries predictiveMean;
    GraphSeries predictiveStddev;
};

/// One online scoring step. b_t averages [-KL(q||p) + log p(x_t | z_s)] over
/// S posterior samples z_s. The predictive Gaussian pushes S prior draws
/// through the decoder, averaging means and pooling variances (law of total
/// variance). The state advances with the observed x_t and the posterior
/// mean latent.
StepScore scoreStep(const Vrnn& model, const ModelParams& params, const RnnState& state,
                    const Tensor& xt, const ExternalRecord& et, int sampleCount, uint64_t seed);

/// Linearly interpolated q-quantile of clean scores; needs at least 100.
ThresholdCalibration calibrateThreshold(const std::vector<double>& cleanScores,
                                        double quantile = 0.01);

/// Likelihood ratio Lambda = -2 [log N(x; mu, var) - log N(x; x, altVar)]
/// against the proportionally rescaled alternative altVar = (var/mu)*x,
/// clamped at 0. When mu <= 0 or x <= 1e-3*mu the proportional rule breaks
/// down and altVar falls back to max(var*1e-3, 1e-6).
double lrtStatistic(double x, double mean, double variance);

/// Regularized lower incomplete gamma P(df/2, x/2).
double chiSquareCdf(double x, int df);

/// Anomalous degree od = chiSquareCdf(lrtStatistic(...), df=1) for every
/// (node, channel) of the rank-2 (nodes, channels) signal; entries with
/// od > threshold, sorted by od descending (ties by node then channel).
std::vector<LocalizedEntry> localize(const GaussianParams& predictive, const Tensor& xt,
                                     double odThreshold);

/// Streamed scoring of a whole series: one scoreStep per step (per-step
/// seeds derived from seed), localization on flagged steps only, predictive
/// moments recorded for every step. Starts from the zero state unless an
/// initial state (e.g. from warmupState over preceding data) is given.
DetectionReport detectSeries(const Vrnn& model, const ModelParams& params, const GraphSeries& x,
                             const ExternalSeries& e, const ThresholdCalibration& calibration,
                             int sampleCount, uint64_t seed,
                             const RnnState* initialState = nullptr);

/// Deterministic state advance over a span: posterior-mean latent and
/// observed signal per step, no sampling. Use the result as the initial
/// state when scoring the span that follows.
RnnState warmupState(const Vrnn& model, const ModelParams& params, const GraphSeries& x,
                     const ExternalSeries& e, const RnnState* initialState = nullptr);

} // namespace gtsad
