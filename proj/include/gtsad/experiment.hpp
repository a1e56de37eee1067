#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gtsad/detection.hpp"
#include "gtsad/model.hpp"
#include "gtsad/rng.hpp"
#include "gtsad/series.hpp"

namespace gtsad {

/// Synthetic grid-traffic generator knobs. Channels are fixed at two
/// (inflow, outflow) with phase-shifted daily peaks.
struct SyntheticConfig {
    int rows = 8;
    int cols = 8;
    int days = 40;
    int stepsPerDay = 48; // 30-minute steps
    double noiseStddev = 0.02;
    uint64_t seed = 0;
    double weekendDamping = 0.7;  // weekdays 5 and 6
    double holidayDamping = 0.75;
    // kept within a few percent: states are one-hot and rare, so an unseen
    // state's surprise must stay near the noise floor rather than dwarf it
    std::array<double, 16> weatherDamping = {1.0, 0.996, 0.992, 0.988, 0.984, 0.98,
                                             0.976, 0.972, 0.968, 0.964, 0.96, 0.956,
                                             0.952, 0.948, 0.944, 0.94};
    double temperatureCoeff = 0.05;
    double windspeedCoeff = -0.1;

    void validate() const;
    int steps() const { return days * stepsPerDay; }
    int nodes() const { return rows * cols; }
};

struct CalendarDay {
    int day = 0;
    int weekday = 0; // 0 = Monday
    bool holiday = false;
    int weather = 0; // code into the damping table
};

struct SyntheticData {
    GraphSeries series;
    ExternalSeries externals;
    std::vector<CalendarDay> calendar;
};

/// Per-node base flow = smooth trigonometric surface over the grid times a
/// double-bump daily profile (peaks at steps/3 and 3*steps/4 of the day),
/// damped by weekend/holiday/weather factors and shifted linearly by
/// temperature and windspeed, plus Gaussian noise. Bitwise reproducible
/// from the seed.
SyntheticData generateSynthetic(const SyntheticConfig& config);

/// Per-channel global min-max bounds of a fitted span.
struct ScalerState {
    std::vector<double> minValue;
    std::vector<double> maxValue;
};

/// Bounds from the given span; a constant channel cannot be scaled.
ScalerState fitScale(const GraphSeries& series);
/// (v - min) / (max - min) per channel; no clamping, so spans other than the
/// fitted one may leave [0, 1].
GraphSeries applyScale(const GraphSeries& series, const ScalerState& scaler);
/// Exact inverse of applyScale up to rounding.
GraphSeries invertScale(const GraphSeries& series, const ScalerState& scaler);

/// Contiguous prefix/suffix split at floor(fraction * steps); needs at
/// least 10 steps.
std::pair<GraphSeries, GraphSeries> splitTrainTest(const GraphSeries& series, double fraction = 0.8);

enum class AnomalyType { GMS, LMS, GAC, LAC };

std::string anomalyTypeName(AnomalyType type);            // "gms", "lms", ...
AnomalyType anomalyTypeFromName(const std::string& name); // case-insensitive

/// One injected anomaly: a square of half-width cells around (p, q) on one
/// channel over the inclusive step range [t0, t1]. magnitude is the additive
/// shift mu for GMS/LMS and the stddev multiplier m for GAC/LAC.
struct AnomalyLabel {
    AnomalyType type = AnomalyType::GMS;
    int channel = 0;
    int p = 0;
    int q = 0;
    int halfwidth = 0;
    int t0 = 0;
    int t1 = 0;
    double magnitude = 0.0;
};

struct InjectionResult {
    GraphSeries series;
    std::vector<uint8_t> stepMask; // step positive if any cell modified there
    std::vector<uint8_t> cellMask; // same (t, c, i) layout as series.values
};

/// GMS/LMS add magnitude to every cell of the square over the range; GAC/LAC
/// multiply each affected cell and step by (1 + g), g ~ N(0, (m*sigma)^2)
/// drawn independently, where sigma comes from sigmaRef at that cell (the
/// trained model's predictive stddev) or sigmaFallback. Values are not
/// clamped. Zero magnitude leaves the series untouched with empty masks.
InjectionResult injectAnomaly(const GraphSeries& series, int rows, int cols,
                              const AnomalyLabel& label, uint64_t seed,
                              const GraphSeries* sigmaRef = nullptr, double sigmaFallback = 0.05);

/// Benchmark-shaped random label: GMS (halfwidth 3, steps 30-60, mu in
/// [0.8, 1.3]), LMS (halfwidth 1, steps 5-10, mu in [0.4, 0.6]), GAC
/// (halfwidth 3, steps 30-60, m = 10), LAC (single cell, steps 10-20,
/// m = 6); channel and center drawn uniformly within bounds.
AnomalyLabel randomAnomalyLabel(AnomalyType type, int rows, int cols, int channels, int steps,
                                Rng& rng);

/// Precision-weighted recall increments over descending distinct score
/// thresholds. Larger scores must mean more anomalous.
double averagePrecision(const std::vector<double>& scores, const std::vector<int>& labels);
/// Mann-Whitney statistic with ties counted half.
double aucRoc(const std::vector<double>& scores, const std::vector<int>& labels);

struct BenchmarkConfig {
    int trials = 20;
    int sampleCount = 16;
    uint64_t seed = 0;
    int rows = 0;
    int cols = 0;
    double sigmaFallback = 0.05;
    int threads = 0; // 0 = hardware concurrency
};

struct TrialOutcome {
    AnomalyLabel label;
    double ap = 0.0;
    double auc = 0.0;
    int localizedHits = 0;  // localized entries whose node lies in the square
    int localizedTotal = 0; // localized entries on anomalous steps
};

struct BenchmarkResult {
    AnomalyType type = AnomalyType::GMS;
    std::vector<TrialOutcome> trials;
    double meanAp = 0.0;
    double sdAp = 0.0;
    double meanAuc = 0.0;
    double sdAuc = 0.0;
    double localizationPrecision = 0.0; // pooled hits / total over all trials
};

/// Repeated inject-and-detect trials against a clean test span. Trial i uses
/// the deterministic seed (config.seed + i): one random label, one injection,
/// one detection pass; step-level AP/AUC against the step mask (scores
/// negated so anomalous = larger). For GAC/LAC without sigmaRef, one clean
/// detection pass supplies the predictive stddev. Trials run in parallel;
/// results and aggregates are ordered by trial index.
BenchmarkResult runBenchmark(const Vrnn& model, const ModelParams& params, const GraphSeries& testX,
                             const ExternalSeries& testE, const ThresholdCalibration& calibration,
                             AnomalyType type, const BenchmarkConfig& config,
                             const RnnState* initialState = nullptr,
                             const GraphSeries* sigmaRef = nullptr);

} // namespace gtsad
