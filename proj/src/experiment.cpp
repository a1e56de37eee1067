#include "gtsad/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace gtsad {

void SyntheticConfig::validate() const {
    if (rows < 1 || cols < 1 || rows * cols < 2) {
        throw std::invalid_argument("grid must have at least 2 nodes, got " + std::to_string(rows) +
                                    "x" + std::to_string(cols));
    }
    if (days < 1) throw std::invalid_argument("day count must be positive");
    if (stepsPerDay < 2) throw std::invalid_argument("steps per day must be at least 2");
    if (noiseStddev < 0.0) throw std::invalid_argument("noise stddev must be nonnegative");
    auto checkDamping = [](double d, const char* what) {
        if (!(d > 0.0 && d <= 1.0)) {
            throw std::invalid_argument(std::string(what) + " damping must lie in (0, 1]");
        }
    };
    checkDamping(weekendDamping, "weekend");
    checkDamping(holidayDamping, "holiday");
    for (double d : weatherDamping) checkDamping(d, "weather");
}

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;

double squared(double v) { return v * v; }

} // namespace

SyntheticData generateSynthetic(const SyntheticConfig& config) {
    config.validate();
    const int n = config.nodes();
    const int C = 2;
    const int spd = config.stepsPerDay;
    const int T = config.steps();
    Rng rng(config.seed);

    SyntheticData out;
    out.calendar.reserve(static_cast<size_t>(config.days));
    for (int d = 0; d < config.days; ++d) {
        CalendarDay day;
        day.day = d;
        day.weekday = d % 7;
        day.holiday = rng.uniform() < 0.08;
        day.weather = rng.below(16);
        out.calendar.push_back(day);
    }

    // strictly positive low-order trigonometric surface
    std::vector<double> spatial(static_cast<size_t>(n));
    for (int r = 0; r < config.rows; ++r) {
        for (int c = 0; c < config.cols; ++c) {
            double u = (r + 0.5) / config.rows;
            double v = (c + 0.5) / config.cols;
            spatial[static_cast<size_t>(r) * config.cols + c] =
                0.65 + 0.25 * std::sin(kPi * u) * std::sin(kPi * v) +
                0.1 * std::cos(2.0 * kPi * (u - v));
        }
    }

    // double-bump daily profile; the outflow channel lags the inflow peaks
    auto bump = [&](int channel, int stepOfDay) {
        double morning = spd / 3.0;
        double evening = 0.75 * spd;
        double shift = channel == 0 ? 0.0 : spd / 24.0;
        double width = spd / 16.0;
        return 0.25 + 0.75 * std::exp(-0.5 * squared((stepOfDay - (morning + shift)) / width)) +
               0.6 * std::exp(-0.5 * squared((stepOfDay - (evening - shift)) / width));
    };
    auto temperatureAt = [&](int t) {
        int d = t / spd;
        int s = t % spd;
        return 0.55 * std::sin(2.0 * kPi * d / 180.0) +
               0.3 * std::sin(2.0 * kPi * (s - spd / 4.0) / spd);
    };
    auto windspeedAt = [&](int t) {
        return 0.35 * std::sin(2.0 * kPi * t / 97.0) + 0.2 * std::sin(2.0 * kPi * t / 13.0);
    };

    out.series = GraphSeries::zeros(T, C, n);
    out.externals.records.reserve(static_cast<size_t>(T));
    for (int t = 0; t < T; ++t) {
        const CalendarDay& day = out.calendar[static_cast<size_t>(t / spd)];
        double temperature = temperatureAt(t);
        double windspeed = windspeedAt(t);

        ExternalRecord rec;
        rec.weekday = day.weekday;
        rec.holiday = day.holiday;
        rec.weather = day.weather;
        rec.temperature = temperature;
        rec.windspeed = windspeed;
        out.externals.records.push_back(rec);

        double dayFactor = (day.weekday >= 5 ? config.weekendDamping : 1.0) *
                           (day.holiday ? config.holidayDamping : 1.0) *
                           config.weatherDamping[static_cast<size_t>(day.weather)];
        double externalFactor =
            1.0 + config.temperatureCoeff * temperature + config.windspeedCoeff * windspeed;
        for (int c = 0; c < C; ++c) {
            double profile = bump(c, t % spd) * dayFactor * externalFactor;
            for (int i = 0; i < n; ++i) {
                out.series.at(t, c, i) =
                    spatial[static_cast<size_t>(i)] * profile + config.noiseStddev * rng.normal();
            }
        }
    }
    return out;
}

ScalerState fitScale(const GraphSeries& series) {
    if (series.steps < 1) throw std::invalid_argument("cannot fit a scaler on an empty series");
    ScalerState scaler;
    for (int c = 0; c < series.channels; ++c) {
        double lo = series.at(0, c, 0);
        double hi = lo;
        for (int t = 0; t < series.steps; ++t) {
            for (int i = 0; i < series.nodes; ++i) {
                lo = std::min(lo, series.at(t, c, i));
                hi = std::max(hi, series.at(t, c, i));
            }
        }
        if (!(hi > lo)) {
            throw std::invalid_argument("channel " + std::to_string(c) +
                                        " is constant and cannot be min-max scaled");
        }
        scaler.minValue.push_back(lo);
        scaler.maxValue.push_back(hi);
    }
    return scaler;
}

namespace {

void checkScaler(const GraphSeries& series, const ScalerState& scaler) {
    if (static_cast<int>(scaler.minValue.size()) != series.channels ||
        scaler.maxValue.size() != scaler.minValue.size()) {
        throw std::invalid_argument("scaler covers " + std::to_string(scaler.minValue.size()) +
                                    " channels, series has " + std::to_string(series.channels));
    }
}

} // namespace

GraphSeries applyScale(const GraphSeries& series, const ScalerState& scaler) {
    checkScaler(series, scaler);
    GraphSeries out = series;
    for (int c = 0; c < series.channels; ++c) {
        double lo = scaler.minValue[static_cast<size_t>(c)];
        double span = scaler.maxValue[static_cast<size_t>(c)] - lo;
        for (int t = 0; t < series.steps; ++t) {
            for (int i = 0; i < series.nodes; ++i) {
                out.at(t, c, i) = (series.at(t, c, i) - lo) / span;
            }
        }
    }
    return out;
}

GraphSeries invertScale(const GraphSeries& series, const ScalerState& scaler) {
    checkScaler(series, scaler);
    GraphSeries out = series;
    for (int c = 0; c < series.channels; ++c) {
        double lo = scaler.minValue[static_cast<size_t>(c)];
        double span = scaler.maxValue[static_cast<size_t>(c)] - lo;
        for (int t = 0; t < series.steps; ++t) {
            for (int i = 0; i < series.nodes; ++i) {
                out.at(t, c, i) = series.at(t, c, i) * span + lo;
            }
        }
    }
    return out;
}

std::pair<GraphSeries, GraphSeries> splitTrainTest(const GraphSeries& series, double fraction) {
    if (series.steps < 10) {
        throw std::invalid_argument("need at least 10 steps to split, got " +
                                    std::to_string(series.steps));
    }
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw std::invalid_argument("split fraction must lie in (0, 1)");
    }
    int trainSteps = static_cast<int>(std::floor(fraction * series.steps));
    if (trainSteps < 1 || trainSteps >= series.steps) {
        throw std::invalid_argument("split fraction leaves an empty span");
    }
    return {series.slice(0, trainSteps), series.slice(trainSteps, series.steps - trainSteps)};
}

std::string anomalyTypeName(AnomalyType type) {
    switch (type) {
        case AnomalyType::GMS: return "gms";
        case AnomalyType::LMS: return "lms";
        case AnomalyType::GAC: return "gac";
        case AnomalyType::LAC: return "lac";
    }
    throw std::invalid_argument("unknown anomaly type");
}

AnomalyType anomalyTypeFromName(const std::string& name) {
    std::string lower;
    for (char ch : name) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    if (lower == "gms") return AnomalyType::GMS;
    if (lower == "lms") return AnomalyType::LMS;
    if (lower == "gac") return AnomalyType::GAC;
    if (lower == "lac") return AnomalyType::LAC;
    throw std::invalid_argument("unknown anomaly type '" + name + "' (expected gms, lms, gac or lac)");
}

InjectionResult injectAnomaly(const GraphSeries& series, int rows, int cols,
                              const AnomalyLabel& label, uint64_t seed,
                              const GraphSeries* sigmaRef, double sigmaFallback) {
    if (rows * cols != series.nodes) {
        throw std::invalid_argument("grid " + std::to_string(rows) + "x" + std::to_string(cols) +
                                    " does not match " + std::to_string(series.nodes) + " nodes");
    }
    if (label.channel < 0 || label.channel >= series.channels) {
        throw std::invalid_argument("anomaly channel " + std::to_string(label.channel) +
                                    " outside [0, " + std::to_string(series.channels) + ")");
    }
    if (label.halfwidth < 0 || label.p - label.halfwidth < 0 || label.p + label.halfwidth >= rows ||
        label.q - label.halfwidth < 0 || label.q + label.halfwidth >= cols) {
        throw std::invalid_argument("anomaly square around (" + std::to_string(label.p) + ", " +
                                    std::to_string(label.q) + ") with half-width " +
                                    std::to_string(label.halfwidth) + " leaves the grid");
    }
    if (label.t0 < 0 || label.t1 < label.t0 || label.t1 >= series.steps) {
        throw std::invalid_argument("anomaly steps [" + std::to_string(label.t0) + ", " +
                                    std::to_string(label.t1) + "] outside the series of " +
                                    std::to_string(series.steps));
    }
    if (label.magnitude < 0.0) throw std::invalid_argument("anomaly magnitude must be nonnegative");
    if (sigmaRef && (sigmaRef->steps != series.steps || sigmaRef->channels != series.channels ||
                     sigmaRef->nodes != series.nodes)) {
        throw std::invalid_argument("variance reference shape does not match the series");
    }

    InjectionResult out;
    out.series = series;
    out.stepMask.assign(static_cast<size_t>(series.steps), 0);
    out.cellMask.assign(series.values.size(), 0);
    if (label.magnitude == 0.0) return out;

    bool additive = label.type == AnomalyType::GMS || label.type == AnomalyType::LMS;
    Rng rng(seed);
    for (int t = label.t0; t <= label.t1; ++t) {
        out.stepMask[static_cast<size_t>(t)] = 1;
        for (int r = label.p - label.halfwidth; r <= label.p + label.halfwidth; ++r) {
            for (int c = label.q - label.halfwidth; c <= label.q + label.halfwidth; ++c) {
                int node = r * cols + c;
                double& cell = out.series.at(t, label.channel, node);
                if (additive) {
                    cell += label.magnitude;
                } else {
                    double sigma = sigmaRef ? sigmaRef->at(t, label.channel, node) : sigmaFallback;
                    cell *= 1.0 + label.magnitude * sigma * rng.normal();
                }
                size_t flat = (static_cast<size_t>(t) * series.channels + label.channel) *
                                  series.nodes + static_cast<size_t>(node);
                out.cellMask[flat] = 1;
            }
        }
    }
    return out;
}

AnomalyLabel randomAnomalyLabel(AnomalyType type, int rows, int cols, int channels, int steps,
                                Rng& rng) {
    AnomalyLabel label;
    label.type = type;
    switch (type) {
        case AnomalyType::GMS:
            label.halfwidth = 3;
            label.t0 = 30;
            label.t1 = 60;
            break;
        case AnomalyType::LMS:
            label.halfwidth = 1;
            label.t0 = 5;
            label.t1 = 10;
            break;
        case AnomalyType::GAC:
            label.halfwidth = 3;
            label.t0 = 30;
            label.t1 = 60;
            label.magnitude = 10.0;
            break;
        case AnomalyType::LAC:
            label.halfwidth = 0;
            label.t0 = 10;
            label.t1 = 20;
            label.magnitude = 6.0;
            break;
    }
    if (rows <= 2 * label.halfwidth || cols <= 2 * label.halfwidth) {
        throw std::invalid_argument("grid " + std::to_string(rows) + "x" + std::to_string(cols) +
                                    " cannot hold a square of half-width " +
                                    std::to_string(label.halfwidth));
    }
    if (steps <= label.t1) {
        throw std::invalid_argument("series of " + std::to_string(steps) +
                                    " steps cannot hold an anomaly ending at " +
                                    std::to_string(label.t1));
    }
    label.channel = rng.below(channels);
    label.p = label.halfwidth + rng.below(rows - 2 * label.halfwidth);
    label.q = label.halfwidth + rng.below(cols - 2 * label.halfwidth);
    if (type == AnomalyType::GMS) label.magnitude = rng.uniform(0.8, 1.3);
    if (type == AnomalyType::LMS) label.magnitude = rng.uniform(0.4, 0.6);
    return label;
}

namespace {

double positiveCount(const std::vector<int>& labels) {
    double npos = 0.0;
    for (int l : labels) npos += l ? 1.0 : 0.0;
    return npos;
}

} // namespace

double averagePrecision(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size() || scores.empty()) {
        throw std::invalid_argument("metric needs equally many scores and labels");
    }
    double npos = positiveCount(labels);
    if (npos == 0.0 || npos == static_cast<double>(labels.size())) {
        throw std::invalid_argument("labels are all one class");
    }
    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    // walk distinct thresholds in descending order with running counts
    double ap = 0.0;
    double prevRecall = 0.0;
    double tp = 0.0;
    double fp = 0.0;
    size_t i = 0;
    while (i < order.size()) {
        double threshold = scores[order[i]];
        while (i < order.size() && scores[order[i]] == threshold) {
            if (labels[order[i]]) {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            ++i;
        }
        double recall = tp / npos;
        ap += (recall - prevRecall) * (tp / (tp + fp));
        prevRecall = recall;
    }
    return ap;
}

double aucRoc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size() || scores.empty()) {
        throw std::invalid_argument("metric needs equally many scores and labels");
    }
    double npos = positiveCount(labels);
    double nneg = static_cast<double>(labels.size()) - npos;
    if (npos == 0.0 || nneg == 0.0) throw std::invalid_argument("labels are all one class");

    // Mann-Whitney via midranks; every rank is a multiple of 1/2, so the sums
    // below are exact and equal pairwise counting with ties worth half
    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });
    double posRankSum = 0.0;
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j)); // 1-based
        for (size_t k = i; k < j; ++k) {
            if (labels[order[k]]) posRankSum += midrank;
        }
        i = j;
    }
    double wins = posRankSum - 0.5 * npos * (npos + 1.0);
    return wins / (npos * nneg);
}

namespace {

struct TrialScratch {
    TrialOutcome outcome;
};

} // namespace

BenchmarkResult runBenchmark(const Vrnn& model, const ModelParams& params, const GraphSeries& testX,
                             const ExternalSeries& testE, const ThresholdCalibration& calibration,
                             AnomalyType type, const BenchmarkConfig& config,
                             const RnnState* initialState, const GraphSeries* sigmaRef) {
    if (config.trials < 1) throw std::invalid_argument("benchmark needs at least one trial");
    if (config.rows * config.cols != testX.nodes) {
        throw std::invalid_argument("benchmark grid does not match the series");
    }
    if (testX.steps != testE.size()) {
        throw std::invalid_argument("series has " + std::to_string(testX.steps) + " steps but " +
                                    std::to_string(testE.size()) + " external records");
    }

    // amplitude anomalies scale with the model's own predictive stddev
    GraphSeries cleanStddev;
    bool needSigma = type == AnomalyType::GAC || type == AnomalyType::LAC;
    if (needSigma && !sigmaRef) {
        ThresholdCalibration silent;
        silent.scoreThreshold = -std::numeric_limits<double>::infinity();
        DetectionReport clean = detectSeries(model, params, testX, testE, silent,
                                             config.sampleCount, Rng::mix(config.seed, 0xc1ea4u),
                                             initialState);
        cleanStddev = std::move(clean.predictiveStddev);
        sigmaRef = &cleanStddev;
    }

    std::vector<TrialScratch> scratch(static_cast<size_t>(config.trials));
    std::mutex failureLock;
    std::exception_ptr failure;

    auto runTrial = [&](int trial) {
        Rng trialRng(config.seed + static_cast<uint64_t>(trial));
        AnomalyLabel label =
            randomAnomalyLabel(type, config.rows, config.cols, testX.channels, testX.steps, trialRng);
        InjectionResult injected = injectAnomaly(testX, config.rows, config.cols, label,
                                                 trialRng.nextU64(), sigmaRef, config.sigmaFallback);
        DetectionReport report = detectSeries(model, params, injected.series, testE, calibration,
                                              config.sampleCount, trialRng.nextU64(), initialState);
        std::vector<double> anomalyScores;
        std::vector<int> stepLabels;
        for (int t = 0; t < testX.steps; ++t) {
            anomalyScores.push_back(-report.scores[static_cast<size_t>(t)]);
            stepLabels.push_back(injected.stepMask[static_cast<size_t>(t)]);
        }
        TrialOutcome& out = scratch[static_cast<size_t>(trial)].outcome;
        out.label = label;
        out.ap = averagePrecision(anomalyScores, stepLabels);
        out.auc = aucRoc(anomalyScores, stepLabels);
        for (int t = label.t0; t <= label.t1; ++t) {
            for (const LocalizedEntry& entry : report.localized[static_cast<size_t>(t)]) {
                ++out.localizedTotal;
                int r = entry.node / config.cols;
                int c = entry.node % config.cols;
                bool inside = std::abs(r - label.p) <= label.halfwidth &&
                              std::abs(c - label.q) <= label.halfwidth;
                if (inside) ++out.localizedHits;
            }
        }
    };

    int threadCount = config.threads > 0 ? config.threads
                                         : static_cast<int>(std::thread::hardware_concurrency());
    threadCount = std::max(1, std::min(threadCount, config.trials));
    std::vector<std::thread> pool;
    std::atomic<int> nextTrial{0};
    for (int w = 0; w < threadCount; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                int trial = nextTrial.fetch_add(1);
                if (trial >= config.trials) return;
                try {
                    runTrial(trial);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failureLock);
                    if (!failure) failure = std::current_exception();
                    return;
                }
            }
        });
    }
    for (std::thread& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);

    BenchmarkResult result;
    result.type = type;
    double apSum = 0.0, aucSum = 0.0;
    long hits = 0, total = 0;
    for (const TrialScratch& s : scratch) {
        result.trials.push_back(s.outcome);
        apSum += s.outcome.ap;
        aucSum += s.outcome.auc;
        hits += s.outcome.localizedHits;
        total += s.outcome.localizedTotal;
    }
    double trials = static_cast<double>(config.trials);
    result.meanAp = apSum / trials;
    result.meanAuc = aucSum / trials;
    double apVar = 0.0, aucVar = 0.0;
    for (const TrialScratch& s : scratch) {
        apVar += squared(s.outcome.ap - result.meanAp);
        aucVar += squared(s.outcome.auc - result.meanAuc);
    }
    if (config.trials > 1) {
        result.sdAp = std::sqrt(apVar / (trials - 1.0));
        result.sdAuc = std::sqrt(aucVar / (trials - 1.0));
    }
    result.localizationPrecision = total > 0 ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
    return result;
}

} // namespace gtsad
