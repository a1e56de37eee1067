#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "gtsad/detection.hpp"
#include "gtsad/experiment.hpp"
#include "gtsad/graph.hpp"
#include "gtsad/io.hpp"
#include "gtsad/model.hpp"
#include "gtsad/rng.hpp"
#include "gtsad/series.hpp"
#include "gtsad/training.hpp"

namespace {

using namespace gtsad;
namespace fs = std::filesystem;

// ---- resolved flags: the manifest image of a run ----

struct FlagMap {
    std::vector<std::pair<std::string, std::string>> entries;

    void put(const std::string& key, const std::string& value) {
        for (auto& [k, v] : entries) {
            if (k == key) {
                v = value;
                return;
            }
        }
        entries.emplace_back(key, value);
    }

    const std::string& get(const std::string& key) const {
        for (const auto& [k, v] : entries) {
            if (k == key) return v;
        }
        throw std::runtime_error("manifest is missing flag '" + key + "'");
    }

    int getInt(const std::string& key) const {
        return static_cast<int>(std::strtol(get(key).c_str(), nullptr, 10));
    }
    uint64_t getU64(const std::string& key) const {
        return std::strtoull(get(key).c_str(), nullptr, 10);
    }
    double getDouble(const std::string& key) const { return std::strtod(get(key).c_str(), nullptr); }
};

struct SaveFlags {
    FlagMap& out;
    void operator()(const char* k, int v) { out.put(k, std::to_string(v)); }
    void operator()(const char* k, uint64_t v) { out.put(k, std::to_string(v)); }
    void operator()(const char* k, double v) { out.put(k, formatDouble(v)); }
    void operator()(const char* k, const std::string& v) { out.put(k, v); }
};

struct LoadFlags {
    const FlagMap& in;
    void operator()(const char* k, int& v) { v = in.getInt(k); }
    void operator()(const char* k, uint64_t& v) { v = in.getU64(k); }
    void operator()(const char* k, double& v) { v = in.getDouble(k); }
    void operator()(const char* k, std::string& v) { v = in.get(k); }
};

std::string joinPath(const std::string& dir, const char* name) {
    return (fs::path(dir) / name).string();
}

void finishManifest(const std::string& command, uint64_t seed, const FlagMap& flags,
                    const std::vector<std::string>& artifacts, const std::string& path) {
    Manifest m;
    m.command = command;
    m.seed = seed;
    m.flags = flags.entries;
    for (const std::string& artifact : artifacts) {
        m.artifacts.emplace_back(artifact, fileHashHex(artifact));
    }
    writeManifest(path, m);
}

// ---- generate ----

struct GenerateOpts {
    int rows = 8, cols = 8, days = 40, stepsPerDay = 48;
    double noise = 0.02;
    uint64_t seed = 0;
    std::string outDir = ".";

    template <class F> void visit(F&& f) {
        f("rows", rows);
        f("cols", cols);
        f("days", days);
        f("steps-per-day", stepsPerDay);
        f("noise", noise);
        f("seed", seed);
        f("out-dir", outDir);
    }
};

void runGenerate(GenerateOpts& o) {
    SyntheticConfig cfg;
    cfg.rows = o.rows;
    cfg.cols = o.cols;
    cfg.days = o.days;
    cfg.stepsPerDay = o.stepsPerDay;
    cfg.noiseStddev = o.noise;
    cfg.seed = o.seed;
    cfg.validate();
    SyntheticData data = generateSynthetic(cfg);

    fs::create_directories(o.outDir);
    std::string series = joinPath(o.outDir, "series.csv");
    std::string externals = joinPath(o.outDir, "externals.csv");
    std::string calendar = joinPath(o.outDir, "calendar.csv");
    writeSeriesCsv(series, data.series);
    writeExternalsCsv(externals, data.externals);
    writeCalendarCsv(calendar, data.calendar);

    FlagMap flags;
    o.visit(SaveFlags{flags});
    finishManifest("generate", o.seed, flags, {series, externals, calendar},
                   joinPath(o.outDir, "generate_manifest.json"));
    std::cout << "generated " << data.series.steps << " steps on a " << o.rows << "x" << o.cols
              << " grid -> " << series << "\n";
}

// ---- train ----

struct TrainOpts {
    std::string series, externals;
    int rows = 8, cols = 8;
    int chebOrder = 3, features = 8, latent = 16, hidden = 64;
    int epochs = 30, window = 96, batch = 8;
    double lr = 1e-3, clip = 5.0, valFrac = 0.1, trainFrac = 0.8;
    uint64_t seed = 0;
    int samples = 16, burnIn = 48;
    double quantile = 0.01, odThreshold = 0.95;
    std::string outDir = ".";

    template <class F> void visit(F&& f) {
        f("series", series);
        f("externals", externals);
        f("rows", rows);
        f("cols", cols);
        f("cheb-order", chebOrder);
        f("features", features);
        f("latent", latent);
        f("hidden", hidden);
        f("epochs", epochs);
        f("window", window);
        f("batch", batch);
        f("lr", lr);
        f("clip", clip);
        f("val-frac", valFrac);
        f("train-frac", trainFrac);
        f("seed", seed);
        f("samples", samples);
        f("burn-in", burnIn);
        f("quantile", quantile);
        f("od-threshold", odThreshold);
        f("out-dir", outDir);
    }
};

void runTrain(TrainOpts& o) {
    GraphSeries raw = readSeriesCsv(o.series);
    ExternalSeries externals = readExternalsCsv(o.externals);
    if (externals.size() != raw.steps) {
        throw std::invalid_argument("series has " + std::to_string(raw.steps) + " steps but " +
                                    std::to_string(externals.size()) + " external records");
    }
    if (o.rows * o.cols != raw.nodes) {
        throw std::invalid_argument("grid " + std::to_string(o.rows) + "x" + std::to_string(o.cols) +
                                    " does not match " + std::to_string(raw.nodes) + " nodes");
    }

    auto [trainRaw, testRaw] = splitTrainTest(raw, o.trainFrac);
    ExternalSeries trainE = externals.slice(0, trainRaw.steps);
    ExternalSeries testE = externals.slice(trainRaw.steps, testRaw.steps);
    ScalerState scaler = fitScale(trainRaw);
    GraphSeries trainX = applyScale(trainRaw, scaler);
    GraphSeries testX = applyScale(testRaw, scaler);

    WeightedGraph graph = buildGridGraph(o.rows, o.cols);
    ScaledLaplacian laplacian(graph);

    ModelConfig mc;
    mc.nodeCount = raw.nodes;
    mc.channels = raw.channels;
    mc.chebyshevOrder = o.chebOrder;
    mc.graphFeatures = o.features;
    mc.latentDim = o.latent;
    mc.hiddenDim = o.hidden;

    TrainConfig tc;
    tc.learningRate = o.lr;
    tc.epochs = o.epochs;
    tc.windowLength = o.window;
    tc.batchSize = o.batch;
    tc.clipNorm = o.clip;
    tc.seed = o.seed;
    tc.validationFraction = o.valFrac;

    auto [params, report] = trainModel(trainX, trainE, laplacian, mc, tc);

    // calibrate the flag threshold on the model's own clean training scores
    Vrnn model(mc, &laplacian);
    ThresholdCalibration loose;
    loose.scoreThreshold = -std::numeric_limits<double>::infinity();
    DetectionReport clean = detectSeries(model, params, trainX, trainE, loose, o.samples,
                                         Rng::mix(o.seed, 0xca11bu));
    if (o.burnIn < 0 || o.burnIn >= static_cast<int>(clean.scores.size())) {
        throw std::invalid_argument("burn-in " + std::to_string(o.burnIn) +
                                    " swallows all " + std::to_string(clean.scores.size()) +
                                    " calibration scores");
    }
    std::vector<double> settled(clean.scores.begin() + o.burnIn, clean.scores.end());
    ThresholdCalibration cal = calibrateThreshold(settled, o.quantile);
    cal.odThreshold = o.odThreshold;

    fs::create_directories(o.outDir);
    std::vector<std::pair<std::string, Tensor>> extras;
    extras.emplace_back("scaler.min", Tensor::of({raw.channels}, scaler.minValue));
    extras.emplace_back("scaler.max", Tensor::of({raw.channels}, scaler.maxValue));
    extras.emplace_back("calibration", Tensor::of({3}, {cal.scoreThreshold, cal.quantile,
                                                        cal.odThreshold}));
    extras.emplace_back("grid", Tensor::of({2}, {double(o.rows), double(o.cols)}));
    std::string ckpt = joinPath(o.outDir, "model.ckpt");
    saveCheckpoint(params, mc, ckpt, extras);

    std::string reportPath = joinPath(o.outDir, "train_report.csv");
    std::string trainSeries = joinPath(o.outDir, "train_scaled.csv");
    std::string testSeries = joinPath(o.outDir, "test_scaled.csv");
    std::string trainExt = joinPath(o.outDir, "train_externals.csv");
    std::string testExt = joinPath(o.outDir, "test_externals.csv");
    writeTrainReportCsv(reportPath, report);
    writeSeriesCsv(trainSeries, trainX);
    writeSeriesCsv(testSeries, testX);
    writeExternalsCsv(trainExt, trainE);
    writeExternalsCsv(testExt, testE);

    FlagMap flags;
    o.visit(SaveFlags{flags});
    finishManifest("train", o.seed, flags,
                   {ckpt, reportPath, trainSeries, testSeries, trainExt, testExt},
                   joinPath(o.outDir, "train_manifest.json"));
    std::cout << "trained " << o.epochs << " epochs";
    if (!report.valElbo.empty()) {
        std::cout << ", final validation ELBO " << report.valElbo.back();
    }
    std::cout << ", flag threshold " << cal.scoreThreshold << " -> " << ckpt << "\n";
}

// ---- inject ----

struct InjectOpts {
    std::string series;
    int rows = 8, cols = 8;
    std::string type = "gms";
    int channel = 0, p = -1, q = -1, halfwidth = -1, t0 = -1, t1 = -1;
    double mu = std::numeric_limits<double>::quiet_NaN();
    std::string sigmaRef;
    double sigmaFallback = 0.05;
    uint64_t seed = 0;
    std::string outDir = ".";

    template <class F> void visit(F&& f) {
        f("series", series);
        f("rows", rows);
        f("cols", cols);
        f("type", type);
        f("channel", channel);
        f("p", p);
        f("q", q);
        f("halfwidth", halfwidth);
        f("t0", t0);
        f("t1", t1);
        f("mu", mu);
        f("sigma-ref", sigmaRef);
        f("sigma-fallback", sigmaFallback);
        f("seed", seed);
        f("out-dir", outDir);
    }
};

void resolveInjectDefaults(InjectOpts& o, AnomalyType type) {
    switch (type) {
    case AnomalyType::GMS:
        if (o.halfwidth < 0) o.halfwidth = 3;
        if (o.t0 < 0) o.t0 = 30;
        if (o.t1 < 0) o.t1 = 60;
        if (std::isnan(o.mu)) o.mu = 0.9;
        break;
    case AnomalyType::LMS:
        if (o.halfwidth < 0) o.halfwidth = 1;
        if (o.t0 < 0) o.t0 = 5;
        if (o.t1 < 0) o.t1 = 10;
        if (std::isnan(o.mu)) o.mu = 0.5;
        break;
    case AnomalyType::GAC:
        if (o.halfwidth < 0) o.halfwidth = 3;
        if (o.t0 < 0) o.t0 = 30;
        if (o.t1 < 0) o.t1 = 60;
        if (std::isnan(o.mu)) o.mu = 10.0;
        break;
    case AnomalyType::LAC:
        if (o.halfwidth < 0) o.halfwidth = 0;
        if (o.t0 < 0) o.t0 = 10;
        if (o.t1 < 0) o.t1 = 20;
        if (std::isnan(o.mu)) o.mu = 6.0;
        break;
    }
}

void runInject(InjectOpts& o) {
    AnomalyType type = anomalyTypeFromName(o.type);
    resolveInjectDefaults(o, type);

    GraphSeries x = readSeriesCsv(o.series);
    AnomalyLabel label;
    label.type = type;
    label.channel = o.channel;
    label.p = o.p;
    label.q = o.q;
    label.halfwidth = o.halfwidth;
    label.t0 = o.t0;
    label.t1 = o.t1;
    label.magnitude = o.mu;

    GraphSeries sigma;
    const GraphSeries* sigmaPtr = nullptr;
    if (!o.sigmaRef.empty()) {
        sigma = readSeriesCsv(o.sigmaRef);
        sigmaPtr = &sigma;
    }
    InjectionResult result = injectAnomaly(x, o.rows, o.cols, label, o.seed, sigmaPtr,
                                           o.sigmaFallback);

    fs::create_directories(o.outDir);
    std::string injected = joinPath(o.outDir, "injected.csv");
    std::string labels = joinPath(o.outDir, "labels.csv");
    writeSeriesCsv(injected, result.series);
    writeLabelsCsv(labels, {label});

    FlagMap flags;
    o.visit(SaveFlags{flags});
    finishManifest("inject", o.seed, flags, {injected, labels},
                   joinPath(o.outDir, "inject_manifest.json"));
    size_t cells = 0;
    for (uint8_t m : result.cellMask) cells += m;
    std::cout << "injected " << anomalyTypeName(type) << " over steps [" << label.t0 << ", "
              << label.t1 << "], " << cells << " cells modified -> " << injected << "\n";
}

// ---- detect ----

struct DetectOpts {
    std::string checkpoint, series, externals;
    std::string warmupSeries, warmupExternals;
    int samples = 16;
    uint64_t seed = 0;
    double threshold = std::numeric_limits<double>::quiet_NaN();
    int plotNode = 0, plotChannel = 0;
    std::string outDir = ".";

    template <class F> void visit(F&& f) {
        f("checkpoint", checkpoint);
        f("series", series);
        f("externals", externals);
        f("warmup-series", warmupSeries);
        f("warmup-externals", warmupExternals);
        f("samples", samples);
        f("seed", seed);
        f("threshold", threshold);
        f("plot-node", plotNode);
        f("plot-channel", plotChannel);
        f("out-dir", outDir);
    }
};

struct LoadedModel {
    LoadedCheckpoint checkpoint;
    WeightedGraph graph;
    ScaledLaplacian laplacian;
    Vrnn model;
    ThresholdCalibration calibration;

    explicit LoadedModel(const std::string& path)
        : checkpoint(loadCheckpoint(path)),
          graph(gridFromCheckpoint(checkpoint)),
          laplacian(graph),
          model(checkpoint.config, &laplacian) {
        const Tensor* cal = checkpoint.extra("calibration");
        if (!cal || cal->size() != 3) {
            throw std::runtime_error(path + " carries no calibration block");
        }
        calibration.scoreThreshold = (*cal)[0];
        calibration.quantile = (*cal)[1];
        calibration.odThreshold = (*cal)[2];
    }

    static WeightedGraph gridFromCheckpoint(const LoadedCheckpoint& ck) {
        const Tensor* grid = ck.extra("grid");
        if (!grid || grid->size() != 2) {
            throw std::runtime_error("checkpoint carries no grid dimensions");
        }
        return buildGridGraph(static_cast<int>((*grid)[0]), static_cast<int>((*grid)[1]));
    }
};

RnnState loadWarmState(const LoadedModel& lm, const std::string& seriesPath,
                       const std::string& externalsPath) {
    if (externalsPath.empty()) {
        throw std::invalid_argument("--warmup-series needs --warmup-externals");
    }
    GraphSeries wx = readSeriesCsv(seriesPath);
    ExternalSeries we = readExternalsCsv(externalsPath);
    return warmupState(lm.model, lm.checkpoint.params, wx, we);
}

void runDetect(DetectOpts& o) {
    LoadedModel lm(o.checkpoint);
    GraphSeries x = readSeriesCsv(o.series);
    ExternalSeries e = readExternalsCsv(o.externals);

    ThresholdCalibration cal = lm.calibration;
    if (!std::isnan(o.threshold)) cal.scoreThreshold = o.threshold;
    o.threshold = cal.scoreThreshold; // resolved value lands in the manifest

    RnnState warm;
    const RnnState* warmPtr = nullptr;
    if (!o.warmupSeries.empty()) {
        warm = loadWarmState(lm, o.warmupSeries, o.warmupExternals);
        warmPtr = &warm;
    }
    DetectionReport report = detectSeries(lm.model, lm.checkpoint.params, x, e, cal, o.samples,
                                          o.seed, warmPtr);

    fs::create_directories(o.outDir);
    std::string detection = joinPath(o.outDir, "detection.csv");
    std::string meanPath = joinPath(o.outDir, "predictive_mean.csv");
    std::string stddevPath = joinPath(o.outDir, "predictive_stddev.csv");
    writeDetectionCsv(detection, report);
    writeSeriesCsv(meanPath, report.predictiveMean);
    writeSeriesCsv(stddevPath, report.predictiveStddev);

    if (o.plotNode < 0 || o.plotNode >= x.nodes || o.plotChannel < 0 ||
        o.plotChannel >= x.channels) {
        throw std::invalid_argument("plot node/channel outside the series");
    }
    PlotSeries observed{"observed", {}};
    PlotSeries predicted{"predicted", {}};
    std::vector<int> flaggedSteps;
    for (int t = 0; t < x.steps; ++t) {
        observed.values.push_back(x.at(t, o.plotChannel, o.plotNode));
        predicted.values.push_back(report.predictiveMean.at(t, o.plotChannel, o.plotNode));
        if (report.flagged[static_cast<size_t>(t)]) flaggedSteps.push_back(t);
    }
    std::string svg = joinPath(o.outDir, "detect_plot.svg");
    std::string plotData = joinPath(o.outDir, "detect_plot.csv");
    writePlotSvg(svg, "node " + std::to_string(o.plotNode) + " channel " +
                          std::to_string(o.plotChannel), {observed, predicted}, flaggedSteps);
    {
        std::ofstream out(plotData, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + plotData + " for writing");
        out << "t,observed,predicted,flagged\n";
        for (int t = 0; t < x.steps; ++t) {
            out << t << ',' << formatDouble(observed.values[static_cast<size_t>(t)]) << ','
                << formatDouble(predicted.values[static_cast<size_t>(t)]) << ','
                << static_cast<int>(report.flagged[static_cast<size_t>(t)]) << '\n';
        }
    }

    FlagMap flags;
    o.visit(SaveFlags{flags});
    finishManifest("detect", o.seed, flags, {detection, meanPath, stddevPath, svg, plotData},
                   joinPath(o.outDir, "detect_manifest.json"));
    std::cout << "scored " << x.steps << " steps, flagged " << flaggedSteps.size() << " -> "
              << detection << "\n";
}

// ---- evaluate ----

struct EvaluateOpts {
    std::string checkpoint, series, externals;
    std::string warmupSeries, warmupExternals;
    std::string type = "all";
    int trials = 20, samples = 16, threads = 0;
    double sigmaFallback = 0.05;
    uint64_t seed = 0;
    std::string outDir = ".";

    template <class F> void visit(F&& f) {
        f("checkpoint", checkpoint);
        f("series", series);
        f("externals", externals);
        f("warmup-series", warmupSeries);
        f("warmup-externals", warmupExternals);
        f("type", type);
        f("trials", trials);
        f("samples", samples);
        f("threads", threads);
        f("sigma-fallback", sigmaFallback);
        f("seed", seed);
        f("out-dir", outDir);
    }
};

void runEvaluate(EvaluateOpts& o) {
    LoadedModel lm(o.checkpoint);
    GraphSeries x = readSeriesCsv(o.series);
    ExternalSeries e = readExternalsCsv(o.externals);

    std::vector<AnomalyType> types;
    if (o.type == "all") {
        types = {AnomalyType::GMS, AnomalyType::LMS, AnomalyType::GAC, AnomalyType::LAC};
    } else {
        types = {anomalyTypeFromName(o.type)};
    }

    RnnState warm;
    const RnnState* warmPtr = nullptr;
    if (!o.warmupSeries.empty()) {
        warm = loadWarmState(lm, o.warmupSeries, o.warmupExternals);
        warmPtr = &warm;
    }

    const Tensor* grid = lm.checkpoint.extra("grid");
    BenchmarkConfig bc;
    bc.trials = o.trials;
    bc.sampleCount = o.samples;
    bc.seed = o.seed;
    bc.rows = static_cast<int>((*grid)[0]);
    bc.cols = static_cast<int>((*grid)[1]);
    bc.sigmaFallback = o.sigmaFallback;
    bc.threads = o.threads;

    std::vector<BenchmarkResult> results;
    for (AnomalyType type : types) {
        results.push_back(runBenchmark(lm.model, lm.checkpoint.params, x, e, lm.calibration, type,
                                       bc, warmPtr, nullptr));
        const BenchmarkResult& r = results.back();
        std::cout << anomalyTypeName(type) << ": mean AP " << r.meanAp << ", mean AUC " << r.meanAuc
                  << ", localization precision " << r.localizationPrecision << "\n";
    }

    fs::create_directories(o.outDir);
    std::string metrics = joinPath(o.outDir, "metrics.csv");
    std::string trialMetrics = joinPath(o.outDir, "trial_metrics.csv");
    writeMetricsCsv(metrics, results);
    {
        std::ofstream out(trialMetrics, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + trialMetrics + " for writing");
        out << "type,trial,ap,auc,localized_hits,localized_total\n";
        for (const BenchmarkResult& r : results) {
            for (size_t i = 0; i < r.trials.size(); ++i) {
                out << anomalyTypeName(r.type) << ',' << i << ',' << formatDouble(r.trials[i].ap)
                    << ',' << formatDouble(r.trials[i].auc) << ',' << r.trials[i].localizedHits
                    << ',' << r.trials[i].localizedTotal << '\n';
            }
        }
    }

    FlagMap flags;
    o.visit(SaveFlags{flags});
    finishManifest("evaluate", o.seed, flags, {metrics, trialMetrics},
                   joinPath(o.outDir, "evaluate_manifest.json"));
    std::cout << "wrote " << metrics << "\n";
}

// ---- plot ----

struct PlotOpts {
    std::string series, detection;
    std::string nodes = "0";
    int channel = 0;
    std::string title = "traffic";
    std::string outDir = ".";

    template <class F> void visit(F&& f) {
        f("series", series);
        f("detection", detection);
        f("nodes", nodes);
        f("channel", channel);
        f("title", title);
        f("out-dir", outDir);
    }
};

std::vector<int> parseNodeList(const std::string& text, int nodeCount) {
    std::vector<int> nodes;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        char* end = nullptr;
        long v = std::strtol(item.c_str(), &end, 10);
        if (end == item.c_str() || *end != '\0' || v < 0 || v >= nodeCount) {
            throw std::invalid_argument("bad node '" + item + "' in --nodes");
        }
        nodes.push_back(static_cast<int>(v));
    }
    if (nodes.empty()) throw std::invalid_argument("--nodes lists no nodes");
    return nodes;
}

std::vector<int> loadFlaggedSteps(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + " is empty");
    std::vector<int> flagged;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        size_t c1 = line.find(',');
        size_t c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
        size_t c3 = c2 == std::string::npos ? c2 : line.find(',', c2 + 1);
        if (c3 == std::string::npos) throw std::runtime_error(path + ": bad row '" + line + "'");
        if (line.substr(c2 + 1, c3 - c2 - 1) == "1") {
            flagged.push_back(static_cast<int>(std::strtol(line.c_str(), nullptr, 10)));
        }
    }
    return flagged;
}

void runPlot(PlotOpts& o) {
    GraphSeries x = readSeriesCsv(o.series);
    if (o.channel < 0 || o.channel >= x.channels) {
        throw std::invalid_argument("channel " + std::to_string(o.channel) + " outside the series");
    }
    std::vector<int> nodes = parseNodeList(o.nodes, x.nodes);
    std::vector<int> flagged;
    if (!o.detection.empty()) flagged = loadFlaggedSteps(o.detection);

    std::vector<PlotSeries> lines;
    for (int node : nodes) {
        PlotSeries line{"node " + std::to_string(node), {}};
        for (int t = 0; t < x.steps; ++t) {
            line.values.push_back(x.at(t, o.channel, node));
        }
        lines.push_back(std::move(line));
    }

    fs::create_directories(o.outDir);
    std::string svg = joinPath(o.outDir, "plot.svg");
    std::string data = joinPath(o.outDir, "plot_data.csv");
    writePlotSvg(svg, o.title, lines, flagged);
    {
        std::ofstream out(data, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + data + " for writing");
        out << "t";
        for (int node : nodes) out << ",node" << node;
        out << ",flagged\n";
        std::vector<uint8_t> isFlagged(static_cast<size_t>(x.steps), 0);
        for (int t : flagged) {
            if (t >= 0 && t < x.steps) isFlagged[static_cast<size_t>(t)] = 1;
        }
        for (int t = 0; t < x.steps; ++t) {
            out << t;
            for (const PlotSeries& line : lines) {
                out << ',' << formatDouble(line.values[static_cast<size_t>(t)]);
            }
            out << ',' << static_cast<int>(isFlagged[static_cast<size_t>(t)]) << '\n';
        }
    }

    FlagMap flags;
    o.visit(SaveFlags{flags});
    finishManifest("plot", 0, flags, {svg, data}, joinPath(o.outDir, "plot_manifest.json"));
    std::cout << "plotted " << nodes.size() << " nodes over " << x.steps << " steps -> " << svg
              << "\n";
}

// ---- rerun ----

void runFromManifest(const std::string& path) {
    Manifest m = readManifest(path);
    FlagMap flags;
    flags.entries = m.flags;
    if (m.command == "generate") {
        GenerateOpts o;
        o.visit(LoadFlags{flags});
        runGenerate(o);
    } else if (m.command == "train") {
        TrainOpts o;
        o.visit(LoadFlags{flags});
        runTrain(o);
    } else if (m.command == "inject") {
        InjectOpts o;
        o.visit(LoadFlags{flags});
        runInject(o);
    } else if (m.command == "detect") {
        DetectOpts o;
        o.visit(LoadFlags{flags});
        runDetect(o);
    } else if (m.command == "evaluate") {
        EvaluateOpts o;
        o.visit(LoadFlags{flags});
        runEvaluate(o);
    } else if (m.command == "plot") {
        PlotOpts o;
        o.visit(LoadFlags{flags});
        runPlot(o);
    } else {
        throw std::runtime_error(path + " names unknown command '" + m.command + "'");
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"anomaly detection on graph time series: synthetic data, variational RNN "
                 "training, likelihood scoring, and benchmarks"};
    app.require_subcommand(1);

    GenerateOpts gen;
    CLI::App* g = app.add_subcommand("generate", "write a synthetic grid-traffic dataset");
    g->add_option("--rows", gen.rows, "grid rows")->capture_default_str();
    g->add_option("--cols", gen.cols, "grid columns")->capture_default_str();
    g->add_option("--days", gen.days, "number of days")->capture_default_str();
    g->add_option("--steps-per-day", gen.stepsPerDay, "time steps per day")->capture_default_str();
    g->add_option("--noise", gen.noise, "observation noise stddev")->capture_default_str();
    g->add_option("--seed", gen.seed, "master seed")->capture_default_str();
    g->add_option("--out-dir", gen.outDir, "output directory")->capture_default_str();
    g->callback([&] { runGenerate(gen); });

    TrainOpts tr;
    CLI::App* t = app.add_subcommand("train",
                                     "fit the model on the clean span and calibrate the threshold");
    t->add_option("--series", tr.series, "input series CSV")->required();
    t->add_option("--externals", tr.externals, "input externals CSV")->required();
    t->add_option("--rows", tr.rows, "grid rows")->capture_default_str();
    t->add_option("--cols", tr.cols, "grid columns")->capture_default_str();
    t->add_option("--cheb-order", tr.chebOrder, "spectral filter order")->capture_default_str();
    t->add_option("--features", tr.features, "graph feature maps")->capture_default_str();
    t->add_option("--latent", tr.latent, "latent dimension")->capture_default_str();
    t->add_option("--hidden", tr.hidden, "recurrent hidden dimension")->capture_default_str();
    t->add_option("--epochs", tr.epochs, "training epochs")->capture_default_str();
    t->add_option("--window", tr.window, "training window length")->capture_default_str();
    t->add_option("--batch", tr.batch, "windows per batch")->capture_default_str();
    t->add_option("--lr", tr.lr, "learning rate")->capture_default_str();
    t->add_option("--clip", tr.clip, "gradient clip norm")->capture_default_str();
    t->add_option("--val-frac", tr.valFrac, "validation fraction of the training span")
        ->capture_default_str();
    t->add_option("--train-frac", tr.trainFrac, "train/test split fraction")->capture_default_str();
    t->add_option("--seed", tr.seed, "master seed")->capture_default_str();
    t->add_option("--samples", tr.samples, "scoring samples for calibration")
        ->capture_default_str();
    t->add_option("--burn-in", tr.burnIn, "calibration scores dropped at the start")
        ->capture_default_str();
    t->add_option("--quantile", tr.quantile, "flag threshold quantile")->capture_default_str();
    t->add_option("--od-threshold", tr.odThreshold, "localization anomalous-degree cut")
        ->capture_default_str();
    t->add_option("--out-dir", tr.outDir, "output directory")->capture_default_str();
    t->callback([&] { runTrain(tr); });

    InjectOpts inj;
    CLI::App* i = app.add_subcommand("inject", "plant a synthetic anomaly into a series");
    i->add_option("--series", inj.series, "input series CSV")->required();
    i->add_option("--rows", inj.rows, "grid rows")->capture_default_str();
    i->add_option("--cols", inj.cols, "grid columns")->capture_default_str();
    i->add_option("--type", inj.type, "gms, lms, gac, or lac")->required();
    i->add_option("--channel", inj.channel, "channel k")->capture_default_str();
    i->add_option("--p", inj.p, "square center row")->required();
    i->add_option("--q", inj.q, "square center column")->required();
    i->add_option("--halfwidth", inj.halfwidth, "square half-width (default per type)");
    i->add_option("--t0", inj.t0, "first anomalous step (default per type)");
    i->add_option("--t1", inj.t1, "last anomalous step (default per type)");
    i->add_option("--mu,--magnitude", inj.mu, "shift or noise multiplier (default per type)");
    i->add_option("--sigma-ref", inj.sigmaRef, "predictive stddev CSV for gac/lac");
    i->add_option("--sigma-fallback", inj.sigmaFallback, "stddev when no --sigma-ref")
        ->capture_default_str();
    i->add_option("--seed", inj.seed, "master seed")->capture_default_str();
    i->add_option("--out-dir", inj.outDir, "output directory")->capture_default_str();
    i->callback([&] { runInject(inj); });

    DetectOpts det;
    CLI::App* d = app.add_subcommand("detect", "score a series and localize flagged steps");
    d->add_option("--checkpoint", det.checkpoint, "trained checkpoint")->required();
    d->add_option("--series", det.series, "input series CSV (scaled units)")->required();
    d->add_option("--externals", det.externals, "input externals CSV")->required();
    d->add_option("--warmup-series", det.warmupSeries, "series to advance the state over first");
    d->add_option("--warmup-externals", det.warmupExternals, "externals for the warmup span");
    d->add_option("--samples", det.samples, "Monte Carlo samples per step")->capture_default_str();
    d->add_option("--seed", det.seed, "master seed")->capture_default_str();
    d->add_option("--threshold", det.threshold, "override the calibrated flag threshold");
    d->add_option("--plot-node", det.plotNode, "node shown in the plot")->capture_default_str();
    d->add_option("--plot-channel", det.plotChannel, "channel shown in the plot")
        ->capture_default_str();
    d->add_option("--out-dir", det.outDir, "output directory")->capture_default_str();
    d->callback([&] { runDetect(det); });

    EvaluateOpts ev;
    CLI::App* e = app.add_subcommand("evaluate", "run inject-and-detect benchmark trials");
    e->add_option("--checkpoint", ev.checkpoint, "trained checkpoint")->required();
    e->add_option("--series", ev.series, "clean series CSV (scaled units)")->required();
    e->add_option("--externals", ev.externals, "externals CSV")->required();
    e->add_option("--warmup-series", ev.warmupSeries, "series to advance the state over first");
    e->add_option("--warmup-externals", ev.warmupExternals, "externals for the warmup span");
    e->add_option("--type", ev.type, "gms, lms, gac, lac, or all")->capture_default_str();
    e->add_option("--trials", ev.trials, "trials per type")->capture_default_str();
    e->add_option("--samples", ev.samples, "Monte Carlo samples per step")->capture_default_str();
    e->add_option("--threads", ev.threads, "worker threads (0 = all cores)")
        ->capture_default_str();
    e->add_option("--sigma-fallback", ev.sigmaFallback, "stddev fallback for gac/lac")
        ->capture_default_str();
    e->add_option("--seed", ev.seed, "master seed")->capture_default_str();
    e->add_option("--out-dir", ev.outDir, "output directory")->capture_default_str();
    e->callback([&] { runEvaluate(ev); });

    PlotOpts pl;
    CLI::App* p = app.add_subcommand("plot", "render nodes of a series as an SVG line plot");
    p->add_option("--series", pl.series, "input series CSV")->required();
    p->add_option("--detection", pl.detection, "detection CSV whose flags become markers");
    p->add_option("--nodes", pl.nodes, "comma-separated node ids")->capture_default_str();
    p->add_option("--channel", pl.channel, "channel to plot")->capture_default_str();
    p->add_option("--title", pl.title, "plot title")->capture_default_str();
    p->add_option("--out-dir", pl.outDir, "output directory")->capture_default_str();
    p->callback([&] { runPlot(pl); });

    std::string rerunPath;
    CLI::App* r = app.add_subcommand("rerun", "repeat a run exactly from its manifest");
    r->add_option("manifest", rerunPath, "manifest JSON written by a previous run")->required();
    r->callback([&] { runFromManifest(rerunPath); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& err) {
        return app.exit(err);
    } catch (const CLI::ParseError& err) {
        app.exit(err);
        return 2;
    } catch (const std::invalid_argument& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 2;
    } catch (const std::domain_error& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 1;
    }
    return 0;
}
