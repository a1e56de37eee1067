#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "gtsad/graph.hpp"
#include "gtsad/model.hpp"
#include "gtsad/rng.hpp"
#include "gtsad/series.hpp"
#include "gtsad/training.hpp"

using namespace gtsad;

namespace {

ExternalSeries dailyExternals(int steps, int stepsPerDay) {
    ExternalSeries e;
    for (int t = 0; t < steps; ++t) {
        ExternalRecord r;
        int day = t / stepsPerDay;
        r.weekday = day % 7;
        r.holiday = false;
        r.weather = day % 16;
        r.temperature = 0.3 * std::sin(0.05 * t);
        r.windspeed = 0.2 * std::cos(0.03 * t);
        e.records.push_back(r);
    }
    return e;
}

// smooth daily-ish pattern with small seeded noise, values in roughly [0, 1]
GraphSeries patternSeries(int steps, int channels, int nodes, uint64_t seed) {
    GraphSeries s = GraphSeries::zeros(steps, channels, nodes);
    Rng rng(seed);
    for (int t = 0; t < steps; ++t) {
        for (int c = 0; c < channels; ++c) {
            for (int i = 0; i < nodes; ++i) {
                double base = 0.5 + 0.3 * std::sin(2.0 * M_PI * (t % 16) / 16.0 + 0.4 * i + 0.9 * c);
                s.at(t, c, i) = base + 0.02 * rng.normal();
            }
        }
    }
    return s;
}

ModelConfig tinyConfig(int nodes) {
    ModelConfig mc;
    mc.nodeCount = nodes;
    mc.channels = 1;
    mc.chebyshevOrder = 2;
    mc.graphFeatures = 3;
    mc.latentDim = 2;
    mc.hiddenDim = 8;
    return mc;
}

bool sameValues(const ModelParams& a, const ModelParams& b) {
    bool same = true;
    auto ta = a.tensors();
    auto tb = b.tensors();
    for (size_t i = 0; i < ta.size(); ++i) {
        if (ta[i]->values() != tb[i]->values()) same = false;
    }
    return same;
}

std::string tempPath(const char* stem) {
    return (std::filesystem::temp_directory_path() / stem).string();
}

} // namespace

TEST_CASE("makeWindows splits into non-overlapping aligned windows") {
    const int T = 200, W = 96;
    GraphSeries s = GraphSeries::zeros(T, 1, 3);
    for (int t = 0; t < T; ++t) {
        for (int i = 0; i < 3; ++i) s.at(t, 0, i) = t + 0.1 * i;
    }
    ExternalSeries e = dailyExternals(T, 48);

    auto windows = makeWindows(s, e, W);
    REQUIRE(windows.size() == 2); // 200 / 96 -> 2 full windows, 8 steps dropped
    CHECK(windows[0].x.steps == W);
    CHECK(windows[1].x.steps == W);
    CHECK(windows[0].e.size() == W);
    CHECK(windows[1].e.size() == W);
    CHECK(windows[0].x.at(0, 0, 0) == 0.0);
    CHECK(windows[0].x.at(95, 0, 2) == doctest::Approx(95.2));
    CHECK(windows[1].x.at(0, 0, 0) == 96.0);
    CHECK(windows[1].x.at(95, 0, 1) == doctest::Approx(191.1));
    CHECK(windows[1].e.records[0].weekday == e.records[96].weekday);
    CHECK(windows[1].e.records[0].weather == e.records[96].weather);

    auto exact = makeWindows(s.slice(0, 192), e.slice(0, 192), W);
    CHECK(exact.size() == 2);
}

TEST_CASE("makeWindows rejects short or mismatched inputs") {
    GraphSeries s = GraphSeries::zeros(50, 1, 2);
    ExternalSeries e = dailyExternals(50, 48);
    CHECK_THROWS_AS(makeWindows(s, e, 96), std::invalid_argument);
    CHECK_THROWS_AS(makeWindows(s, e, 1), std::invalid_argument);
    ExternalSeries shortE = dailyExternals(49, 48);
    CHECK_THROWS_AS(makeWindows(s, shortE, 16), std::invalid_argument);
}

TEST_CASE("clipGradients rescales only above the threshold") {
    std::vector<Tensor> grads;
    grads.push_back(Tensor::of({2}, {3.0, 4.0}));
    grads.push_back(Tensor::of({1}, {12.0})); // norm = 13

    double pre = clipGradients(grads, 5.0);
    CHECK(pre == doctest::Approx(13.0));
    double sq = 0.0;
    for (const auto& g : grads) {
        for (double v : g.values()) sq += v * v;
    }
    CHECK(std::sqrt(sq) <= 5.0 + 1e-9);
    CHECK(std::sqrt(sq) == doctest::Approx(5.0));
    // direction preserved
    CHECK(grads[0][0] / grads[0][1] == doctest::Approx(3.0 / 4.0));

    std::vector<Tensor> small;
    small.push_back(Tensor::of({2}, {0.3, -0.4}));
    double preSmall = clipGradients(small, 5.0);
    CHECK(preSmall == doctest::Approx(0.5));
    CHECK(small[0][0] == 0.3); // untouched below the threshold
    CHECK(small[0][1] == -0.4);
}

TEST_CASE("trainModel with zero epochs returns the seeded initialization") {
    ModelConfig mc = tinyConfig(4);
    WeightedGraph g = buildGridGraph(2, 2);
    ScaledLaplacian sl(g);
    GraphSeries s = patternSeries(64, 1, 4, 7);
    ExternalSeries e = dailyExternals(64, 16);

    TrainConfig tc;
    tc.epochs = 0;
    tc.windowLength = 16;
    tc.seed = 99;
    auto [params, report] = trainModel(s, e, sl, mc, tc);
    CHECK(report.trainElbo.empty());
    CHECK(report.valElbo.empty());
    CHECK(sameValues(params, initParams(mc, 99)));
}

TEST_CASE("trainModel validates its inputs") {
    ModelConfig mc = tinyConfig(4);
    WeightedGraph g = buildGridGraph(2, 2);
    ScaledLaplacian sl(g);
    ExternalSeries e = dailyExternals(64, 16);
    TrainConfig tc;
    tc.windowLength = 16;

    GraphSeries bad = patternSeries(64, 1, 4, 7);
    bad.at(10, 0, 2) = std::nan("");
    CHECK_THROWS_AS(trainModel(bad, e, sl, mc, tc), std::invalid_argument);

    // 20 steps: validation tail floor(0.1*20)=2 cannot fill a 16-step window
    GraphSeries shortSeries = patternSeries(20, 1, 4, 7);
    CHECK_THROWS_AS(trainModel(shortSeries, dailyExternals(20, 16), sl, mc, tc),
                    std::invalid_argument);

    TrainConfig badCfg = tc;
    badCfg.learningRate = 0.0;
    GraphSeries ok = patternSeries(200, 1, 4, 7);
    CHECK_THROWS_AS(trainModel(ok, dailyExternals(200, 16), sl, mc, badCfg),
                    std::invalid_argument);
    badCfg = tc;
    badCfg.validationFraction = 1.0;
    CHECK_THROWS_AS(trainModel(ok, dailyExternals(200, 16), sl, mc, badCfg),
                    std::invalid_argument);
}

TEST_CASE("trainModel improves the validation ELBO on a learnable pattern") {
    ModelConfig mc = tinyConfig(4);
    WeightedGraph g = buildGridGraph(2, 2);
    ScaledLaplacian sl(g);
    const int T = 360; // tail 36 steps -> 2 validation windows of 16
    GraphSeries s = patternSeries(T, 1, 4, 21);
    ExternalSeries e = dailyExternals(T, 16);

    TrainConfig tc;
    tc.epochs = 8;
    tc.windowLength = 16;
    tc.batchSize = 4;
    tc.learningRate = 5e-3;
    tc.seed = 3;
    auto [params, report] = trainModel(s, e, sl, mc, tc);

    REQUIRE(report.trainElbo.size() == 8);
    REQUIRE(report.valElbo.size() == 8);
    REQUIRE(report.seconds.size() == 8);
    for (double sec : report.seconds) CHECK(sec > 0.0);
    for (double v : report.valElbo) CHECK(std::isfinite(v));

    double first = report.valElbo.front();
    double bestSeen = *std::max_element(report.valElbo.begin(), report.valElbo.end());
    CHECK(bestSeen > first);
    CHECK(params.allFinite());

    // returned parameters are usable: they score a window finitely
    Vrnn model(mc, &sl);
    auto windows = makeWindows(s, e, 16);
    CHECK(std::isfinite(model.sequenceElbo(params, windows[0].x, windows[0].e, 5)));
}

TEST_CASE("trainModel is bitwise deterministic in parameters and ELBO traces") {
    ModelConfig mc = tinyConfig(4);
    WeightedGraph g = buildGridGraph(2, 2);
    ScaledLaplacian sl(g);
    GraphSeries s = patternSeries(200, 1, 4, 17);
    ExternalSeries e = dailyExternals(200, 16);

    TrainConfig tc;
    tc.epochs = 3;
    tc.windowLength = 16;
    tc.batchSize = 3;
    tc.seed = 11;

    auto [p1, r1] = trainModel(s, e, sl, mc, tc);
    auto [p2, r2] = trainModel(s, e, sl, mc, tc);
    CHECK(r1.trainElbo == r2.trainElbo);
    CHECK(r1.valElbo == r2.valElbo);
    CHECK(sameValues(p1, p2));

    TrainConfig other = tc;
    other.seed = 12;
    auto [p3, r3] = trainModel(s, e, sl, mc, other);
    CHECK(r3.trainElbo != r1.trainElbo); // different seed takes a different path
}

TEST_CASE("trainModel aborts on divergence instead of emitting garbage") {
    ModelConfig mc = tinyConfig(4);
    WeightedGraph g = buildGridGraph(2, 2);
    ScaledLaplacian sl(g);
    // finite but astronomically large observations overflow the squared
    // reconstruction residual, so the first loss is already non-finite
    GraphSeries s = GraphSeries::zeros(200, 1, 4);
    for (double& v : s.values) v = 1e300;
    ExternalSeries e = dailyExternals(200, 16);
    TrainConfig tc;
    tc.epochs = 1;
    tc.windowLength = 16;
    CHECK_THROWS_WITH_AS(trainModel(s, e, sl, mc, tc),
                         doctest::Contains("diverged"), std::runtime_error);
}

TEST_CASE("checkpoint round-trips parameters, config, and extras bitwise") {
    ModelConfig mc = tinyConfig(6);
    mc.channels = 2;
    ModelParams params = initParams(mc, 31);
    std::vector<std::pair<std::string, Tensor>> extras;
    extras.emplace_back("scaler.min", Tensor::of({2}, {0.125, -3.5}));
    extras.emplace_back("scaler.max", Tensor::of({2}, {17.25, 4.75}));

    std::string path = tempPath("gtsad_ckpt_roundtrip.bin");
    saveCheckpoint(params, mc, path, extras);
    LoadedCheckpoint ck = loadCheckpoint(path);

    CHECK(ck.config.nodeCount == mc.nodeCount);
    CHECK(ck.config.channels == mc.channels);
    CHECK(ck.config.chebyshevOrder == mc.chebyshevOrder);
    CHECK(ck.config.graphFeatures == mc.graphFeatures);
    CHECK(ck.config.latentDim == mc.latentDim);
    CHECK(ck.config.hiddenDim == mc.hiddenDim);
    CHECK(ck.config.externalDim == mc.externalDim);
    CHECK(ck.config.stddevFloor == mc.stddevFloor);
    CHECK(sameValues(ck.params, params));

    REQUIRE(ck.extras.size() == 2);
    REQUIRE(ck.extra("scaler.min") != nullptr);
    CHECK(ck.extra("scaler.min")->values() == std::vector<double>{0.125, -3.5});
    CHECK(ck.extra("scaler.max")->values() == std::vector<double>{17.25, 4.75});
    CHECK(ck.extra("absent") == nullptr);

    // a reloaded model scores identically
    WeightedGraph g = buildGridGraph(2, 3);
    ScaledLaplacian sl(g);
    Vrnn model(mc, &sl);
    GraphSeries s = patternSeries(16, 2, 6, 41);
    ExternalSeries e = dailyExternals(16, 16);
    double a = model.sequenceElbo(params, s, e, 9);
    double b = model.sequenceElbo(ck.params, s, e, 9);
    CHECK(a == b);

    std::filesystem::remove(path);
}

TEST_CASE("checkpoint loading rejects malformed files") {
    std::string path = tempPath("gtsad_ckpt_bad.bin");

    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << "not a checkpoint at all";
    }
    CHECK_THROWS_WITH_AS(loadCheckpoint(path), doctest::Contains("bad magic"),
                         std::runtime_error);

    ModelConfig mc = tinyConfig(4);
    ModelParams params = initParams(mc, 1);
    saveCheckpoint(params, mc, path);
    {
        // corrupt the version field (bytes 8..11)
        std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(8);
        uint32_t v = 999;
        f.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
    CHECK_THROWS_WITH_AS(loadCheckpoint(path), doctest::Contains("version"),
                         std::runtime_error);

    saveCheckpoint(params, mc, path);
    auto fullSize = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, fullSize / 2);
    CHECK_THROWS_AS(loadCheckpoint(path), std::runtime_error);

    CHECK_THROWS_AS(loadCheckpoint(tempPath("gtsad_ckpt_missing.bin")), std::runtime_error);
    std::filesystem::remove(path);
}
