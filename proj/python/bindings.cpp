#include <cstring>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gtsad/detection.hpp"
#include "gtsad/experiment.hpp"
#include "gtsad/graph.hpp"
#include "gtsad/model.hpp"
#include "gtsad/series.hpp"
#include "gtsad/training.hpp"

namespace py = pybind11;
using namespace gtsad;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

GraphSeries seriesFromArray(const DoubleArray& arr) {
    if (arr.ndim() != 3) {
        throw std::invalid_argument("series must be a (steps, channels, nodes) array");
    }
    GraphSeries s = GraphSeries::zeros(static_cast<int>(arr.shape(0)),
                                       static_cast<int>(arr.shape(1)),
                                       static_cast<int>(arr.shape(2)));
    std::memcpy(s.values.data(), arr.data(), sizeof(double) * s.values.size());
    return s;
}

py::array_t<double> arrayFromSeries(const GraphSeries& s) {
    py::array_t<double> arr({s.steps, s.channels, s.nodes});
    std::memcpy(arr.mutable_data(), s.values.data(), sizeof(double) * s.values.size());
    return arr;
}

/// Externals travel as a (steps, 5) array with columns
/// weekday, holiday, weather, temperature, windspeed.
ExternalSeries externalsFromArray(const DoubleArray& arr) {
    if (arr.ndim() != 2 || arr.shape(1) != 5) {
        throw std::invalid_argument("externals must be a (steps, 5) array of "
                                    "weekday, holiday, weather, temperature, windspeed");
    }
    ExternalSeries e;
    auto a = arr.unchecked<2>();
    for (py::ssize_t t = 0; t < arr.shape(0); ++t) {
        ExternalRecord r;
        r.weekday = static_cast<int>(a(t, 0));
        r.holiday = a(t, 1) != 0.0;
        r.weather = static_cast<int>(a(t, 2));
        r.temperature = a(t, 3);
        r.windspeed = a(t, 4);
        r.validate();
        e.records.push_back(r);
    }
    return e;
}

py::array_t<double> arrayFromExternals(const ExternalSeries& e) {
    py::array_t<double> arr({e.size(), 5});
    auto a = arr.mutable_unchecked<2>();
    for (int t = 0; t < e.size(); ++t) {
        const ExternalRecord& r = e.records[static_cast<size_t>(t)];
        a(t, 0) = r.weekday;
        a(t, 1) = r.holiday ? 1.0 : 0.0;
        a(t, 2) = r.weather;
        a(t, 3) = r.temperature;
        a(t, 4) = r.windspeed;
    }
    return arr;
}

py::array_t<double> arrayFromVector(const std::vector<double>& v) {
    py::array_t<double> arr(static_cast<py::ssize_t>(v.size()));
    std::memcpy(arr.mutable_data(), v.data(), sizeof(double) * v.size());
    return arr;
}

py::array_t<bool> arrayFromMask(const std::vector<uint8_t>& v) {
    py::array_t<bool> arr(static_cast<py::ssize_t>(v.size()));
    auto a = arr.mutable_unchecked<1>();
    for (size_t i = 0; i < v.size(); ++i) a(static_cast<py::ssize_t>(i)) = v[i] != 0;
    return arr;
}

py::dict dictFromDetection(const DetectionReport& report) {
    py::dict out;
    out["scores"] = arrayFromVector(report.scores);
    out["flagged"] = arrayFromMask(report.flagged);
    out["predictive_mean"] = arrayFromSeries(report.predictiveMean);
    out["predictive_stddev"] = arrayFromSeries(report.predictiveStddev);
    py::list localized;
    for (const auto& entries : report.localized) {
        py::list step;
        for (const LocalizedEntry& e : entries) {
            step.append(py::make_tuple(e.node, e.channel, e.od));
        }
        localized.append(std::move(step));
    }
    out["localized"] = std::move(localized);
    return out;
}

/// Grid-graph model bundle: config, Laplacian, and weights, with the
/// stable addresses the Vrnn needs. Never copied or moved.
struct Model {
    int rows, cols;
    ModelConfig config;
    WeightedGraph graph;
    ScaledLaplacian laplacian;
    std::unique_ptr<Vrnn> net;
    ModelParams params;

    Model(int rows_, int cols_, ModelConfig cfg, uint64_t seed)
        : rows(rows_), cols(cols_), config(cfg), graph(buildGridGraph(rows_, cols_)),
          laplacian(graph), net(std::make_unique<Vrnn>(config, &laplacian)),
          params(initParams(config, seed)) {}

    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;

    py::dict train(const DoubleArray& series, const DoubleArray& externals, int epochs,
                   int window, int batch, double lr, double clip, double valFrac, uint64_t seed) {
        GraphSeries x = seriesFromArray(series);
        ExternalSeries e = externalsFromArray(externals);
        TrainConfig tc;
        tc.learningRate = lr;
        tc.epochs = epochs;
        tc.windowLength = window;
        tc.batchSize = batch;
        tc.clipNorm = clip;
        tc.seed = seed;
        tc.validationFraction = valFrac;
        auto [trained, report] = trainModel(x, e, laplacian, config, tc);
        params = std::move(trained);
        py::dict out;
        out["train_elbo"] = arrayFromVector(report.trainElbo);
        out["val_elbo"] = arrayFromVector(report.valElbo);
        out["seconds"] = arrayFromVector(report.seconds);
        return out;
    }

    double sequenceElbo(const DoubleArray& series, const DoubleArray& externals, uint64_t seed) {
        return net->sequenceElbo(params, seriesFromArray(series), externalsFromArray(externals),
                                 seed);
    }

    py::dict detect(const DoubleArray& series, const DoubleArray& externals, double threshold,
                    double odThreshold, int samples, uint64_t seed,
                    const py::object& warmupSeries, const py::object& warmupExternals) {
        GraphSeries x = seriesFromArray(series);
        ExternalSeries e = externalsFromArray(externals);
        ThresholdCalibration cal;
        cal.scoreThreshold = threshold;
        cal.odThreshold = odThreshold;
        RnnState warm;
        const RnnState* warmPtr = nullptr;
        if (!warmupSeries.is_none()) {
            if (warmupExternals.is_none()) {
                throw std::invalid_argument("warmup_series needs warmup_externals");
            }
            warm = warmupState(*net, params, seriesFromArray(warmupSeries.cast<DoubleArray>()),
                               externalsFromArray(warmupExternals.cast<DoubleArray>()));
            warmPtr = &warm;
        }
        return dictFromDetection(detectSeries(*net, params, x, e, cal, samples, seed, warmPtr));
    }

    py::array_t<double> sample(int steps, uint64_t seed) {
        return arrayFromSeries(net->generate(params, steps, seed));
    }

    void save(const std::string& path) const {
        std::vector<std::pair<std::string, Tensor>> extras;
        extras.emplace_back("grid", Tensor::of({2}, {double(rows), double(cols)}));
        saveCheckpoint(params, config, path, extras);
    }

    static std::unique_ptr<Model> load(const std::string& path) {
        LoadedCheckpoint ck = loadCheckpoint(path);
        const Tensor* grid = ck.extra("grid");
        if (!grid || grid->size() != 2) {
            throw std::runtime_error(path + " carries no grid dimensions");
        }
        auto model = std::make_unique<Model>(static_cast<int>((*grid)[0]),
                                             static_cast<int>((*grid)[1]), ck.config, 0);
        model->params = std::move(ck.params);
        return model;
    }
};

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "anomaly detection on graph time series: variational RNN with spectral graph "
              "filtering, likelihood scoring, and synthetic benchmarks";

    py::class_<Model>(m, "Model")
        .def(py::init([](int rows, int cols, int channels, int chebOrder, int features,
                         int latent, int hidden, uint64_t seed) {
                 ModelConfig cfg;
                 cfg.nodeCount = rows * cols;
                 cfg.channels = channels;
                 cfg.chebyshevOrder = chebOrder;
                 cfg.graphFeatures = features;
                 cfg.latentDim = latent;
                 cfg.hiddenDim = hidden;
                 return std::make_unique<Model>(rows, cols, cfg, seed);
             }),
             py::arg("rows"), py::arg("cols"), py::arg("channels") = 2,
             py::arg("cheb_order") = 3, py::arg("features") = 8, py::arg("latent") = 16,
             py::arg("hidden") = 64, py::arg("seed") = 0,
             "Variational RNN over a rows x cols grid graph.")
        .def("train", &Model::train, py::arg("series"), py::arg("externals"),
             py::arg("epochs") = 30, py::arg("window") = 96, py::arg("batch") = 8,
             py::arg("lr") = 1e-3, py::arg("clip") = 5.0, py::arg("val_frac") = 0.1,
             py::arg("seed") = 0,
             "Fit by accumulated-ELBO maximization; returns the per-epoch curves.")
        .def("sequence_elbo", &Model::sequenceElbo, py::arg("series"), py::arg("externals"),
             py::arg("seed") = 0, "Accumulated ELBO of a whole sequence from the zero state.")
        .def("detect", &Model::detect, py::arg("series"), py::arg("externals"),
             py::arg("threshold") = -std::numeric_limits<double>::infinity(),
             py::arg("od_threshold") = 0.95, py::arg("samples") = 16, py::arg("seed") = 0,
             py::arg("warmup_series") = py::none(), py::arg("warmup_externals") = py::none(),
             "Per-step anomaly scores, flags below the threshold, per-node localization, and "
             "the predictive Gaussian moments.")
        .def("sample", &Model::sample, py::arg("steps"), py::arg("seed") = 0,
             "Generate a series from the learned prior.")
        .def("save", &Model::save, py::arg("path"))
        .def_static("load", &Model::load, py::arg("path"))
        .def_readonly("rows", &Model::rows)
        .def_readonly("cols", &Model::cols);

    m.def(
        "generate",
        [](int rows, int cols, int days, int stepsPerDay, double noise, uint64_t seed) {
            SyntheticConfig cfg;
            cfg.rows = rows;
            cfg.cols = cols;
            cfg.days = days;
            cfg.stepsPerDay = stepsPerDay;
            cfg.noiseStddev = noise;
            cfg.seed = seed;
            cfg.validate();
            SyntheticData data = generateSynthetic(cfg);
            return py::make_tuple(arrayFromSeries(data.series),
                                  arrayFromExternals(data.externals));
        },
        py::arg("rows") = 8, py::arg("cols") = 8, py::arg("days") = 40,
        py::arg("steps_per_day") = 48, py::arg("noise") = 0.02, py::arg("seed") = 0,
        "Synthetic grid-traffic series plus (steps, 5) externals of weekday, holiday, "
        "weather, temperature, windspeed.");

    m.def(
        "fit_scale",
        [](const DoubleArray& series) {
            ScalerState s = fitScale(seriesFromArray(series));
            return py::make_tuple(arrayFromVector(s.minValue), arrayFromVector(s.maxValue));
        },
        py::arg("series"), "Per-channel min-max bounds as (min, max) arrays.");

    m.def(
        "apply_scale",
        [](const DoubleArray& series, const DoubleArray& minValue, const DoubleArray& maxValue) {
            ScalerState s;
            s.minValue.assign(minValue.data(), minValue.data() + minValue.size());
            s.maxValue.assign(maxValue.data(), maxValue.data() + maxValue.size());
            return arrayFromSeries(applyScale(seriesFromArray(series), s));
        },
        py::arg("series"), py::arg("min"), py::arg("max"));

    m.def(
        "invert_scale",
        [](const DoubleArray& series, const DoubleArray& minValue, const DoubleArray& maxValue) {
            ScalerState s;
            s.minValue.assign(minValue.data(), minValue.data() + minValue.size());
            s.maxValue.assign(maxValue.data(), maxValue.data() + maxValue.size());
            return arrayFromSeries(invertScale(seriesFromArray(series), s));
        },
        py::arg("series"), py::arg("min"), py::arg("max"));

    m.def(
        "inject_anomaly",
        [](const DoubleArray& series, int rows, int cols, const std::string& type, int channel,
           int p, int q, int halfwidth, int t0, int t1, double magnitude, uint64_t seed,
           const py::object& sigmaRef, double sigmaFallback) {
            AnomalyLabel label;
            label.type = anomalyTypeFromName(type);
            label.channel = channel;
            label.p = p;
            label.q = q;
            label.halfwidth = halfwidth;
            label.t0 = t0;
            label.t1 = t1;
            label.magnitude = magnitude;
            GraphSeries sigma;
            const GraphSeries* sigmaPtr = nullptr;
            if (!sigmaRef.is_none()) {
                sigma = seriesFromArray(sigmaRef.cast<DoubleArray>());
                sigmaPtr = &sigma;
            }
            InjectionResult r = injectAnomaly(seriesFromArray(series), rows, cols, label, seed,
                                              sigmaPtr, sigmaFallback);
            py::dict out;
            out["series"] = arrayFromSeries(r.series);
            out["step_mask"] = arrayFromMask(r.stepMask);
            out["cell_mask"] = arrayFromMask(r.cellMask);
            return out;
        },
        py::arg("series"), py::arg("rows"), py::arg("cols"), py::arg("type"),
        py::arg("channel"), py::arg("p"), py::arg("q"), py::arg("halfwidth"), py::arg("t0"),
        py::arg("t1"), py::arg("magnitude"), py::arg("seed") = 0,
        py::arg("sigma_ref") = py::none(), py::arg("sigma_fallback") = 0.05,
        "Plant a gms/lms/gac/lac anomaly; returns the modified series and the step/cell masks.");

    m.def(
        "calibrate_threshold",
        [](const std::vector<double>& scores, double quantile) {
            return calibrateThreshold(scores, quantile).scoreThreshold;
        },
        py::arg("scores"), py::arg("quantile") = 0.01,
        "Interpolated low quantile of clean scores; scores below it are flagged.");

    m.def("lrt_statistic", &lrtStatistic, py::arg("x"), py::arg("mean"), py::arg("variance"),
          "Likelihood ratio of x against the predictive Gaussian.");
    m.def("chi_square_cdf", &chiSquareCdf, py::arg("x"), py::arg("df"));
    m.def("average_precision", &averagePrecision, py::arg("scores"), py::arg("labels"));
    m.def("auc_roc", &aucRoc, py::arg("scores"), py::arg("labels"));
}
