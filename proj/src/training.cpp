#include "gtsad/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "gtsad/adam.hpp"
#include "gtsad/rng.hpp"

namespace gtsad {

void TrainConfig::validate() const {
    if (!(learningRate > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (epochs < 0) throw std::invalid_argument("epoch count must be nonnegative");
    if (windowLength < 2) throw std::invalid_argument("window length must be at least 2");
    if (batchSize < 1) throw std::invalid_argument("batch size must be positive");
    if (!(clipNorm > 0.0)) throw std::invalid_argument("clip norm must be positive");
    if (!(validationFraction > 0.0 && validationFraction < 1.0)) {
        throw std::invalid_argument("validation fraction must lie in (0, 1)");
    }
}

std::vector<TrainingWindow> makeWindows(const GraphSeries& series, const ExternalSeries& externals,
                                        int windowLen) {
    if (windowLen < 2) throw std::invalid_argument("window length must be at least 2");
    if (series.steps != externals.size()) {
        throw std::invalid_argument("series has " + std::to_string(series.steps) + " steps but " +
                                    std::to_string(externals.size()) + " external records");
    }
    if (series.steps < windowLen) {
        throw std::invalid_argument("series of " + std::to_string(series.steps) +
                                    " steps is shorter than one window of " + std::to_string(windowLen));
    }
    std::vector<TrainingWindow> windows;
    for (int off = 0; off + windowLen <= series.steps; off += windowLen) {
        windows.push_back({series.slice(off, windowLen), externals.slice(off, windowLen)});
    }
    return windows;
}

double clipGradients(std::vector<Tensor>& grads, double maxNorm) {
    double sq = 0.0;
    for (const Tensor& g : grads) {
        for (double v : g.values()) sq += v * v;
    }
    double norm = std::sqrt(sq);
    if (norm > maxNorm) {
        double s = maxNorm / norm;
        for (Tensor& g : grads) {
            for (double& v : g.values()) v *= s;
        }
    }
    return norm;
}

namespace {

double meanValidationElbo(const Vrnn& model, const ModelParams& params,
                          const std::vector<TrainingWindow>& valWindows, uint64_t seed) {
    double total = 0.0;
    for (size_t w = 0; w < valWindows.size(); ++w) {
        // fixed per-window noise, identical across epochs, so values compare
        total += model.sequenceElbo(params, valWindows[w].x, valWindows[w].e,
                                    Rng::mix(Rng::mix(seed, 0x76616cu), w));
    }
    return total / static_cast<double>(valWindows.size());
}

} // namespace

std::pair<ModelParams, TrainReport> trainModel(const GraphSeries& series,
                                               const ExternalSeries& externals,
                                               const ScaledLaplacian& laplacian,
                                               const ModelConfig& modelConfig,
                                               const TrainConfig& trainConfig) {
    modelConfig.validate();
    trainConfig.validate();
    if (!series.allFinite()) throw std::invalid_argument("training series contains non-finite values");

    Vrnn model(modelConfig, &laplacian);
    ModelParams params = initParams(modelConfig, trainConfig.seed);
    TrainReport report;
    if (trainConfig.epochs == 0) return {std::move(params), std::move(report)};

    int valSteps = static_cast<int>(std::floor(trainConfig.validationFraction * series.steps));
    int trainSteps = series.steps - valSteps;
    if (trainSteps < trainConfig.windowLength || valSteps < trainConfig.windowLength) {
        throw std::invalid_argument("series of " + std::to_string(series.steps) +
                                    " steps cannot fill a training and a validation window of " +
                                    std::to_string(trainConfig.windowLength));
    }
    GraphSeries trainX = series.slice(0, trainSteps);
    ExternalSeries trainE = externals.slice(0, trainSteps);
    GraphSeries valX = series.slice(trainSteps, valSteps);
    ExternalSeries valE = externals.slice(trainSteps, valSteps);
    std::vector<TrainingWindow> windows = makeWindows(trainX, trainE, trainConfig.windowLength);
    std::vector<TrainingWindow> valWindows = makeWindows(valX, valE, trainConfig.windowLength);

    AdamConfig adamConfig;
    adamConfig.learningRate = trainConfig.learningRate;
    AdamState optimizer(adamConfig, std::as_const(params).tensors());

    ModelParams best = params;
    double bestVal = -std::numeric_limits<double>::infinity();

    std::vector<size_t> order(windows.size());
    std::iota(order.begin(), order.end(), size_t{0});

    for (int epoch = 0; epoch < trainConfig.epochs; ++epoch) {
        auto epochStart = std::chrono::steady_clock::now();
        Rng shuffle(Rng::mix(trainConfig.seed, static_cast<uint64_t>(epoch)));
        for (size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[static_cast<size_t>(shuffle.below(static_cast<int>(i)))]);
        }

        double epochElbo = 0.0;
        for (size_t batchStart = 0; batchStart < order.size();
             batchStart += static_cast<size_t>(trainConfig.batchSize)) {
            size_t batchEnd = std::min(order.size(), batchStart + static_cast<size_t>(trainConfig.batchSize));
            double invBatch = 1.0 / static_cast<double>(batchEnd - batchStart);

            std::vector<Tensor> batchGrads;
            for (const Tensor* t : params.tensors()) batchGrads.push_back(Tensor::zeros(t->shape()));

            for (size_t b = batchStart; b < batchEnd; ++b) {
                size_t w = order[b];
                Tape tape;
                ParamVals refs = model.trackParams(tape, params, true);
                uint64_t noiseSeed = Rng::mix(Rng::mix(trainConfig.seed, static_cast<uint64_t>(epoch) + 1),
                                              static_cast<uint64_t>(w) + 1);
                Val elbo = model.sequenceElbo(tape, refs, windows[w].x, windows[w].e, noiseSeed);
                double elboValue = tape.value(elbo).asScalar();
                if (!std::isfinite(elboValue)) {
                    throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                             std::to_string(epoch) + ", batch " +
                                             std::to_string(batchStart / trainConfig.batchSize) +
                                             ", window " + std::to_string(w));
                }
                epochElbo += elboValue;
                // d/dtheta of the batch-mean negative ELBO, one window's share
                tape.backward(tape.scale(elbo, -invBatch));
                std::vector<Val> refList = refs.list();
                for (size_t g = 0; g < refList.size(); ++g) {
                    const Tensor& grad = tape.grad(refList[g]);
                    for (int k = 0; k < grad.size(); ++k) {
                        batchGrads[g][static_cast<size_t>(k)] += grad[static_cast<size_t>(k)];
                    }
                }
            }

            clipGradients(batchGrads, trainConfig.clipNorm);
            std::vector<const Tensor*> gradPtrs;
            for (const Tensor& g : batchGrads) gradPtrs.push_back(&g);
            optimizer.step(params.tensors(), gradPtrs);
        }

        double valElbo = meanValidationElbo(model, params, valWindows, trainConfig.seed);
        if (!std::isfinite(valElbo)) {
            throw std::runtime_error("training diverged: non-finite validation ELBO at epoch " +
                                     std::to_string(epoch));
        }
        if (valElbo > bestVal) {
            bestVal = valElbo;
            best = params;
        }
        report.trainElbo.push_back(epochElbo / static_cast<double>(windows.size()));
        report.valElbo.push_back(valElbo);
        report.seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - epochStart).count());
    }

    return {std::move(best), std::move(report)};
}

namespace {

constexpr char kMagic[8] = {'G', 'T', 'S', 'A', 'D', 'C', 'K', 'P'};
constexpr uint32_t kVersion = 1;

void writeBytes(std::ostream& out, const void* p, size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void writePod(std::ostream& out, T v) {
    writeBytes(out, &v, sizeof v);
}

void readBytes(std::istream& in, void* p, size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in.gcount()) != n) throw std::runtime_error("truncated checkpoint file");
}

template <typename T>
T readPod(std::istream& in) {
    T v;
    readBytes(in, &v, sizeof v);
    return v;
}

void writeArray(std::ostream& out, const std::string& name, const Tensor& t) {
    writePod<uint32_t>(out, static_cast<uint32_t>(name.size()));
    writeBytes(out, name.data(), name.size());
    writePod<uint32_t>(out, static_cast<uint32_t>(t.rank()));
    for (int d : t.shape()) writePod<int32_t>(out, d);
    writeBytes(out, t.data(), static_cast<size_t>(t.size()) * sizeof(double));
}

std::pair<std::string, Tensor> readArray(std::istream& in) {
    uint32_t nameLen = readPod<uint32_t>(in);
    if (nameLen > 4096) throw std::runtime_error("corrupt checkpoint: absurd array name length");
    std::string name(nameLen, '\0');
    readBytes(in, name.data(), nameLen);
    uint32_t rank = readPod<uint32_t>(in);
    if (rank > 8) throw std::runtime_error("corrupt checkpoint: absurd array rank");
    std::vector<int> shape;
    size_t total = 1;
    for (uint32_t i = 0; i < rank; ++i) {
        int32_t d = readPod<int32_t>(in);
        if (d <= 0 || total > (1u << 28)) throw std::runtime_error("corrupt checkpoint: bad array shape");
        shape.push_back(d);
        total *= static_cast<size_t>(d);
    }
    Tensor t = Tensor::zeros(shape);
    readBytes(in, t.data(), static_cast<size_t>(t.size()) * sizeof(double));
    return {std::move(name), std::move(t)};
}

} // namespace

void saveCheckpoint(const ModelParams& params, const ModelConfig& config, const std::string& path,
                    const std::vector<std::pair<std::string, Tensor>>& extras) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    writeBytes(out, kMagic, sizeof kMagic);
    writePod<uint32_t>(out, kVersion);
    writePod<int32_t>(out, config.nodeCount);
    writePod<int32_t>(out, config.channels);
    writePod<int32_t>(out, config.chebyshevOrder);
    writePod<int32_t>(out, config.graphFeatures);
    writePod<int32_t>(out, config.latentDim);
    writePod<int32_t>(out, config.hiddenDim);
    writePod<int32_t>(out, config.externalDim);
    writePod<double>(out, config.stddevFloor);

    uint32_t count = 0;
    params.forEach([&](const char*, const Tensor&) { ++count; });
    count += static_cast<uint32_t>(extras.size());
    writePod<uint32_t>(out, count);
    params.forEach([&](const char* name, const Tensor& t) { writeArray(out, name, t); });
    for (const auto& [name, t] : extras) writeArray(out, name, t);
    if (!out) throw std::runtime_error("write to " + path + " failed");
}

const Tensor* LoadedCheckpoint::extra(const std::string& name) const {
    for (const auto& [n, t] : extras) {
        if (n == name) return &t;
    }
    return nullptr;
}

LoadedCheckpoint loadCheckpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char magic[8];
    readBytes(in, magic, sizeof magic);
    if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
        throw std::runtime_error(path + " is not a checkpoint file (bad magic)");
    }
    uint32_t version = readPod<uint32_t>(in);
    if (version != kVersion) {
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version) +
                                 " (expected " + std::to_string(kVersion) + ")");
    }
    LoadedCheckpoint ck;
    ck.config.nodeCount = readPod<int32_t>(in);
    ck.config.channels = readPod<int32_t>(in);
    ck.config.chebyshevOrder = readPod<int32_t>(in);
    ck.config.graphFeatures = readPod<int32_t>(in);
    ck.config.latentDim = readPod<int32_t>(in);
    ck.config.hiddenDim = readPod<int32_t>(in);
    ck.config.externalDim = readPod<int32_t>(in);
    ck.config.stddevFloor = readPod<double>(in);
    ck.config.validate();

    uint32_t count = readPod<uint32_t>(in);
    ck.params = shapedParams(ck.config);
    uint32_t index = 0;
    ck.params.forEach([&](const char* name, Tensor& t) {
        if (index >= count) throw std::runtime_error("checkpoint is missing weight array " + std::string(name));
        auto [gotName, gotTensor] = readArray(in);
        if (gotName != name) {
            throw std::runtime_error("checkpoint array order mismatch: expected " + std::string(name) +
                                     ", found " + gotName);
        }
        if (!gotTensor.sameShape(t)) {
            throw std::runtime_error("checkpoint array " + gotName + " has shape " +
                                     gotTensor.shapeString() + ", expected " + t.shapeString());
        }
        t = std::move(gotTensor);
        ++index;
    });
    while (index < count) {
        ck.extras.push_back(readArray(in));
        ++index;
    }
    return ck;
}

} // namespace gtsad
