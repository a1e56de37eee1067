#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gtsad/model.hpp"
#include "gtsad/series.hpp"

namespace gtsad {

struct TrainConfig {
    double learningRate = 1e-3;
    int epochs = 30;
    int windowLength = 96;
    int batchSize = 8;
    double clipNorm = 5.0;
    uint64_t seed = 0;
    double validationFraction = 0.1;

    void validate() const;
};

struct TrainReport {
    std::vector<double> trainElbo; // per-epoch mean over training windows
    std::vector<double> valElbo;   // per-epoch mean over validation windows
    std::vector<double> seconds;   // wall clock per epoch (not reproducible)
};

struct TrainingWindow {
    GraphSeries x;
    ExternalSeries e;
};

/// Non-overlapping consecutive windows; the remainder is dropped. Window w
/// step j corresponds to input step w*windowLen + j.
std::vector<TrainingWindow> makeWindows(const GraphSeries& series, const ExternalSeries& externals,
                                        int windowLen);

/// ELBO maximization with ADAM over shuffled window batches: per batch, the
/// gradient of the mean negative sequence ELBO, global-norm clipped. The
/// chronological tail of the series (validationFraction) is held out and the
/// best-validation parameters are returned. Deterministic given the seed.
std::pair<ModelParams, TrainReport> trainModel(const GraphSeries& series,
                                               const ExternalSeries& externals,
                                               const ScaledLaplacian& laplacian,
                                               const ModelConfig& modelConfig,
                                               const TrainConfig& trainConfig);

/// Scales gradients in place so the global L2 norm is at most maxNorm.
/// Returns the pre-clip norm.
double clipGradients(std::vector<Tensor>& grads, double maxNorm);

/// Checkpoint container: config, weights, and optional named side arrays
/// (e.g. scaler bounds). File layout: magic "GTSADCKP", u32 version, config
/// block, u32 array count, then named float64 arrays; all little-endian.
void saveCheckpoint(const ModelParams& params, const ModelConfig& config, const std::string& path,
                    const std::vector<std::pair<std::string, Tensor>>& extras = {});

struct LoadedCheckpoint {
    ModelConfig config;
    ModelParams params;
    std::vector<std::pair<std::string, Tensor>> extras;

    const Tensor* extra(const std::string& name) const;
};

LoadedCheckpoint loadCheckpoint(const std::string& path);

} // namespace gtsad
