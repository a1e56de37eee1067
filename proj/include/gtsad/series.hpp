#pragma once

#include <vector>

#include "gtsad/tensor.hpp"

namespace gtsad {

/// Multichannel signal series on a fixed graph, stored (steps, channels, nodes)
/// row-major.
struct GraphSeries {
    int steps = 0;
    int channels = 0;
    int nodes = 0;
    std::vector<double> values;

    static GraphSeries zeros(int steps, int channels, int nodes);

    double& at(int t, int c, int i) {
        return values[(static_cast<size_t>(t) * channels + c) * nodes + i];
    }
    double at(int t, int c, int i) const {
        return values[(static_cast<size_t>(t) * channels + c) * nodes + i];
    }

    /// Snapshot t as the (nodes, channels) signal the graph filter consumes.
    Tensor stepSignal(int t) const;
    void setStepSignal(int t, const Tensor& signal);

    GraphSeries slice(int offset, int length) const;

    bool allFinite() const;
    void checkStep(int t) const; // throws std::out_of_range
};

/// Compact per-step external conditions. Weekday 0..6 (0 = Monday), weather
/// code 0..15, temperature and windspeed pre-normalized into [-1, 1].
struct ExternalRecord {
    int weekday = 0;
    bool holiday = false;
    int weather = 0;
    double temperature = 0.0;
    double windspeed = 0.0;

    void validate() const;

    /// One-hot weekday (7) | holiday flag (1) | one-hot weather (16) |
    /// temperature (1) | windspeed (1); dimension 26.
    Tensor encode() const;
};

inline constexpr int kExternalDim = 26;

struct ExternalSeries {
    std::vector<ExternalRecord> records;

    int size() const { return static_cast<int>(records.size()); }
    ExternalSeries slice(int offset, int length) const;
};

} // namespace gtsad
