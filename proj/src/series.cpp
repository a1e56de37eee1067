#include "gtsad/series.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gtsad {

GraphSeries GraphSeries::zeros(int steps, int channels, int nodes) {
    if (steps < 1 || channels < 1 || nodes < 1) {
        throw std::invalid_argument("series dimensions must be positive, got steps=" +
                                    std::to_string(steps) + " channels=" + std::to_string(channels) +
                                    " nodes=" + std::to_string(nodes));
    }
    GraphSeries s;
    s.steps = steps;
    s.channels = channels;
    s.nodes = nodes;
    s.values.assign(static_cast<size_t>(steps) * channels * nodes, 0.0);
    return s;
}

void GraphSeries::checkStep(int t) const {
    if (t < 0 || t >= steps) {
        throw std::out_of_range("series step " + std::to_string(t) + " outside [0, " +
                                std::to_string(steps) + ")");
    }
}

Tensor GraphSeries::stepSignal(int t) const {
    checkStep(t);
    Tensor x = Tensor::zeros({nodes, channels});
    for (int c = 0; c < channels; ++c) {
        for (int i = 0; i < nodes; ++i) {
            x.at(i, c) = at(t, c, i);
        }
    }
    return x;
}

void GraphSeries::setStepSignal(int t, const Tensor& signal) {
    checkStep(t);
    if (signal.rank() != 2 || signal.dim(0) != nodes || signal.dim(1) != channels) {
        throw std::invalid_argument("signal shape " + signal.shapeString() + " does not match (" +
                                    std::to_string(nodes) + ", " + std::to_string(channels) + ")");
    }
    for (int c = 0; c < channels; ++c) {
        for (int i = 0; i < nodes; ++i) {
            at(t, c, i) = signal.at(i, c);
        }
    }
}

GraphSeries GraphSeries::slice(int offset, int length) const {
    if (offset < 0 || length < 1 || offset + length > steps) {
        throw std::invalid_argument("slice [" + std::to_string(offset) + ", " +
                                    std::to_string(offset + length) + ") outside series of " +
                                    std::to_string(steps) + " steps");
    }
    GraphSeries s = zeros(length, channels, nodes);
    size_t stride = static_cast<size_t>(channels) * nodes;
    std::copy(values.begin() + static_cast<long>(offset * stride),
              values.begin() + static_cast<long>((offset + length) * stride), s.values.begin());
    return s;
}

bool GraphSeries::allFinite() const {
    for (double v : values) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void ExternalRecord::validate() const {
    if (weekday < 0 || weekday > 6) throw std::invalid_argument("weekday must be 0..6, got " + std::to_string(weekday));
    if (weather < 0 || weather > 15) throw std::invalid_argument("weather code must be 0..15, got " + std::to_string(weather));
    if (!(temperature >= -1.0 && temperature <= 1.0)) {
        throw std::invalid_argument("temperature must be normalized into [-1, 1], got " + std::to_string(temperature));
    }
    if (!(windspeed >= -1.0 && windspeed <= 1.0)) {
        throw std::invalid_argument("windspeed must be normalized into [-1, 1], got " + std::to_string(windspeed));
    }
}

Tensor ExternalRecord::encode() const {
    validate();
    Tensor e = Tensor::zeros({kExternalDim});
    e[static_cast<size_t>(weekday)] = 1.0;
    e[7] = holiday ? 1.0 : 0.0;
    e[static_cast<size_t>(8 + weather)] = 1.0;
    e[24] = temperature;
    e[25] = windspeed;
    return e;
}

ExternalSeries ExternalSeries::slice(int offset, int length) const {
    if (offset < 0 || length < 1 || offset + length > size()) {
        throw std::invalid_argument("slice [" + std::to_string(offset) + ", " +
                                    std::to_string(offset + length) + ") outside series of " +
                                    std::to_string(size()) + " records");
    }
    ExternalSeries s;
    s.records.assign(records.begin() + offset, records.begin() + offset + length);
    return s;
}

} // namespace gtsad
