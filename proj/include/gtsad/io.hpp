#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gtsad/detection.hpp"
#include "gtsad/experiment.hpp"
#include "gtsad/series.hpp"
#include "gtsad/training.hpp"

namespace gtsad {

/// Doubles print as %.17g so every CSV value parses back bitwise.
std::string formatDouble(double v);

// --- series: header t,channel,node,value ---
void writeSeriesCsv(const std::string& path, const GraphSeries& series);
GraphSeries readSeriesCsv(const std::string& path);

// --- externals: header t,weekday,holiday,weather,temp,wind ---
void writeExternalsCsv(const std::string& path, const ExternalSeries& externals);
ExternalSeries readExternalsCsv(const std::string& path);

// --- calendar: header day,weekday,holiday,weather ---
void writeCalendarCsv(const std::string& path, const std::vector<CalendarDay>& calendar);

// --- anomaly labels: header type,k,p,q,halfwidth,t0,t1,magnitude ---
void writeLabelsCsv(const std::string& path, const std::vector<AnomalyLabel>& labels);
std::vector<AnomalyLabel> readLabelsCsv(const std::string& path);

/// Detection report rows t,score,flagged,top_nodes; top_nodes joins
/// node:channel:od entries with semicolons, od to 4 decimals.
void writeDetectionCsv(const std::string& path, const DetectionReport& report);

// --- per-epoch training curves: header epoch,train_elbo,val_elbo,seconds ---
void writeTrainReportCsv(const std::string& path, const TrainReport& report);

// --- benchmark table: header type,trials,mean_ap,sd_ap,mean_auc,sd_auc ---
void writeMetricsCsv(const std::string& path, const std::vector<BenchmarkResult>& results);

/// FNV-1a 64-bit digest.
uint64_t fnv1a64(const void* data, size_t size);
uint64_t fnv1a64File(const std::string& path);
std::string fileHashHex(const std::string& path);

/// Reproducibility manifest: the resolved flags of a run plus digests of the
/// files it wrote. Flags keep their insertion order.
struct Manifest {
    std::string command;
    uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> flags;
    std::vector<std::pair<std::string, std::string>> artifacts; // path -> fnv1a hex

    const std::string* flag(const std::string& name) const;
};

void writeManifest(const std::string& path, const Manifest& manifest);
Manifest readManifest(const std::string& path);

/// One named line of a plot.
struct PlotSeries {
    std::string label;
    std::vector<double> values;
};

/// Standalone SVG: one polyline per series, red circle markers on every
/// polyline at the marked steps, axes with min/max labels.
void writePlotSvg(const std::string& path, const std::string& title,
                  const std::vector<PlotSeries>& lines, const std::vector<int>& markedSteps);

} // namespace gtsad
