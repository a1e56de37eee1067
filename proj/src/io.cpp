#include "gtsad/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace gtsad {

std::string formatDouble(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

std::ofstream openOut(const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    return out;
}

std::ifstream openIn(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return in;
}

std::vector<std::string> splitCsvLine(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream stream(line);
    while (std::getline(stream, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

double parseDouble(const std::string& s, const std::string& path) {
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') {
        throw std::runtime_error(path + ": cannot parse '" + s + "' as a number");
    }
    return v;
}

int parseInt(const std::string& s, const std::string& path) {
    char* end = nullptr;
    long v = std::strtol(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0') {
        throw std::runtime_error(path + ": cannot parse '" + s + "' as an integer");
    }
    return static_cast<int>(v);
}

void expectHeader(std::ifstream& in, const std::string& expected, const std::string& path) {
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error(path + " is empty");
    if (!header.empty() && header.back() == '\r') header.pop_back();
    if (header != expected) {
        throw std::runtime_error(path + ": expected header '" + expected + "', found '" + header + "'");
    }
}

struct CsvRows {
    std::string path;
    std::vector<std::vector<std::string>> rows;
};

CsvRows readCsv(const std::string& path, const std::string& header, size_t fieldCount) {
    std::ifstream in = openIn(path);
    expectHeader(in, header, path);
    CsvRows out;
    out.path = path;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields = splitCsvLine(line);
        if (fields.size() != fieldCount) {
            throw std::runtime_error(path + ": expected " + std::to_string(fieldCount) +
                                     " fields, found " + std::to_string(fields.size()) + " in '" +
                                     line + "'");
        }
        out.rows.push_back(std::move(fields));
    }
    return out;
}

} // namespace

void writeSeriesCsv(const std::string& path, const GraphSeries& series) {
    std::ofstream out = openOut(path);
    out << "t,channel,node,value\n";
    for (int t = 0; t < series.steps; ++t) {
        for (int c = 0; c < series.channels; ++c) {
            for (int i = 0; i < series.nodes; ++i) {
                out << t << ',' << c << ',' << i << ',' << formatDouble(series.at(t, c, i)) << '\n';
            }
        }
    }
    if (!out) throw std::runtime_error("write to " + path + " failed");
}

GraphSeries readSeriesCsv(const std::string& path) {
    CsvRows csv = readCsv(path, "t,channel,node,value", 4);
    if (csv.rows.empty()) throw std::runtime_error(path + " has no data rows");
    int steps = 0, channels = 0, nodes = 0;
    for (const auto& row : csv.rows) {
        steps = std::max(steps, parseInt(row[0], path) + 1);
        channels = std::max(channels, parseInt(row[1], path) + 1);
        nodes = std::max(nodes, parseInt(row[2], path) + 1);
    }
    if (csv.rows.size() != static_cast<size_t>(steps) * channels * nodes) {
        throw std::runtime_error(path + ": " + std::to_string(csv.rows.size()) +
                                 " rows do not fill a " + std::to_string(steps) + "x" +
                                 std::to_string(channels) + "x" + std::to_string(nodes) + " series");
    }
    GraphSeries series = GraphSeries::zeros(steps, channels, nodes);
    for (double& v : series.values) v = std::nan("");
    for (const auto& row : csv.rows) {
        series.at(parseInt(row[0], path), parseInt(row[1], path), parseInt(row[2], path)) =
            parseDouble(row[3], path);
    }
    if (!series.allFinite()) throw std::runtime_error(path + ": duplicate or missing cells");
    return series;
}

void writeExternalsCsv(const std::string& path, const ExternalSeries& externals) {
    std::ofstream out = openOut(path);
    out << "t,weekday,holiday,weather,temp,wind\n";
    for (int t = 0; t < externals.size(); ++t) {
        const ExternalRecord& r = externals.records[static_cast<size_t>(t)];
        out << t << ',' << r.weekday << ',' << (r.holiday ? 1 : 0) << ',' << r.weather << ','
            << formatDouble(r.temperature) << ',' << formatDouble(r.windspeed) << '\n';
    }
    if (!out) throw std::runtime_error("write to " + path + " failed");
}

ExternalSeries readExternalsCsv(const std::string& path) {
    CsvRows csv = readCsv(path, "t,weekday,holiday,weather,temp,wind", 6);
    ExternalSeries externals;
    int expected = 0;
    for (const auto& row : csv.rows) {
        if (parseInt(row[0], path) != expected++) {
            throw std::runtime_error(path + ": step indices must be 0,1,2,... without gaps");
        }
        ExternalRecord r;
        r.weekday = parseInt(row[1], path);
        r.holiday = parseInt(row[2], path) != 0;
        r.weather = parseInt(row[3], path);
        r.temperature = parseDouble(row[4], path);
        r.windspeed = parseDouble(row[5], path);
        r.validate();
        externals.records.push_back(r);
    }
    return externals;
}

void writeCalendarCsv(const std::string& path, const std::vector<CalendarDay>& calendar) {
    std::ofstream out = openOut(path);
    out << "day,weekday,holiday,weather\n";
    for (const CalendarDay& d : calendar) {
        out << d.day << ',' << d.weekday << ',' << (d.holiday ? 1 : 0) << ',' << d.weather << '\n';
    }
    if (!out) throw std::runtime_error("write to " + path + " failed");
}

void writeLabelsCsv(const std::string& path, const std::vector<AnomalyLabel>& labels) {
    std::ofstream out = openOut(path);
    out << "type,k,p,q,halfwidth,t0,t1,magnitude\n";
    for (const AnomalyLabel& l : labels) {
        out << anomalyTypeName(l.type) << ',' << l.channel << ',' << l.p << ',' << l.q << ','
            << l.halfwidth << ',' << l.t0 << ',' << l.t1 << ',' << formatDouble(l.magnitude) << '\n';
    }
    if (!out) throw std::runtime_error("write to " + path + " failed");
}

std::vector<AnomalyLabel> readLabelsCsv(const std::string& path) {
    CsvRows csv = readCsv(path, "type,k,p,q,halfwidth,t0,t1,magnitude", 8);
    std::vector<AnomalyLabel> labels;
    for (const auto& row : csv.rows) {
        AnomalyLabel l;
        l.type = anomalyTypeFromName(row[0]);
        l.channel = parseInt(row[1], path);
        l.p = parseInt(row[2], path);
        l.q = parseInt(row[3], path);
        l.halfwidth = parseInt(row[4], path);
        l.t0 = parseInt(row[5], path);
        l.t1 = parseInt(row[6], path);
        l.magnitude = parseDouble(row[7], path);
        labels.push_back(l);
    }
    return labels;
}

void writeDetectionCsv(const std::string& path, const DetectionReport& report) {
    std::ofstream out = openOut(path);
    out << "t,score,flagged,top_nodes\n";
    for (size_t t = 0; t < report.scores.size(); ++t) {
        out << t << ',' << formatDouble(report.scores[t]) << ','
            << static_cast<int>(report.flagged[t]) << ',';
        const auto& entries = report.localized[t];
        for (size_t j = 0; j < entries.size(); ++j) {
            char od[16];
            std::snprintf(od, sizeof od, "%.4f", entries[j].od);
            if (j > 0) out << ';';
            out << entries[j].node << ':' << entries[j].channel << ':' << od;
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("write to " + path + " failed");
}

void writeTrainReportCsv(const std::string& path, const TrainReport& report) {
    std::ofstream out = openOut(path);
    out << "epoch,train_elbo,val_elbo,seconds\n";
    for (size_t e = 0; e < report.trainElbo.size(); ++e) {
        out << e << ',' << formatDouble(report.trainElbo[e]) << ','
            << formatDouble(report.valElbo[e]) << ',' << formatDouble(report.seconds[e]) << '\n';
    }
    if (!out) throw std::runtime_error("write to " + path + " failed");
}

void writeMetricsCsv(const std::string& path, const std::vector<BenchmarkResult>& results) {
    std::ofstream out = openOut(path);
    out << "type,trials,mean_ap,sd_ap,mean_auc,sd_auc\n";
    for (const BenchmarkResult& r : results) {
        out << anomalyTypeName(r.type) << ',' << r.trials.size() << ',' << formatDouble(r.meanAp)
            << ',' << formatDouble(r.sdAp) << ',' << formatDouble(r.meanAuc) << ','
            << formatDouble(r.sdAuc) << '\n';
    }
    if (!out) throw std::runtime_error("write to " + path + " failed");
}

uint64_t fnv1a64(const void* data, size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    uint64_t hash = 14695981039346656037ull;
    for (size_t i = 0; i < size; ++i) {
        hash ^= bytes[i];
        hash *= 1099511628211ull;
    }
    return hash;
}

uint64_t fnv1a64File(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    uint64_t hash = 14695981039346656037ull;
    char buf[1 << 16];
    for (;;) {
        in.read(buf, sizeof buf);
        std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 1099511628211ull;
        }
        if (got < static_cast<std::streamsize>(sizeof buf)) break;
    }
    return hash;
}

std::string fileHashHex(const std::string& path) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64File(path)));
    return buf;
}

const std::string* Manifest::flag(const std::string& name) const {
    for (const auto& [k, v] : flags) {
        if (k == name) return &v;
    }
    return nullptr;
}

void writeManifest(const std::string& path, const Manifest& manifest) {
    nlohmann::ordered_json doc;
    doc["command"] = manifest.command;
    doc["seed"] = manifest.seed;
    nlohmann::ordered_json flags = nlohmann::ordered_json::object();
    for (const auto& [k, v] : manifest.flags) flags[k] = v;
    doc["flags"] = std::move(flags);
    nlohmann::ordered_json artifacts = nlohmann::ordered_json::object();
    for (const auto& [k, v] : manifest.artifacts) artifacts[k] = v;
    doc["artifacts"] = std::move(artifacts);
    std::ofstream out = openOut(path);
    out << doc.dump(2) << '\n';
    if (!out) throw std::runtime_error("write to " + path + " failed");
}

Manifest readManifest(const std::string& path) {
    std::ifstream in = openIn(path);
    nlohmann::ordered_json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error(path + " is not valid JSON: " + e.what());
    }
    Manifest m;
    m.command = doc.at("command").get<std::string>();
    m.seed = doc.at("seed").get<uint64_t>();
    for (const auto& [k, v] : doc.at("flags").items()) m.flags.emplace_back(k, v.get<std::string>());
    for (const auto& [k, v] : doc.at("artifacts").items()) {
        m.artifacts.emplace_back(k, v.get<std::string>());
    }
    return m;
}

namespace {

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd",
                          "#8c564b", "#17becf", "#7f7f7f", "#bcbd22"};

std::string svgNumber(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

} // namespace

void writePlotSvg(const std::string& path, const std::string& title,
                  const std::vector<PlotSeries>& lines, const std::vector<int>& markedSteps) {
    if (lines.empty()) throw std::invalid_argument("plot needs at least one series");
    size_t steps = lines[0].values.size();
    if (steps < 2) throw std::invalid_argument("plot needs at least two steps");
    for (const PlotSeries& line : lines) {
        if (line.values.size() != steps) {
            throw std::invalid_argument("plot series lengths differ");
        }
    }
    double lo = lines[0].values[0], hi = lo;
    for (const PlotSeries& line : lines) {
        for (double v : line.values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }

    const double width = 960, height = 480;
    const double left = 70, right = 30, top = 40, bottom = 40;
    const double plotW = width - left - right, plotH = height - top - bottom;
    auto px = [&](size_t t) { return left + plotW * static_cast<double>(t) / (steps - 1); };
    auto py = [&](double v) { return top + plotH * (1.0 - (v - lo) / (hi - lo)); };

    std::ofstream out = openOut(path);
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\""
        << " font-size=\"15\">" << title << "</text>\n"
        << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
        << top + plotH << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << left << "\" y1=\"" << top + plotH << "\" x2=\"" << left + plotW
        << "\" y2=\"" << top + plotH << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << left - 6 << "\" y=\"" << top + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << svgNumber(hi)
        << "</text>\n"
        << "<text x=\"" << left - 6 << "\" y=\"" << top + plotH + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << svgNumber(lo)
        << "</text>\n"
        << "<text x=\"" << left << "\" y=\"" << height - 10
        << "\" font-family=\"sans-serif\" font-size=\"11\">t=0</text>\n"
        << "<text x=\"" << left + plotW << "\" y=\"" << height - 10
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">t=" << steps - 1
        << "</text>\n";

    for (size_t s = 0; s < lines.size(); ++s) {
        const char* color = kPalette[s % (sizeof kPalette / sizeof kPalette[0])];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
        for (size_t t = 0; t < steps; ++t) {
            if (t > 0) out << ' ';
            out << svgNumber(px(t)) << ',' << svgNumber(py(lines[s].values[t]));
        }
        out << "\"/>\n";
        out << "<text x=\"" << left + plotW - 4 << "\" y=\"" << top + 14 + 14 * s
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" << color
            << "\">" << lines[s].label << "</text>\n";
    }
    for (int t : markedSteps) {
        if (t < 0 || static_cast<size_t>(t) >= steps) continue;
        for (const PlotSeries& line : lines) {
            out << "<circle cx=\"" << svgNumber(px(static_cast<size_t>(t))) << "\" cy=\""
                << svgNumber(py(line.values[static_cast<size_t>(t)]))
                << "\" r=\"3\" fill=\"red\"/>\n";
        }
    }
    out << "</svg>\n";
    if (!out) throw std::runtime_error("write to " + path + " failed");
}

} // namespace gtsad
