#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gtsad/io.hpp"
#include "gtsad/rng.hpp"

using namespace gtsad;

namespace {

std::string tempPath(const char* stem) {
    return (std::filesystem::temp_directory_path() / stem).string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void spit(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    out << text;
    REQUIRE(out.good());
}

std::vector<std::string> splitLines(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

} // namespace

TEST_CASE("formatDouble parses back bitwise") {
    const double values[] = {0.0,   -0.0,   0.1,    1.0 / 3.0, 1e300, 5e-324,
                             -2.75, 1e-17,  123456789.123456789, -1.0};
    for (double v : values) {
        std::string s = formatDouble(v);
        char* end = nullptr;
        double back = std::strtod(s.c_str(), &end);
        CHECK(*end == '\0');
        CHECK(std::memcmp(&back, &v, sizeof v) == 0);
    }
    Rng rng(404);
    for (int i = 0; i < 500; ++i) {
        double v = rng.normal() * std::pow(10.0, rng.uniform(-30.0, 30.0));
        double back = std::strtod(formatDouble(v).c_str(), nullptr);
        CHECK(back == v);
    }
}

TEST_CASE("series CSV round-trips bitwise") {
    GraphSeries s = GraphSeries::zeros(5, 2, 3);
    Rng rng(11);
    for (double& v : s.values) v = rng.normal() * 1e3 + 0.1;
    s.at(0, 0, 0) = 1e300;
    s.at(4, 1, 2) = -5e-324;

    std::string path = tempPath("gtsad_io_series.csv");
    writeSeriesCsv(path, s);

    std::vector<std::string> lines = splitLines(slurp(path));
    CHECK(lines[0] == "t,channel,node,value");
    CHECK(lines.size() == 1 + 5 * 2 * 3);
    CHECK(lines[1].rfind("0,0,0,", 0) == 0);

    GraphSeries back = readSeriesCsv(path);
    CHECK(back.steps == s.steps);
    CHECK(back.channels == s.channels);
    CHECK(back.nodes == s.nodes);
    REQUIRE(back.values.size() == s.values.size());
    for (size_t i = 0; i < s.values.size(); ++i) CHECK(back.values[i] == s.values[i]);
}

TEST_CASE("series CSV reader rejects malformed input") {
    std::string path = tempPath("gtsad_io_series_bad.csv");

    spit(path, "t,channel,node,value\n0,0,0,1.5\n0,0,1,2.5\n");
    CHECK_NOTHROW(readSeriesCsv(path));

    // missing cell: claims node 2 exists but never fills node 1 of step 0
    spit(path, "t,channel,node,value\n0,0,0,1.5\n0,0,2,2.5\n");
    CHECK_THROWS_AS(readSeriesCsv(path), std::runtime_error);

    // duplicate cell masks a hole
    spit(path, "t,channel,node,value\n0,0,0,1.5\n0,0,0,2.5\n");
    CHECK_THROWS_AS(readSeriesCsv(path), std::runtime_error);

    spit(path, "t,channel,node,value\n0,0,zero,1.5\n");
    CHECK_THROWS_AS(readSeriesCsv(path), std::runtime_error);

    spit(path, "t,channel,node,value\n0,0,0\n");
    CHECK_THROWS_AS(readSeriesCsv(path), std::runtime_error);

    spit(path, "wrong,header\n0,0,0,1.5\n");
    CHECK_THROWS_AS(readSeriesCsv(path), std::runtime_error);

    spit(path, "t,channel,node,value\n");
    CHECK_THROWS_AS(readSeriesCsv(path), std::runtime_error);

    CHECK_THROWS_AS(readSeriesCsv(tempPath("gtsad_io_absent.csv")), std::runtime_error);
}

TEST_CASE("externals CSV round-trips bitwise") {
    ExternalSeries e;
    Rng rng(12);
    for (int t = 0; t < 20; ++t) {
        ExternalRecord r;
        r.weekday = t % 7;
        r.holiday = t % 5 == 0;
        r.weather = t % 16;
        r.temperature = rng.uniform(-1.0, 1.0);
        r.windspeed = rng.uniform(-1.0, 1.0);
        e.records.push_back(r);
    }

    std::string path = tempPath("gtsad_io_externals.csv");
    writeExternalsCsv(path, e);
    CHECK(splitLines(slurp(path))[0] == "t,weekday,holiday,weather,temp,wind");

    ExternalSeries back = readExternalsCsv(path);
    REQUIRE(back.size() == e.size());
    for (int t = 0; t < e.size(); ++t) {
        const auto& a = e.records[static_cast<size_t>(t)];
        const auto& b = back.records[static_cast<size_t>(t)];
        CHECK(a.weekday == b.weekday);
        CHECK(a.holiday == b.holiday);
        CHECK(a.weather == b.weather);
        CHECK(a.temperature == b.temperature);
        CHECK(a.windspeed == b.windspeed);
    }

    spit(path, "t,weekday,holiday,weather,temp,wind\n0,0,0,0,0,0\n2,1,0,0,0,0\n");
    CHECK_THROWS_AS(readExternalsCsv(path), std::runtime_error);
}

TEST_CASE("calendar CSV has one row per day") {
    std::vector<CalendarDay> days = {{0, 3, false, 2}, {1, 4, true, 0}, {2, 5, false, 15}};
    std::string path = tempPath("gtsad_io_calendar.csv");
    writeCalendarCsv(path, days);
    std::vector<std::string> lines = splitLines(slurp(path));
    REQUIRE(lines.size() == 4);
    CHECK(lines[0] == "day,weekday,holiday,weather");
    CHECK(lines[1] == "0,3,0,2");
    CHECK(lines[2] == "1,4,1,0");
    CHECK(lines[3] == "2,5,0,15");
}

TEST_CASE("labels CSV round-trips every anomaly type") {
    std::vector<AnomalyLabel> labels = {
        {AnomalyType::GMS, 0, 18, 18, 3, 30, 60, 0.9},
        {AnomalyType::LMS, 1, 4, 5, 1, 5, 10, 0.45},
        {AnomalyType::GAC, 0, 10, 12, 3, 30, 60, 10.0},
        {AnomalyType::LAC, 1, 7, 7, 0, 10, 20, 6.0},
    };
    std::string path = tempPath("gtsad_io_labels.csv");
    writeLabelsCsv(path, labels);

    std::vector<std::string> lines = splitLines(slurp(path));
    CHECK(lines[0] == "type,k,p,q,halfwidth,t0,t1,magnitude");
    CHECK(lines[1] == "gms,0,18,18,3,30,60,0.90000000000000002");
    CHECK(lines[4].rfind("lac,", 0) == 0);

    std::vector<AnomalyLabel> back = readLabelsCsv(path);
    REQUIRE(back.size() == labels.size());
    for (size_t i = 0; i < labels.size(); ++i) {
        CHECK(back[i].type == labels[i].type);
        CHECK(back[i].channel == labels[i].channel);
        CHECK(back[i].p == labels[i].p);
        CHECK(back[i].q == labels[i].q);
        CHECK(back[i].halfwidth == labels[i].halfwidth);
        CHECK(back[i].t0 == labels[i].t0);
        CHECK(back[i].t1 == labels[i].t1);
        CHECK(back[i].magnitude == labels[i].magnitude);
    }

    spit(path, "type,k,p,q,halfwidth,t0,t1,magnitude\nblizzard,0,1,1,1,2,3,0.5\n");
    CHECK_THROWS_AS(readLabelsCsv(path), std::invalid_argument);
}

TEST_CASE("detection CSV formats scores, flags, and localization") {
    DetectionReport report;
    report.scores = {-3.5, -120.25, -4.0};
    report.flagged = {0, 1, 0};
    report.localized.resize(3);
    report.localized[1] = {{14, 0, 0.99996}, {9, 1, 0.98765432}};

    std::string path = tempPath("gtsad_io_detection.csv");
    writeDetectionCsv(path, report);

    std::vector<std::string> lines = splitLines(slurp(path));
    REQUIRE(lines.size() == 4);
    CHECK(lines[0] == "t,score,flagged,top_nodes");
    CHECK(lines[1] == "0,-3.5,0,");
    CHECK(lines[2] == "1,-120.25,1,14:0:1.0000;9:1:0.9877");
    CHECK(lines[3] == "2,-4,0,");
}

TEST_CASE("training and metrics CSVs match their headers") {
    TrainReport report;
    report.trainElbo = {-55.5, -42.25};
    report.valElbo = {-60.0, -44.125};
    report.seconds = {1.5, 1.25};
    std::string path = tempPath("gtsad_io_train.csv");
    writeTrainReportCsv(path, report);
    std::vector<std::string> lines = splitLines(slurp(path));
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "epoch,train_elbo,val_elbo,seconds");
    CHECK(lines[1] == "0,-55.5,-60,1.5");
    CHECK(lines[2] == "1,-42.25,-44.125,1.25");

    BenchmarkResult r;
    r.type = AnomalyType::LMS;
    r.trials.resize(20);
    r.meanAp = 0.75;
    r.sdAp = 0.03125;
    r.meanAuc = 0.875;
    r.sdAuc = 0.015625;
    std::string mpath = tempPath("gtsad_io_metrics.csv");
    writeMetricsCsv(mpath, {r});
    lines = splitLines(slurp(mpath));
    REQUIRE(lines.size() == 2);
    CHECK(lines[0] == "type,trials,mean_ap,sd_ap,mean_auc,sd_auc");
    CHECK(lines[1] == "lms,20,0.75,0.03125,0.875,0.015625");
}

TEST_CASE("fnv1a64 matches the reference vectors") {
    CHECK(fnv1a64("", 0) == 0xcbf29ce484222325ull);
    CHECK(fnv1a64("a", 1) == 0xaf63dc4c8601ec8cull);
    CHECK(fnv1a64("foobar", 6) == 0x85944171f73967e8ull);

    std::string path = tempPath("gtsad_io_hash.bin");
    std::string payload(100000, '\0');
    Rng rng(77);
    for (char& c : payload) c = static_cast<char>(rng.below(256));
    spit(path, payload);
    CHECK(fnv1a64File(path) == fnv1a64(payload.data(), payload.size()));

    std::string hex = fileHashHex(path);
    CHECK(hex.size() == 16);
    for (char c : hex) CHECK(((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f')));
    CHECK(fileHashHex(path) == hex);

    CHECK_THROWS_AS(fnv1a64File(tempPath("gtsad_io_absent.bin")), std::runtime_error);
}

TEST_CASE("manifest round-trips with flag order preserved") {
    Manifest m;
    m.command = "generate";
    m.seed = 0xdeadbeefcafef00dull;
    m.flags = {{"rows", "8"}, {"cols", "8"}, {"days", "40"}, {"out", "series.csv"}};
    m.artifacts = {{"series.csv", "0123456789abcdef"}, {"externals.csv", "fedcba9876543210"}};

    std::string path = tempPath("gtsad_io_manifest.json");
    writeManifest(path, m);
    Manifest back = readManifest(path);

    CHECK(back.command == m.command);
    CHECK(back.seed == m.seed);
    REQUIRE(back.flags.size() == m.flags.size());
    for (size_t i = 0; i < m.flags.size(); ++i) {
        CHECK(back.flags[i].first == m.flags[i].first);
        CHECK(back.flags[i].second == m.flags[i].second);
    }
    REQUIRE(back.artifacts.size() == m.artifacts.size());
    for (size_t i = 0; i < m.artifacts.size(); ++i) {
        CHECK(back.artifacts[i].first == m.artifacts[i].first);
        CHECK(back.artifacts[i].second == m.artifacts[i].second);
    }

    REQUIRE(back.flag("days") != nullptr);
    CHECK(*back.flag("days") == "40");
    CHECK(back.flag("missing") == nullptr);

    spit(path, "not json at all {");
    CHECK_THROWS_AS(readManifest(path), std::runtime_error);
}

TEST_CASE("plot SVG contains polylines and markers") {
    PlotSeries a{"observed", {}};
    PlotSeries b{"predicted", {}};
    for (int t = 0; t < 50; ++t) {
        a.values.push_back(std::sin(0.3 * t));
        b.values.push_back(std::sin(0.3 * t) + 0.1);
    }
    std::string path = tempPath("gtsad_io_plot.svg");
    writePlotSvg(path, "node 12 traffic", {a, b}, {7, 20});

    std::string svg = slurp(path);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("xmlns=\"http://www.w3.org/2000/svg\"") != std::string::npos);
    CHECK(svg.find("node 12 traffic") != std::string::npos);
    CHECK(svg.find("observed") != std::string::npos);
    CHECK(svg.find("predicted") != std::string::npos);
    size_t firstPoly = svg.find("<polyline");
    REQUIRE(firstPoly != std::string::npos);
    CHECK(svg.find("<polyline", firstPoly + 1) != std::string::npos);
    // two marked steps on each of the two lines
    size_t circles = 0;
    for (size_t pos = svg.find("<circle"); pos != std::string::npos;
         pos = svg.find("<circle", pos + 1)) {
        ++circles;
    }
    CHECK(circles == 4);
    CHECK(svg.find("</svg>") != std::string::npos);

    // deterministic output
    std::string path2 = tempPath("gtsad_io_plot2.svg");
    writePlotSvg(path2, "node 12 traffic", {a, b}, {7, 20});
    CHECK(slurp(path2) == svg);

    CHECK_THROWS_AS(writePlotSvg(path, "t", {}, {}), std::invalid_argument);
    PlotSeries shorter{"x", {1.0, 2.0, 3.0}};
    CHECK_THROWS_AS(writePlotSvg(path, "t", {a, shorter}, {}), std::invalid_argument);
    PlotSeries flat{"flat", std::vector<double>(10, 2.5)};
    CHECK_NOTHROW(writePlotSvg(path, "t", {flat}, {}));
}
