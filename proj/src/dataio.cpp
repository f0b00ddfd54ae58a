#include "tpbs/dataio.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "tpbs/error.hpp"

namespace tpbs {

Task parse_task(const std::string& name) {
    if (name == "regression") return Task::Regression;
    if (name == "classification") return Task::Classification;
    fail(ErrorKind::Parse, "unknown task '" + name + "' (expected regression or classification)");
}

const char* to_string(Task task) {
    return task == Task::Regression ? "regression" : "classification";
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_line(const std::string& line, char delimiter) {
    std::vector<std::string> cells;
    if (delimiter == ' ') {
        std::istringstream is(line);
        std::string cell;
        while (is >> cell) cells.push_back(cell);
        return cells;
    }
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, delimiter)) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == delimiter) cells.emplace_back();
    return cells;
}

char detect_delimiter(const std::string& header) {
    for (char c : {',', ';', '\t'})
        if (header.find(c) != std::string::npos) return c;
    return ' ';
}

std::string location(std::size_t line, std::size_t column, const std::string& name) {
    return "line " + std::to_string(line) + ", column " + std::to_string(column + 1) + " ('" + name + "')";
}

}  // namespace

Dataset parse_csv(const std::string& text, const CsvOptions& options) {
    std::istringstream is(text);
    std::string line;
    std::size_t line_no = 0;
    std::string header_line;
    while (std::getline(is, line)) {
        ++line_no;
        if (!trim(line).empty()) {
            header_line = line;
            break;
        }
    }
    if (header_line.empty()) fail(ErrorKind::Parse, "delimited file is empty (no header)");
    const char delim = options.delimiter ? options.delimiter : detect_delimiter(header_line);
    const std::vector<std::string> header = split_line(header_line, delim);
    const std::size_t cols = header.size();
    require(cols >= 2, ErrorKind::Parse, "header needs at least one feature column and one target column");

    std::size_t target = cols - 1;
    if (!options.target_column.empty()) {
        auto it = std::find(header.begin(), header.end(), options.target_column);
        if (it != header.end()) {
            target = static_cast<std::size_t>(it - header.begin());
        } else {
            char* end = nullptr;
            const long idx = std::strtol(options.target_column.c_str(), &end, 10);
            if (end == options.target_column.c_str() || *end != '\0' || idx < 0 ||
                static_cast<std::size_t>(idx) >= cols)
                fail(ErrorKind::Parse, "target column '" + options.target_column + "' not found in header");
            target = static_cast<std::size_t>(idx);
        }
    }

    Dataset ds;
    ds.task = options.task;
    ds.target_name = header[target];
    for (std::size_t c = 0; c < cols; ++c)
        if (c != target) ds.feature_names.push_back(header[c]);
    std::vector<double> feats;
    while (std::getline(is, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_line(line, delim);
        if (cells.size() != cols)
            fail(ErrorKind::Parse, "ragged row at line " + std::to_string(line_no) + ": expected " +
                                       std::to_string(cols) + " cells, found " + std::to_string(cells.size()));
        for (std::size_t c = 0; c < cols; ++c) {
            const std::string& cell = cells[c];
            char* end = nullptr;
            errno = 0;
            const double v = std::strtod(cell.c_str(), &end);
            if (cell.empty() || end != cell.c_str() + cell.size() || errno == ERANGE || !std::isfinite(v))
                fail(ErrorKind::Parse, "non-numeric cell '" + cell + "' at " + location(line_no, c, header[c]));
            if (c == target)
                ds.targets.push_back(v);
            else
                feats.push_back(v);
        }
    }
    ds.features.rows = ds.targets.size();
    ds.features.cols = cols - 1;
    ds.features.data = std::move(feats);

    if (ds.task == Task::Classification) {
        const std::set<double> labels(ds.targets.begin(), ds.targets.end());
        if (labels.size() > 2)
            fail(ErrorKind::Parse, "classification target '" + ds.target_name + "' has " +
                                       std::to_string(labels.size()) + " distinct values; only binary tasks are supported");
        const double positive = labels.empty() ? 1.0 : *labels.rbegin();
        const bool already01 = std::all_of(labels.begin(), labels.end(), [](double v) { return v == 0.0 || v == 1.0; });
        if (!already01)
            for (double& y : ds.targets) y = (labels.size() == 2 && y == positive) ? 1.0 : 0.0;
    }
    return ds;
}

Dataset load_csv(const std::string& path, const CsvOptions& options) {
    std::ifstream is(path);
    if (!is) fail(ErrorKind::Io, "cannot open data file '" + path + "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_csv(buf.str(), options);
}

SplitIndices split(std::size_t total, const SplitCounts& counts, std::uint64_t seed) {
    const std::size_t need = counts.train + counts.val + counts.test;
    if (need > total)
        fail(ErrorKind::InvalidArgument, "split counts " + std::to_string(counts.train) + "/" +
                                             std::to_string(counts.val) + "/" + std::to_string(counts.test) +
                                             " exceed the " + std::to_string(total) + " available rows");
    std::vector<std::size_t> perm(total);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed);
    // Explicit Fisher-Yates so the permutation does not depend on the
    // standard library's shuffle implementation.
    for (std::size_t i = total; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(perm[i - 1], perm[j]);
    }
    SplitIndices s;
    auto it = perm.begin();
    s.train.assign(it, it + counts.train);
    it += counts.train;
    s.val.assign(it, it + counts.val);
    it += counts.val;
    s.test.assign(it, it + counts.test);
    return s;
}

void split(Dataset& dataset, const SplitCounts& counts, std::uint64_t seed) {
    dataset.split = split(dataset.size(), counts, seed);
    dataset.scaler = {};
}

ScalerParams fit_scaler(const Matrix& features, const std::vector<std::size_t>& rows, double margin) {
    require(!rows.empty(), ErrorKind::InvalidArgument, "cannot fit a scaler on an empty split");
    ScalerParams sc;
    sc.margin = margin;
    sc.feature_min.assign(features.cols, 0.0);
    sc.feature_max.assign(features.cols, 0.0);
    for (std::size_t c = 0; c < features.cols; ++c) {
        double lo = features(rows[0], c), hi = lo;
        for (std::size_t r : rows) {
            lo = std::min(lo, features(r, c));
            hi = std::max(hi, features(r, c));
        }
        if (!(hi > lo)) {
            std::cerr << "warning: feature " << c << " is constant on the training split; widening its range by "
                      << margin << "\n";
            // A nonpositive margin would leave a zero-width range.
            const double w = margin > 0.0 ? margin : 0.5;
            lo -= w;
            hi += w;
        }
        sc.feature_min[c] = lo;
        sc.feature_max[c] = hi;
    }
    return sc;
}

Matrix apply_scaler(const ScalerParams& scaler, const Matrix& features, const std::vector<std::size_t>& rows) {
    Matrix out(rows.size(), features.cols);
    for (std::size_t i = 0; i < rows.size(); ++i) scaler.apply(features.row(rows[i]), out.row(i));
    return out;
}

std::vector<double> select(const std::vector<double>& values, const std::vector<std::size_t>& rows) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (std::size_t r : rows) out.push_back(values[r]);
    return out;
}

std::vector<double> column_means(const Matrix& scaled) {
    std::vector<double> mean(scaled.cols, 0.0);
    if (scaled.rows == 0) return mean;
    for (std::size_t i = 0; i < scaled.rows; ++i)
        for (std::size_t c = 0; c < scaled.cols; ++c) mean[c] += scaled(i, c);
    for (double& m : mean) m /= static_cast<double>(scaled.rows);
    return mean;
}

Manifest parse_manifest(const std::string& json_text, const std::string& base_dir) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, std::string("manifest is not valid JSON: ") + e.what());
    }
    Manifest m;
    try {
        m.name = j.value("name", std::string("dataset"));
        m.csv_path = j.at("csv_path").get<std::string>();
        if (j.contains("target_column")) {
            const auto& t = j.at("target_column");
            m.target_column = t.is_number() ? std::to_string(t.get<long>()) : t.get<std::string>();
        }
        m.task = parse_task(j.at("task").get<std::string>());
        const std::string delim = j.value("delimiter", std::string());
        if (delim == "whitespace" || delim == " ")
            m.delimiter = ' ';
        else if (delim == "tab")
            m.delimiter = '\t';
        else if (!delim.empty())
            m.delimiter = delim[0];
        const auto& c = j.at("counts");
        if (c.is_object())
            m.counts = {c.at("train").get<std::size_t>(), c.at("val").get<std::size_t>(),
                        c.at("test").get<std::size_t>()};
        else
            m.counts = {c.at(0).get<std::size_t>(), c.at(1).get<std::size_t>(), c.at(2).get<std::size_t>()};
        m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, std::string("manifest field error: ") + e.what());
    }
    require(!m.seeds.empty(), ErrorKind::Parse, "manifest lists no split seeds");
    std::filesystem::path p(m.csv_path);
    if (p.is_relative() && !base_dir.empty()) m.csv_path = (std::filesystem::path(base_dir) / p).string();
    return m;
}

Manifest load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail(ErrorKind::Io, "cannot open manifest '" + path + "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_manifest(buf.str(), std::filesystem::path(path).parent_path().string());
}

Dataset load_experiment(const Manifest& manifest, std::size_t seed_index) {
    require(seed_index < manifest.seeds.size(), ErrorKind::InvalidArgument,
            "seed index " + std::to_string(seed_index) + " out of range for manifest '" + manifest.name + "'");
    Dataset ds = load_csv(manifest.csv_path, {manifest.target_column, manifest.task, manifest.delimiter});
    split(ds, manifest.counts, manifest.seeds[seed_index]);
    ds.scaler = fit_scaler(ds.features, ds.split.train);
    return ds;
}

}  // namespace tpbs
