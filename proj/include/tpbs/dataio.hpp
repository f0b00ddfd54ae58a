#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tpbs/matrix.hpp"
#include "tpbs/model.hpp"

namespace tpbs {

enum class Task { Regression, Classification };

Task parse_task(const std::string& name);
const char* to_string(Task task);

struct SplitCounts {
    std::size_t train = 0;
    std::size_t val = 0;
    std::size_t test = 0;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

/// Raw (unscaled) samples with their targets. Split indices and the scaler
/// are empty until split() / fit_scaler() are applied.
struct Dataset {
    Task task = Task::Regression;
    std::vector<std::string> feature_names;
    std::string target_name;
    Matrix features;
    std::vector<double> targets;
    SplitIndices split;
    ScalerParams scaler;

    std::size_t size() const { return features.rows; }
    std::size_t dim() const { return features.cols; }
};

struct CsvOptions {
    /// Column name, or a zero-based index written as a number. Empty means
    /// the last column.
    std::string target_column;
    Task task = Task::Regression;
    /// 0 selects the first of ',', ';', '\t' found in the header, falling
    /// back to runs of whitespace.
    char delimiter = 0;
};

/// Reads header-bearing delimited text. Errors name the offending line
/// (1-based, counting the header) and column.
Dataset load_csv(const std::string& path, const CsvOptions& options);
Dataset parse_csv(const std::string& text, const CsvOptions& options);

/// Seeded shuffle followed by a train/val/test partition.
SplitIndices split(std::size_t total, const SplitCounts& counts, std::uint64_t seed);
void split(Dataset& dataset, const SplitCounts& counts, std::uint64_t seed);

/// Min-max scaler fitted on the given rows. Constant features are widened
/// by the margin so they map to 0.5.
ScalerParams fit_scaler(const Matrix& features, const std::vector<std::size_t>& rows, double margin = 1e-6);

/// Scaled copy of the selected rows, clamped into [0, 1].
Matrix apply_scaler(const ScalerParams& scaler, const Matrix& features, const std::vector<std::size_t>& rows);

std::vector<double> select(const std::vector<double>& values, const std::vector<std::size_t>& rows);

/// Per-feature means of the selected rows, in scaled coordinates.
std::vector<double> column_means(const Matrix& scaled);

/// Reproducible experiment definition for one dataset.
struct Manifest {
    std::string name;
    std::string csv_path;
    std::string target_column;
    Task task = Task::Regression;
    char delimiter = 0;
    SplitCounts counts;
    std::vector<std::uint64_t> seeds;
};

/// Relative csv paths are resolved against the manifest's directory.
Manifest load_manifest(const std::string& path);
Manifest parse_manifest(const std::string& json_text, const std::string& base_dir);

/// Loads the manifest's CSV and applies the split for seeds[seed_index].
Dataset load_experiment(const Manifest& manifest, std::size_t seed_index);

}  // namespace tpbs
