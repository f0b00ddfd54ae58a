#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "tpbs/dataio.hpp"
#include "tpbs/density.hpp"
#include "tpbs/marginal.hpp"
#include "tpbs/trainer.hpp"

namespace tpbs::cli {

/// Overlays the keys present in `j` onto `cfg`. Unknown keys are rejected so
/// typos do not silently fall back to defaults.
void apply_train_config(const nlohmann::json& j, TrainConfig& cfg);
nlohmann::json to_json(const TrainConfig& cfg);

nlohmann::json to_json(const EvalMetrics& m);
nlohmann::json to_json(const TrainReport& report, const TrainConfig& cfg);

/// Applies "key=value" overrides; the value is parsed as JSON when possible
/// and taken as a string otherwise.
void apply_overrides(nlohmann::json& config, const std::vector<std::string>& sets);

nlohmann::json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& j);

struct EvalSettings {
    std::vector<Estimator> estimators{Estimator::Full, Estimator::MeanImpute, Estimator::Uniform, Estimator::Density};
    std::vector<int> num_missing{0, 2, 3, 4};
    DensityFitOptions density;
    std::uint64_t mask_seed = 0;
};

EvalSettings parse_eval_settings(const nlohmann::json& j);

/// Per-sample predictions of `estimator` on the test split of `data`, in
/// target units (probabilities for classification).
std::vector<double> predict_test(const TpbsModel& model, const Dataset& data, Estimator estimator,
                                 const std::vector<ObservationMask>& masks, const DensityModel* density);

}  // namespace tpbs::cli
