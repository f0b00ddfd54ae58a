#include "run_config.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "tpbs/error.hpp"

namespace tpbs::cli {

using nlohmann::json;

namespace {

template <class T>
void take(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

void apply_train_config(const json& j, TrainConfig& cfg) {
    static const char* known[] = {"rank",          "num_basis",       "degree",          "init_scale",
                                  "loss",          "rho",             "lambda0",         "h",
                                  "lambda_ceiling", "learning_rate",  "adam_beta1",      "adam_beta2",
                                  "adam_eps",      "weight_decay",    "batch_size",      "full_batch_limit",
                                  "mini_batch_size", "max_epochs",    "convergence_tol", "patience",
                                  "overfit_threshold", "standardize_targets", "seed"};
    require(j.is_object(), ErrorKind::Parse, "train config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) fail(ErrorKind::InvalidArgument, "unknown train setting '" + key + "'");
    }
    try {
        take(j, "rank", cfg.rank);
        take(j, "num_basis", cfg.num_basis);
        take(j, "degree", cfg.degree);
        take(j, "init_scale", cfg.init_scale);
        if (j.contains("loss")) cfg.loss = parse_loss(j.at("loss").get<std::string>());
        take(j, "rho", cfg.rho);
        take(j, "lambda0", cfg.lambda0);
        take(j, "h", cfg.h);
        take(j, "lambda_ceiling", cfg.lambda_ceiling);
        take(j, "learning_rate", cfg.learning_rate);
        take(j, "adam_beta1", cfg.adam_beta1);
        take(j, "adam_beta2", cfg.adam_beta2);
        take(j, "adam_eps", cfg.adam_eps);
        take(j, "weight_decay", cfg.weight_decay);
        take(j, "batch_size", cfg.batch_size);
        take(j, "full_batch_limit", cfg.full_batch_limit);
        take(j, "mini_batch_size", cfg.mini_batch_size);
        take(j, "max_epochs", cfg.max_epochs);
        take(j, "convergence_tol", cfg.convergence_tol);
        take(j, "patience", cfg.patience);
        if (j.contains("overfit_threshold") && !j.at("overfit_threshold").is_null())
            cfg.overfit_threshold = j.at("overfit_threshold").get<double>();
        take(j, "standardize_targets", cfg.standardize_targets);
        take(j, "seed", cfg.seed);
    } catch (const json::exception& e) {
        fail(ErrorKind::Parse, std::string("train config: ") + e.what());
    }
}

json to_json(const TrainConfig& c) {
    return json{{"rank", c.rank},
                {"num_basis", c.num_basis},
                {"degree", c.degree},
                {"init_scale", c.init_scale},
                {"loss", to_string(c.loss)},
                {"rho", c.rho},
                {"lambda0", c.lambda0},
                {"h", c.h},
                {"lambda_ceiling", c.lambda_ceiling},
                {"learning_rate", c.learning_rate},
                {"adam_beta1", c.adam_beta1},
                {"adam_beta2", c.adam_beta2},
                {"adam_eps", c.adam_eps},
                {"weight_decay", c.weight_decay},
                {"batch_size", c.batch_size},
                {"full_batch_limit", c.full_batch_limit},
                {"mini_batch_size", c.mini_batch_size},
                {"max_epochs", c.max_epochs},
                {"convergence_tol", c.convergence_tol},
                {"patience", c.patience},
                {"overfit_threshold", number_or_null(c.overfit_threshold)},
                {"standardize_targets", c.standardize_targets},
                {"seed", c.seed}};
}

json to_json(const EvalMetrics& m) {
    json j{{"task", to_string(m.task)}, {"count", m.count}};
    if (m.task == Task::Regression) {
        j["mse"] = m.mse;
        j["relative_mse"] = number_or_null(m.relative_mse);
        j["relative_mse_undefined"] = m.relative_mse_undefined;
        j["relative_mse_energy"] = number_or_null(m.relative_mse_energy);
    } else {
        j["accuracy"] = m.accuracy;
    }
    j["error"] = number_or_null(m.error());
    return j;
}

json to_json(const TrainReport& r, const TrainConfig& cfg) {
    auto checkpoint = [](const Checkpoint& c) {
        return json{{"epoch", c.epoch}, {"lambda", c.lambda}, {"train", to_json(c.train)}, {"val", to_json(c.val)}};
    };
    json j;
    j["config"] = to_json(cfg);
    j["best_val"] = checkpoint(r.best_val);
    j["best_val_after_overfit"] = r.best_val_after_overfit ? checkpoint(*r.best_val_after_overfit) : json(nullptr);
    j["overfit_epoch"] = r.overfit_epoch ? json(*r.overfit_epoch) : json(nullptr);
    j["lambda_trajectory"] = r.lambda_trajectory;
    j["lambda_epochs"] = r.lambda_epochs;
    j["divergences"] = r.divergences;
    j["final_learning_rate"] = r.final_learning_rate;
    j["stop_reason"] = r.stop_reason;
    json curve = {{"epoch", json::array()},      {"lambda", json::array()},      {"objective", json::array()},
                  {"loss", json::array()},       {"lde", json::array()},         {"train_error", json::array()},
                  {"val_error", json::array()}};
    for (const auto& e : r.curve) {
        curve["epoch"].push_back(e.epoch);
        curve["lambda"].push_back(e.lambda);
        curve["objective"].push_back(e.objective);
        curve["loss"].push_back(e.loss);
        curve["lde"].push_back(e.lde);
        curve["train_error"].push_back(number_or_null(e.train_error));
        curve["val_error"].push_back(number_or_null(e.val_error));
    }
    j["curve"] = std::move(curve);
    return j;
}

void apply_overrides(json& config, const std::vector<std::string>& sets) {
    for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0)
            fail(ErrorKind::InvalidArgument, "override '" + s + "' is not of the form key=value");
        const std::string key = s.substr(0, eq);
        const std::string text = s.substr(eq + 1);
        json value = json::parse(text, nullptr, false);
        if (value.is_discarded()) value = text;
        // Dotted keys address nested objects: train.rank=4.
        json* node = &config;
        std::size_t start = 0;
        while (true) {
            const auto dot = key.find('.', start);
            const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
            if (dot == std::string::npos) {
                (*node)[part] = value;
                break;
            }
            node = &(*node)[part];
            start = dot + 1;
        }
    }
}

json read_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail(ErrorKind::Io, "cannot open config '" + path + "'");
    try {
        return json::parse(is);
    } catch (const json::exception& e) {
        fail(ErrorKind::Parse, "config '" + path + "' is not valid JSON: " + e.what());
    }
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream os(path);
    if (!os) fail(ErrorKind::Io, "cannot write '" + path + "'");
    os << std::setw(2) << j << '\n';
    if (!os) fail(ErrorKind::Io, "error while writing '" + path + "'");
}

EvalSettings parse_eval_settings(const json& j) {
    EvalSettings s;
    try {
        if (j.contains("estimators")) {
            s.estimators.clear();
            for (const auto& e : j.at("estimators")) s.estimators.push_back(parse_estimator(e.get<std::string>()));
        }
        take(j, "num_missing", s.num_missing);
        take(j, "mask_seed", s.mask_seed);
        if (j.contains("density")) {
            const auto& d = j.at("density");
            take(d, "components", s.density.components);
            take(d, "bins_per_dim", s.density.bins_per_dim);
            take(d, "em_iters", s.density.em_iters);
            take(d, "alpha", s.density.alpha);
            take(d, "seed", s.density.seed);
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::Parse, std::string("eval config: ") + e.what());
    }
    return s;
}

std::vector<double> predict_test(const TpbsModel& model, const Dataset& data, Estimator estimator,
                                 const std::vector<ObservationMask>& masks, const DensityModel* density) {
    const auto& rows = data.split.test;
    require(masks.size() == rows.size(), ErrorKind::Dimension, "one mask per test sample required");
    require(!model.scaler().empty(), ErrorKind::InvalidArgument, "model carries no feature scaler");
    const Matrix x = apply_scaler(model.scaler(), data.features, rows);
    std::vector<double> means;
    if (estimator == Estimator::MeanImpute)
        means = column_means(apply_scaler(model.scaler(), data.features, data.split.train));
    std::optional<Marginalizer> marg;
    if (estimator == Estimator::Uniform) marg.emplace(model);
    if (estimator == Estimator::Density) {
        require(density != nullptr, ErrorKind::InvalidArgument, "pdf estimator needs a fitted density");
        marg.emplace(model, *density);
    }
    std::vector<double> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto xi = x.row(i);
        double g = 0.0;
        switch (estimator) {
            case Estimator::Full: g = predict_full(model, xi)[0]; break;
            case Estimator::MeanImpute: g = predict_mean_impute(model, masks[i], xi, means)[0]; break;
            case Estimator::Uniform: g = marg->uniform(masks[i], xi)[0]; break;
            case Estimator::Density: g = marg->density(masks[i], xi)[0]; break;
        }
        out[i] = data.task == Task::Classification ? 1.0 / (1.0 + std::exp(-g)) : model.scaler().to_target(g);
    }
    return out;
}

}  // namespace tpbs::cli
