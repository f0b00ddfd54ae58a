#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "run_config.hpp"
#include "suite.hpp"
#include "tpbs/dirichlet.hpp"
#include "tpbs/error.hpp"
#include "tpbs/model_io.hpp"
#include "tpbs/parallel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tpbs;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitParse = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitSelfcheck = 5;

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument:
        case ErrorKind::Dimension: return kExitConfig;
        case ErrorKind::BadMagic:
        case ErrorKind::Version:
        case ErrorKind::Truncated:
        case ErrorKind::Parse:
        case ErrorKind::Io: return kExitParse;
        case ErrorKind::Domain:
        case ErrorKind::Numeric:
        case ErrorKind::Degenerate: return kExitNumeric;
    }
    return kExitNumeric;
}

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    std::string out;
    std::vector<std::string> sets;
};

void add_common(CLI::App* app, Common& c, const std::string& out_help) {
    app->add_option("--config", c.config, "JSON config file");
    app->add_option("--seed", c.seed, "root seed (overrides the config)");
    app->add_option("--threads", c.threads, "worker threads (0 = hardware concurrency)");
    app->add_option("--out", c.out, out_help);
    app->add_option("--set", c.sets, "config override key=value (dotted keys for nested fields)");
}

/// Loads --config (if any), applies --set overrides, and resolves relative
/// paths in the listed keys against the config file's directory.
json load_config(const Common& c, std::initializer_list<const char*> path_keys) {
    json cfg = json::object();
    fs::path base;
    if (!c.config.empty()) {
        cfg = cli::read_json_file(c.config);
        base = fs::path(c.config).parent_path();
    }
    for (const char* key : path_keys) {
        if (!cfg.contains(key) || base.empty()) continue;
        auto resolve = [&](json& v) {
            if (v.is_string() && fs::path(v.get<std::string>()).is_relative())
                v = (base / v.get<std::string>()).string();
        };
        if (cfg[key].is_array())
            for (auto& v : cfg[key]) resolve(v);
        else
            resolve(cfg[key]);
    }
    cli::apply_overrides(cfg, c.sets);
    if (c.threads) set_num_threads(c.threads);
    return cfg;
}

std::string need_string(const json& cfg, const char* key) {
    if (!cfg.contains(key) || !cfg[key].is_string())
        fail(ErrorKind::InvalidArgument, std::string("config needs a '") + key + "' path");
    return cfg[key].get<std::string>();
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorKind::Io, "cannot create output directory '" + dir + "': " + ec.message());
}

std::pair<EvalMetrics, EvalMetrics> test_metrics(const TpbsModel& model, const Dataset& data) {
    auto eval = [&](const std::vector<std::size_t>& rows) {
        const Matrix x = apply_scaler(model.scaler(), data.features, rows);
        const auto pred = predict_scaled(model, x, data.task);
        return metrics(pred, select(data.targets, rows), data.task);
    };
    return {eval(data.split.val), eval(data.split.test)};
}

int cmd_train(const Common& c) {
    json cfg = load_config(c, {"manifest"});
    const Manifest manifest = load_manifest(need_string(cfg, "manifest"));
    const std::size_t split = cfg.value("split", std::size_t{0});
    TrainConfig tc;
    if (manifest.task == Task::Classification) tc.loss = Loss::Logistic;
    if (cfg.contains("train")) cli::apply_train_config(cfg["train"], tc);
    if (c.seed) tc.seed = *c.seed;
    tc.validate();

    const Dataset data = load_experiment(manifest, split);
    const std::string out = c.out.empty() ? "run" : c.out;
    ensure_dir(out);
    std::cerr << "training on " << manifest.name << " split " << split << " (" << data.split.train.size() << "/"
              << data.split.val.size() << "/" << data.split.test.size() << ")\n";
    const TrainReport report = train(data, tc);

    json j = cli::to_json(report, tc);
    j["dataset"] = manifest.name;
    j["split"] = split;
    j["split_seed"] = manifest.seeds[split];
    save_model(report.best_val.model, (fs::path(out) / "model_best_val.tpbs").string());
    j["best_val"]["test"] = cli::to_json(test_metrics(report.best_val.model, data).second);
    const fs::path overfit_path = fs::path(out) / "model_after_overfit.tpbs";
    if (report.best_val_after_overfit) {
        save_model(report.best_val_after_overfit->model, overfit_path.string());
        j["best_val_after_overfit"]["test"] = cli::to_json(test_metrics(report.best_val_after_overfit->model, data).second);
    } else {
        fs::remove(overfit_path);
    }
    cli::write_json_file((fs::path(out) / "report.json").string(), j);
    std::cout << "best_val epoch " << report.best_val.epoch << " val_error " << report.best_val.val.error()
              << " test_error " << j["best_val"]["test"]["error"] << "\n";
    if (report.best_val_after_overfit)
        std::cout << "after_overfit epoch " << report.best_val_after_overfit->epoch << " val_error "
                  << report.best_val_after_overfit->val.error() << " test_error "
                  << j["best_val_after_overfit"]["test"]["error"] << "\n";
    else
        std::cout << "after_overfit: training error never fell below the overfit threshold\n";
    return kExitOk;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? NAN : s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

int cmd_eval(const Common& c) {
    json cfg = load_config(c, {"manifest", "models"});
    const Manifest manifest = load_manifest(need_string(cfg, "manifest"));
    if (!cfg.contains("models") || !cfg["models"].is_array() || cfg["models"].empty())
        fail(ErrorKind::InvalidArgument, "eval config needs 'models': one model file per split");
    const auto models = cfg["models"].get<std::vector<std::string>>();
    require(models.size() <= manifest.seeds.size(), ErrorKind::InvalidArgument,
            "more models than split seeds in the manifest");
    cli::EvalSettings settings = cli::parse_eval_settings(cfg);
    std::uint64_t root = c.seed.value_or(cfg.value("seed", std::uint64_t{0}));
    if (!cfg.contains("mask_seed")) settings.mask_seed = root;
    const std::string checkpoint = cfg.value("checkpoint", std::string("model"));

    const std::string out = c.out.empty() ? "eval" : c.out;
    ensure_dir(out);
    std::ofstream rows_csv(fs::path(out) / "metrics.csv");
    std::ofstream preds_csv(fs::path(out) / "predictions.csv");
    if (!rows_csv || !preds_csv) fail(ErrorKind::Io, "cannot write into '" + out + "'");
    rows_csv << "dataset,checkpoint,estimator,num_missing,split_seed,count,relative_mse,relative_mse_energy,accuracy\n";
    rows_csv << std::setprecision(10);
    bool preds_header = true;

    std::map<std::pair<std::string, int>, std::vector<double>> summary;
    for (std::size_t split = 0; split < models.size(); ++split) {
        const TpbsModel model = load_model(models[split]);
        const Dataset data = load_experiment(manifest, split);
        require(model.input_dim() == static_cast<int>(data.dim()), ErrorKind::Dimension,
                "model '" + models[split] + "' expects " + std::to_string(model.input_dim()) +
                    " features, dataset has " + std::to_string(data.dim()));
        std::optional<DensityModel> density;
        for (int k : settings.num_missing) {
            const auto masks = mask_suite(data.split.test.size(), data.dim(), static_cast<std::size_t>(k),
                                          settings.mask_seed + 7919ULL * split + static_cast<std::uint64_t>(k));
            for (Estimator est : settings.estimators) {
                if (est == Estimator::Density && !density) {
                    DensityFitOptions opt = settings.density;
                    if (!cfg.contains("density") || !cfg["density"].contains("seed")) opt.seed = root + split;
                    const Matrix train_x = apply_scaler(model.scaler(), data.features, data.split.train);
                    density = fit_density(train_x, opt).model;
                }
                const auto pred = cli::predict_test(model, data, est, masks, density ? &*density : nullptr);
                const auto targets = select(data.targets, data.split.test);
                const EvalMetrics m = metrics(pred, targets, data.task);
                rows_csv << manifest.name << ',' << checkpoint << ',' << to_string(est) << ',' << k << ','
                         << manifest.seeds[split] << ',' << m.count << ',' << m.relative_mse << ','
                         << m.relative_mse_energy << ',' << m.accuracy << '\n';
                summary[{to_string(est), k}].push_back(m.error());
                std::vector<PredictionRow> prow;
                for (std::size_t i = 0; i < pred.size(); ++i)
                    prow.push_back({data.split.test[i], est, pred[i], targets[i], masks[i].num_missing()});
                if (!preds_header) {
                    std::ostringstream tmp;
                    write_predictions(tmp, prow);
                    const std::string s = tmp.str();
                    preds_csv << s.substr(s.find('\n') + 1);
                } else {
                    write_predictions(preds_csv, prow);
                    preds_header = false;
                }
            }
        }
    }
    std::ofstream sum_csv(fs::path(out) / "summary.csv");
    sum_csv << "dataset,checkpoint,estimator,num_missing,splits,error_mean,error_std\n" << std::setprecision(6);
    std::cout << std::setprecision(4) << std::fixed;
    for (const auto& [key, errs] : summary) {
        sum_csv << manifest.name << ',' << checkpoint << ',' << key.first << ',' << key.second << ',' << errs.size()
                << ',' << mean_of(errs) << ',' << std_of(errs) << '\n';
        std::cout << key.first << " missing=" << key.second << " error " << mean_of(errs) << " +- " << std_of(errs)
                  << "\n";
    }
    return kExitOk;
}

json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows; ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < m.cols; ++j) row.push_back(std::isfinite(m(i, j)) ? json(m(i, j)) : json(nullptr));
        rows.push_back(std::move(row));
    }
    return rows;
}

int cmd_de(const Common& c, const std::string& model_path, const std::string& points_path,
           std::optional<double> rho) {
    json cfg = load_config(c, {"model", "points"});
    const std::string mp = !model_path.empty() ? model_path : need_string(cfg, "model");
    const std::string pp = !points_path.empty() ? points_path : cfg.value("points", std::string());
    if (!rho && cfg.contains("rho")) rho = cfg["rho"].get<double>();
    const TpbsModel model = load_model(mp);

    json j;
    const double de = dirichlet_energy(model);
    j["model"] = mp;
    j["dirichlet_energy"] = de;
    j["geometric_complexity_proxy"] = 1.0 + de / 2.0;
    j["factor_norms"] = factor_norms(model);
    try {
        const DeDecomposition dec = de_decomposition(model);
        json d;
        d["s"] = dec.s;
        d["a0"] = matrix_json(dec.a0);
        d["a1"] = matrix_json(dec.a1);
        d["z"] = matrix_json(dec.z);
        d["any_degenerate"] = dec.any_degenerate;
        if (!dec.any_degenerate) {
            const double q = dec.quadratic_value();
            const double dev = std::abs(q - de) / (1.0 + de);
            d["quadratic_value"] = q;
            d["relative_deviation"] = dev;
            d["consistency_flag"] = dev > 1e-6;
            d["z_eigenvalues"] = dec.z_eigenvalues();
        } else {
            d["consistency_flag"] = nullptr;
        }
        j["decomposition"] = std::move(d);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::Degenerate) throw;
        j["decomposition"] = {{"unavailable", e.what()}};
    }
    if (rho) {
        require(!pp.empty(), ErrorKind::InvalidArgument, "--rho needs --points");
        const Dataset pts = load_csv(pp, {cfg.value("target_column", std::string()), Task::Regression, 0});
        require(pts.dim() == static_cast<std::size_t>(model.input_dim()), ErrorKind::Dimension,
                "points file has " + std::to_string(pts.dim()) + " features, model expects " +
                    std::to_string(model.input_dim()));
        std::vector<std::size_t> all(pts.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        LdeConfig lc;
        lc.rho = *rho;
        lc.points = model.scaler().empty() ? pts.features : apply_scaler(model.scaler(), pts.features, all);
        const auto per_box = local_dirichlet_energy_per_box(model, lc);
        double total = 0.0;
        for (double v : per_box) total += v;
        j["rho"] = *rho;
        j["local_dirichlet_energy"] = total;
        j["local_dirichlet_energy_per_box"] = per_box;
    }
    const std::string out = c.out.empty() ? "de_report.json" : c.out;
    cli::write_json_file(out, j);
    std::cout << "DE " << de << "\n";
    if (rho) std::cout << "LDE(rho=" << *rho << ") " << j["local_dirichlet_energy"] << "\n";
    return kExitOk;
}

int cmd_fit_density(const Common& c) {
    json cfg = load_config(c, {"manifest"});
    const Manifest manifest = load_manifest(need_string(cfg, "manifest"));
    const std::size_t split = cfg.value("split", std::size_t{0});
    cli::EvalSettings s = cli::parse_eval_settings(json{{"density", cfg.value("density", json::object())}});
    if (c.seed) s.density.seed = *c.seed;
    const Dataset data = load_experiment(manifest, split);
    const Matrix x = apply_scaler(data.scaler, data.features, data.split.train);
    const DensityFit fit = fit_density(x, s.density);
    const std::string out = c.out.empty() ? "density.tpdf" : c.out;
    save_density(fit.model, out);
    json j{{"dataset", manifest.name},
           {"split", split},
           {"components", s.density.components},
           {"bins_per_dim", s.density.bins_per_dim},
           {"alpha", s.density.alpha},
           {"log_likelihood", fit.log_likelihood},
           {"smoothed_log_likelihood", fit.smoothed_log_likelihood},
           {"weights", fit.model.weights()}};
    cli::write_json_file(out + ".json", j);
    std::cout << "log-likelihood " << fit.log_likelihood.back() << " (smoothed " << fit.smoothed_log_likelihood
              << ")\n";
    return kExitOk;
}

int cmd_selfcheck(const Common& c, const std::string& scale, bool inject) {
    json cfg = load_config(c, {});
    const std::uint64_t seed = c.seed.value_or(cfg.value("seed", std::uint64_t{1}));
    const std::string sc = cfg.value("scale", scale);
    if (sc != "small" && sc != "full") fail(ErrorKind::InvalidArgument, "scale must be small or full");
    std::vector<oracle::CheckResult> results;
    if (inject) {
        results.push_back(oracle::check_de_oracle(sc == "full" ? 200 : 40, seed, oracle::sign_flipped_energy));
    } else {
        results = oracle::run_selfcheck(sc == "full" ? oracle::Scale::Full : oracle::Scale::Small, seed);
    }
    bool ok = true;
    std::ostringstream report;
    for (const auto& r : results) {
        report << oracle::format_result(r) << '\n';
        ok = ok && r.passed;
    }
    std::cout << report.str();
    if (!c.out.empty()) {
        std::ofstream os(c.out);
        if (!os) fail(ErrorKind::Io, "cannot write '" + c.out + "'");
        os << report.str();
    }
    return ok ? kExitOk : kExitSelfcheck;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Low-rank tensor-product B-spline models: training, energies, densities, missing-data inference"};
    app.require_subcommand(1);

    Common train_opts, eval_opts, de_opts, density_opts, check_opts;
    auto* train = app.add_subcommand("train", "train a model on one manifest split");
    add_common(train, train_opts, "output directory (default ./run)");

    auto* eval = app.add_subcommand("eval", "evaluate models under missing-entry scenarios");
    add_common(eval, eval_opts, "output directory (default ./eval)");

    std::string model_path, points_path;
    std::optional<double> rho;
    auto* de = app.add_subcommand("de", "energy report for a saved model");
    add_common(de, de_opts, "report path (default de_report.json)");
    de->add_option("--model", model_path, "model file");
    de->add_option("--points", points_path, "CSV of box centres in the training data's format");
    de->add_option("--rho", rho, "box radius for the localized energy");

    auto* fitd = app.add_subcommand("fit-density", "fit the histogram mixture density on a training split");
    add_common(fitd, density_opts, "density file (default density.tpdf)");

    std::string scale = "small";
    bool inject = false;
    auto* check = app.add_subcommand("selfcheck", "run the oracle property suite");
    add_common(check, check_opts, "optional copy of the report");
    check->add_option("--scale", scale, "small or full")->check(CLI::IsMember({"small", "full"}));
    check->add_flag("--inject-sign-flip", inject, "check a deliberately broken energy assembly (must fail)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }
    try {
        if (*train) return cmd_train(train_opts);
        if (*eval) return cmd_eval(eval_opts);
        if (*de) return cmd_de(de_opts, model_path, points_path, rho);
        if (*fitd) return cmd_fit_density(density_opts);
        if (*check) return cmd_selfcheck(check_opts, scale, inject);
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const json::exception& e) {
        std::cerr << "error (parse): " << e.what() << "\n";
        return kExitParse;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return kExitOk;
}
