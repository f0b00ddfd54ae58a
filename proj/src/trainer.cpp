#include "tpbs/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "tpbs/error.hpp"
#include "tpbs/parallel.hpp"

namespace tpbs {

Loss parse_loss(const std::string& name) {
    if (name == "squared") return Loss::Squared;
    if (name == "logistic") return Loss::Logistic;
    fail(ErrorKind::Parse, "unknown loss '" + name + "' (expected squared or logistic)");
}

const char* to_string(Loss loss) { return loss == Loss::Squared ? "squared" : "logistic"; }

double TrainConfig::resolved_overfit_threshold(Task task) const {
    if (!std::isnan(overfit_threshold)) return overfit_threshold;
    return task == Task::Regression ? 1e-3 : 1e-12;
}

void TrainConfig::validate() const {
    require(rank >= 1, ErrorKind::InvalidArgument, "rank must be >= 1");
    require(h > 1.0, ErrorKind::InvalidArgument, "penalty growth factor h must exceed 1");
    require(lambda0 > 0.0, ErrorKind::InvalidArgument, "lambda0 must be positive");
    require(lambda_ceiling >= 1.0, ErrorKind::InvalidArgument, "lambda_ceiling must be >= 1");
    require(learning_rate > 0.0, ErrorKind::InvalidArgument, "learning rate must be positive");
    require(std::isnan(overfit_threshold) || overfit_threshold >= 0.0, ErrorKind::InvalidArgument,
            "overfit_threshold must be nonnegative");
    require(max_epochs >= 1 && patience >= 1, ErrorKind::InvalidArgument, "max_epochs and patience must be >= 1");
    require(rho <= 0.5, ErrorKind::InvalidArgument, "rho must not exceed 0.5");
}

Problem::Problem(const TpbsModel& model, Matrix x_in, std::vector<double> y_in, Loss loss_in, double rho)
    : loss(loss_in), x(std::move(x_in)), y(std::move(y_in)), regularize(rho > 0.0) {
    require(x.cols == static_cast<std::size_t>(model.input_dim()), ErrorKind::Dimension,
            "training inputs have " + std::to_string(x.cols) + " features but the model expects " +
                std::to_string(model.input_dim()));
    require(y.size() == x.rows * static_cast<std::size_t>(model.output_dim()), ErrorKind::Dimension,
            "target count does not match the number of samples");
    require(loss != Loss::Logistic || model.output_dim() == 1, ErrorKind::InvalidArgument,
            "logistic loss needs a scalar output");
    if (regularize) plan = LdePlan(model.spaces(), LdeConfig{rho, x});
}

namespace {

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

struct LossWork {
    std::vector<double> gvals;   // N x R
    std::vector<double> basis;   // N x (p_max + 1)
    std::vector<int> first;      // N
    std::vector<double> prefix;  // N + 1
    std::vector<double> suffix;  // N + 1
    std::vector<double> yhat;    // M
    std::vector<double> resid;   // M
};

/// Sum over `rows` of the per-sample loss, with the gradient (unnormalized)
/// added into `grad`.
double loss_sum(const TpbsModel& model, const Problem& prob, std::span<const std::size_t> rows, ParamGrad* grad) {
    const int N = model.input_dim();
    const int R = model.rank();
    const int M = model.output_dim();
    int pmax = 0;
    for (const auto& s : model.spaces()) pmax = std::max(pmax, s.degree);
    const int stride = pmax + 1;

    const std::size_t count = rows.size();
    const std::size_t chunks = chunk_count(count);
    std::vector<double> per_sample(count, 0.0);
    std::vector<ParamGrad> partial(grad ? chunks : 0);
    parallel_chunks(count, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
        LossWork w;
        w.gvals.resize(static_cast<std::size_t>(N) * R);
        w.basis.resize(static_cast<std::size_t>(N) * stride);
        w.first.resize(N);
        w.prefix.resize(N + 1);
        w.suffix.resize(N + 1);
        w.yhat.resize(M);
        w.resid.resize(M);
        ParamGrad* g = nullptr;
        if (grad) {
            partial[chunk] = model.zero_grad();
            g = &partial[chunk];
        }
        for (std::size_t idx = begin; idx < end; ++idx) {
            const std::size_t i = rows[idx];
            const auto x = prob.x.row(i);
            for (int n = 0; n < N; ++n) {
                const SplineSpace& space = model.space(n);
                double* b = w.basis.data() + static_cast<std::size_t>(n) * stride;
                w.first[n] = eval_basis_into(space, x[n], 0, std::span<double>(b, space.degree + 1));
                for (int r = 0; r < R; ++r) {
                    const auto c = model.factor(n, r);
                    double acc = 0.0;
                    for (int j = 0; j <= space.degree; ++j) acc += c[w.first[n] + j] * b[j];
                    w.gvals[static_cast<std::size_t>(n) * R + r] = acc;
                }
            }
            std::fill(w.yhat.begin(), w.yhat.end(), 0.0);
            for (int r = 0; r < R; ++r) {
                double prod = 1.0;
                for (int n = 0; n < N; ++n) prod *= w.gvals[static_cast<std::size_t>(n) * R + r];
                const auto v = model.out_vector(r);
                for (int m = 0; m < M; ++m) w.yhat[m] += v[m] * prod;
            }
            double loss = 0.0;
            for (int m = 0; m < M; ++m) {
                const double target = prob.y[i * M + m];
                if (prob.loss == Loss::Squared) {
                    const double e = w.yhat[m] - target;
                    loss += e * e;
                    w.resid[m] = 2.0 * e;
                } else {
                    loss += softplus(w.yhat[m]) - target * w.yhat[m];
                    w.resid[m] = sigmoid(w.yhat[m]) - target;
                }
            }
            per_sample[idx] = loss;
            if (!g) continue;
            for (int r = 0; r < R; ++r) {
                w.prefix[0] = 1.0;
                for (int n = 0; n < N; ++n) w.prefix[n + 1] = w.prefix[n] * w.gvals[static_cast<std::size_t>(n) * R + r];
                w.suffix[N] = 1.0;
                for (int n = N - 1; n >= 0; --n) w.suffix[n] = w.suffix[n + 1] * w.gvals[static_cast<std::size_t>(n) * R + r];
                const auto v = model.out_vector(r);
                double ev = 0.0;
                for (int m = 0; m < M; ++m) {
                    ev += w.resid[m] * v[m];
                    g->out[static_cast<std::size_t>(r) * M + m] += w.resid[m] * w.prefix[N];
                }
                for (int n = 0; n < N; ++n) {
                    const SplineSpace& space = model.space(n);
                    const double f = ev * w.prefix[n] * w.suffix[n + 1];
                    const double* b = w.basis.data() + static_cast<std::size_t>(n) * stride;
                    double* gc = g->coeffs.data() + model.dim_offset(n) + static_cast<std::size_t>(r) * space.num_basis +
                                 w.first[n];
                    for (int j = 0; j <= space.degree; ++j) gc[j] += f * b[j];
                }
            }
        }
    });
    double total = 0.0;
    for (double l : per_sample) total += l;
    if (grad)
        for (const auto& pg : partial) grad->axpy(1.0, pg);
    return total;
}

}  // namespace

ObjectiveValue evaluate_objective(const TpbsModel& model, const Problem& problem, std::span<const std::size_t> rows,
                                  double lambda, ParamGrad* grad) {
    std::vector<std::size_t> all;
    if (rows.empty()) {
        all.resize(problem.x.rows);
        std::iota(all.begin(), all.end(), std::size_t{0});
        rows = all;
    }
    require(!rows.empty(), ErrorKind::InvalidArgument, "objective needs a nonempty batch");
    const double inv = 1.0 / static_cast<double>(rows.size());
    ObjectiveValue value;
    ParamGrad loss_grad;
    if (grad) {
        grad->set_zero();
        loss_grad = model.zero_grad();
    }
    value.loss = loss_sum(model, problem, rows, grad ? &loss_grad : nullptr) * inv;
    if (grad) grad->axpy(inv, loss_grad);
    if (problem.regularize && lambda != 0.0) {
        const double rescale = static_cast<double>(problem.x.rows) * inv;
        ParamGrad lde_grad;
        if (grad) lde_grad = model.zero_grad();
        value.lde = planned_energy(model, problem.plan, rows, rescale, grad ? &lde_grad : nullptr);
        if (grad) grad->axpy(lambda, lde_grad);
    }
    value.total = value.loss + lambda * value.lde;
    if (!std::isfinite(value.total)) {
        std::ostringstream msg;
        msg << "objective is not finite (loss " << value.loss << ", LDE " << value.lde << ", lambda " << lambda << ")";
        fail(ErrorKind::Numeric, msg.str());
    }
    return value;
}

double objective(const TpbsModel& model, const Matrix& x, std::span<const double> y, Loss loss, double rho,
                 double lambda) {
    const Problem prob(model, x, std::vector<double>(y.begin(), y.end()), loss, rho);
    return evaluate_objective(model, prob, {}, lambda, nullptr).total;
}

ParamGrad grad_objective(const TpbsModel& model, const Matrix& x, std::span<const double> y, Loss loss, double rho,
                         double lambda) {
    const Problem prob(model, x, std::vector<double>(y.begin(), y.end()), loss, rho);
    ParamGrad g = model.zero_grad();
    evaluate_objective(model, prob, {}, lambda, &g);
    return g;
}

std::vector<double> predict_scaled(const TpbsModel& model, const Matrix& x_scaled, Task task) {
    std::vector<double> out(x_scaled.rows);
    parallel_chunks(x_scaled.rows, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const double g = forward(model, x_scaled.row(i))[0];
            out[i] = task == Task::Classification ? sigmoid(g) : model.scaler().to_target(g);
        }
    });
    return out;
}

namespace {

struct AdamState {
    ParamGrad m;
    ParamGrad v;
    long step = 0;
};

void adam_update(TpbsModel& model, const ParamGrad& grad, AdamState& st, const TrainConfig& cfg, double lr) {
    ++st.step;
    const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(st.step));
    auto update = [&](std::vector<double>& params, const std::vector<double>& g, std::vector<double>& m,
                      std::vector<double>& v) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            // Decoupled weight decay, applied before the adaptive step.
            params[i] -= lr * cfg.weight_decay * params[i];
            params[i] -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
        }
    };
    update(model.coeffs(), grad.coeffs, st.m.coeffs, st.v.coeffs);
    update(model.out_vectors(), grad.out, st.m.out, st.v.out);
}

bool grad_finite(const ParamGrad& g) {
    auto fin = [](double v) { return std::isfinite(v); };
    return std::all_of(g.coeffs.begin(), g.coeffs.end(), fin) && std::all_of(g.out.begin(), g.out.end(), fin);
}

bool better(double candidate, double incumbent) {
    if (std::isnan(candidate)) return false;
    return std::isnan(incumbent) || candidate < incumbent;
}

}  // namespace

TrainReport train(const Dataset& dataset, const TrainConfig& cfg) {
    cfg.validate();
    require(!dataset.split.train.empty(), ErrorKind::InvalidArgument, "dataset has no training split");
    require(!dataset.split.val.empty(), ErrorKind::InvalidArgument, "dataset has no validation split");
    require(cfg.loss != Loss::Logistic || dataset.task == Task::Classification, ErrorKind::InvalidArgument,
            "logistic loss requires a classification dataset");

    ScalerParams scaler = dataset.scaler.empty() ? fit_scaler(dataset.features, dataset.split.train) : dataset.scaler;
    const Matrix x_train = apply_scaler(scaler, dataset.features, dataset.split.train);
    const Matrix x_val = apply_scaler(scaler, dataset.features, dataset.split.val);
    const std::vector<double> y_train = select(dataset.targets, dataset.split.train);
    const std::vector<double> y_val = select(dataset.targets, dataset.split.val);

    scaler.target_offset = 0.0;
    scaler.target_scale = 1.0;
    if (dataset.task == Task::Regression && cfg.standardize_targets) {
        const double n = static_cast<double>(y_train.size());
        const double mean = std::accumulate(y_train.begin(), y_train.end(), 0.0) / n;
        double var = 0.0;
        for (double y : y_train) var += (y - mean) * (y - mean);
        const double sd = std::sqrt(var / n);
        scaler.target_offset = mean;
        scaler.target_scale = sd > 0.0 ? sd : 1.0;
    }
    std::vector<double> y_model(y_train.size());
    for (std::size_t i = 0; i < y_train.size(); ++i) y_model[i] = scaler.from_target(y_train[i]);

    const int N = static_cast<int>(dataset.dim());
    TpbsModel model = init_model(N, cfg.rank, 1, uniform_spaces(N, cfg.num_basis, cfg.degree), cfg.seed, cfg.init_scale);
    model.scaler() = scaler;
    const Problem problem(model, x_train, y_model, cfg.loss, cfg.rho);

    const std::size_t n_train = x_train.rows;
    std::size_t batch = n_train;
    if (cfg.batch_size > 0)
        batch = std::min(cfg.batch_size, n_train);
    else if (n_train > cfg.full_batch_limit)
        batch = std::min(cfg.mini_batch_size, n_train);
    const bool full_batch = batch == n_train;

    const double overfit_threshold = cfg.resolved_overfit_threshold(dataset.task);
    const double lambda_max = cfg.lambda0 * cfg.lambda_ceiling * (1.0 + 1e-12);

    TrainReport report;
    AdamState adam{model.zero_grad(), model.zero_grad(), 0};
    double lr = cfg.learning_rate;
    double lambda = cfg.lambda0;
    report.lambda_trajectory.push_back(lambda);
    report.lambda_epochs.push_back(0);

    TpbsModel good_model = model;
    AdamState good_adam = adam;
    std::vector<double> history;
    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    ParamGrad grad = model.zero_grad();
    bool have_best = false;
    report.stop_reason = "max_epochs";

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        if (!full_batch)
            for (std::size_t i = n_train; i > 1; --i) std::swap(order[i - 1], order[shuffle_rng() % i]);
        ObjectiveValue epoch_value;
        bool diverged = false;
        std::string diagnostics;
        for (std::size_t start = 0; start < n_train; start += batch) {
            const std::size_t stop = std::min(n_train, start + batch);
            const std::span<const std::size_t> rows(order.data() + start, stop - start);
            try {
                const ObjectiveValue v = evaluate_objective(model, problem, rows, lambda, &grad);
                if (!grad_finite(grad)) fail(ErrorKind::Numeric, "gradient is not finite");
                const double frac = static_cast<double>(rows.size()) / static_cast<double>(n_train);
                epoch_value.loss += frac * v.loss;
                epoch_value.lde += frac * v.lde;
                epoch_value.total += frac * v.total;
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::Numeric) throw;
                diverged = true;
                diagnostics = e.what();
                break;
            }
            adam_update(model, grad, adam, cfg, lr);
        }
        if (!diverged && !model.all_finite()) {
            diverged = true;
            diagnostics = "parameters became non-finite";
        }
        if (diverged) {
            ++report.divergences;
            if (report.divergences >= 2) {
                std::ostringstream msg;
                msg << "training diverged twice (epoch " << epoch << ", lambda " << lambda << ", lr " << lr
                    << "): " << diagnostics;
                fail(ErrorKind::Numeric, msg.str());
            }
            model = good_model;
            adam = good_adam;
            adam.m.set_zero();
            adam.v.set_zero();
            adam.step = 0;
            lr *= 0.5;
            continue;
        }
        good_model = model;
        good_adam = adam;

        const EvalMetrics train_m = metrics(predict_scaled(model, x_train, dataset.task), y_train, dataset.task);
        const EvalMetrics val_m = metrics(predict_scaled(model, x_val, dataset.task), y_val, dataset.task);
        report.curve.push_back({epoch, lambda, epoch_value.total, epoch_value.loss, epoch_value.lde, train_m.error(),
                                val_m.error()});

        if (!report.overfit_epoch && train_m.error() < overfit_threshold) report.overfit_epoch = epoch;
        if (!have_best || better(val_m.error(), report.best_val.val.error())) {
            report.best_val = Checkpoint{model, epoch, lambda, train_m, val_m};
            have_best = true;
        }
        if (report.overfit_epoch &&
            (!report.best_val_after_overfit || better(val_m.error(), report.best_val_after_overfit->val.error())))
            report.best_val_after_overfit = Checkpoint{model, epoch, lambda, train_m, val_m};

        history.push_back(epoch_value.total);
        if (history.size() > static_cast<std::size_t>(cfg.patience)) {
            const double old = history[history.size() - 1 - cfg.patience];
            const double now = history.back();
            const double improvement = (old - now) / std::max(std::abs(old), 1e-300);
            if (improvement < cfg.convergence_tol) {
                const double next = lambda * cfg.h;
                if (next > lambda_max) {
                    report.stop_reason = "lambda_ceiling";
                    break;
                }
                lambda = next;
                report.lambda_trajectory.push_back(lambda);
                report.lambda_epochs.push_back(epoch);
                history.clear();
            }
        }
    }
    report.final_learning_rate = lr;
    if (!have_best) fail(ErrorKind::Numeric, "training produced no finite epoch");
    return report;
}

}  // namespace tpbs
