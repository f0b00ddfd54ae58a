#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tpbs/dataio.hpp"
#include "tpbs/dirichlet.hpp"
#include "tpbs/metrics.hpp"
#include "tpbs/model.hpp"

namespace tpbs {

enum class Loss { Squared, Logistic };

Loss parse_loss(const std::string& name);
const char* to_string(Loss loss);

struct TrainConfig {
    // Architecture.
    int rank = 8;
    int num_basis = 100;
    int degree = 3;
    double init_scale = 0.1;

    Loss loss = Loss::Squared;
    /// LDE box radius; <= 0 trains without regularization.
    double rho = 0.1;
    double lambda0 = 1e-6;
    double h = 2.0;
    /// The schedule stops once lambda would exceed lambda_ceiling * lambda0.
    double lambda_ceiling = 1e3;

    double learning_rate = 1e-2;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-4;
    double weight_decay = 0.0;

    /// 0 = full batch (the default for training sets of at most
    /// full_batch_limit samples; larger sets fall back to mini_batch_size).
    std::size_t batch_size = 0;
    std::size_t full_batch_limit = 1000;
    std::size_t mini_batch_size = 256;

    int max_epochs = 5000;
    double convergence_tol = 1e-5;
    int patience = 20;
    /// Training error below which the model counts as overfitted. NaN picks
    /// the task default (1e-3 relative MSE, or zero classification error).
    double overfit_threshold = std::numeric_limits<double>::quiet_NaN();
    /// Standardize regression targets before training; the affine map is
    /// stored in the model's scaler so predictions come out in target units.
    bool standardize_targets = true;
    std::uint64_t seed = 0;

    double resolved_overfit_threshold(Task task) const;
    void validate() const;
};

/// Training problem in model coordinates: scaled inputs, model-space targets
/// and the precomputed LDE boxes (one per training point).
struct Problem {
    Loss loss = Loss::Squared;
    Matrix x;
    std::vector<double> y;
    LdePlan plan;
    bool regularize = false;

    Problem() = default;
    Problem(const TpbsModel& model, Matrix x, std::vector<double> y, Loss loss, double rho);
};

struct ObjectiveValue {
    double loss = 0.0;  // mean loss over the batch
    double lde = 0.0;   // batch LDE rescaled to the full point set
    double total = 0.0;
};

/// Mean loss over `rows` plus lambda * LDE over the same rows' boxes, scaled
/// by (#points / #rows). Empty `rows` means the full set. Gradient is written
/// to `grad` when non-null.
ObjectiveValue evaluate_objective(const TpbsModel& model, const Problem& problem, std::span<const std::size_t> rows,
                                  double lambda, ParamGrad* grad);

double objective(const TpbsModel& model, const Matrix& x, std::span<const double> y, Loss loss, double rho,
                 double lambda);
ParamGrad grad_objective(const TpbsModel& model, const Matrix& x, std::span<const double> y, Loss loss, double rho,
                         double lambda);

/// Per-sample predictions in target units (probabilities for classification)
/// from already-scaled inputs.
std::vector<double> predict_scaled(const TpbsModel& model, const Matrix& x_scaled, Task task);

struct Checkpoint {
    TpbsModel model;
    int epoch = -1;
    double lambda = 0.0;
    EvalMetrics train;
    EvalMetrics val;
};

struct EpochRecord {
    int epoch = 0;
    double lambda = 0.0;
    double objective = 0.0;
    double loss = 0.0;
    double lde = 0.0;
    double train_error = 0.0;
    double val_error = 0.0;
};

struct TrainReport {
    Checkpoint best_val;
    std::optional<Checkpoint> best_val_after_overfit;
    std::optional<int> overfit_epoch;
    std::vector<double> lambda_trajectory;
    std::vector<int> lambda_epochs;
    std::vector<EpochRecord> curve;
    int divergences = 0;
    double final_learning_rate = 0.0;
    std::string stop_reason;
};

/// Adam with bias-corrected moments on the regularized objective; lambda is
/// multiplied by h each time the objective stalls. Requires dataset splits
/// (train and val) and fits the scaler on the training split when absent.
TrainReport train(const Dataset& dataset, const TrainConfig& cfg);

}  // namespace tpbs
