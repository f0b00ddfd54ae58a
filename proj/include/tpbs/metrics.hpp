#pragma once

#include <span>
#include <string>

#include "tpbs/dataio.hpp"

namespace tpbs {

struct EvalMetrics {
    Task task = Task::Regression;
    std::size_t count = 0;
    double mse = 0.0;
    /// sum (y - yhat)^2 / sum (y - mean(y))^2; NaN and flagged when the
    /// targets have zero variance.
    double relative_mse = 0.0;
    bool relative_mse_undefined = false;
    /// sum (y - yhat)^2 / sum y^2, reported alongside for comparison with
    /// energy-normalized error figures.
    double relative_mse_energy = 0.0;
    /// Classification only: fraction of predictions on the right side of 0.5.
    double accuracy = 0.0;

    /// Scalar used for model selection: relative MSE, or 1 - accuracy.
    double error() const;
};

/// For classification, `predictions` are probabilities in [0, 1].
EvalMetrics metrics(std::span<const double> predictions, std::span<const double> targets, Task task);

}  // namespace tpbs
