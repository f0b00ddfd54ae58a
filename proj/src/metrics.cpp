#include "tpbs/metrics.hpp"

#include <cmath>
#include <limits>

#include "tpbs/error.hpp"

namespace tpbs {

double EvalMetrics::error() const {
    return task == Task::Regression ? relative_mse : 1.0 - accuracy;
}

EvalMetrics metrics(std::span<const double> predictions, std::span<const double> targets, Task task) {
    require(predictions.size() == targets.size(), ErrorKind::Dimension,
            "metrics: " + std::to_string(predictions.size()) + " predictions for " +
                std::to_string(targets.size()) + " targets");
    EvalMetrics m;
    m.task = task;
    m.count = targets.size();
    if (targets.empty()) {
        m.relative_mse = m.relative_mse_energy = std::numeric_limits<double>::quiet_NaN();
        m.relative_mse_undefined = true;
        return m;
    }
    double mean = 0.0;
    for (double y : targets) mean += y;
    mean /= static_cast<double>(targets.size());
    double sse = 0.0, sst = 0.0, energy = 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double e = targets[i] - predictions[i];
        sse += e * e;
        sst += (targets[i] - mean) * (targets[i] - mean);
        energy += targets[i] * targets[i];
        if (task == Task::Classification && ((predictions[i] >= 0.5) == (targets[i] >= 0.5))) ++correct;
    }
    m.mse = sse / static_cast<double>(targets.size());
    if (sst > 0.0) {
        m.relative_mse = sse / sst;
    } else {
        m.relative_mse = std::numeric_limits<double>::quiet_NaN();
        m.relative_mse_undefined = true;
    }
    m.relative_mse_energy = energy > 0.0 ? sse / energy : std::numeric_limits<double>::quiet_NaN();
    m.accuracy = static_cast<double>(correct) / static_cast<double>(targets.size());
    return m;
}

}  // namespace tpbs
