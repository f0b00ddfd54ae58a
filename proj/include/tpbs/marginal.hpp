#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tpbs/density.hpp"
#include "tpbs/model.hpp"

namespace tpbs {

/// Which coordinates of a sample were observed. Values at unobserved
/// coordinates are ignored by every estimator.
struct ObservationMask {
    std::vector<std::uint8_t> observed;

    static ObservationMask all_observed(std::size_t dim) { return {std::vector<std::uint8_t>(dim, 1)}; }
    std::size_t dim() const { return observed.size(); }
    std::size_t num_missing() const;
    bool complete() const { return num_missing() == 0; }
};

enum class Estimator { Full, MeanImpute, Uniform, Density };

Estimator parse_estimator(const std::string& name);
const char* to_string(Estimator estimator);

std::vector<double> predict_full(const TpbsModel& model, std::span<const double> x);

std::vector<double> predict_mean_impute(const TpbsModel& model, const ObservationMask& mask, std::span<const double> x,
                                        std::span<const double> train_means);

/// Integrates the missing coordinates out under the uniform measure on [0, 1].
std::vector<double> predict_uniform_marginal(const TpbsModel& model, const ObservationMask& mask,
                                             std::span<const double> x);

/// Conditional expectation of g given the observed coordinates under the
/// low-rank histogram density.
std::vector<double> predict_density_marginal(const TpbsModel& model, const DensityModel& density,
                                             const ObservationMask& mask, std::span<const double> x,
                                             double den_floor = 1e-300);

/// Caches the per-factor integrals (and density cross terms) so batches of
/// masked predictions cost about as much as forward passes. Keeps a
/// reference to the model and a copy of the density.
class Marginalizer {
public:
    explicit Marginalizer(const TpbsModel& model);
    Marginalizer(const TpbsModel& model, DensityModel density);
    explicit Marginalizer(TpbsModel&&) = delete;
    Marginalizer(TpbsModel&&, DensityModel) = delete;

    std::vector<double> uniform(const ObservationMask& mask, std::span<const double> x) const;
    std::vector<double> density(const ObservationMask& mask, std::span<const double> x,
                                double den_floor = 1e-300) const;

private:
    const TpbsModel* model_;
    std::optional<DensityModel> density_;
    std::vector<double> integrals_;  // N x R: int_0^1 g_{n,r}
    std::vector<double> cross_;      // N x R x S: <g_{n,r}, p_{n,s}>
};

/// Per-sample masks hiding exactly `num_missing` coordinates chosen
/// uniformly at random.
std::vector<ObservationMask> mask_suite(std::size_t num_samples, std::size_t dim, std::size_t num_missing,
                                        std::uint64_t seed);

struct PredictionRow {
    std::size_t sample_id = 0;
    Estimator estimator = Estimator::Full;
    double prediction = 0.0;
    double target = 0.0;
    std::size_t num_missing = 0;
};

/// Comma-separated with header: sample_id,estimator,prediction,target,num_missing
void write_predictions(std::ostream& os, std::span<const PredictionRow> rows);

}  // namespace tpbs
