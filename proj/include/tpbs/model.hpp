#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tpbs/spline.hpp"

namespace tpbs {

/// Min-max feature scaling fitted on the training split, plus an affine map
/// from model output to target units.
struct ScalerParams {
    std::vector<double> feature_min;
    std::vector<double> feature_max;
    double margin = 1e-6;
    double target_offset = 0.0;
    double target_scale = 1.0;

    bool empty() const { return feature_min.empty(); }
    std::size_t dim() const { return feature_min.size(); }

    /// Maps a raw feature vector into [0, 1]^N, clamping out-of-range values.
    void apply(std::span<const double> raw, std::span<double> scaled) const;
    void unapply(std::span<const double> scaled, std::span<double> raw) const;

    double to_target(double model_output) const { return target_offset + target_scale * model_output; }
    double from_target(double target) const { return (target - target_offset) / target_scale; }

    bool operator==(const ScalerParams&) const = default;
};

/// Parameters with the same layout as a TpbsModel: coefficient tensor c[n][r][k]
/// (k fastest) followed by the R x M output vectors.
struct ParamGrad {
    std::vector<double> coeffs;
    std::vector<double> out;

    void set_zero();
    void axpy(double alpha, const ParamGrad& other);
    double squared_norm() const;
};

/// Low-rank tensor product of B-splines,
///   g(x) = sum_r v_r prod_n g_{n,r}(x_n),  g_{n,r}(x) = sum_k c[n][r][k] B_{n,k}(x).
class TpbsModel {
public:
    TpbsModel() = default;
    TpbsModel(std::vector<SplineSpace> spaces, int rank, int output_dim);

    int input_dim() const { return static_cast<int>(spaces_.size()); }
    int rank() const { return rank_; }
    int output_dim() const { return output_dim_; }
    const std::vector<SplineSpace>& spaces() const { return spaces_; }
    const SplineSpace& space(int n) const { return spaces_[n]; }

    std::size_t parameter_count() const { return coeffs_.size() + out_.size(); }

    /// Coefficients of factor g_{n,r}.
    std::span<double> factor(int n, int r);
    std::span<const double> factor(int n, int r) const;
    /// All R factors of dimension n, factor-major (R x K_n).
    std::span<double> dim_block(int n);
    std::span<const double> dim_block(int n) const;
    std::size_t dim_offset(int n) const { return offsets_[n]; }

    std::span<double> out_vector(int r) { return {out_.data() + r * output_dim_, static_cast<std::size_t>(output_dim_)}; }
    std::span<const double> out_vector(int r) const {
        return {out_.data() + r * output_dim_, static_cast<std::size_t>(output_dim_)};
    }

    std::vector<double>& coeffs() { return coeffs_; }
    const std::vector<double>& coeffs() const { return coeffs_; }
    std::vector<double>& out_vectors() { return out_; }
    const std::vector<double>& out_vectors() const { return out_; }

    ScalerParams& scaler() { return scaler_; }
    const ScalerParams& scaler() const { return scaler_; }

    ParamGrad zero_grad() const;
    void apply_update(const ParamGrad& step, double alpha);

    bool all_finite() const;

private:
    std::vector<SplineSpace> spaces_;
    int rank_ = 0;
    int output_dim_ = 0;
    std::vector<std::size_t> offsets_;
    std::vector<double> coeffs_;
    std::vector<double> out_;
    ScalerParams scaler_;
};

TpbsModel init_model(int input_dim, int rank, int output_dim, std::vector<SplineSpace> spaces,
                     std::uint64_t seed, double init_scale);

/// Convenience: N identical spaces.
std::vector<SplineSpace> uniform_spaces(int input_dim, int num_basis, int degree);

/// Evaluates g(x) for x in [0, 1]^N. Rejects out-of-domain inputs.
std::vector<double> forward(const TpbsModel& model, std::span<const double> x);

/// Values g_{n,r}(x_n) for every n, r (row-major N x R), reusing the banded
/// basis evaluation. Used by forward, the loss gradient, and marginalization.
void factor_values(const TpbsModel& model, std::span<const double> x, std::span<double> out);

/// s_r = ||v_r|| prod_n ||g_{n,r}||_{L2[0,1]}.
std::vector<double> factor_norms(const TpbsModel& model);

}  // namespace tpbs
