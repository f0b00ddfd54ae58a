#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tpbs/matrix.hpp"
#include "tpbs/spline.hpp"

namespace tpbs {

/// p(x) = sum_s w_s prod_n p_{n,s}(x_n) with every p_{n,s} a histogram on a
/// uniform grid of bins[n] cells over [0, 1]. Bin values are densities, so
/// sum_b value_b / bins[n] = 1.
class DensityModel {
public:
    DensityModel() = default;
    DensityModel(int components, std::vector<int> bins);

    /// S = 1 with one bin per dimension: the uniform density on [0, 1]^N.
    static DensityModel uniform(int input_dim);

    int components() const { return static_cast<int>(weights_.size()); }
    int input_dim() const { return static_cast<int>(bins_.size()); }
    int bins(int n) const { return bins_[n]; }
    const std::vector<int>& bin_counts() const { return bins_; }

    std::vector<double>& weights() { return weights_; }
    const std::vector<double>& weights() const { return weights_; }

    std::span<double> marginal(int s, int n);
    std::span<const double> marginal(int s, int n) const;

    int bin_of(int n, double x) const;
    /// p_{n,s}(x)
    double marginal_value(int s, int n, double x) const;

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

private:
    std::vector<double> weights_;
    std::vector<int> bins_;
    std::vector<std::size_t> offsets_;  // per (s, n)
    std::vector<double> values_;
};

double density_eval(const DensityModel& density, std::span<const double> x);

/// Weighted histogram density with `alpha` pseudo-counts per bin:
/// value_b = bins * (sum_{i in b} w_i + alpha) / (sum_i w_i + alpha * bins).
std::vector<double> histogram_density(std::span<const double> xs, std::span<const double> weights, int bins,
                                      double alpha);

struct DensityFit {
    DensityModel model;
    /// Data log-likelihood of the unsmoothed EM iterates: after the k-means++
    /// initialization and after each iteration. Nondecreasing.
    std::vector<double> log_likelihood;
    /// Log-likelihood of the returned (smoothed) model.
    double smoothed_log_likelihood = 0.0;
};

struct DensityFitOptions {
    int components = 1;
    int bins_per_dim = 100;
    int em_iters = 100;
    double alpha = 1.0;
    std::uint64_t seed = 0;
};

/// Maximum-likelihood EM for a mixture of product histograms, seeded by hard
/// assignment to k-means++ centers. The returned model is the final M-step
/// redone with `alpha` pseudo-counts per bin, so every bin is positive.
DensityFit fit_density(const Matrix& points, const DensityFitOptions& options);

double log_likelihood(const DensityModel& density, const Matrix& points);

/// <B_k, p> for every basis function of `space` against a histogram
/// density with `values.size()` uniform bins.
std::vector<double> cross_gram(const SplineSpace& space, std::span<const double> values);

inline constexpr std::uint32_t kDensityFormatVersion = 1;

// "TPDF" | u32 version | u32 N | u32 S | f64 w[S] | u32 bins[N] |
// f64 values, component-major then dimension (s, n, b).
void save_density(const DensityModel& density, std::ostream& os);
void save_density(const DensityModel& density, const std::string& path);
DensityModel load_density(std::istream& is);
DensityModel load_density(const std::string& path);

}  // namespace tpbs
