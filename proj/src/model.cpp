#include "tpbs/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "tpbs/error.hpp"

namespace tpbs {

void ScalerParams::apply(std::span<const double> raw, std::span<double> scaled) const {
    require(raw.size() == dim() && scaled.size() == dim(), ErrorKind::Dimension,
            "scaler applied to a vector of the wrong length");
    for (std::size_t i = 0; i < dim(); ++i) {
        const double v = (raw[i] - feature_min[i]) / (feature_max[i] - feature_min[i]);
        scaled[i] = std::clamp(v, 0.0, 1.0);
    }
}

void ScalerParams::unapply(std::span<const double> scaled, std::span<double> raw) const {
    require(raw.size() == dim() && scaled.size() == dim(), ErrorKind::Dimension,
            "scaler applied to a vector of the wrong length");
    for (std::size_t i = 0; i < dim(); ++i)
        raw[i] = feature_min[i] + scaled[i] * (feature_max[i] - feature_min[i]);
}

void ParamGrad::set_zero() {
    std::fill(coeffs.begin(), coeffs.end(), 0.0);
    std::fill(out.begin(), out.end(), 0.0);
}

void ParamGrad::axpy(double alpha, const ParamGrad& other) {
    for (std::size_t i = 0; i < coeffs.size(); ++i) coeffs[i] += alpha * other.coeffs[i];
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += alpha * other.out[i];
}

double ParamGrad::squared_norm() const {
    double s = 0.0;
    for (double g : coeffs) s += g * g;
    for (double g : out) s += g * g;
    return s;
}

TpbsModel::TpbsModel(std::vector<SplineSpace> spaces, int rank, int output_dim)
    : spaces_(std::move(spaces)), rank_(rank), output_dim_(output_dim) {
    require(!spaces_.empty(), ErrorKind::InvalidArgument, "model needs at least one input dimension");
    require(rank >= 1, ErrorKind::InvalidArgument, "rank must be >= 1");
    require(output_dim >= 1, ErrorKind::InvalidArgument, "output dimension must be >= 1");
    std::size_t offset = 0;
    for (const auto& s : spaces_) {
        offsets_.push_back(offset);
        offset += static_cast<std::size_t>(rank) * s.num_basis;
    }
    coeffs_.assign(offset, 0.0);
    out_.assign(static_cast<std::size_t>(rank) * output_dim, 0.0);
}

std::span<double> TpbsModel::factor(int n, int r) {
    const std::size_t k = spaces_[n].num_basis;
    return {coeffs_.data() + offsets_[n] + r * k, k};
}

std::span<const double> TpbsModel::factor(int n, int r) const {
    const std::size_t k = spaces_[n].num_basis;
    return {coeffs_.data() + offsets_[n] + r * k, k};
}

std::span<double> TpbsModel::dim_block(int n) {
    return {coeffs_.data() + offsets_[n], static_cast<std::size_t>(rank_) * spaces_[n].num_basis};
}

std::span<const double> TpbsModel::dim_block(int n) const {
    return {coeffs_.data() + offsets_[n], static_cast<std::size_t>(rank_) * spaces_[n].num_basis};
}

ParamGrad TpbsModel::zero_grad() const {
    ParamGrad g;
    g.coeffs.assign(coeffs_.size(), 0.0);
    g.out.assign(out_.size(), 0.0);
    return g;
}

void TpbsModel::apply_update(const ParamGrad& step, double alpha) {
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += alpha * step.coeffs[i];
    for (std::size_t i = 0; i < out_.size(); ++i) out_[i] += alpha * step.out[i];
}

bool TpbsModel::all_finite() const {
    auto finite = [](double v) { return std::isfinite(v); };
    return std::all_of(coeffs_.begin(), coeffs_.end(), finite) &&
           std::all_of(out_.begin(), out_.end(), finite);
}

std::vector<SplineSpace> uniform_spaces(int input_dim, int num_basis, int degree) {
    return std::vector<SplineSpace>(input_dim, build_space(num_basis, degree));
}

TpbsModel init_model(int input_dim, int rank, int output_dim, std::vector<SplineSpace> spaces,
                     std::uint64_t seed, double init_scale) {
    require(static_cast<int>(spaces.size()) == input_dim, ErrorKind::Dimension,
            "init_model: number of spline spaces differs from input_dim");
    require(init_scale >= 0.0, ErrorKind::InvalidArgument, "init_scale must be nonnegative");
    TpbsModel model(std::move(spaces), rank, output_dim);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    // Factors start near the constant 1 (coefficients 1 reproduce 1 by
    // partition of unity) so products over many dimensions stay O(1).
    for (double& c : model.coeffs()) c = 1.0 + init_scale * unit(rng);
    for (double& v : model.out_vectors()) v = init_scale * normal(rng);
    return model;
}

void factor_values(const TpbsModel& model, std::span<const double> x, std::span<double> out) {
    const int N = model.input_dim();
    const int R = model.rank();
    if (static_cast<int>(x.size()) != N) {
        std::ostringstream msg;
        msg << "input has " << x.size() << " coordinates but the model expects " << N;
        fail(ErrorKind::Dimension, msg.str());
    }
    double basis[16];
    for (int n = 0; n < N; ++n) {
        const SplineSpace& space = model.space(n);
        const int p = space.degree;
        const int first = eval_basis_into(space, x[n], 0, std::span<double>(basis, p + 1));
        for (int r = 0; r < R; ++r) {
            const auto c = model.factor(n, r);
            double acc = 0.0;
            for (int j = 0; j <= p; ++j) acc += c[first + j] * basis[j];
            out[static_cast<std::size_t>(n) * R + r] = acc;
        }
    }
}

std::vector<double> forward(const TpbsModel& model, std::span<const double> x) {
    const int N = model.input_dim();
    const int R = model.rank();
    const int M = model.output_dim();
    std::vector<double> g(static_cast<std::size_t>(N) * R);
    factor_values(model, x, g);
    std::vector<double> y(M, 0.0);
    for (int r = 0; r < R; ++r) {
        double prod = 1.0;
        for (int n = 0; n < N; ++n) prod *= g[static_cast<std::size_t>(n) * R + r];
        const auto v = model.out_vector(r);
        for (int m = 0; m < M; ++m) y[m] += v[m] * prod;
    }
    return y;
}

std::vector<double> factor_norms(const TpbsModel& model) {
    const int N = model.input_dim();
    const int R = model.rank();
    std::vector<double> s(R);
    for (int r = 0; r < R; ++r) {
        double vv = 0.0;
        for (double v : model.out_vector(r)) vv += v * v;
        s[r] = std::sqrt(vv);
    }
    for (int n = 0; n < N; ++n) {
        const BandedGram g0 = gram(model.space(n), 0.0, 1.0, 0);
        for (int r = 0; r < R; ++r) s[r] *= std::sqrt(std::max(0.0, g0.quadratic_form(model.factor(n, r))));
    }
    return s;
}

}  // namespace tpbs
