#include "tpbs/marginal.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "tpbs/error.hpp"

namespace tpbs {

std::size_t ObservationMask::num_missing() const {
    return static_cast<std::size_t>(std::count(observed.begin(), observed.end(), std::uint8_t{0}));
}

Estimator parse_estimator(const std::string& name) {
    if (name == "full") return Estimator::Full;
    if (name == "mean") return Estimator::MeanImpute;
    if (name == "uniform") return Estimator::Uniform;
    if (name == "pdf") return Estimator::Density;
    fail(ErrorKind::Parse, "unknown estimator '" + name + "' (expected full, mean, uniform or pdf)");
}

const char* to_string(Estimator e) {
    switch (e) {
        case Estimator::Full: return "full";
        case Estimator::MeanImpute: return "mean";
        case Estimator::Uniform: return "uniform";
        case Estimator::Density: return "pdf";
    }
    return "?";
}

namespace {

void check_mask(const TpbsModel& model, const ObservationMask& mask, std::span<const double> x) {
    require(mask.dim() == static_cast<std::size_t>(model.input_dim()) && x.size() == mask.dim(), ErrorKind::Dimension,
            "mask/sample dimension differs from the model input dimension " + std::to_string(model.input_dim()));
    for (std::size_t n = 0; n < x.size(); ++n)
        if (mask.observed[n] && !(x[n] >= 0.0 && x[n] <= 1.0))
            fail(ErrorKind::Domain, "observed coordinate " + std::to_string(n) + " outside [0, 1]");
}

}  // namespace

std::vector<double> predict_full(const TpbsModel& model, std::span<const double> x) { return forward(model, x); }

std::vector<double> predict_mean_impute(const TpbsModel& model, const ObservationMask& mask, std::span<const double> x,
                                        std::span<const double> train_means) {
    check_mask(model, mask, x);
    if (mask.complete()) return forward(model, x);
    require(train_means.size() == x.size(), ErrorKind::InvalidArgument,
            "mean imputation needs a training mean for every feature");
    std::vector<double> filled(x.begin(), x.end());
    for (std::size_t n = 0; n < filled.size(); ++n)
        if (!mask.observed[n]) filled[n] = train_means[n];
    return forward(model, filled);
}

Marginalizer::Marginalizer(const TpbsModel& model) : model_(&model) {
    const int N = model.input_dim();
    const int R = model.rank();
    integrals_.resize(static_cast<std::size_t>(N) * R);
    for (int n = 0; n < N; ++n) {
        const auto mass = basis_integrals(model.space(n));
        for (int r = 0; r < R; ++r) {
            const auto c = model.factor(n, r);
            integrals_[static_cast<std::size_t>(n) * R + r] = std::inner_product(c.begin(), c.end(), mass.begin(), 0.0);
        }
    }
}

Marginalizer::Marginalizer(const TpbsModel& model, DensityModel density) : Marginalizer(model) {
    require(density.input_dim() == model.input_dim(), ErrorKind::Dimension,
            "density dimension " + std::to_string(density.input_dim()) + " differs from model dimension " +
                std::to_string(model.input_dim()));
    const int N = model.input_dim();
    const int R = model.rank();
    const int S = density.components();
    cross_.resize(static_cast<std::size_t>(N) * R * S);
    for (int n = 0; n < N; ++n)
        for (int s = 0; s < S; ++s) {
            const auto bp = cross_gram(model.space(n), density.marginal(s, n));
            for (int r = 0; r < R; ++r) {
                const auto c = model.factor(n, r);
                cross_[(static_cast<std::size_t>(n) * R + r) * S + s] =
                    std::inner_product(c.begin(), c.end(), bp.begin(), 0.0);
            }
        }
    density_ = std::move(density);
}

std::vector<double> Marginalizer::uniform(const ObservationMask& mask, std::span<const double> x) const {
    const TpbsModel& model = *model_;
    check_mask(model, mask, x);
    if (mask.complete()) return forward(model, x);
    const int N = model.input_dim();
    const int R = model.rank();
    const int M = model.output_dim();
    std::vector<double> y(M, 0.0);
    std::vector<double> gv(static_cast<std::size_t>(N) * R);
    double basis[16];
    for (int n = 0; n < N; ++n) {
        if (!mask.observed[n]) continue;
        const SplineSpace& space = model.space(n);
        const int first = eval_basis_into(space, x[n], 0, std::span<double>(basis, space.degree + 1));
        for (int r = 0; r < R; ++r) {
            const auto c = model.factor(n, r);
            double acc = 0.0;
            for (int j = 0; j <= space.degree; ++j) acc += c[first + j] * basis[j];
            gv[static_cast<std::size_t>(n) * R + r] = acc;
        }
    }
    for (int r = 0; r < R; ++r) {
        double prod = 1.0;
        for (int n = 0; n < N; ++n) {
            const std::size_t idx = static_cast<std::size_t>(n) * R + r;
            prod *= mask.observed[n] ? gv[idx] : integrals_[idx];
        }
        const auto v = model.out_vector(r);
        for (int m = 0; m < M; ++m) y[m] += v[m] * prod;
    }
    return y;
}

std::vector<double> Marginalizer::density(const ObservationMask& mask, std::span<const double> x,
                                          double den_floor) const {
    require(density_.has_value(), ErrorKind::InvalidArgument, "marginalizer was built without a density");
    const TpbsModel& model = *model_;
    const DensityModel& dens = *density_;
    check_mask(model, mask, x);
    if (mask.complete()) return forward(model, x);
    const int N = model.input_dim();
    const int R = model.rank();
    const int M = model.output_dim();
    const int S = dens.components();

    // Component weights given the observed coordinates (unnormalized):
    // a_s = w_s prod_obs p_{n,s}(x_n).
    std::vector<double> a(S);
    double den = 0.0;
    for (int s = 0; s < S; ++s) {
        double prod = dens.weights()[s];
        for (int n = 0; n < N; ++n)
            if (mask.observed[n]) prod *= dens.marginal_value(s, n, x[n]);
        a[s] = prod;
        den += prod;
    }
    if (!(den > den_floor)) {
        std::ostringstream msg;
        msg << "density of the observed coordinates is " << den << ", below the floor " << den_floor;
        fail(ErrorKind::Numeric, msg.str());
    }

    std::vector<double> gv(static_cast<std::size_t>(N) * R, 1.0);
    double basis[16];
    for (int n = 0; n < N; ++n) {
        if (!mask.observed[n]) continue;
        const SplineSpace& space = model.space(n);
        const int first = eval_basis_into(space, x[n], 0, std::span<double>(basis, space.degree + 1));
        for (int r = 0; r < R; ++r) {
            const auto c = model.factor(n, r);
            double acc = 0.0;
            for (int j = 0; j <= space.degree; ++j) acc += c[first + j] * basis[j];
            gv[static_cast<std::size_t>(n) * R + r] = acc;
        }
    }
    std::vector<double> y(M, 0.0);
    for (int r = 0; r < R; ++r) {
        double observed = 1.0;
        for (int n = 0; n < N; ++n)
            if (mask.observed[n]) observed *= gv[static_cast<std::size_t>(n) * R + r];
        double mix = 0.0;
        for (int s = 0; s < S; ++s) {
            double prod = a[s];
            for (int n = 0; n < N; ++n)
                if (!mask.observed[n]) prod *= cross_[(static_cast<std::size_t>(n) * R + r) * S + s];
            mix += prod;
        }
        const double coef = observed * mix / den;
        const auto v = model.out_vector(r);
        for (int m = 0; m < M; ++m) y[m] += v[m] * coef;
    }
    return y;
}

std::vector<double> predict_uniform_marginal(const TpbsModel& model, const ObservationMask& mask,
                                             std::span<const double> x) {
    if (mask.complete()) {
        check_mask(model, mask, x);
        return forward(model, x);
    }
    return Marginalizer(model).uniform(mask, x);
}

std::vector<double> predict_density_marginal(const TpbsModel& model, const DensityModel& density,
                                             const ObservationMask& mask, std::span<const double> x,
                                             double den_floor) {
    if (mask.complete()) {
        check_mask(model, mask, x);
        return forward(model, x);
    }
    return Marginalizer(model, density).density(mask, x, den_floor);
}

std::vector<ObservationMask> mask_suite(std::size_t num_samples, std::size_t dim, std::size_t num_missing,
                                        std::uint64_t seed) {
    if (num_missing >= dim)
        fail(ErrorKind::InvalidArgument, "cannot hide " + std::to_string(num_missing) + " of " + std::to_string(dim) +
                                             " coordinates; at least one must stay observed");
    std::mt19937_64 rng(seed);
    std::vector<ObservationMask> masks;
    masks.reserve(num_samples);
    std::vector<std::size_t> idx(dim);
    for (std::size_t i = 0; i < num_samples; ++i) {
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        ObservationMask m = ObservationMask::all_observed(dim);
        // Partial Fisher-Yates: the first num_missing slots are a uniform subset.
        for (std::size_t j = 0; j < num_missing; ++j) {
            const std::size_t k = j + static_cast<std::size_t>(rng() % (dim - j));
            std::swap(idx[j], idx[k]);
            m.observed[idx[j]] = 0;
        }
        masks.push_back(std::move(m));
    }
    return masks;
}

void write_predictions(std::ostream& os, std::span<const PredictionRow> rows) {
    os << "sample_id,estimator,prediction,target,num_missing\n";
    os << std::setprecision(17);
    for (const auto& r : rows)
        os << r.sample_id << ',' << to_string(r.estimator) << ',' << r.prediction << ',' << r.target << ','
           << r.num_missing << '\n';
}

}  // namespace tpbs
