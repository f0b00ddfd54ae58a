#include "tpbs/density.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "binary_io.hpp"
#include "tpbs/error.hpp"
#include "tpbs/parallel.hpp"
#include "tpbs/quadrature.hpp"

namespace tpbs {

DensityModel::DensityModel(int components, std::vector<int> bins) : bins_(std::move(bins)) {
    require(components >= 1, ErrorKind::InvalidArgument, "density needs at least one component");
    require(!bins_.empty(), ErrorKind::InvalidArgument, "density needs at least one dimension");
    for (int b : bins_) require(b >= 1, ErrorKind::InvalidArgument, "every dimension needs at least one bin");
    weights_.assign(components, 1.0 / components);
    std::size_t offset = 0;
    for (int s = 0; s < components; ++s)
        for (int b : bins_) {
            offsets_.push_back(offset);
            offset += b;
        }
    values_.assign(offset, 1.0);
}

DensityModel DensityModel::uniform(int input_dim) { return DensityModel(1, std::vector<int>(input_dim, 1)); }

std::span<double> DensityModel::marginal(int s, int n) {
    return {values_.data() + offsets_[static_cast<std::size_t>(s) * bins_.size() + n], static_cast<std::size_t>(bins_[n])};
}

std::span<const double> DensityModel::marginal(int s, int n) const {
    return {values_.data() + offsets_[static_cast<std::size_t>(s) * bins_.size() + n], static_cast<std::size_t>(bins_[n])};
}

int DensityModel::bin_of(int n, double x) const {
    const int b = static_cast<int>(std::floor(x * bins_[n]));
    return std::clamp(b, 0, bins_[n] - 1);
}

double DensityModel::marginal_value(int s, int n, double x) const { return marginal(s, n)[bin_of(n, x)]; }

double density_eval(const DensityModel& density, std::span<const double> x) {
    require(static_cast<int>(x.size()) == density.input_dim(), ErrorKind::Dimension,
            "density evaluated at a point of the wrong dimension");
    double total = 0.0;
    for (int s = 0; s < density.components(); ++s) {
        double prod = density.weights()[s];
        for (int n = 0; n < density.input_dim(); ++n) prod *= density.marginal_value(s, n, x[n]);
        total += prod;
    }
    return total;
}

std::vector<double> histogram_density(std::span<const double> xs, std::span<const double> weights, int bins,
                                      double alpha) {
    require(bins >= 1, ErrorKind::InvalidArgument, "histogram needs at least one bin");
    require(weights.empty() || weights.size() == xs.size(), ErrorKind::Dimension, "one weight per sample required");
    std::vector<double> counts(bins, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        const int b = std::clamp(static_cast<int>(std::floor(xs[i] * bins)), 0, bins - 1);
        counts[b] += w;
        total += w;
    }
    const double denom = total + alpha * bins;
    require(denom > 0.0, ErrorKind::Numeric, "histogram has no mass and no smoothing");
    for (double& c : counts) c = bins * (c + alpha) / denom;
    return counts;
}

namespace {

double log_sum_exp(std::span<const double> v) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : v) mx = std::max(mx, x);
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

/// Component log-densities log(w_s prod_n p_{n,s}(x_n)) for every sample.
Matrix component_log_densities(const DensityModel& d, const Matrix& points) {
    Matrix out(points.rows, d.components());
    for (std::size_t i = 0; i < points.rows; ++i)
        for (int s = 0; s < d.components(); ++s) {
            double l = std::log(d.weights()[s]);
            for (int n = 0; n < d.input_dim(); ++n) l += std::log(d.marginal_value(s, n, points(i, n)));
            out(i, s) = l;
        }
    return out;
}

std::vector<std::size_t> kmeanspp_centers(const Matrix& points, int k, std::mt19937_64& rng) {
    std::vector<std::size_t> centers;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    centers.push_back(static_cast<std::size_t>(rng() % points.rows));
    std::vector<double> d2(points.rows, std::numeric_limits<double>::infinity());
    while (static_cast<int>(centers.size()) < k) {
        const auto c = points.row(centers.back());
        double total = 0.0;
        for (std::size_t i = 0; i < points.rows; ++i) {
            double dist = 0.0;
            const auto p = points.row(i);
            for (std::size_t j = 0; j < points.cols; ++j) dist += (p[j] - c[j]) * (p[j] - c[j]);
            d2[i] = std::min(d2[i], dist);
            total += d2[i];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            double u = unit(rng) * total;
            for (pick = 0; pick + 1 < points.rows; ++pick) {
                u -= d2[pick];
                if (u < 0.0) break;
            }
        } else {
            pick = static_cast<std::size_t>(rng() % points.rows);
        }
        centers.push_back(pick);
    }
    return centers;
}

void m_step(DensityModel& d, const Matrix& points, const Matrix& resp, double alpha) {
    const std::size_t n_points = points.rows;
    std::vector<double> xs(n_points), ws(n_points);
    for (int s = 0; s < d.components(); ++s) {
        double mass = 0.0;
        for (std::size_t i = 0; i < n_points; ++i) {
            ws[i] = resp(i, s);
            mass += ws[i];
        }
        d.weights()[s] = mass / static_cast<double>(n_points);
        // A component that lost all responsibility keeps its marginals; its
        // weight is zero so they never contribute.
        if (mass == 0.0 && alpha == 0.0) continue;
        for (int n = 0; n < d.input_dim(); ++n) {
            for (std::size_t i = 0; i < n_points; ++i) xs[i] = points(i, n);
            const auto hist = histogram_density(xs, ws, d.bins(n), alpha);
            std::copy(hist.begin(), hist.end(), d.marginal(s, n).begin());
        }
    }
}

}  // namespace

double log_likelihood(const DensityModel& density, const Matrix& points) {
    const Matrix lp = component_log_densities(density, points);
    double total = 0.0;
    for (std::size_t i = 0; i < points.rows; ++i) total += log_sum_exp(lp.row(i));
    return total;
}

DensityFit fit_density(const Matrix& points, const DensityFitOptions& opt) {
    require(opt.components >= 1, ErrorKind::InvalidArgument, "density needs at least one component");
    require(opt.bins_per_dim >= 1, ErrorKind::InvalidArgument, "density needs at least one bin per dimension");
    require(opt.em_iters >= 0, ErrorKind::InvalidArgument, "em_iters must be nonnegative");
    require(opt.alpha >= 0.0, ErrorKind::InvalidArgument, "smoothing pseudo-count must be nonnegative");
    if (static_cast<std::size_t>(opt.components) > points.rows)
        fail(ErrorKind::InvalidArgument, "cannot fit " + std::to_string(opt.components) + " components to " +
                                             std::to_string(points.rows) + " points");
    for (double v : points.data)
        require(v >= 0.0 && v <= 1.0, ErrorKind::Domain, "density training points must lie in [0, 1]^N");

    const int S = opt.components;
    DensityFit fit;
    fit.model = DensityModel(S, std::vector<int>(points.cols, opt.bins_per_dim));

    // Hard assignment to the nearest k-means++ center gives the first
    // responsibilities.
    std::mt19937_64 rng(opt.seed);
    const auto centers = kmeanspp_centers(points, S, rng);
    Matrix resp(points.rows, S, 0.0);
    for (std::size_t i = 0; i < points.rows; ++i) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int s = 0; s < S; ++s) {
            double dist = 0.0;
            for (std::size_t j = 0; j < points.cols; ++j) {
                const double diff = points(i, j) - points(centers[s], j);
                dist += diff * diff;
            }
            if (dist < best_d) {
                best_d = dist;
                best = s;
            }
        }
        resp(i, best) = 1.0;
    }
    m_step(fit.model, points, resp, 0.0);

    for (int iter = 0;; ++iter) {
        const Matrix lp = component_log_densities(fit.model, points);
        double ll = 0.0;
        for (std::size_t i = 0; i < points.rows; ++i) {
            const double norm = log_sum_exp(lp.row(i));
            ll += norm;
            for (int s = 0; s < S; ++s) resp(i, s) = std::exp(lp(i, s) - norm);
        }
        fit.log_likelihood.push_back(ll);
        if (iter == opt.em_iters) break;
        m_step(fit.model, points, resp, 0.0);
    }
    // Smoothing pass: one more M-step from the final responsibilities with
    // alpha pseudo-counts per bin.
    if (opt.alpha > 0.0) m_step(fit.model, points, resp, opt.alpha);
    fit.smoothed_log_likelihood = log_likelihood(fit.model, points);
    return fit;
}

std::vector<double> cross_gram(const SplineSpace& space, std::span<const double> values) {
    const int bins = static_cast<int>(values.size());
    require(bins >= 1, ErrorKind::InvalidArgument, "cross_gram needs a histogram with at least one bin");
    const int p = space.degree;
    std::vector<double> out(space.num_basis, 0.0);
    std::vector<double> b(p + 1);
    const QuadratureRule& rule = gauss_legendre(space.quad_order);
    for (int span = p; span < space.num_basis; ++span) {
        const double t0 = space.knots[span];
        const double t1 = space.knots[span + 1];
        if (!(t1 > t0)) continue;
        const int first_bin = std::clamp(static_cast<int>(std::floor(t0 * bins)), 0, bins - 1);
        for (int bin = first_bin; bin < bins; ++bin) {
            const double lo = std::max(t0, static_cast<double>(bin) / bins);
            const double hi = std::min(t1, static_cast<double>(bin + 1) / bins);
            if (static_cast<double>(bin) / bins >= t1) break;
            if (!(hi > lo)) continue;
            const double len = hi - lo;
            for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
                const double x = lo + len * rule.nodes[q];
                eval_basis_on_span(space, span, x, 0, b);
                const double w = len * rule.weights[q] * values[bin];
                for (int j = 0; j <= p; ++j) out[span - p + j] += w * b[j];
            }
        }
    }
    return out;
}

namespace {
constexpr char kMagic[4] = {'T', 'P', 'D', 'F'};
}

void save_density(const DensityModel& d, std::ostream& os) {
    detail::LeWriter w(os);
    w.raw(kMagic, 4);
    w.u32(kDensityFormatVersion);
    w.u32(static_cast<std::uint32_t>(d.input_dim()));
    w.u32(static_cast<std::uint32_t>(d.components()));
    w.f64s(d.weights());
    for (int b : d.bin_counts()) w.u32(static_cast<std::uint32_t>(b));
    w.f64s(d.values());
    if (!os) fail(ErrorKind::Io, "failed while writing density");
}

void save_density(const DensityModel& d, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(ErrorKind::Io, "cannot open '" + path + "' for writing");
    save_density(d, os);
}

DensityModel load_density(std::istream& is) {
    char head[4];
    is.read(head, 4);
    if (is.gcount() != 4) fail(ErrorKind::Truncated, "density file shorter than its magic string");
    if (std::string(head, 4) != std::string(kMagic, 4)) fail(ErrorKind::BadMagic, "bad magic: not a TPDF density file");
    detail::LeReader rd(is, "density file");
    const std::uint32_t version = rd.u32();
    if (version != kDensityFormatVersion)
        fail(ErrorKind::Version, "unsupported density format version " + std::to_string(version));
    const std::uint32_t n_dim = rd.count(1u << 16, "N");
    const std::uint32_t comps = rd.count(1u << 16, "S");
    require(n_dim >= 1 && comps >= 1, ErrorKind::Dimension, "density file: N and S must be positive");
    std::vector<double> w = rd.f64s(comps);
    std::vector<int> bins(n_dim);
    for (auto& b : bins) b = static_cast<int>(rd.count(1u << 24, "bins"));
    DensityModel d(static_cast<int>(comps), bins);
    d.weights() = std::move(w);
    d.values() = rd.f64s(d.values().size());
    return d;
}

DensityModel load_density(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(ErrorKind::Io, "cannot open density file '" + path + "'");
    return load_density(is);
}

}  // namespace tpbs
