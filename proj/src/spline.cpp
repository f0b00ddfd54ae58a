#include "tpbs/spline.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tpbs/error.hpp"
#include "tpbs/quadrature.hpp"

namespace tpbs {

namespace {
constexpr int kMaxDegree = 15;
}

SplineSpace build_space(int num_basis, int degree) {
    require(degree >= 0 && degree <= kMaxDegree, ErrorKind::InvalidArgument,
            "spline degree must lie in [0, " + std::to_string(kMaxDegree) + "]");
    if (num_basis < degree + 1) {
        std::ostringstream msg;
        msg << "num_basis (" << num_basis << ") must be at least degree + 1 (" << degree + 1 << ")";
        fail(ErrorKind::InvalidArgument, msg.str());
    }
    SplineSpace space;
    space.degree = degree;
    space.num_basis = num_basis;
    space.quad_order = degree + 1;
    const int spans = num_basis - degree;
    space.knots.reserve(num_basis + degree + 1);
    for (int i = 0; i < degree; ++i) space.knots.push_back(0.0);
    for (int i = 0; i <= spans; ++i) space.knots.push_back(static_cast<double>(i) / spans);
    for (int i = 0; i < degree; ++i) space.knots.push_back(1.0);
    return space;
}

int SplineSpace::span_of(double x) const {
    const int p = degree;
    const int spans = num_spans();
    int j = static_cast<int>(std::floor(x * spans));
    j = std::clamp(j, 0, spans - 1);
    int i = j + p;
    while (i < num_basis - 1 && knots[i + 1] <= x) ++i;
    while (i > p && knots[i] > x) --i;
    return i;
}

void eval_basis_on_span(const SplineSpace& space, int span, double x, int deriv,
                        std::span<double> out) {
    const int p = space.degree;
    const auto& t = space.knots;
    // Cox-de Boor triangle for the nonzero functions of degree p (or p - 1
    // when the derivative is requested).
    const int q = deriv == 0 ? p : p - 1;
    double left[kMaxDegree + 1];
    double right[kMaxDegree + 1];
    double n[kMaxDegree + 1];
    n[0] = 1.0;
    for (int j = 1; j <= q; ++j) {
        left[j] = x - t[span + 1 - j];
        right[j] = t[span + j] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double temp = n[r] / (right[r + 1] + left[j - r]);
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    if (deriv == 0) {
        std::copy(n, n + p + 1, out.begin());
        return;
    }
    if (p == 0) {
        out[0] = 0.0;
        return;
    }
    // n[r] holds B_{span-p+1+r, p-1}; differentiate with the standard
    // two-term recurrence.
    const int first = span - p;
    for (int r = 0; r <= p; ++r) {
        const int k = first + r;
        double value = 0.0;
        if (r > 0) {
            const double den = t[k + p] - t[k];
            if (den > 0.0) value += n[r - 1] / den;
        }
        if (r < p) {
            const double den = t[k + p + 1] - t[k + 1];
            if (den > 0.0) value -= n[r] / den;
        }
        out[r] = p * value;
    }
}

int eval_basis_into(const SplineSpace& space, double x, int deriv, std::span<double> out) {
    if (!(x >= 0.0 && x <= 1.0)) {
        std::ostringstream msg;
        msg << "basis evaluation point " << x << " outside [0, 1]";
        fail(ErrorKind::Domain, msg.str());
    }
    require(deriv == 0 || deriv == 1, ErrorKind::InvalidArgument, "deriv must be 0 or 1");
    const int span = space.span_of(x);
    eval_basis_on_span(space, span, x, deriv, out);
    return span - space.degree;
}

BasisValues eval_basis(const SplineSpace& space, double x, int deriv) {
    BasisValues result;
    result.values.resize(space.degree + 1);
    result.first = eval_basis_into(space, x, deriv, result.values);
    return result;
}

std::vector<double> basis_integrals(const SplineSpace& space) {
    std::vector<double> mass(space.num_basis);
    const int p = space.degree;
    for (int k = 0; k < space.num_basis; ++k)
        mass[k] = (space.knots[k + p + 1] - space.knots[k]) / (p + 1);
    return mass;
}

double BandedGram::at(int i, int j) const {
    if (i > j) std::swap(i, j);
    if (j - i > bandwidth) return 0.0;
    return band[static_cast<std::size_t>(i) * (bandwidth + 1) + (j - i)];
}

void BandedGram::multiply(std::span<const double> c, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    const int w = bandwidth + 1;
    for (int i = row_begin; i < row_end; ++i) {
        const double* row = band.data() + static_cast<std::size_t>(i) * w;
        double acc = row[0] * c[i];
        for (int o = 1; o <= bandwidth && i + o < size; ++o) acc += row[o] * c[i + o];
        for (int o = 1; o <= bandwidth && i - o >= 0; ++o)
            acc += band[static_cast<std::size_t>(i - o) * w + o] * c[i - o];
        out[i] = acc;
    }
}

double BandedGram::bilinear_form(std::span<const double> c1, std::span<const double> c2) const {
    const int w = bandwidth + 1;
    double total = 0.0;
    for (int i = row_begin; i < row_end; ++i) {
        const double* row = band.data() + static_cast<std::size_t>(i) * w;
        double acc = row[0] * c2[i];
        for (int o = 1; o <= bandwidth && i + o < size; ++o) acc += row[o] * c2[i + o];
        for (int o = 1; o <= bandwidth && i - o >= 0; ++o)
            acc += band[static_cast<std::size_t>(i - o) * w + o] * c2[i - o];
        total += c1[i] * acc;
    }
    return total;
}

double BandedGram::quadratic_form(std::span<const double> c) const {
    return bilinear_form(c, c);
}

BandedGram gram(const SplineSpace& space, double a, double b, int deriv_order) {
    if (a > b) {
        std::ostringstream msg;
        msg << "gram interval [" << a << ", " << b << "] has a > b";
        fail(ErrorKind::InvalidArgument, msg.str());
    }
    require(deriv_order == 0 || deriv_order == 1, ErrorKind::InvalidArgument,
            "gram deriv_order must be 0 or 1");
    a = std::max(a, 0.0);
    b = std::min(b, 1.0);

    const int p = space.degree;
    BandedGram g;
    g.size = space.num_basis;
    g.bandwidth = p;
    g.deriv_order = deriv_order;
    g.a = a;
    g.b = b;
    g.band.assign(static_cast<std::size_t>(g.size) * (p + 1), 0.0);
    g.row_begin = g.size;
    g.row_end = 0;

    const QuadratureRule& rule = gauss_legendre(space.quad_order);
    std::vector<double> values(p + 1);
    const int w = p + 1;
    for (int span = p; span < space.num_basis; ++span) {
        const double lo = std::max(space.knots[span], a);
        const double hi = std::min(space.knots[span + 1], b);
        if (!(hi > lo)) continue;
        const int first = span - p;
        g.row_begin = std::min(g.row_begin, first);
        g.row_end = std::max(g.row_end, first + p + 1);
        const double length = hi - lo;
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
            const double x = lo + length * rule.nodes[q];
            eval_basis_on_span(space, span, x, deriv_order, values);
            const double weight = length * rule.weights[q];
            for (int r = 0; r <= p; ++r) {
                const double wr = weight * values[r];
                double* row = g.band.data() + static_cast<std::size_t>(first + r) * w;
                for (int s = r; s <= p; ++s) row[s - r] += wr * values[s];
            }
        }
    }
    if (g.row_end <= g.row_begin) g.row_begin = g.row_end = 0;
    return g;
}

}  // namespace tpbs
