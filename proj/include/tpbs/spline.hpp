#pragma once

#include <span>
#include <vector>

namespace tpbs {

/// Univariate B-spline basis of `num_basis` functions of degree `degree` on
/// an open-uniform knot vector over [0, 1].
struct SplineSpace {
    int degree = 0;
    int num_basis = 0;
    int quad_order = 1;
    std::vector<double> knots;  // num_basis + degree + 1 entries

    int num_spans() const { return num_basis - degree; }

    /// Knot index i with knots[i] <= x < knots[i+1] and degree <= i < num_basis;
    /// x == 1 maps to the last nonempty span.
    int span_of(double x) const;

    /// Support of basis k is [knots[k], knots[k + degree + 1]].
    double support_begin(int k) const { return knots[k]; }
    double support_end(int k) const { return knots[k + degree + 1]; }

    bool operator==(const SplineSpace&) const = default;
};

SplineSpace build_space(int num_basis, int degree);

struct BasisValues {
    int first = 0;               // index of the first possibly-nonzero basis
    std::vector<double> values;  // degree + 1 entries
};

BasisValues eval_basis(const SplineSpace& space, double x, int deriv);

/// Allocation-free variant for hot loops; `out` must hold degree + 1 values.
/// Returns the first active basis index.
int eval_basis_into(const SplineSpace& space, double x, int deriv, std::span<double> out);

/// Same as eval_basis_into but on an explicitly chosen span, for evaluating
/// at quadrature nodes that are known to lie inside that span.
void eval_basis_on_span(const SplineSpace& space, int span, double x, int deriv,
                        std::span<double> out);

/// Exact integrals of every basis function over [0, 1].
std::vector<double> basis_integrals(const SplineSpace& space);

/// Symmetric banded Gram matrix G_ij = int_a^b B_i^(d) B_j^(d) dx.
///
/// Storage keeps the upper band only: entry (i, i + o) for 0 <= o <= bandwidth
/// lives at band[i * (bandwidth + 1) + o]. Rows outside [row_begin, row_end)
/// are identically zero, which lets interval Grams over small boxes be
/// contracted in time proportional to the box width.
struct BandedGram {
    int size = 0;
    int bandwidth = 0;
    int deriv_order = 0;
    double a = 0.0;
    double b = 1.0;
    int row_begin = 0;
    int row_end = 0;
    std::vector<double> band;

    double at(int i, int j) const;

    /// out = G c over the nonzero row range; out must have `size` entries
    /// (rows outside the range are set to zero).
    void multiply(std::span<const double> c, std::span<double> out) const;

    double quadratic_form(std::span<const double> c) const;
    double bilinear_form(std::span<const double> c1, std::span<const double> c2) const;
};

BandedGram gram(const SplineSpace& space, double a, double b, int deriv_order);

}  // namespace tpbs
