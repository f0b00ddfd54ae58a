#pragma once

#include <vector>

namespace tpbs {

struct QuadratureRule {
    std::vector<double> nodes;    // on [0, 1]
    std::vector<double> weights;  // sum to 1
};

/// Gauss-Legendre rule with `order` nodes mapped to [0, 1]; exact for
/// polynomials of degree 2*order - 1.
const QuadratureRule& gauss_legendre(int order);

}  // namespace tpbs
