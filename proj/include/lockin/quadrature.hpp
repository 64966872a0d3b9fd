#pragma once

#include <cstddef>
#include <vector>

namespace lockin {

struct QuadratureRule {
    std::vector<double> nodes;   // on [-1, 1], ascending
    std::vector<double> weights; // sum to 2
};

/// Gauss–Legendre rule with `order` nodes, exact for polynomials of degree
/// 2*order - 1. Nodes are Newton-refined roots of P_order.
QuadratureRule gauss_legendre(std::size_t order);

} // namespace lockin
