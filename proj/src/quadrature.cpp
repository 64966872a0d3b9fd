#include "lockin/quadrature.hpp"

#include "lockin/types.hpp"

#include <cmath>
#include <numbers>

namespace lockin {

namespace {

// P_n(x) and P_n'(x) by the three-term recurrence.
std::pair<double, double> legendre(std::size_t n, double x)
{
    double p0 = 1.0;
    double p1 = x;
    if (n == 0) {
        return {1.0, 0.0};
    }
    for (std::size_t k = 2; k <= n; ++k) {
        const double kk = static_cast<double>(k);
        const double p2 = ((2.0 * kk - 1.0) * x * p1 - (kk - 1.0) * p0) / kk;
        p0 = p1;
        p1 = p2;
    }
    const double nn = static_cast<double>(n);
    const double dp = nn * (x * p1 - p0) / (x * x - 1.0);
    return {p1, dp};
}

} // namespace

QuadratureRule gauss_legendre(std::size_t order)
{
    if (order == 0 || order > 64) {
        throw InvalidArgument("quadrature order must be in [1, 64]");
    }
    QuadratureRule rule;
    rule.nodes.resize(order);
    rule.weights.resize(order);
    const double n = static_cast<double>(order);
    for (std::size_t i = 0; i < (order + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            const auto [p, d] = legendre(order, x);
            dp = d;
            const double dx = p / d;
            x -= dx;
            if (std::abs(dx) < 1e-16) {
                break;
            }
        }
        dp = legendre(order, x).second;
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[order - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[order - 1 - i] = w;
    }
    if (order % 2 == 1) {
        rule.nodes[order / 2] = 0.0;
    }
    return rule;
}

} // namespace lockin
