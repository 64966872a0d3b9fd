#pragma once

// Splits an SA path into the ODE solution from x̄(t_{n0}), a discretization
// term W_n and a noise term, using the nonlinear variation-of-constants
// formula along the interpolated path:
//   x̄(t_n) = x(t_n, t_{n0}, x̄(t_{n0})) + W_n + S̃_n,
// with S_n the same noise sum but with Phi frozen at the left grid point.

#include "lockin/ode_toolkit.hpp"
#include "lockin/sa_engine.hpp"

#include <vector>

namespace lockin {

struct DecompositionReport {
    std::size_t n0 = 0;
    std::size_t n = 0;
    std::size_t quad_order = 0;
    double tol = 0.0;
    Vec x_n;    // x̄(t_n)
    Vec ode_ref; // x(t_n, t_{n0}, x̄(t_{n0}))
    Vec W_n;
    Vec S_tilde_n;
    Vec S_n;
    std::vector<Mat> alpha_weights; // alpha_{k+1,n}, k = n0 .. n-1
    std::vector<Vec> noises;        // M_{k+1} used for S_n, same order
    double residual = 0.0;          // ||x̄(t_n) - ode_ref - W_n - S̃_n||

    /// Recomputes the residual from the stored vectors.
    double recompute_residual() const;
};

/// Each interval integral uses Gauss–Legendre with `quad_order` nodes;
/// Phi(t_n, s, .) comes from the augmented variational system at `tol`.
DecompositionReport decompose(const Trajectory& traj, const DriftFunction& drift, std::size_t n0,
                              std::size_t n, std::size_t quad_order = 4, double tol = 1e-10);

struct IdentityCheck {
    bool pass = false;
    double residual = 0.0;
};

IdentityCheck verify_identity(const DecompositionReport& report, double tol_accept);

struct AlphaNorms {
    std::vector<double> norms; // ||alpha_{k+1,n}|| in k order
    double sum = 0.0;
    double max = 0.0;
};

AlphaNorms alpha_weight_norms(const DecompositionReport& report);

/// sum_k alpha_{k+1,n} M_{k+1} with the report's weights and noises.
Vec replay_S_n(const DecompositionReport& report);

} // namespace lockin
