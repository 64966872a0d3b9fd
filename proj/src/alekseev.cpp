#include "lockin/alekseev.hpp"

#include "lockin/quadrature.hpp"

#include <algorithm>

namespace lockin {

double DecompositionReport::recompute_residual() const
{
    return (x_n - ode_ref - W_n - S_tilde_n).norm();
}

DecompositionReport decompose(const Trajectory& traj, const DriftFunction& drift, std::size_t n0,
                              std::size_t n, std::size_t quad_order, double tol)
{
    if (!traj.has_noises()) {
        throw InvalidArgument("decompose: trajectory does not store noises");
    }
    if (!(n0 < n) || n0 < traj.n_start() || n > traj.n_end()) {
        throw InvalidArgument("decompose: need n_start <= n0 < n <= n_end");
    }
    if (!(tol > 0.0)) {
        throw InvalidArgument("decompose: tol must be positive");
    }
    const auto rule = gauss_legendre(quad_order);
    const auto d = static_cast<Eigen::Index>(drift.dim());
    const OdeOptions ode = OdeOptions::with_tol(tol);
    const double tn = traj.time(n);

    DecompositionReport rep;
    rep.n0 = n0;
    rep.n = n;
    rep.quad_order = quad_order;
    rep.tol = tol;
    rep.x_n = traj.state(n);
    rep.ode_ref = solve_ode(drift, traj.time(n0), traj.state(n0), tn, ode);
    rep.W_n = Vec::Zero(d);
    rep.S_tilde_n = Vec::Zero(d);
    rep.S_n = Vec::Zero(d);

    for (std::size_t k = n0; k < n; ++k) {
        const double tk = traj.time(k);
        const double ak = traj.step(k);
        const Vec xk = traj.state(k);
        const Vec xk1 = traj.state(k + 1);
        const Vec hk = drift.eval(xk);
        const Vec m = traj.noise(k);
        Mat alpha = Mat::Zero(d, d);
        for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
            const double frac = 0.5 * (1.0 + rule.nodes[j]);
            const double s = tk + frac * ak;
            const double w = 0.5 * ak * rule.weights[j];
            const Vec xs = xk + frac * (xk1 - xk);
            // autonomous flow: Phi(t_n, s, u) = Phi(t_n - s, 0, u)
            const Mat phi_path = flow_with_fundamental(drift, 0.0, xs, tn - s, ode).phi;
            const Mat phi_frozen = flow_with_fundamental(drift, 0.0, xk, tn - s, ode).phi;
            rep.W_n += w * (phi_path * (hk - drift.eval(xs)));
            rep.S_tilde_n += w * (phi_path * m);
            alpha += w * phi_frozen;
        }
        rep.S_n += alpha * m;
        rep.alpha_weights.push_back(std::move(alpha));
        rep.noises.push_back(m);
    }
    rep.residual = rep.recompute_residual();
    return rep;
}

IdentityCheck verify_identity(const DecompositionReport& report, double tol_accept)
{
    IdentityCheck c;
    c.residual = report.recompute_residual();
    c.pass = c.residual <= tol_accept;
    return c;
}

AlphaNorms alpha_weight_norms(const DecompositionReport& report)
{
    AlphaNorms out;
    out.norms.reserve(report.alpha_weights.size());
    for (const auto& a : report.alpha_weights) {
        const double v = operator_norm(a);
        out.norms.push_back(v);
        out.sum += v;
        out.max = std::max(out.max, v);
    }
    return out;
}

Vec replay_S_n(const DecompositionReport& report)
{
    Vec s = Vec::Zero(report.S_n.size());
    for (std::size_t i = 0; i < report.alpha_weights.size(); ++i) {
        s += report.alpha_weights[i] * report.noises[i];
    }
    return s;
}

} // namespace lockin
