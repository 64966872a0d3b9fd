#include "lockin/report_json.hpp"

#include <cmath>

namespace lockin {

using nlohmann::json;

namespace {

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

} // namespace

json to_json(const Vec& v)
{
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        a.push_back(num(v[i]));
    }
    return a;
}

json to_json(const Mat& m)
{
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            r.push_back(num(m(i, j)));
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

json to_json(const SpectralData& s)
{
    return {{"x_star", to_json(s.x_star)},
            {"jacobian_at_star", to_json(s.jacobian_at_star)},
            {"lambda_min", num(s.lambda_min)},
            {"lambda_prime", num(s.lambda_prime)},
            {"kappa", num(s.kappa)},
            {"K_tilde", num(s.K_tilde)},
            {"lambda", num(s.lambda)}};
}

json to_json(const RegionGeometry& g)
{
    return {{"x_star", to_json(g.x_star)},
            {"P", to_json(g.P)},
            {"r", num(g.r)},
            {"r0", num(g.r0)},
            {"eps0", num(g.eps0)},
            {"B_radius_V", num(g.B_radius_V)},
            {"R", num(g.R)},
            {"eps", num(g.eps)},
            {"P_eig_min", num(g.p_eig_min)},
            {"P_eig_max", num(g.p_eig_max)},
            {"shrink_steps", g.shrink_steps},
            {"largest_admissible_eps", num(g.largest_admissible_eps())}};
}

json to_json(const EnvelopeFit& f)
{
    return {{"K1", num(f.K1)},
            {"K3", num(f.K3)},
            {"K4", num(f.K4)},
            {"lambda", num(f.lambda)},
            {"pairs", f.pairs},
            {"tau_max", f.tau_grid.empty() ? json(nullptr) : num(f.tau_grid.back())}};
}

json to_json(const FittedConstants& c)
{
    return {{"K", num(c.K)},
            {"C1", num(c.C1)},
            {"C2", num(c.C2)},
            {"C1_sqrt", num(c.C1_sqrt)},
            {"C2_sqrt", num(c.C2_sqrt)},
            {"C1_beta", num(c.C1_beta)},
            {"C2_beta", num(c.C2_beta)},
            {"delta", num(c.concentration.delta)},
            {"moment_bound", num(c.concentration.C)},
            {"gamma1", num(c.concentration.gamma1)},
            {"gamma2", num(c.concentration.gamma2)}};
}

json to_json(const BoundReport& r)
{
    json j = {{"epsilon", num(r.epsilon)},
              {"n0", r.n0},
              {"T", num(r.T)},
              {"N", r.N},
              {"K", r.K ? num(*r.K) : json(nullptr)},
              {"n0_below_threshold", r.n0_below_threshold},
              {"C1", num(r.C1)},
              {"C2", num(r.C2)},
              {"lambda", num(r.lambda)},
              {"exponent_p", num(r.exponent_p)},
              {"schedule", r.schedule_label},
              {"constants_source", r.constants_source},
              {"tail_sqrt", num(r.tail_sqrt)},
              {"tail_beta", num(r.tail_beta)},
              {"log_tail_sqrt", num(r.log_tail_sqrt)},
              {"log_tail_beta", num(r.log_tail_beta)},
              {"lower_bound", num(r.lower_bound)},
              {"truncation_index", r.truncation_index},
              {"truncation_remainder_bound", num(r.truncation_remainder_bound)}};
    json beta = json::array();
    for (double b : r.beta_head) {
        beta.push_back(num(b));
    }
    j["beta_head"] = std::move(beta);
    return j;
}

json to_json(const DecompositionReport& r)
{
    const auto norms = alpha_weight_norms(r);
    json w = json::array();
    for (double v : norms.norms) {
        w.push_back(num(v));
    }
    return {{"n0", r.n0},
            {"n", r.n},
            {"quad_order", r.quad_order},
            {"tol", num(r.tol)},
            {"x_n", to_json(r.x_n)},
            {"ode_ref", to_json(r.ode_ref)},
            {"W_n", to_json(r.W_n)},
            {"S_tilde_n", to_json(r.S_tilde_n)},
            {"S_n", to_json(r.S_n)},
            {"alpha_norms", std::move(w)},
            {"alpha_norm_sum", num(norms.sum)},
            {"alpha_norm_max", num(norms.max)},
            {"residual", num(r.residual)}};
}

json to_json(const LockinEstimate& e)
{
    return {{"eps", num(e.eps)},
            {"n0", e.n0},
            {"T", num(e.T)},
            {"trials_total", e.trials_total},
            {"trials_conditioned", e.trials_conditioned},
            {"trials_locked", e.trials_locked},
            {"trials_diverged", e.trials_diverged},
            {"p_hat", num(e.p_hat)},
            {"wilson_lo", num(e.wilson_lo)},
            {"wilson_hi", num(e.wilson_hi)},
            {"at_horizon_fraction", num(e.at_horizon_fraction)},
            {"horizon_n", e.horizon_n},
            {"horizon_t", num(e.horizon_t)},
            {"lockin_start_t", num(e.lockin_start_t)},
            {"init_sampler", e.init_sampler},
            {"theoretical_lower",
             e.theoretical_lower ? num(*e.theoretical_lower) : json(nullptr)}};
}

json to_json(const Verdict& v)
{
    return {{"pass", v.pass}, {"vacuous", v.vacuous}, {"margin", num(v.margin)}};
}

} // namespace lockin
