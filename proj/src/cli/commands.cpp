#include "lockin/cli/commands.hpp"

#include "lockin/alekseev.hpp"
#include "lockin/csv.hpp"
#include "lockin/pipeline.hpp"
#include "lockin/report_json.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace lockin::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

ExperimentConfig load_with_overrides(const GlobalOptions& g)
{
    ExperimentConfig c = load_config(g.config);
    if (g.seed) {
        c.mc.seed = *g.seed;
        c.decomposition.seed = *g.seed;
        c.conc.seed = *g.seed;
    }
    if (g.workers) {
        c.mc.workers = *g.workers;
    }
    if (g.trials) {
        c.mc.trials = *g.trials;
        c.conc.trials = *g.trials;
    }
    if (g.horizon) {
        c.mc.horizon = *g.horizon;
        c.bound.horizon = *g.horizon;
    }
    return c;
}

fs::path resolve_out_dir(const GlobalOptions& g, const ExperimentConfig* c)
{
    fs::path dir = "out";
    if (g.out_dir) {
        dir = *g.out_dir;
    } else if (const char* env = std::getenv(kOutDirEnv); env && *env) {
        dir = env;
    } else if (c) {
        dir = c->out_dir;
    }
    fs::create_directories(dir);
    return dir;
}

void write_text(const fs::path& p, const std::string& text)
{
    std::ofstream os(p, std::ios::binary);
    if (!os) {
        throw std::runtime_error("cannot write " + p.string());
    }
    os << text;
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

std::string hex64(std::uint64_t v)
{
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

void write_manifest(const fs::path& dir, const std::string& command, const ExperimentConfig* c,
                    const json& extra)
{
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::ostringstream ts;
    ts << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ");
    json m = {{"tool", "lockin"},
              {"version", kVersion},
              {"command", command},
              {"eigen_version", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                    std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                    std::to_string(EIGEN_MINOR_VERSION)},
              {"timestamp_utc", ts.str()}};
    if (c) {
        m["config_path"] = c->source_path;
        m["config_hash_fnv1a64"] = hex64(fnv1a64(c->source_text));
        m["seed"] = c->mc.seed;
        m["workers"] = c->mc.workers;
    }
    m["details"] = extra;
    write_json(dir / "manifest.json", m);
}

struct Scenario {
    DriftFunction drift;
    StepSchedule schedule;
    NoiseModel noise;
    Vec guess;
};

Scenario build_scenario(const ExperimentConfig& c)
{
    DriftFunction drift = make_drift(c.scenario);
    Vec guess = Vec::Zero(static_cast<Eigen::Index>(drift.dim()));
    if (!c.equilibrium_guess.empty()) {
        if (c.equilibrium_guess.size() != drift.dim()) {
            throw ConfigError("scenario.equilibrium_guess has the wrong dimension");
        }
        guess = Eigen::Map<const Vec>(c.equilibrium_guess.data(),
                                      static_cast<Eigen::Index>(c.equilibrium_guess.size()));
    }
    return {drift, c.schedule.build(), c.noise.build(drift.dim()), guess};
}

struct BoundStage {
    FittedScenario fitted;
    BoundReport report;
    double T = 0.0;
};

BoundStage bound_stage(const ExperimentConfig& c, const Scenario& s)
{
    BoundStage b;
    PipelineOptions po;
    po.kappa = c.bound.kappa;
    po.lambda_prime_fraction = c.bound.lambda_prime_fraction;
    b.fitted = fit_scenario(s.drift, s.guess, s.noise, c.bound.epsilon, po);
    BoundInputs in;
    in.epsilon = c.bound.epsilon;
    in.lambda = b.fitted.spectral.lambda;
    in.n0 = c.bound.n0;
    in.horizon = c.bound.horizon;
    in.K = b.fitted.constants.K;
    if (c.bound.constants == "user") {
        in.C1 = c.bound.C1;
        in.C2 = c.bound.C2;
        in.constants_source = "user";
    } else {
        in.C1 = b.fitted.constants.C1;
        in.C2 = b.fitted.constants.C2;
        in.constants_source = "fitted";
    }
    b.report = lockin_bound(in, s.schedule);
    if (c.bound.T) {
        b.report.T = *c.bound.T;
    }
    b.T = b.report.T;
    return b;
}

void write_bound_outputs(const fs::path& dir, const BoundStage& b)
{
    write_json(dir / "spectral.json", to_json(b.fitted.spectral));
    write_json(dir / "geometry.json", to_json(b.fitted.geometry));
    json bound = to_json(b.report);
    bound["envelope_fit"] = to_json(b.fitted.fit);
    bound["fitted_constants"] = to_json(b.fitted.constants);
    write_json(dir / "bound.json", bound);

    std::ofstream os(dir / "bound.csv", std::ios::binary);
    CsvWriter w(os);
    w.header({"schedule", "epsilon", "n0", "T", "N", "C1", "C2", "lambda", "tail_sqrt",
              "tail_beta", "lower_bound", "truncation_index", "constants_source"});
    const auto& r = b.report;
    w.field(r.schedule_label)
        .field(r.epsilon)
        .field(r.n0)
        .field(r.T)
        .field(r.N)
        .field(r.C1)
        .field(r.C2)
        .field(r.lambda)
        .field(r.tail_sqrt)
        .field(r.tail_beta)
        .field(r.lower_bound)
        .field(r.truncation_index)
        .field(r.constants_source);
    w.end_row();
}

int mc_stage(const ExperimentConfig& c, const Scenario& s, const BoundStage& b,
             const fs::path& dir, std::ostream& out)
{
    std::size_t horizon = 0;
    bool capped = false;
    if (c.mc.horizon) {
        horizon = *c.mc.horizon;
    } else {
        const auto h = default_horizon(s.schedule, c.bound.n0, b.T, b.fitted.spectral.lambda,
                                       c.mc.horizon_cap);
        horizon = h.n;
        capped = h.capped;
    }
    LockinOptions o;
    o.eps = c.bound.epsilon;
    o.n0 = c.bound.n0;
    o.T = b.T;
    o.trials = c.mc.trials;
    o.horizon_n = horizon;
    o.init = c.mc.init;
    o.seed = c.mc.seed;
    o.workers = c.mc.workers;
    const ScenarioBundle bundle{s.drift, s.schedule, s.noise, b.fitted.geometry, b.fitted.spectral};
    LockinEstimate est = estimate_lockin(bundle, o);
    est.theoretical_lower = b.report.lower_bound;
    const Verdict v = compare_bound(est, b.report);

    json j = to_json(est);
    j["verdict"] = to_json(v);
    j["horizon_capped"] = capped;
    write_json(dir / "lockin.json", j);
    std::ofstream os(dir / "sweep.csv", std::ios::binary);
    write_sweep_csv(os, {{c.scenario.name, s.schedule.mu(), est, v}});
    out << "p_hat = " << format_double(est.p_hat) << " [" << format_double(est.wilson_lo) << ", "
        << format_double(est.wilson_hi) << "], theoretical lower = "
        << format_double(b.report.lower_bound) << ", verdict "
        << (v.pass ? (v.vacuous ? "PASS (vacuous bound)" : "PASS") : "FAIL") << "\n";
    return v.pass ? 0 : 1;
}

} // namespace

int cmd_eval_bound(const GlobalOptions& g, std::ostream& out)
{
    const auto c = load_with_overrides(g);
    const auto dir = resolve_out_dir(g, &c);
    const auto s = build_scenario(c);
    const auto b = bound_stage(c, s);
    write_bound_outputs(dir, b);
    write_manifest(dir, "eval-bound", &c, {{"lower_bound", b.report.lower_bound}});
    out << "lower bound = " << format_double(b.report.lower_bound) << " (" << b.report.constants_source
        << " constants)\n";
    return 0;
}

int cmd_mc_lockin(const GlobalOptions& g, std::ostream& out)
{
    const auto c = load_with_overrides(g);
    const auto dir = resolve_out_dir(g, &c);
    const auto s = build_scenario(c);
    const auto b = bound_stage(c, s);
    const int rc = mc_stage(c, s, b, dir, out);
    write_manifest(dir, "mc-lockin", &c, json::object());
    return rc;
}

int cmd_run(const GlobalOptions& g, std::ostream& out)
{
    const auto c = load_with_overrides(g);
    const auto dir = resolve_out_dir(g, &c);
    const auto s = build_scenario(c);
    const auto b = bound_stage(c, s);
    write_bound_outputs(dir, b);
    int rc = 0;
    if (c.has_mc) {
        rc = mc_stage(c, s, b, dir, out);
    }
    write_manifest(dir, "run", &c, json::object());
    return rc;
}

int cmd_verify_decomposition(const GlobalOptions& g, std::ostream& out)
{
    const auto c = load_with_overrides(g);
    const auto dir = resolve_out_dir(g, &c);
    const auto s = build_scenario(c);
    const auto& d = c.decomposition;
    Vec x0 = s.guess;
    if (!d.x0.empty()) {
        if (d.x0.size() != s.drift.dim()) {
            throw ConfigError("decomposition.x0 has the wrong dimension");
        }
        x0 = Eigen::Map<const Vec>(d.x0.data(), static_cast<Eigen::Index>(d.x0.size()));
    }
    RngStream rng(d.seed, 0);
    const Trajectory traj = run_sa(s.drift, s.schedule, s.noise, x0, d.n, rng);
    if (traj.diverged()) {
        throw NumericalError("trajectory diverged before n");
    }
    const auto rep = decompose(traj, s.drift, d.n0, d.n, d.quad_order, d.tol);
    const auto check = verify_identity(rep, d.tol_accept);
    json j = to_json(rep);
    j["tol_accept"] = d.tol_accept;
    j["pass"] = check.pass;
    write_json(dir / "decomposition.json", j);
    {
        std::ofstream os(dir / "trajectory.csv", std::ios::binary);
        write_trajectory_csv(os, traj);
    }
    write_manifest(dir, "verify-decomposition", &c, {{"residual", check.residual}});
    out << "residual = " << format_double(check.residual) << " (accept <= "
        << format_double(d.tol_accept) << "): " << (check.pass ? "PASS" : "FAIL") << "\n";
    return check.pass ? 0 : 1;
}

int cmd_conc_check(const GlobalOptions& g, const ConcCheckOptions& cc, std::ostream& out)
{
    ExperimentConfig c;
    const bool have_config = !g.config.empty();
    if (have_config) {
        c = load_with_overrides(g);
    } else {
        c.schedule.kind = "power";
        c.schedule.mu = 1.0;
        c.noise.kind = "laplace";
        c.noise.scale = 1.0;
        if (g.seed) {
            c.conc.seed = *g.seed;
        }
        if (g.trials) {
            c.conc.trials = *g.trials;
        }
    }
    if (cc.noise) {
        const auto pos = cc.noise->find(':');
        c.noise.kind = cc.noise->substr(0, pos);
        c.noise.scale = pos == std::string::npos ? 1.0 : std::stod(cc.noise->substr(pos + 1));
    }
    const std::size_t workers = g.workers.value_or(have_config ? c.mc.workers : 1);
    const auto dir = resolve_out_dir(g, have_config ? &c : nullptr);
    const NoiseModel noise = c.noise.build(1);
    const StepSchedule schedule = c.schedule.build();

    const auto w = geometric_weights(schedule, c.conc.lambda, c.conc.n0, c.conc.n);
    ConcentrationParams p;
    p.delta = c.conc.delta.value_or(noise.kind() == NoiseKind::Zero ? 1.0 : 0.5 * noise.min_c2());
    try {
        p.C = exact_exponential_moment(noise, p.delta);
    } catch (const InvalidArgument&) {
        RngStream mrng(c.conc.seed, 1u << 20);
        p.C = std::max(1.0, verify_moment_condition(noise, p.delta, 100'000, mrng).hi);
    }
    p.beta = *std::max_element(w.begin(), w.end());
    p.gamma1 = 0.0;
    for (double v : w) {
        p.gamma1 += v;
    }
    p.gamma2 = 1.0;
    p.dim = 1;
    const auto grid = xi_grid_below_one(p, c.conc.xi_points, c.conc.lowest_bound);
    const auto tails =
        empirical_tail_grid(scalar_weights(w), noise, grid, c.conc.trials, c.conc.seed, workers);
    const auto rows = domination_table(p, tails);
    bool all = true;
    {
        std::ofstream os(dir / "conc_check.csv", std::ios::binary);
        CsvWriter cw(os);
        cw.header({"xi", "bound", "empirical", "wilson_lo", "wilson_hi", "dominated"});
        for (const auto& r : rows) {
            cw.field(r.xi)
                .field(r.bound)
                .field(r.tail.p_hat)
                .field(r.tail.ci.lo)
                .field(r.tail.ci.hi)
                .field(r.dominated);
            cw.end_row();
            all = all && r.dominated;
        }
    }
    write_manifest(dir, "conc-check", have_config ? &c : nullptr,
                   {{"noise", noise.label()},
                    {"delta", p.delta},
                    {"moment_bound", p.C},
                    {"gamma1", p.gamma1},
                    {"beta", p.beta},
                    {"trials", c.conc.trials},
                    {"seed", c.conc.seed},
                    {"dominated", all}});
    out << "bound domination over " << rows.size() << " xi values: " << (all ? "PASS" : "FAIL")
        << "\n";
    return all ? 0 : 1;
}

int cmd_order_study(const GlobalOptions& g, const OrderStudyOptions& o, std::ostream& out)
{
    ExperimentConfig c;
    const bool have_config = !g.config.empty();
    if (have_config) {
        c = load_with_overrides(g);
    }
    const double mu = o.mu.value_or(c.order.mu);
    const double C = o.C.value_or(c.order.C);
    const double lambda = o.lambda.value_or(c.order.lambda);
    const auto n0s = o.n0.empty() ? c.order.n0 : o.n0;
    if (!(mu > 0.0 && mu <= 1.0)) {
        throw InvalidArgument("μ out of (0,1]");
    }
    if (o.tail != "sqrt" && o.tail != "beta") {
        throw InvalidArgument("--tail must be 'sqrt' or 'beta'");
    }
    const auto dir = resolve_out_dir(g, have_config ? &c : nullptr);
    std::ofstream os(dir / "order_study.csv", std::ios::binary);
    CsvWriter w(os);
    w.header({"n0", "tail_sum", "envelope", "ratio"});
    for (std::size_t n0 : n0s) {
        const auto row = o.tail == "sqrt" ? order_study_sqrt(mu, C, n0)
                                          : order_study_beta(mu, lambda, C, n0);
        w.field(row.n0).field(row.tail).field(row.envelope).field(row.ratio);
        w.end_row();
        out << "n0 = " << n0 << ": ratio " << format_double(row.ratio) << "\n";
    }
    write_manifest(dir, "order-study", have_config ? &c : nullptr,
                   {{"mu", mu}, {"C", C}, {"lambda", lambda}, {"tail", o.tail}});
    return 0;
}

} // namespace lockin::cli
