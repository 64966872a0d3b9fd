#include "lockin/cli/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

namespace lockin::cli {

namespace {

std::string where(const YAML::Node& node, const std::string& field)
{
    std::ostringstream os;
    os << "line " << node.Mark().line + 1 << ", field " << field;
    return os.str();
}

[[noreturn]] void fail(const YAML::Node& node, const std::string& field, const std::string& msg)
{
    throw ConfigError("config error at " + where(node, field) + ": " + msg);
}

void check_keys(const YAML::Node& section, const std::string& name,
                const std::set<std::string>& allowed)
{
    if (!section.IsMap()) {
        fail(section, name, "expected a mapping");
    }
    for (const auto& kv : section) {
        const auto key = kv.first.as<std::string>();
        if (!allowed.count(key)) {
            fail(kv.first, name + "." + key, "unknown field");
        }
    }
}

template <class T>
void read(const YAML::Node& section, const std::string& sect, const char* key, T& out)
{
    const YAML::Node n = section[key];
    if (!n) {
        return;
    }
    try {
        out = n.as<T>();
    } catch (const YAML::Exception&) {
        fail(n, sect + "." + key, "cannot parse value '" + YAML::Dump(n) + "'");
    }
}

template <class T>
void read_opt(const YAML::Node& section, const std::string& sect, const char* key,
              std::optional<T>& out, const char* auto_word = "auto")
{
    const YAML::Node n = section[key];
    if (!n) {
        return;
    }
    if (n.IsScalar() && n.Scalar() == auto_word) {
        out.reset();
        return;
    }
    T v{};
    read(section, sect, key, v);
    out = v;
}

void require(bool ok, const YAML::Node& node, const std::string& field, const std::string& msg)
{
    if (!ok) {
        fail(node, field, msg);
    }
}

} // namespace

StepSchedule ScheduleConfig::build() const
{
    if (kind == "power") {
        return StepSchedule::power(mu);
    }
    if (kind == "constant-then-power") {
        return StepSchedule::constant_then_power(constant, mu);
    }
    if (kind == "explicit-list") {
        return StepSchedule::explicit_list(values);
    }
    throw ConfigError("unknown schedule kind '" + kind + "'");
}

NoiseModel NoiseConfig::build(std::size_t dim) const
{
    if (kind == "laplace") {
        return NoiseModel::laplace(dim, scale);
    }
    if (kind == "bounded-uniform") {
        return NoiseModel::bounded_uniform(dim, scale);
    }
    if (kind == "truncated-gaussian") {
        return NoiseModel::truncated_gaussian(dim, scale, cutoff);
    }
    if (kind == "zero") {
        return NoiseModel::zero(dim);
    }
    throw ConfigError("unknown noise kind '" + kind + "'");
}

std::uint64_t fnv1a64(const std::string& bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin)
{
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError("config parse error in " + origin + " at line " +
                          std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
    if (!root.IsMap()) {
        throw ConfigError("config " + origin + ": top level must be a mapping");
    }
    check_keys(root, "<root>",
               {"scenario", "schedule", "noise", "bound", "mc", "decomposition", "conc",
                "order_study", "output"});

    ExperimentConfig c;
    c.source_text = text;
    c.source_path = origin;

    const YAML::Node sc = root["scenario"];
    if (!sc) {
        throw ConfigError("config " + origin + ": missing section 'scenario'");
    }
    check_keys(sc, "scenario", {"name", "params", "coeffs", "matrix", "offset", "equilibrium_guess"});
    read(sc, "scenario", "name", c.scenario.name);
    require(!c.scenario.name.empty(), sc, "scenario.name", "missing scenario name");
    if (const auto p = sc["params"]) {
        require(p.IsMap(), p, "scenario.params", "expected a mapping");
        for (const auto& kv : p) {
            const auto key = kv.first.as<std::string>();
            double v = 0.0;
            read(p, "scenario.params", key.c_str(), v);
            c.scenario.params[key] = v;
        }
    }
    read(sc, "scenario", "coeffs", c.scenario.coeffs);
    read(sc, "scenario", "matrix", c.scenario.matrix);
    read(sc, "scenario", "offset", c.scenario.offset);
    read(sc, "scenario", "equilibrium_guess", c.equilibrium_guess);

    if (const auto s = root["schedule"]) {
        check_keys(s, "schedule", {"kind", "mu", "constant", "values"});
        read(s, "schedule", "kind", c.schedule.kind);
        read(s, "schedule", "mu", c.schedule.mu);
        read(s, "schedule", "constant", c.schedule.constant);
        read(s, "schedule", "values", c.schedule.values);
        const YAML::Node at = s["mu"] ? s["mu"] : s;
        require(c.schedule.kind == "power" || c.schedule.kind == "constant-then-power" ||
                    c.schedule.kind == "explicit-list",
                s, "schedule.kind", "unknown schedule kind '" + c.schedule.kind + "'");
        if (c.schedule.kind != "explicit-list") {
            require(c.schedule.mu > 0.0 && c.schedule.mu <= 1.0, at, "schedule.mu",
                    "μ out of (0,1] (mu = " + std::to_string(c.schedule.mu) + ")");
        }
        try {
            (void)c.schedule.build();
        } catch (const std::exception& e) {
            fail(s, "schedule", e.what());
        }
    }

    if (const auto n = root["noise"]) {
        check_keys(n, "noise", {"kind", "scale", "cutoff"});
        read(n, "noise", "kind", c.noise.kind);
        read(n, "noise", "scale", c.noise.scale);
        read(n, "noise", "cutoff", c.noise.cutoff);
        try {
            (void)c.noise.build(1);
        } catch (const std::exception& e) {
            fail(n, "noise", e.what());
        }
    }

    if (const auto b = root["bound"]) {
        check_keys(b, "bound",
                   {"epsilon", "n0", "T", "kappa", "lambda_prime_fraction", "constants", "C1", "C2",
                    "horizon"});
        read(b, "bound", "epsilon", c.bound.epsilon);
        read(b, "bound", "n0", c.bound.n0);
        read_opt(b, "bound", "T", c.bound.T);
        read(b, "bound", "kappa", c.bound.kappa);
        read(b, "bound", "lambda_prime_fraction", c.bound.lambda_prime_fraction);
        read(b, "bound", "constants", c.bound.constants);
        read(b, "bound", "C1", c.bound.C1);
        read(b, "bound", "C2", c.bound.C2);
        read(b, "bound", "horizon", c.bound.horizon);
        require(c.bound.epsilon > 0.0, b, "bound.epsilon", "must be positive");
        require(c.bound.kappa > 0.0 && c.bound.kappa < 1.0, b, "bound.kappa", "must lie in (0,1)");
        require(c.bound.lambda_prime_fraction > 0.0 && c.bound.lambda_prime_fraction < 1.0, b,
                "bound.lambda_prime_fraction", "must lie in (0,1)");
        require(c.bound.constants == "fitted" || c.bound.constants == "user", b,
                "bound.constants", "expected 'fitted' or 'user'");
        require(!c.bound.T || *c.bound.T >= 0.0, b, "bound.T", "must be >= 0 or 'auto'");
    }

    if (const auto m = root["mc"]) {
        c.has_mc = true;
        check_keys(m, "mc",
                   {"trials", "horizon", "horizon_cap", "seed", "workers", "init", "box_half_width"});
        read(m, "mc", "trials", c.mc.trials);
        read_opt(m, "mc", "horizon", c.mc.horizon);
        read(m, "mc", "horizon_cap", c.mc.horizon_cap);
        read(m, "mc", "seed", c.mc.seed);
        read(m, "mc", "workers", c.mc.workers);
        std::string init = "uniform-in-B";
        read(m, "mc", "init", init);
        if (init == "uniform-in-B") {
            c.mc.init.kind = InitSamplerKind::UniformInB;
        } else if (init == "box-rejection") {
            c.mc.init.kind = InitSamplerKind::BoxRejection;
        } else {
            fail(m, "mc.init", "expected 'uniform-in-B' or 'box-rejection'");
        }
        read(m, "mc", "box_half_width", c.mc.init.box_half_width);
        require(c.mc.trials >= 100, m, "mc.trials", "need at least 100 trials");
        require(c.mc.workers >= 1, m, "mc.workers", "need at least one worker");
    }

    if (const auto d = root["decomposition"]) {
        check_keys(d, "decomposition", {"n0", "n", "quad_order", "tol", "tol_accept", "seed", "x0"});
        read(d, "decomposition", "n0", c.decomposition.n0);
        read(d, "decomposition", "n", c.decomposition.n);
        read(d, "decomposition", "quad_order", c.decomposition.quad_order);
        read(d, "decomposition", "tol", c.decomposition.tol);
        read(d, "decomposition", "tol_accept", c.decomposition.tol_accept);
        read(d, "decomposition", "seed", c.decomposition.seed);
        read(d, "decomposition", "x0", c.decomposition.x0);
        require(c.decomposition.n > c.decomposition.n0, d, "decomposition.n", "must exceed n0");
        require(c.decomposition.n - c.decomposition.n0 <= 500, d, "decomposition.n",
                "n - n0 is limited to 500");
    }

    if (const auto k = root["conc"]) {
        check_keys(k, "conc",
                   {"delta", "lambda", "n0", "n", "xi_points", "lowest_bound", "trials", "seed"});
        read_opt(k, "conc", "delta", c.conc.delta);
        read(k, "conc", "lambda", c.conc.lambda);
        read(k, "conc", "n0", c.conc.n0);
        read(k, "conc", "n", c.conc.n);
        read(k, "conc", "xi_points", c.conc.xi_points);
        read(k, "conc", "lowest_bound", c.conc.lowest_bound);
        read(k, "conc", "trials", c.conc.trials);
        read(k, "conc", "seed", c.conc.seed);
        require(c.conc.n > c.conc.n0, k, "conc.n", "must exceed n0");
    }

    if (const auto o = root["order_study"]) {
        check_keys(o, "order_study", {"mu", "C", "lambda", "n0"});
        read(o, "order_study", "mu", c.order.mu);
        read(o, "order_study", "C", c.order.C);
        read(o, "order_study", "lambda", c.order.lambda);
        read(o, "order_study", "n0", c.order.n0);
        require(c.order.mu > 0.0 && c.order.mu <= 1.0, o, "order_study.mu",
                "μ out of (0,1]");
    }

    if (const auto out = root["output"]) {
        check_keys(out, "output", {"dir"});
        read(out, "output", "dir", c.out_dir);
    }
    return c;
}

ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot read config file '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

} // namespace lockin::cli
