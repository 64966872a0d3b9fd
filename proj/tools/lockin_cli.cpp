#include "lockin/cli/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv)
{
    using namespace lockin::cli;
    CLI::App app{"Lock-in laboratory for stochastic approximation near a stable equilibrium"};
    app.require_subcommand(1);

    GlobalOptions g;
    auto add_globals = [&g](CLI::App* sub, bool config_required) {
        auto* opt = sub->add_option("--config", g.config, "YAML experiment config");
        if (config_required) {
            opt->required();
        }
        sub->add_option("--seed", g.seed, "override every seed in the config");
        sub->add_option("--workers", g.workers, "Monte Carlo worker threads");
        sub->add_option("--out-dir", g.out_dir, "output directory (env LOCKIN_OUT_DIR)");
        sub->add_option("--horizon", g.horizon, "override the step horizon");
        sub->add_option("--trials", g.trials, "override the trial count");
    };

    auto* run = app.add_subcommand("run", "bound reports plus the Monte Carlo lock-in run");
    add_globals(run, true);
    auto* eval = app.add_subcommand("eval-bound", "evaluate the lock-in lower bound");
    add_globals(eval, true);
    auto* mc = app.add_subcommand("mc-lockin", "estimate the lock-in probability");
    add_globals(mc, true);
    auto* dec = app.add_subcommand("verify-decomposition", "check the variation-of-constants split");
    add_globals(dec, true);

    ConcCheckOptions cc;
    auto* conc = app.add_subcommand("conc-check", "martingale concentration domination check");
    add_globals(conc, false);
    conc->add_option("--noise", cc.noise, "noise as kind:scale, e.g. laplace:1");

    OrderStudyOptions os;
    auto* order = app.add_subcommand("order-study", "tail sums against their order envelopes");
    add_globals(order, false);
    order->add_option("--mu", os.mu, "power-law step exponent");
    order->add_option("--C", os.C, "tail constant");
    order->add_option("--lambda", os.lambda, "decay rate for the beta tail");
    order->add_option("--n0", os.n0, "comma-separated start indices")->delimiter(',');
    order->add_option("--tail", os.tail, "sqrt or beta")->check(CLI::IsMember({"sqrt", "beta"}));

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            return cmd_run(g, std::cout);
        }
        if (eval->parsed()) {
            return cmd_eval_bound(g, std::cout);
        }
        if (mc->parsed()) {
            return cmd_mc_lockin(g, std::cout);
        }
        if (dec->parsed()) {
            return cmd_verify_decomposition(g, std::cout);
        }
        if (conc->parsed()) {
            return cmd_conc_check(g, cc, std::cout);
        }
        if (order->parsed()) {
            return cmd_order_study(g, os, std::cout);
        }
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
