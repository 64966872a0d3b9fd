#pragma once

#include "lockin/cli/config.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace lockin::cli {

/// Flags shared by every subcommand. Unset values fall back to the config.
struct GlobalOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::optional<std::string> out_dir;
    std::optional<std::size_t> horizon;
    std::optional<std::size_t> trials;
};

inline constexpr const char* kOutDirEnv = "LOCKIN_OUT_DIR";

struct ConcCheckOptions {
    std::optional<std::string> noise; // "kind:scale", e.g. laplace:1
};

struct OrderStudyOptions {
    std::optional<double> mu;
    std::optional<double> C;
    std::optional<double> lambda;
    std::vector<std::size_t> n0;
    std::string tail = "sqrt"; // sqrt | beta
};

int cmd_run(const GlobalOptions& g, std::ostream& out);
int cmd_eval_bound(const GlobalOptions& g, std::ostream& out);
int cmd_mc_lockin(const GlobalOptions& g, std::ostream& out);
int cmd_verify_decomposition(const GlobalOptions& g, std::ostream& out);
int cmd_conc_check(const GlobalOptions& g, const ConcCheckOptions& c, std::ostream& out);
int cmd_order_study(const GlobalOptions& g, const OrderStudyOptions& o, std::ostream& out);

} // namespace lockin::cli
