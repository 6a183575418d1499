#pragma once

#include "stlfunnel/dqn.hpp"
#include "stlfunnel/env.hpp"
#include "stlfunnel/reward.hpp"

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stlfunnel {

/// Optional per-conjunct settings, indexed like the conjuncts in written order.
struct ConjunctSettings {
    std::optional<double> rho_min;
    std::optional<double> rho_max;
    std::optional<double> gamma_inf;
    std::optional<int> t_star; // absolute step
};

struct SpecSettings {
    std::string formula;
    int bounds_grid = 101; // grid points per referenced variable for robustness bounds
    std::vector<ConjunctSettings> conjuncts;
};

struct EvalSettings {
    int episodes = 20;
    std::uint64_t seed = 1000;
};

/// Everything a command needs, read from one JSON document.
struct RunConfig {
    EnvConfig env;
    SpecSettings spec;
    TrainConfig train;
    RewardMode reward_mode = RewardMode::Funnel;
    EvalSettings eval;
    std::string output_dir = "out";
    std::string checkpoint; // input checkpoint for eval and resume
    std::string trajectory; // input trajectory CSV for monitor
    std::string canonical;  // normalized JSON of the whole document
    std::string digest;     // hash of the env, spec, train and reward_mode sections
};

/// Applies `key.path=value` overrides (value read as JSON, else as a string), then
/// validates. Throws ConfigError naming the offending dot path.
RunConfig parse_run_config(std::string_view json_text, std::span<const std::string> overrides = {});
RunConfig load_run_config(const std::string& path, std::span<const std::string> overrides = {});

/// Environment, formula and reward settings built from a configuration.
struct Problem {
    std::unique_ptr<SimulatedEnv> env;
    FormulaPtr phi;
    std::vector<RhoBounds> bounds;
    RewardSpec reward;
};

/// Throws ConfigError for anything derived from the configuration that cannot be built.
Problem build_problem(const RunConfig& cfg);

/// Reward callback bound to a problem's funnel schedule.
RewardFn make_reward_fn(const Problem& p);

} // namespace stlfunnel
