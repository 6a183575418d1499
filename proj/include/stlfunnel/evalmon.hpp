#pragma once

#include "stlfunnel/dqn.hpp"
#include "stlfunnel/reward.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace stlfunnel {

struct StepRecord {
    int t = 0;
    StateVector state;
    std::int64_t action = -1;    // -1 on the final state
    double reward = 0.0;         // shaped reward of the state at step t
    std::vector<double> rho_psi; // pointwise robustness of every conjunct body
    double gamma_lower = 0.0;    // -gamma(t) + rho_max of the binding segment, NaN when none is active
    double margin = 0.0;         // min over active segments of rho_psi + gamma - rho_max, NaN when none is active
    bool satisfied_so_far = true;
};

struct TrajectoryMeta {
    std::uint64_t seed = 0;
    std::string config_digest;
    std::string spec;
    std::vector<std::string> variables;
};

/// horizon + 1 records, t = 0, 1, ..., horizon.
struct Trajectory {
    TrajectoryMeta meta;
    std::vector<StepRecord> steps;

    std::vector<StateVector> states() const;
};

/// Fills every record field from the visited states and the actions taken.
/// `actions` has one entry fewer than `states`.
Trajectory annotate(const RewardSpec& spec, std::vector<StateVector> states, std::span<const std::size_t> actions);

/// Simulates one episode from env.reset(seed), acting epsilon-greedily on q (epsilon 0 is greedy).
/// Throws DivergenceError on a non-finite state and DomainError on a horizon mismatch.
Trajectory rollout(const QFunction& q, const Environment& env, const RewardSpec& spec, std::uint64_t seed,
                   double epsilon = 0.0);

struct SatisfactionResult {
    bool satisfied = false;
    double robustness = 0.0;             // rho_trace(phi, trace, 0)
    double obligation_robustness = 0.0;  // min over obligation steps of the conjunct body robustness
};

/// Throws DomainError when the trace is shorter than the formula horizon.
SatisfactionResult check_satisfaction(const Formula& phi, std::span<const StateVector> trace);
SatisfactionResult check_satisfaction(const Formula& phi, const Trajectory& traj);

/// Minimum of rho_psi over every step inside a conjunct's obligation window.
double obligation_robustness(const FunnelSchedule& schedule, std::span<const StateVector> trace);

/// Per-step flag: no conjunct has been irrecoverably violated by the prefix ending at t.
std::vector<bool> satisfied_so_far(const FunnelSchedule& schedule, std::span<const StateVector> trace);

struct PolicyEvaluation {
    EvalSummary summary;
    std::vector<SatisfactionResult> episodes;
    std::vector<Trajectory> trajectories; // filled when requested
};

/// Greedy rollouts with seeds base_seed, base_seed + 1, ...; DomainError when episodes < 1.
PolicyEvaluation evaluate_policy(const QFunction& q, const Environment& env, const RewardSpec& spec, int episodes,
                                 std::uint64_t base_seed, bool keep_trajectories = false);

/// Column names in order: t, variables..., action, reward, rho_psi_1..., gamma_lower, margin, satisfied_so_far.
std::vector<std::string> trajectory_columns(const std::vector<std::string>& variables, std::size_t psi_count);

/// 17 significant digits; NaN and the missing final action are written as empty fields.
std::string trajectory_csv(const Trajectory& traj);
void export_csv(const Trajectory& traj, const std::string& path);
/// Reads a trajectory CSV; only `t` and the state columns are mandatory.
Trajectory import_csv(const std::string& path);
Trajectory parse_trajectory_csv(const std::string& text);

/// Rows (t, segment, gamma_lower, rho_max) for every step at which a segment is active.
std::string funnel_csv(const FunnelSchedule& schedule);
std::string funnel_csv(const FunnelSchedule& schedule, std::size_t segment);
void export_funnel_csv(const FunnelSchedule& schedule, const std::string& path);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

} // namespace stlfunnel
