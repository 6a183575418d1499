#pragma once

#include "stlfunnel/funnel.hpp"

#include <span>
#include <string_view>

namespace stlfunnel {

enum class RewardMode {
    Funnel,   // rho_psi(s) + gamma(t) - rho_max, min over active segments
    NoFunnel, // rho_psi(s) alone, for the ablation study
};

std::string_view to_string(RewardMode m);
/// Accepts "funnel" and "no_funnel"; DomainError otherwise.
RewardMode parse_reward_mode(std::string_view s);

struct RewardSpec {
    FunnelSchedule schedule;
    RewardMode mode = RewardMode::Funnel;
};

/// Funnel reward of one segment: rho_psi(s) + gamma(t) - rho_max.
double segment_reward(const FunnelSchedule& schedule, std::size_t segment, std::span<const double> s, int t);

/// Shaped reward at step t. Steps with no active segment score 0.
/// Throws DomainError when t lies outside [0, horizon].
double reward(const RewardSpec& spec, std::span<const double> s, int t);

enum class FunnelSide { Inside, Below };

struct FunnelCheck {
    FunnelSide side = FunnelSide::Inside;
    double margin = 0.0;       // funnel reward of the binding segment
    std::size_t segment = 0;   // index of the binding (minimum-margin) segment
};

/// Position relative to the funnel lower bound -gamma(t) + rho_max. Margin 0 counts as inside.
/// Uses the funnel margin in either reward mode. Throws DomainError when no segment is active.
FunnelCheck reward_sign_check(const RewardSpec& spec, std::span<const double> s, int t);

} // namespace stlfunnel
