#include "stlfunnel/reward.hpp"

#include "stlfunnel/error.hpp"

#include <algorithm>
#include <limits>
#include <string>

namespace stlfunnel {

std::string_view to_string(RewardMode m)
{
    return m == RewardMode::Funnel ? "funnel" : "no_funnel";
}

RewardMode parse_reward_mode(std::string_view s)
{
    if (s == "funnel") {
        return RewardMode::Funnel;
    }
    if (s == "no_funnel" || s == "ablation") {
        return RewardMode::NoFunnel;
    }
    throw DomainError("unknown reward mode '" + std::string(s) + "' (expected funnel or no_funnel)");
}

double segment_reward(const FunnelSchedule& schedule, std::size_t segment, std::span<const double> s, int t)
{
    const auto& seg = schedule.segments.at(segment);
    const double rho = rho_pointwise(*schedule.psi[seg.psi_index], s);
    return rho + gamma_eval(seg, t) - seg.params.rho_max;
}

double reward(const RewardSpec& spec, std::span<const double> s, int t)
{
    const auto& sched = spec.schedule;
    const auto active = sched.active_at(t);
    if (active.empty()) {
        return 0.0;
    }
    double r = std::numeric_limits<double>::infinity();
    for (const std::size_t i : active) {
        const double v = spec.mode == RewardMode::Funnel
                             ? segment_reward(sched, i, s, t)
                             : rho_pointwise(*sched.psi[sched.segments[i].psi_index], s);
        r = std::min(r, v);
    }
    return r;
}

FunnelCheck reward_sign_check(const RewardSpec& spec, std::span<const double> s, int t)
{
    const auto& sched = spec.schedule;
    const auto active = sched.active_at(t);
    if (active.empty()) {
        throw DomainError("no funnel segment is active at step " + std::to_string(t));
    }
    FunnelCheck out;
    out.margin = std::numeric_limits<double>::infinity();
    for (const std::size_t i : active) {
        const double m = segment_reward(sched, i, s, t);
        if (m < out.margin) {
            out.margin = m;
            out.segment = i;
        }
    }
    out.side = out.margin >= 0.0 ? FunnelSide::Inside : FunnelSide::Below;
    return out;
}

} // namespace stlfunnel
