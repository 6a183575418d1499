#pragma once

#include "stlfunnel/fragment.hpp"
#include "stlfunnel/robustness.hpp"

#include <optional>
#include <span>
#include <vector>

namespace stlfunnel {

/// gamma(t) = (gamma0 - gamma_inf) * exp(-l * t) + gamma_inf on a segment-local clock.
struct FunnelParams {
    double gamma0 = 1.0;
    double gamma_inf = 0.0;
    double l = 0.0;
    double rho_max = 0.0;
    int t_star = 0; // segment-local closure time, gamma(t_star) == rho_max
};

/// Timing of one temporal operator. `inner` is only used by F[a,c1] G[c2,b].
struct OperatorTiming {
    FormulaKind kind = FormulaKind::Always;
    Interval outer;
    Interval inner;
};

/// Absolute closure step for an operator whose funnel clock starts at `origin`.
///
/// Defaults: G -> a, F -> b, F G -> c1 + c2. Permitted overrides: F in [a, b],
/// F G in [a + c2, c1 + c2], G only a, except that when a <= origin any step in
/// (origin, b] is accepted. The result is always > origin; otherwise DomainError.
int resolve_closure(const OperatorTiming& op, std::optional<int> t_star, int origin = 0);

/// l = ln((gamma0 - gamma_inf) / (rho_max - gamma_inf)) / t_star.
/// Needs t_star > 0 and a logarithm argument > 1.
double funnel_rate(double gamma0, double gamma_inf, double rho_max, int t_star);

/// Rate for the operator with the closure time chosen per resolve_closure.
double synth_l(const OperatorTiming& op, double gamma0, double gamma_inf, double rho_max,
               std::optional<int> t_star = std::nullopt, int origin = 0);

/// Funnel value `elapsed` steps after the clock origin; elapsed may be +inf.
double gamma_value(const FunnelParams& p, double elapsed);

struct FunnelSegment {
    int t_begin = 0; // clock origin
    int t_first = 0; // first step at which the segment scores rewards
    int t_end = 0;   // last step, inclusive
    FunnelParams params;
    std::size_t psi_index = 0; // conjunct index in written order
    FormulaKind kind = FormulaKind::Always;
    Interval window; // obligation window of the conjunct, absolute steps

    bool active(int t) const { return t_first <= t && t <= t_end; }
};

/// Throws DomainError unless t_begin <= t <= t_end.
double gamma_eval(const FunnelSegment& seg, int t);

struct FunnelSchedule {
    FormulaPtr phi;
    FragmentClass fragment = FragmentClass::SingleTemporal;
    int horizon = 0;
    std::vector<FormulaPtr> psi;          // non-temporal bodies, written order
    std::vector<FunnelSegment> segments;  // ordered by t_first
    std::vector<std::vector<std::size_t>> active; // per step in [0, horizon]: segment indices

    std::span<const std::size_t> active_at(int t) const;
};

/// Per-conjunct knobs for schedule synthesis.
struct FunnelOverrides {
    std::optional<double> gamma_inf;
    std::optional<int> t_star; // absolute step
};

/// Builds the funnel schedule for a single temporal operator or a conjunction of them.
///
/// Sequential conjunctions get one segment per conjunct spanning (b_{i-1}, b_i], the
/// clock restarting at b_{i-1} (the first at 0) and the last segment running to the
/// horizon. Overlapping conjunctions get one segment per conjunct over its own window
/// with the clock starting at the window start. gamma0 = rho_max - rho_min and
/// gamma_inf defaults to min(gamma0, rho_max) / 100.
///
/// `bounds` and `overrides` are indexed like the conjuncts in written order; `overrides`
/// may be empty.
FunnelSchedule build_schedule(const FormulaPtr& phi, std::span<const RhoBounds> bounds,
                              std::span<const FunnelOverrides> overrides, int horizon);

} // namespace stlfunnel
