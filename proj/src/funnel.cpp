#include "stlfunnel/funnel.hpp"

#include "stlfunnel/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace stlfunnel {

namespace {

std::string range_text(int lo, int hi) { return "[" + std::to_string(lo) + ", " + std::to_string(hi) + "]"; }

const char* op_name(FormulaKind k)
{
    switch (k) {
    case FormulaKind::Eventually:
        return "F";
    case FormulaKind::Always:
        return "G";
    case FormulaKind::EventuallyAlways:
        return "F G";
    default:
        return "?";
    }
}

} // namespace

int resolve_closure(const OperatorTiming& op, std::optional<int> t_star, int origin)
{
    int lo = 0;
    int hi = 0;
    int fallback = 0;
    switch (op.kind) {
    case FormulaKind::Always:
        fallback = op.outer.lo;
        if (op.outer.lo > origin) {
            lo = hi = op.outer.lo;
        }
        else {
            // the obligation starts at the clock origin, only an explicit later closure can work
            lo = origin + 1;
            hi = op.outer.hi;
            if (!t_star) {
                throw DomainError("G" + range_text(op.outer.lo, op.outer.hi) + " would need t* = " +
                                  std::to_string(op.outer.lo - origin) +
                                  " on its segment clock; set a t* override in " + range_text(lo, hi) +
                                  " or start the interval later");
            }
        }
        break;
    case FormulaKind::Eventually:
        fallback = op.outer.hi;
        lo = std::max(op.outer.lo, origin + 1);
        hi = op.outer.hi;
        break;
    case FormulaKind::EventuallyAlways:
        fallback = op.outer.hi + op.inner.lo;
        lo = std::max(op.outer.lo + op.inner.lo, origin + 1);
        hi = op.outer.hi + op.inner.lo;
        break;
    default:
        throw DomainError("closure time is only defined for temporal operators");
    }
    const int chosen = t_star.value_or(fallback);
    if (chosen - origin <= 0) {
        throw DomainError(std::string("funnel for ") + op_name(op.kind) + " would close at t* = 0 on its segment clock");
    }
    if (chosen < lo || chosen > hi) {
        throw DomainError(std::string("t* = ") + std::to_string(chosen) + " is outside the permitted range " +
                          range_text(lo, hi) + " for " + op_name(op.kind));
    }
    return chosen;
}

double funnel_rate(double gamma0, double gamma_inf, double rho_max, int t_star)
{
    if (t_star <= 0) {
        throw DomainError("t* must be positive");
    }
    if (!(gamma_inf > 0.0)) {
        throw DomainError("gamma_inf must be positive");
    }
    if (!(gamma_inf < rho_max)) {
        throw DomainError("gamma_inf = " + format_number(gamma_inf) + " must be below rho_max = " +
                          format_number(rho_max));
    }
    if (!(gamma_inf < gamma0)) {
        throw DomainError("gamma_inf must be below gamma0");
    }
    const double ratio = (gamma0 - gamma_inf) / (rho_max - gamma_inf);
    if (!(ratio > 1.0)) {
        throw DomainError("funnel logarithm argument " + format_number(ratio) + " is not above 1 (gamma0 <= rho_max)");
    }
    return std::log(ratio) / static_cast<double>(t_star);
}

double synth_l(const OperatorTiming& op, double gamma0, double gamma_inf, double rho_max, std::optional<int> t_star,
               int origin)
{
    const int closure = resolve_closure(op, t_star, origin);
    return funnel_rate(gamma0, gamma_inf, rho_max, closure - origin);
}

double gamma_value(const FunnelParams& p, double elapsed)
{
    return (p.gamma0 - p.gamma_inf) * std::exp(-p.l * elapsed) + p.gamma_inf;
}

double gamma_eval(const FunnelSegment& seg, int t)
{
    if (t < seg.t_begin || t > seg.t_end) {
        throw DomainError("step " + std::to_string(t) + " is outside the funnel segment " +
                          range_text(seg.t_begin, seg.t_end));
    }
    return gamma_value(seg.params, static_cast<double>(t - seg.t_begin));
}

std::span<const std::size_t> FunnelSchedule::active_at(int t) const
{
    if (t < 0 || t > horizon) {
        throw DomainError("step " + std::to_string(t) + " is outside the schedule horizon " + std::to_string(horizon));
    }
    return active[static_cast<std::size_t>(t)];
}

FunnelSchedule build_schedule(const FormulaPtr& phi, std::span<const RhoBounds> bounds,
                              std::span<const FunnelOverrides> overrides, int horizon)
{
    const FragmentInfo info = analyze_fragment(phi);
    if (info.fragment == FragmentClass::NonTemporal) {
        throw FragmentError("funnel schedules need at least one temporal operator");
    }
    const std::size_t k = info.conjuncts.size();
    if (bounds.size() != k) {
        throw DomainError("expected robustness bounds for " + std::to_string(k) + " conjuncts, got " +
                          std::to_string(bounds.size()));
    }
    if (!overrides.empty() && overrides.size() != k) {
        throw DomainError("expected funnel overrides for " + std::to_string(k) + " conjuncts, got " +
                          std::to_string(overrides.size()));
    }

    FunnelSchedule schedule;
    schedule.phi = phi;
    schedule.fragment = info.fragment;
    schedule.horizon = horizon;
    int last_end = 0;
    for (const auto& c : info.conjuncts) {
        schedule.psi.push_back(c.psi);
        last_end = std::max(last_end, c.window.hi);
    }
    if (horizon < last_end) {
        throw DomainError("horizon " + std::to_string(horizon) + " ends before the last obligation step " +
                          std::to_string(last_end));
    }

    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return info.conjuncts[a].window.lo < info.conjuncts[b].window.lo;
    });

    const bool sequential = info.fragment != FragmentClass::OverlappingConjunction;
    for (std::size_t pos = 0; pos < k; ++pos) {
        const std::size_t i = order[pos];
        const auto& c = info.conjuncts[i];
        const RhoBounds& rb = bounds[i];
        const std::string where = "conjunct " + std::to_string(i) + " ('" + to_string(*c.psi) + "')";
        if (!(rb.rho_max > 0.0)) {
            throw DomainError(where + " has rho_max = " + format_number(rb.rho_max) +
                              " <= 0, so no funnel can enforce positive robustness");
        }
        if (!(rb.rho_min <= rb.rho_max)) {
            throw DomainError(where + " has rho_min above rho_max");
        }

        FunnelSegment seg;
        seg.psi_index = i;
        seg.kind = c.kind;
        seg.window = c.window;
        if (sequential) {
            seg.t_begin = pos == 0 ? 0 : info.conjuncts[order[pos - 1]].window.hi;
            seg.t_first = pos == 0 ? 0 : seg.t_begin + 1;
            seg.t_end = pos + 1 == k ? horizon : c.window.hi;
        }
        else {
            seg.t_begin = c.window.lo;
            seg.t_first = c.window.lo;
            seg.t_end = c.window.hi;
        }

        const FunnelOverrides ov = overrides.empty() ? FunnelOverrides{} : overrides[i];
        FunnelParams& p = seg.params;
        p.rho_max = rb.rho_max;
        p.gamma0 = rb.rho_max - rb.rho_min;
        p.gamma_inf = ov.gamma_inf.value_or(std::min(p.gamma0, p.rho_max) / 100.0);
        const OperatorTiming op{c.kind, c.formula->outer, c.formula->inner};
        try {
            const int closure = resolve_closure(op, ov.t_star, seg.t_begin);
            p.t_star = closure - seg.t_begin;
            p.l = funnel_rate(p.gamma0, p.gamma_inf, p.rho_max, p.t_star);
        }
        catch (const DomainError& e) {
            throw DomainError(where + ": " + e.what());
        }
        schedule.segments.push_back(seg);
    }

    schedule.active.assign(static_cast<std::size_t>(horizon) + 1, {});
    for (std::size_t s = 0; s < schedule.segments.size(); ++s) {
        const auto& seg = schedule.segments[s];
        for (int t = seg.t_first; t <= seg.t_end; ++t) {
            schedule.active[static_cast<std::size_t>(t)].push_back(s);
        }
    }
    return schedule;
}

} // namespace stlfunnel
