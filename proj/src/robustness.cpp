#include "stlfunnel/robustness.hpp"

#include "stlfunnel/error.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace stlfunnel {

namespace {

// out[t] = extremum of c[t+lo .. t+hi]; `better(x, y)` is true when x should win over y.
template <typename Better>
std::vector<double> sliding_extremum(const std::vector<double>& c, Interval iv, Better better)
{
    const int m = static_cast<int>(c.size());
    if (m <= iv.hi) {
        return {};
    }
    const int width = iv.hi - iv.lo + 1;
    std::vector<double> out(static_cast<std::size_t>(m - iv.hi));
    std::deque<int> window;
    for (int j = iv.lo; j < m; ++j) {
        while (!window.empty() && !better(c[window.back()], c[j])) {
            window.pop_back();
        }
        window.push_back(j);
        if (window.front() <= j - width) {
            window.pop_front();
        }
        if (j >= iv.hi) {
            out[j - iv.hi] = c[window.front()];
        }
    }
    return out;
}

std::vector<double> signal(const Formula& f, std::span<const StateVector> trace)
{
    const auto n = trace.size();
    switch (f.kind) {
    case FormulaKind::True:
        return std::vector<double>(n, std::numeric_limits<double>::infinity());
    case FormulaKind::Atom: {
        std::vector<double> out(n);
        for (std::size_t t = 0; t < n; ++t) {
            out[t] = f.atom.h->evaluate(trace[t]);
        }
        return out;
    }
    case FormulaKind::Not: {
        auto out = signal(*f.lhs, trace);
        for (auto& v : out) {
            v = -v;
        }
        return out;
    }
    case FormulaKind::And:
    case FormulaKind::Or: {
        auto a = signal(*f.lhs, trace);
        auto b = signal(*f.rhs, trace);
        const auto m = std::min(a.size(), b.size());
        a.resize(m);
        for (std::size_t t = 0; t < m; ++t) {
            a[t] = f.kind == FormulaKind::And ? std::min(a[t], b[t]) : std::max(a[t], b[t]);
        }
        return a;
    }
    case FormulaKind::Eventually:
        return sliding_extremum(signal(*f.lhs, trace), f.outer, [](double x, double y) { return x > y; });
    case FormulaKind::Always:
        return sliding_extremum(signal(*f.lhs, trace), f.outer, [](double x, double y) { return x < y; });
    case FormulaKind::EventuallyAlways: {
        auto inner = sliding_extremum(signal(*f.lhs, trace), f.inner, [](double x, double y) { return x < y; });
        return sliding_extremum(inner, f.outer, [](double x, double y) { return x > y; });
    }
    }
    return {};
}

} // namespace

double rho_pointwise(const Formula& psi, std::span<const double> state)
{
    switch (psi.kind) {
    case FormulaKind::True:
        return std::numeric_limits<double>::infinity();
    case FormulaKind::Atom:
        return psi.atom.h->evaluate(state);
    case FormulaKind::Not:
        return -rho_pointwise(*psi.lhs, state);
    case FormulaKind::And:
        return std::min(rho_pointwise(*psi.lhs, state), rho_pointwise(*psi.rhs, state));
    case FormulaKind::Or:
        return std::max(rho_pointwise(*psi.lhs, state), rho_pointwise(*psi.rhs, state));
    case FormulaKind::Eventually:
    case FormulaKind::Always:
    case FormulaKind::EventuallyAlways:
        break;
    }
    throw DomainError("pointwise robustness is undefined for temporal formula '" + to_string(psi) + "'");
}

std::vector<double> rho_signal(const Formula& phi, std::span<const StateVector> trace)
{
    return signal(phi, trace);
}

double rho_trace(const Formula& phi, std::span<const StateVector> trace, int t)
{
    const int h = horizon(phi);
    const auto n = static_cast<long long>(trace.size());
    if (t < 0 || static_cast<long long>(t) + h > n - 1) {
        throw DomainError("trace of length " + std::to_string(n) + " is too short to evaluate a formula of horizon " +
                          std::to_string(h) + " at step " + std::to_string(t));
    }
    auto values = signal(phi, trace.subspan(static_cast<std::size_t>(t), static_cast<std::size_t>(h) + 1));
    return values.front();
}

RhoBounds estimate_rho_bounds(const Formula& psi, std::span<const Range> box, int grid_n)
{
    if (grid_n < 2) {
        throw DomainError("grid_n must be at least 2");
    }
    if (box.empty()) {
        throw DomainError("state box is empty");
    }
    for (const auto& r : box) {
        if (!(r.lo <= r.hi) || !std::isfinite(r.lo) || !std::isfinite(r.hi)) {
            throw DomainError("state box has an empty or non-finite range");
        }
    }
    if (has_temporal(psi)) {
        throw DomainError("robustness bounds need a non-temporal formula");
    }

    std::vector<bool> used;
    std::vector<const Formula*> stack{&psi};
    while (!stack.empty()) {
        const Formula* f = stack.back();
        stack.pop_back();
        if (f->kind == FormulaKind::Atom) {
            collect_variables(*f->atom.h, used);
        }
        if (f->lhs) {
            stack.push_back(f->lhs.get());
        }
        if (f->rhs) {
            stack.push_back(f->rhs.get());
        }
    }
    if (used.size() > box.size()) {
        throw DomainError("formula references variable " + std::to_string(used.size() - 1) + " but the box has " +
                          std::to_string(box.size()) + " dimensions");
    }

    std::vector<std::size_t> dims;
    for (std::size_t i = 0; i < used.size(); ++i) {
        if (used[i]) {
            dims.push_back(i);
        }
    }
    double total = std::pow(static_cast<double>(grid_n), static_cast<double>(dims.size()));
    if (total > 1e9) {
        throw DomainError("grid of " + std::to_string(total) + " points is too large");
    }

    StateVector s(box.size());
    for (std::size_t i = 0; i < box.size(); ++i) {
        s[i] = 0.5 * (box[i].lo + box[i].hi);
    }
    const double denom = static_cast<double>(grid_n - 1);
    auto coord = [&](std::size_t dim, int i) {
        const auto& r = box[dim];
        return (r.lo * (denom - i) + r.hi * i) / denom;
    };

    RhoBounds out{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    StateVector arg_min = s;
    StateVector arg_max = s;
    std::vector<int> idx(dims.size(), 0);
    for (std::size_t k = 0; k < dims.size(); ++k) {
        s[dims[k]] = coord(dims[k], 0);
    }
    while (true) {
        const double v = rho_pointwise(psi, s);
        if (v < out.rho_min) {
            out.rho_min = v;
            arg_min = s;
        }
        if (v > out.rho_max) {
            out.rho_max = v;
            arg_max = s;
        }
        std::size_t k = 0;
        for (; k < dims.size(); ++k) {
            if (++idx[k] < grid_n) {
                s[dims[k]] = coord(dims[k], idx[k]);
                break;
            }
            idx[k] = 0;
            s[dims[k]] = coord(dims[k], 0);
        }
        if (k == dims.size()) {
            break;
        }
    }

    // Compass search from the best grid points; extrema between grid nodes are common
    // when a target centre is not a grid coordinate.
    auto refine = [&](StateVector x, double best, double sign) {
        std::vector<double> step(dims.size());
        for (std::size_t k = 0; k < dims.size(); ++k) {
            step[k] = (box[dims[k]].hi - box[dims[k]].lo) / denom;
        }
        for (int round = 0; round < 60; ++round) {
            bool moved = false;
            for (std::size_t k = 0; k < dims.size(); ++k) {
                for (const double dir : {-1.0, 1.0}) {
                    const auto& r = box[dims[k]];
                    const double old = x[dims[k]];
                    x[dims[k]] = std::clamp(old + dir * step[k], r.lo, r.hi);
                    const double v = rho_pointwise(psi, x);
                    if (sign * v > sign * best) {
                        best = v;
                        moved = true;
                    } else {
                        x[dims[k]] = old;
                    }
                }
            }
            if (!moved) {
                for (auto& h : step) {
                    h *= 0.5;
                }
            }
        }
        return best;
    };
    if (!dims.empty()) {
        out.rho_min = refine(arg_min, out.rho_min, -1.0);
        out.rho_max = refine(arg_max, out.rho_max, 1.0);
    }
    return out;
}

} // namespace stlfunnel
