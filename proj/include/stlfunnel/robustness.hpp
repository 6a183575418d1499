#pragma once

#include "stlfunnel/formula.hpp"

#include <span>
#include <vector>

namespace stlfunnel {

/// Named real components in the order of an environment schema.
using StateVector = std::vector<double>;

struct RhoBounds {
    double rho_min = 0.0;
    double rho_max = 0.0;
};

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

/// Robustness of a non-temporal formula at a single state.
/// Throws DomainError on a temporal node.
double rho_pointwise(const Formula& psi, std::span<const double> state);

/// Robustness of `phi` at step t over a discrete trace; temporal intervals are inclusive.
/// Throws DomainError when t + horizon(phi) runs past the trace.
double rho_trace(const Formula& phi, std::span<const StateVector> trace, int t);

/// Robustness of `phi` at every step t in [0, trace.size() - 1 - horizon(phi)].
/// Computed bottom-up with sliding-window extrema; empty when the trace is too short.
std::vector<double> rho_signal(const Formula& phi, std::span<const StateVector> trace);

/// Robustness >= 0 counts as satisfied.
inline bool satisfied(double rho) { return rho >= 0.0; }

/// Extrema of rho_pointwise over `box` (one range per schema variable): a uniform grid
/// followed by a compass search from the best grid points. Only variables referenced by
/// `psi` are searched, the rest sit at their box midpoint, so the grid has grid_n^d
/// points for d referenced variables. Local search can still miss isolated extrema.
RhoBounds estimate_rho_bounds(const Formula& psi, std::span<const Range> box, int grid_n);

} // namespace stlfunnel
