#pragma once

#include "stlfunnel/formula.hpp"

#include <string_view>
#include <vector>

namespace stlfunnel {

enum class FragmentClass {
    NonTemporal,
    SingleTemporal,
    SequentialConjunction,  // windows disjoint and ordered, b_i < a_{i+1}
    OverlappingConjunction,
};

std::string_view to_string(FragmentClass c);

/// One top-level temporal conjunct `op psi` with a non-temporal body.
struct TemporalConjunct {
    FormulaPtr formula;
    FormulaPtr psi;
    FormulaKind kind = FormulaKind::Always;
    /// Absolute steps whose state the conjunct depends on:
    /// [a,b] for F and G, [a + c2, c1 + b] for F[a,c1] G[c2,b].
    Interval window;
};

struct FragmentInfo {
    FragmentClass fragment = FragmentClass::NonTemporal;
    /// Top-level conjuncts in written order (empty for NonTemporal).
    std::vector<TemporalConjunct> conjuncts;
};

/// Throws FragmentError when the formula is outside the supported fragment.
FragmentClass classify_fragment(const Formula& f);

/// Classification plus the decomposition used to build funnel schedules.
FragmentInfo analyze_fragment(const FormulaPtr& f);

/// Flattens nested top-level conjunctions, left to right.
std::vector<FormulaPtr> flatten_conjunction(const FormulaPtr& f);

} // namespace stlfunnel
