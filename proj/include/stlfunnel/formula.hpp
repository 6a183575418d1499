#pragma once

#include "stlfunnel/expr.hpp"

#include <memory>
#include <span>
#include <string>

namespace stlfunnel {

/// Closed interval of discrete time steps, lo <= hi.
struct Interval {
    int lo = 0;
    int hi = 0;

    bool contains(int t) const { return lo <= t && t <= hi; }
    friend bool operator==(const Interval&, const Interval&) = default;
};

enum class Relation { LessEqual, Less, GreaterEqual, Greater };

/// Predicate `lhs rel rhs`, normalized to h(s) >= 0.
/// Strict and non-strict comparisons share the same h.
struct Atom {
    ExprPtr lhs;
    Relation rel = Relation::LessEqual;
    ExprPtr rhs;
    ExprPtr h;
    std::string label;
};

enum class FormulaKind {
    True,
    Atom,
    Not,
    And,
    Or,
    Eventually,       // F[a,b]
    Always,           // G[a,b]
    EventuallyAlways, // F[a,c1] G[c2,b]
};

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Formula {
    FormulaKind kind = FormulaKind::True;
    Atom atom;       // kind == Atom
    FormulaPtr lhs;  // operand of Not and temporal operators, left operand of And/Or
    FormulaPtr rhs;  // right operand of And/Or
    Interval outer;  // F/G interval; the F part [a,c1] of F G
    Interval inner;  // the G part [c2,b] of F G
};

FormulaPtr make_true();
FormulaPtr make_atom(ExprPtr lhs, Relation rel, ExprPtr rhs, std::string label = {});
FormulaPtr make_not(FormulaPtr f);
FormulaPtr make_and(FormulaPtr a, FormulaPtr b);
FormulaPtr make_or(FormulaPtr a, FormulaPtr b);
/// Interval bounds must satisfy 0 <= lo <= hi, otherwise DomainError.
FormulaPtr make_eventually(Interval i, FormulaPtr f);
FormulaPtr make_always(Interval i, FormulaPtr f);
FormulaPtr make_eventually_always(Interval f_part, Interval g_part, FormulaPtr f);

bool is_temporal_kind(FormulaKind k);
/// True when the formula contains any temporal operator.
bool has_temporal(const Formula& f);

/// Number of future steps needed to evaluate the formula at time t.
int horizon(const Formula& f);

bool structurally_equal(const Formula& a, const Formula& b);

/// Concrete syntax accepted back by the parser.
std::string to_string(const Formula& f);

} // namespace stlfunnel
