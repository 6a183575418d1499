#pragma once

#include "stlfunnel/formula.hpp"

#include <span>
#include <string>
#include <string_view>

namespace stlfunnel {

/// Parses general STL over the given state schema. Temporal operators may nest freely.
///
/// Grammar:
///   formula  := conj
///   conj     := disj ('&' disj)*
///   disj     := unary ('|' unary)*
///   unary    := '!' unary | temporal | 'true' | atom | '(' formula ')'
///   temporal := ('G'|'F') '[' int ',' int ']' unary
///             | 'F' '[' int ',' int ']' 'G' '[' int ',' int ']' unary
///   atom     := expr ('<='|'<'|'>='|'>') expr
///   expr     := term (('+'|'-') term)*
///   term     := factor ('*' factor)*
///   factor   := '-' factor | number | name | fn '(' expr (',' expr)* ')' | '(' expr ')'
///   fn       := 'abs' | 'norm2' | 'norminf'
///
/// Throws ParseError carrying the line and column of the failure.
FormulaPtr parse_stl(std::string_view text, std::span<const std::string> schema);

/// Like parse_stl, then rejects formulas outside the supported fragment with FragmentError.
FormulaPtr parse_formula(std::string_view text, std::span<const std::string> schema);

ExprPtr parse_expression(std::string_view text, std::span<const std::string> schema);

} // namespace stlfunnel
