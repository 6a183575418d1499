#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace stlfunnel {

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

enum class ExprKind {
    Variable,
    Constant,
    Negate,
    Add,
    Subtract,
    Multiply, // one operand is variable free
    Abs,
    Norm2,
    NormInf,
};

/// Immutable arithmetic expression over named state components.
struct Expr {
    ExprKind kind = ExprKind::Constant;
    double value = 0.0;         // Constant
    std::size_t variable = 0;   // Variable: index into the state schema
    std::string name;           // Variable: display name
    std::vector<ExprPtr> args;  // operands, in order

    double evaluate(std::span<const double> state) const;
    bool is_constant() const;
};

ExprPtr make_variable(std::size_t index, std::string name);
ExprPtr make_constant(double value);
ExprPtr make_negate(ExprPtr e);
ExprPtr make_add(ExprPtr lhs, ExprPtr rhs);
ExprPtr make_subtract(ExprPtr lhs, ExprPtr rhs);
/// Throws DomainError unless at least one operand is variable free.
ExprPtr make_multiply(ExprPtr lhs, ExprPtr rhs);
ExprPtr make_abs(ExprPtr e);
ExprPtr make_norm2(std::vector<ExprPtr> components);
ExprPtr make_norm_inf(std::vector<ExprPtr> components);

bool structurally_equal(const Expr& a, const Expr& b);

/// Marks every state index referenced by `e`.
void collect_variables(const Expr& e, std::vector<bool>& used);

/// Concrete syntax accepted back by the parser.
std::string to_string(const Expr& e);

/// Shortest decimal rendering that reads back to the same double.
std::string format_number(double v);

} // namespace stlfunnel
