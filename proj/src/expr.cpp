#include "stlfunnel/expr.hpp"

#include "stlfunnel/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace stlfunnel {

namespace {

ExprPtr make_node(ExprKind kind, std::vector<ExprPtr> args)
{
    auto e = std::make_shared<Expr>();
    e->kind = kind;
    e->args = std::move(args);
    return e;
}

bool is_additive(const Expr& e)
{
    return e.kind == ExprKind::Add || e.kind == ExprKind::Subtract;
}

void append(std::string& out, const Expr& e);

void append_wrapped(std::string& out, const Expr& e, bool wrap)
{
    if (wrap) {
        out += '(';
        append(out, e);
        out += ')';
    }
    else {
        append(out, e);
    }
}

void append_list(std::string& out, const char* fn, const Expr& e)
{
    out += fn;
    out += '(';
    for (std::size_t i = 0; i < e.args.size(); ++i) {
        if (i > 0) {
            out += ", ";
        }
        append(out, *e.args[i]);
    }
    out += ')';
}

void append(std::string& out, const Expr& e)
{
    switch (e.kind) {
    case ExprKind::Variable:
        out += e.name;
        break;
    case ExprKind::Constant:
        out += format_number(e.value);
        break;
    case ExprKind::Negate:
        out += "-(";
        append(out, *e.args[0]);
        out += ')';
        break;
    case ExprKind::Add:
    case ExprKind::Subtract:
        append(out, *e.args[0]);
        out += e.kind == ExprKind::Add ? " + " : " - ";
        append_wrapped(out, *e.args[1], is_additive(*e.args[1]));
        break;
    case ExprKind::Multiply:
        append_wrapped(out, *e.args[0], is_additive(*e.args[0]));
        out += " * ";
        append_wrapped(out, *e.args[1], is_additive(*e.args[1]) || e.args[1]->kind == ExprKind::Multiply);
        break;
    case ExprKind::Abs:
        append_list(out, "abs", e);
        break;
    case ExprKind::Norm2:
        append_list(out, "norm2", e);
        break;
    case ExprKind::NormInf:
        append_list(out, "norminf", e);
        break;
    }
}

} // namespace

double Expr::evaluate(std::span<const double> state) const
{
    switch (kind) {
    case ExprKind::Variable:
        return state[variable];
    case ExprKind::Constant:
        return value;
    case ExprKind::Negate:
        return -args[0]->evaluate(state);
    case ExprKind::Add:
        return args[0]->evaluate(state) + args[1]->evaluate(state);
    case ExprKind::Subtract:
        return args[0]->evaluate(state) - args[1]->evaluate(state);
    case ExprKind::Multiply:
        return args[0]->evaluate(state) * args[1]->evaluate(state);
    case ExprKind::Abs:
        return std::abs(args[0]->evaluate(state));
    case ExprKind::Norm2: {
        double sum = 0.0;
        for (const auto& a : args) {
            const double v = a->evaluate(state);
            sum += v * v;
        }
        return std::sqrt(sum);
    }
    case ExprKind::NormInf: {
        double m = 0.0;
        for (const auto& a : args) {
            m = std::max(m, std::abs(a->evaluate(state)));
        }
        return m;
    }
    }
    return 0.0;
}

bool Expr::is_constant() const
{
    if (kind == ExprKind::Variable) {
        return false;
    }
    return std::all_of(args.begin(), args.end(), [](const ExprPtr& a) { return a->is_constant(); });
}

ExprPtr make_variable(std::size_t index, std::string name)
{
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Variable;
    e->variable = index;
    e->name = std::move(name);
    return e;
}

ExprPtr make_constant(double value)
{
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Constant;
    e->value = value;
    return e;
}

ExprPtr make_negate(ExprPtr e) { return make_node(ExprKind::Negate, {std::move(e)}); }

ExprPtr make_add(ExprPtr lhs, ExprPtr rhs) { return make_node(ExprKind::Add, {std::move(lhs), std::move(rhs)}); }

ExprPtr make_subtract(ExprPtr lhs, ExprPtr rhs)
{
    return make_node(ExprKind::Subtract, {std::move(lhs), std::move(rhs)});
}

ExprPtr make_multiply(ExprPtr lhs, ExprPtr rhs)
{
    if (!lhs->is_constant() && !rhs->is_constant()) {
        throw DomainError("product of two state-dependent expressions is not supported");
    }
    return make_node(ExprKind::Multiply, {std::move(lhs), std::move(rhs)});
}

ExprPtr make_abs(ExprPtr e) { return make_node(ExprKind::Abs, {std::move(e)}); }

ExprPtr make_norm2(std::vector<ExprPtr> components)
{
    if (components.empty()) {
        throw DomainError("norm2 needs at least one component");
    }
    return make_node(ExprKind::Norm2, std::move(components));
}

ExprPtr make_norm_inf(std::vector<ExprPtr> components)
{
    if (components.empty()) {
        throw DomainError("norminf needs at least one component");
    }
    return make_node(ExprKind::NormInf, std::move(components));
}

bool structurally_equal(const Expr& a, const Expr& b)
{
    if (a.kind != b.kind || a.args.size() != b.args.size()) {
        return false;
    }
    if (a.kind == ExprKind::Variable && a.variable != b.variable) {
        return false;
    }
    if (a.kind == ExprKind::Constant && a.value != b.value) {
        return false;
    }
    for (std::size_t i = 0; i < a.args.size(); ++i) {
        if (!structurally_equal(*a.args[i], *b.args[i])) {
            return false;
        }
    }
    return true;
}

void collect_variables(const Expr& e, std::vector<bool>& used)
{
    if (e.kind == ExprKind::Variable) {
        if (e.variable >= used.size()) {
            used.resize(e.variable + 1, false);
        }
        used[e.variable] = true;
    }
    for (const auto& a : e.args) {
        collect_variables(*a, used);
    }
}

std::string to_string(const Expr& e)
{
    std::string out;
    append(out, e);
    return out;
}

std::string format_number(double v)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

} // namespace stlfunnel
