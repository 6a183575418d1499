#include "stlfunnel/formula.hpp"

#include "stlfunnel/error.hpp"

#include <algorithm>

namespace stlfunnel {

namespace {

void check_interval(Interval i)
{
    if (i.lo < 0) {
        throw DomainError("interval lower bound " + std::to_string(i.lo) + " is negative");
    }
    if (i.lo > i.hi) {
        throw DomainError("interval [" + std::to_string(i.lo) + "," + std::to_string(i.hi) +
                          "] has lower bound greater than upper bound");
    }
}

std::string interval_text(Interval i) { return "[" + std::to_string(i.lo) + "," + std::to_string(i.hi) + "]"; }

const char* relation_text(Relation r)
{
    switch (r) {
    case Relation::LessEqual:
        return " <= ";
    case Relation::Less:
        return " < ";
    case Relation::GreaterEqual:
        return " >= ";
    case Relation::Greater:
        return " > ";
    }
    return " <= ";
}

void append(std::string& out, const Formula& f);

void append_paren(std::string& out, const Formula& f)
{
    out += '(';
    append(out, f);
    out += ')';
}

// Precedence follows the grammar: '&' binds loosest, then '|', then unary forms.
void append(std::string& out, const Formula& f)
{
    switch (f.kind) {
    case FormulaKind::True:
        out += "true";
        break;
    case FormulaKind::Atom:
        out += to_string(*f.atom.lhs);
        out += relation_text(f.atom.rel);
        out += to_string(*f.atom.rhs);
        break;
    case FormulaKind::Not:
        out += '!';
        if (f.lhs->kind == FormulaKind::And || f.lhs->kind == FormulaKind::Or || f.lhs->kind == FormulaKind::Atom) {
            append_paren(out, *f.lhs);
        }
        else {
            append(out, *f.lhs);
        }
        break;
    case FormulaKind::And:
        append(out, *f.lhs);
        out += " & ";
        if (f.rhs->kind == FormulaKind::And) {
            append_paren(out, *f.rhs);
        }
        else {
            append(out, *f.rhs);
        }
        break;
    case FormulaKind::Or:
        if (f.lhs->kind == FormulaKind::And) {
            append_paren(out, *f.lhs);
        }
        else {
            append(out, *f.lhs);
        }
        out += " | ";
        if (f.rhs->kind == FormulaKind::And || f.rhs->kind == FormulaKind::Or) {
            append_paren(out, *f.rhs);
        }
        else {
            append(out, *f.rhs);
        }
        break;
    case FormulaKind::Eventually:
        out += "F" + interval_text(f.outer);
        append_paren(out, *f.lhs);
        break;
    case FormulaKind::Always:
        out += "G" + interval_text(f.outer);
        append_paren(out, *f.lhs);
        break;
    case FormulaKind::EventuallyAlways:
        out += "F" + interval_text(f.outer) + " G" + interval_text(f.inner);
        append_paren(out, *f.lhs);
        break;
    }
}

FormulaPtr make_unary(FormulaKind kind, FormulaPtr f)
{
    auto node = std::make_shared<Formula>();
    node->kind = kind;
    node->lhs = std::move(f);
    return node;
}

FormulaPtr make_binary(FormulaKind kind, FormulaPtr a, FormulaPtr b)
{
    auto node = std::make_shared<Formula>();
    node->kind = kind;
    node->lhs = std::move(a);
    node->rhs = std::move(b);
    return node;
}

} // namespace

FormulaPtr make_true() { return std::make_shared<Formula>(); }

FormulaPtr make_atom(ExprPtr lhs, Relation rel, ExprPtr rhs, std::string label)
{
    auto node = std::make_shared<Formula>();
    node->kind = FormulaKind::Atom;
    const bool upper = rel == Relation::LessEqual || rel == Relation::Less;
    node->atom.h = upper ? make_subtract(rhs, lhs) : make_subtract(lhs, rhs);
    node->atom.lhs = std::move(lhs);
    node->atom.rel = rel;
    node->atom.rhs = std::move(rhs);
    node->atom.label = std::move(label);
    return node;
}

FormulaPtr make_not(FormulaPtr f) { return make_unary(FormulaKind::Not, std::move(f)); }

FormulaPtr make_and(FormulaPtr a, FormulaPtr b) { return make_binary(FormulaKind::And, std::move(a), std::move(b)); }

FormulaPtr make_or(FormulaPtr a, FormulaPtr b) { return make_binary(FormulaKind::Or, std::move(a), std::move(b)); }

FormulaPtr make_eventually(Interval i, FormulaPtr f)
{
    check_interval(i);
    auto node = std::make_shared<Formula>();
    node->kind = FormulaKind::Eventually;
    node->outer = i;
    node->lhs = std::move(f);
    return node;
}

FormulaPtr make_always(Interval i, FormulaPtr f)
{
    check_interval(i);
    auto node = std::make_shared<Formula>();
    node->kind = FormulaKind::Always;
    node->outer = i;
    node->lhs = std::move(f);
    return node;
}

FormulaPtr make_eventually_always(Interval f_part, Interval g_part, FormulaPtr f)
{
    check_interval(f_part);
    check_interval(g_part);
    auto node = std::make_shared<Formula>();
    node->kind = FormulaKind::EventuallyAlways;
    node->outer = f_part;
    node->inner = g_part;
    node->lhs = std::move(f);
    return node;
}

bool is_temporal_kind(FormulaKind k)
{
    return k == FormulaKind::Eventually || k == FormulaKind::Always || k == FormulaKind::EventuallyAlways;
}

bool has_temporal(const Formula& f)
{
    if (is_temporal_kind(f.kind)) {
        return true;
    }
    return (f.lhs && has_temporal(*f.lhs)) || (f.rhs && has_temporal(*f.rhs));
}

int horizon(const Formula& f)
{
    switch (f.kind) {
    case FormulaKind::True:
    case FormulaKind::Atom:
        return 0;
    case FormulaKind::Not:
        return horizon(*f.lhs);
    case FormulaKind::And:
    case FormulaKind::Or:
        return std::max(horizon(*f.lhs), horizon(*f.rhs));
    case FormulaKind::Eventually:
    case FormulaKind::Always:
        return f.outer.hi + horizon(*f.lhs);
    case FormulaKind::EventuallyAlways:
        return f.outer.hi + f.inner.hi + horizon(*f.lhs);
    }
    return 0;
}

bool structurally_equal(const Formula& a, const Formula& b)
{
    if (a.kind != b.kind) {
        return false;
    }
    switch (a.kind) {
    case FormulaKind::True:
        return true;
    case FormulaKind::Atom:
        return a.atom.rel == b.atom.rel && structurally_equal(*a.atom.lhs, *b.atom.lhs) &&
               structurally_equal(*a.atom.rhs, *b.atom.rhs);
    case FormulaKind::Not:
        return structurally_equal(*a.lhs, *b.lhs);
    case FormulaKind::And:
    case FormulaKind::Or:
        return structurally_equal(*a.lhs, *b.lhs) && structurally_equal(*a.rhs, *b.rhs);
    case FormulaKind::Eventually:
    case FormulaKind::Always:
        return a.outer == b.outer && structurally_equal(*a.lhs, *b.lhs);
    case FormulaKind::EventuallyAlways:
        return a.outer == b.outer && a.inner == b.inner && structurally_equal(*a.lhs, *b.lhs);
    }
    return false;
}

std::string to_string(const Formula& f)
{
    std::string out;
    append(out, f);
    return out;
}

} // namespace stlfunnel
