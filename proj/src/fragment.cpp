#include "stlfunnel/fragment.hpp"

#include "stlfunnel/error.hpp"

#include <algorithm>

namespace stlfunnel {

namespace {

void flatten(const FormulaPtr& f, std::vector<FormulaPtr>& out)
{
    if (f->kind == FormulaKind::And) {
        flatten(f->lhs, out);
        flatten(f->rhs, out);
    }
    else {
        out.push_back(f);
    }
}

Interval window_of(const Formula& f)
{
    if (f.kind == FormulaKind::EventuallyAlways) {
        return {f.outer.lo + f.inner.lo, f.outer.hi + f.inner.hi};
    }
    return f.outer;
}

} // namespace

std::string_view to_string(FragmentClass c)
{
    switch (c) {
    case FragmentClass::NonTemporal:
        return "non_temporal";
    case FragmentClass::SingleTemporal:
        return "single_temporal";
    case FragmentClass::SequentialConjunction:
        return "sequential_conjunction";
    case FragmentClass::OverlappingConjunction:
        return "overlapping_conjunction";
    }
    return "unknown";
}

std::vector<FormulaPtr> flatten_conjunction(const FormulaPtr& f)
{
    std::vector<FormulaPtr> out;
    flatten(f, out);
    return out;
}

FragmentInfo analyze_fragment(const FormulaPtr& f)
{
    FragmentInfo info;
    if (!has_temporal(*f)) {
        info.fragment = FragmentClass::NonTemporal;
        return info;
    }
    for (const auto& c : flatten_conjunction(f)) {
        if (!is_temporal_kind(c->kind)) {
            if (has_temporal(*c)) {
                throw FragmentError("temporal operators may only appear as top-level conjuncts, found '" +
                                    to_string(*c) + "'");
            }
            throw FragmentError("non-temporal conjunct '" + to_string(*c) +
                                "' mixed with temporal conjuncts; wrap it in a temporal operator");
        }
        if (has_temporal(*c->lhs)) {
            if (c->kind == FormulaKind::Eventually && c->lhs->kind == FormulaKind::Always && !has_temporal(*c->lhs->lhs)) {
                throw FragmentError("nested temporal operators in '" + to_string(*c) +
                                    "'; write F[a,c1] G[c2,b] (...) without parentheses between F and G");
            }
            throw FragmentError("nested temporal operators outside the fragment in '" + to_string(*c) + "'");
        }
        info.conjuncts.push_back({c, c->lhs, c->kind, window_of(*c)});
    }
    if (info.conjuncts.size() == 1) {
        info.fragment = FragmentClass::SingleTemporal;
        return info;
    }
    std::vector<Interval> windows;
    for (const auto& c : info.conjuncts) {
        windows.push_back(c.window);
    }
    std::sort(windows.begin(), windows.end(), [](Interval a, Interval b) { return a.lo < b.lo || (a.lo == b.lo && a.hi < b.hi); });
    info.fragment = FragmentClass::SequentialConjunction;
    for (std::size_t i = 0; i + 1 < windows.size(); ++i) {
        if (!(windows[i].hi < windows[i + 1].lo)) {
            info.fragment = FragmentClass::OverlappingConjunction;
            break;
        }
    }
    return info;
}

FragmentClass classify_fragment(const Formula& f)
{
    // analyze_fragment needs shared ownership only to hand out conjunct pointers
    auto alias = std::shared_ptr<const Formula>(std::shared_ptr<const Formula>{}, &f);
    return analyze_fragment(alias).fragment;
}

} // namespace stlfunnel
