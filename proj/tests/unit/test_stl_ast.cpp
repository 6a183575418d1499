#include "doctest.h"

#include "oracles/stl_oracle.hpp"

#include "stlfunnel/error.hpp"
#include "stlfunnel/fragment.hpp"
#include "stlfunnel/parser.hpp"

#include <array>
#include <cmath>
#include <string>

using namespace stlfunnel;

namespace {

const std::vector<std::string> kPendulum = {"theta", "omega"};
const std::vector<std::string> kPlanar = {"x", "y", "theta"};

double h_at(const Formula& atom_node, const StateVector& s)
{
    REQUIRE(atom_node.kind == FormulaKind::Atom);
    return atom_node.atom.h->evaluate(s);
}

} // namespace

TEST_CASE("pendulum window formula parses into always over a conjunction of atoms")
{
    const auto f = parse_formula("G[400,700](abs(theta) <= 0.05 & abs(omega) <= 0.05)", kPendulum);
    REQUIRE(f->kind == FormulaKind::Always);
    CHECK(f->outer.lo == 400);
    CHECK(f->outer.hi == 700);
    const auto& body = *f->lhs;
    REQUIRE(body.kind == FormulaKind::And);
    CHECK(h_at(*body.lhs, {0.02, 0.0}) == doctest::Approx(0.03).epsilon(1e-15));
    CHECK(h_at(*body.lhs, {-0.07, 0.0}) == doctest::Approx(-0.02).epsilon(1e-15));
    CHECK(h_at(*body.rhs, {0.0, 0.01}) == doctest::Approx(0.04).epsilon(1e-15));
}

TEST_CASE("norm2 atom in an eventually formula")
{
    const auto f = parse_formula("F[0,50](norm2(x-3, y-1) <= 0.3)", kPlanar);
    REQUIRE(f->kind == FormulaKind::Eventually);
    CHECK(f->outer.lo == 0);
    CHECK(f->outer.hi == 50);
    REQUIRE(f->lhs->kind == FormulaKind::Atom);
    CHECK(h_at(*f->lhs, {3.0, 1.0, 0.0}) == doctest::Approx(0.3));
    CHECK(h_at(*f->lhs, {6.0, 5.0, 1.0}) == doctest::Approx(0.3 - 5.0));
}

TEST_CASE("reversed interval is rejected")
{
    const std::vector<std::string> schema = {"p"};
    CHECK_THROWS_AS(parse_formula("G[700,400](p >= 0)", schema), ParseError);
    try {
        parse_formula("G[700,400](p >= 0)", schema);
    } catch (const ParseError& e) {
        CHECK(e.line() == 1);
        CHECK(e.column() >= 1);
        CHECK(std::string(e.what()).find("interval") != std::string::npos);
    }
}

TEST_CASE("syntax errors carry line and column")
{
    const std::vector<std::string> schema = {"x"};
    try {
        parse_formula("G[0,5](x <= 1 &\n   x >=)", schema);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
        CHECK(e.column() == 8);
    }
    CHECK_THROWS_AS(parse_formula("G[0,5](x <= 1", schema), ParseError);
    CHECK_THROWS_AS(parse_formula("G[0,](x <= 1)", schema), ParseError);
    CHECK_THROWS_AS(parse_formula("x <= 1 $", schema), ParseError);
}

TEST_CASE("unknown variables are rejected by name")
{
    try {
        parse_formula("G[0,5](speed <= 1)", kPlanar);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("speed") != std::string::npos);
        CHECK(e.column() == 8);
    }
}

TEST_CASE("fragment classification")
{
    const auto eq = parse_formula("G[400,700](abs(theta) <= 0.05 & abs(omega) <= 0.05) & "
                                  "G[1000,1200](abs(theta - 0.5) <= 0.05 & abs(omega) <= 0.05) & "
                                  "G[1700,2000](abs(theta + 0.5) <= 0.05 & abs(omega) <= 0.05)",
                                  kPendulum);
    CHECK(classify_fragment(*eq) == FragmentClass::SequentialConjunction);

    const auto overlap = parse_formula("G[0,100](norm2(x-2, y-2) <= 1.5) & F[0,50](norm2(x-3, y-1) <= 0.3) & "
                                       "F[50,90](norm2(x-1, y-3) <= 0.3)",
                                       kPlanar);
    CHECK(classify_fragment(*overlap) == FragmentClass::OverlappingConjunction);

    CHECK(classify_fragment(*parse_formula("x <= 1", kPlanar)) == FragmentClass::NonTemporal);
    CHECK(classify_fragment(*parse_formula("F[2,9] G[0,3] (x <= 1)", kPlanar)) == FragmentClass::SingleTemporal);

    // touching windows are not disjoint
    CHECK(classify_fragment(*parse_formula("G[0,5](x <= 1) & G[5,9](x >= 0)", kPlanar)) ==
          FragmentClass::OverlappingConjunction);
    // disjoint windows are sequential in whatever order they are written
    CHECK(classify_fragment(*parse_formula("G[6,9](x <= 1) & G[0,5](x >= 0)", kPlanar)) ==
          FragmentClass::SequentialConjunction);

    const std::vector<std::string> p = {"p"};
    CHECK_THROWS_AS(parse_formula("F[0,10](G[0,5](F[0,2] (p >= 0)))", p), FragmentError);
    CHECK_THROWS_AS(parse_formula("!G[0,5](p >= 0)", p), FragmentError);
    CHECK_THROWS_AS(parse_formula("G[0,5](p >= 0) | F[0,5](p <= 1)", p), FragmentError);
    CHECK_THROWS_AS(parse_formula("G[0,5](F[0,2](p >= 0))", p), FragmentError);
    // parse_stl keeps the general grammar
    CHECK_NOTHROW(parse_stl("F[0,10](G[0,5](F[0,2] (p >= 0)))", p));
}

TEST_CASE("conjunct windows of the decomposition")
{
    const auto info = analyze_fragment(parse_formula("F[2,4](x <= 1) & G[6,8](y >= 0) & F[10,12] G[1,3] (x >= 2)", kPlanar));
    REQUIRE(info.conjuncts.size() == 3);
    CHECK(info.fragment == FragmentClass::SequentialConjunction);
    CHECK(info.conjuncts[0].window.lo == 2);
    CHECK(info.conjuncts[0].window.hi == 4);
    CHECK(info.conjuncts[2].kind == FormulaKind::EventuallyAlways);
    CHECK(info.conjuncts[2].window.lo == 11);
    CHECK(info.conjuncts[2].window.hi == 15);
}

TEST_CASE("print then parse is a fixed point on random formulas")
{
    oracle::Generator gen(20240501);
    for (int i = 0; i < 500; ++i) {
        const auto f = gen.formula(gen.integer(1, 5));
        const std::string text = to_string(*f);
        const auto g = parse_stl(text, gen.schema());
        CHECK_MESSAGE(structurally_equal(*f, *g), text);
        CHECK(to_string(*g) == text);
    }
}

TEST_CASE("hand-written round trips")
{
    const std::array<const char*, 6> texts = {
        "G[0,5](x <= 1)",
        "F[3,7](!(x > 2) | y < -1.5)",
        "F[0,4] G[1,2] (abs(x - 2) <= 0.25)",
        "G[1,2](norminf(x, y - 1) <= 1e-3)",
        "(x + 2 * y >= 3) & (-x <= 4)",
        "true",
    };
    for (const char* t : texts) {
        const auto f = parse_stl(t, kPlanar);
        const auto g = parse_stl(to_string(*f), kPlanar);
        CHECK_MESSAGE(structurally_equal(*f, *g), t);
    }
}

TEST_CASE("comparisons normalize to a margin that is nonnegative when they hold")
{
    oracle::Generator gen(77);
    const char* rels[] = {"<=", "<", ">=", ">"};
    for (int i = 0; i < 100; ++i) {
        const auto e = gen.expr(3);
        const std::string etext = to_string(*e);
        const double c = std::round(gen.uniform(-4.0, 4.0) * 100.0) / 100.0;
        const int r = gen.integer(0, 3);
        const std::string text = "(" + etext + ") " + rels[r] + " " + format_number(c);
        const auto f = parse_stl(text, gen.schema());
        REQUIRE(f->kind == FormulaKind::Atom);
        for (int k = 0; k < 100; ++k) {
            StateVector s = {gen.uniform(-5, 5), gen.uniform(-5, 5), gen.uniform(-5, 5)};
            const double ev = oracle::expr_value(*e, s);
            const double expected = r < 2 ? c - ev : ev - c;
            CHECK(f->atom.h->evaluate(s) == doctest::Approx(expected).epsilon(1e-12));
        }
    }
}

TEST_CASE("classification is total on parser output")
{
    oracle::Generator gen(4242);
    int classified = 0;
    int rejected = 0;
    for (int i = 0; i < 500; ++i) {
        const auto f = parse_stl(to_string(*gen.formula(gen.integer(1, 5))), gen.schema());
        try {
            (void)classify_fragment(*f);
            ++classified;
        } catch (const FragmentError&) {
            ++rejected;
        }
    }
    CHECK(classified + rejected == 500);
    CHECK(classified > 0);
    CHECK(rejected > 0);
}

TEST_CASE("expression printing keeps precedence")
{
    const auto e = parse_expression("-(x - y) * 2 + abs(x)", kPlanar);
    const auto again = parse_expression(to_string(*e), kPlanar);
    CHECK(structurally_equal(*e, *again));
    const StateVector s = {1.5, -2.0, 0.0};
    CHECK(e->evaluate(s) == doctest::Approx(-(1.5 + 2.0) * 2 + 1.5));
}
