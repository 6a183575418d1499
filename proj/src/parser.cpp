#include "stlfunnel/parser.hpp"

#include "stlfunnel/error.hpp"
#include "stlfunnel/fragment.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <optional>
#include <vector>

namespace stlfunnel {

namespace {

enum class Tok {
    Ident,
    Number,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Amp,
    Pipe,
    Bang,
    Plus,
    Minus,
    Star,
    Le,
    Lt,
    Ge,
    Gt,
    End,
};

struct Token {
    Tok kind;
    std::string text;
    int line;
    int column;
};

std::vector<Token> tokenize(std::string_view src)
{
    std::vector<Token> out;
    int line = 1;
    int col = 1;
    std::size_t i = 0;
    auto advance = [&](std::size_t n) {
        for (std::size_t k = 0; k < n; ++k) {
            if (src[i] == '\n') {
                ++line;
                col = 1;
            }
            else {
                ++col;
            }
            ++i;
        }
    };
    while (i < src.size()) {
        const char c = src[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            advance(1);
            continue;
        }
        const int l = line;
        const int cl = col;
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i;
            while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) {
                ++j;
            }
            out.push_back({Tok::Ident, std::string(src.substr(i, j - i)), l, cl});
            advance(j - i);
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            std::size_t j = i;
            while (j < src.size() && (std::isdigit(static_cast<unsigned char>(src[j])) || src[j] == '.')) {
                ++j;
            }
            if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
                std::size_t k = j + 1;
                if (k < src.size() && (src[k] == '+' || src[k] == '-')) {
                    ++k;
                }
                if (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) {
                    while (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) {
                        ++k;
                    }
                    j = k;
                }
            }
            out.push_back({Tok::Number, std::string(src.substr(i, j - i)), l, cl});
            advance(j - i);
            continue;
        }
        auto two = src.substr(i, 2);
        if (two == "<=" || two == ">=") {
            out.push_back({two == "<=" ? Tok::Le : Tok::Ge, std::string(two), l, cl});
            advance(2);
            continue;
        }
        Tok kind;
        switch (c) {
        case '(': kind = Tok::LParen; break;
        case ')': kind = Tok::RParen; break;
        case '[': kind = Tok::LBracket; break;
        case ']': kind = Tok::RBracket; break;
        case ',': kind = Tok::Comma; break;
        case '&': kind = Tok::Amp; break;
        case '|': kind = Tok::Pipe; break;
        case '!': kind = Tok::Bang; break;
        case '+': kind = Tok::Plus; break;
        case '-': kind = Tok::Minus; break;
        case '*': kind = Tok::Star; break;
        case '<': kind = Tok::Lt; break;
        case '>': kind = Tok::Gt; break;
        default:
            throw ParseError(std::string("unexpected character '") + c + "'", l, cl);
        }
        out.push_back({kind, std::string(1, c), l, cl});
        advance(1);
    }
    out.push_back({Tok::End, "", line, col});
    return out;
}

class Parser {
public:
    Parser(std::vector<Token> tokens, std::span<const std::string> schema)
        : tokens_(std::move(tokens)), schema_(schema)
    {
    }

    FormulaPtr parse_top()
    {
        auto f = formula();
        expect(Tok::End, "end of input");
        return f;
    }

    ExprPtr parse_expr_top()
    {
        auto e = expr();
        expect(Tok::End, "end of input");
        return e;
    }

private:
    const Token& peek(std::size_t ahead = 0) const
    {
        return tokens_[std::min(pos_ + ahead, tokens_.size() - 1)];
    }

    bool accept(Tok k)
    {
        if (peek().kind == k) {
            ++pos_;
            return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& msg, const Token& at)
    {
        failed_at_ = pos_;
        throw ParseError(msg, at.line, at.column);
    }

    const Token& expect(Tok k, const char* what)
    {
        if (peek().kind != k) {
            const auto& t = peek();
            fail(std::string("expected ") + what + (t.kind == Tok::End ? " but reached end of input"
                                                                       : " but found '" + t.text + "'"),
                 t);
        }
        return tokens_[pos_++];
    }

    bool is_keyword_at(const char* word, std::size_t ahead = 0) const
    {
        return peek(ahead).kind == Tok::Ident && peek(ahead).text == word;
    }

    FormulaPtr formula()
    {
        auto f = disjunction();
        while (accept(Tok::Amp)) {
            f = make_and(f, disjunction());
        }
        return f;
    }

    FormulaPtr disjunction()
    {
        auto f = unary();
        while (accept(Tok::Pipe)) {
            f = make_or(f, unary());
        }
        return f;
    }

    FormulaPtr unary()
    {
        if (accept(Tok::Bang)) {
            return make_not(unary());
        }
        if ((is_keyword_at("G") || is_keyword_at("F")) && peek(1).kind == Tok::LBracket) {
            return temporal();
        }
        if (is_keyword_at("true")) {
            ++pos_;
            return make_true();
        }
        // '(' opens either a parenthesized formula or an atom whose lhs starts with a
        // parenthesized expression; try the atom first and backtrack.
        const std::size_t start = pos_;
        try {
            return atom();
        }
        catch (const ParseError& atom_error) {
            if (tokens_[start].kind != Tok::LParen) {
                throw;
            }
            const std::size_t atom_reach = failed_at_;
            pos_ = start + 1;
            try {
                auto f = formula();
                expect(Tok::RParen, "')'");
                return f;
            }
            catch (const ParseError&) {
                // report whichever reading got further
                if (atom_reach > failed_at_) {
                    failed_at_ = atom_reach;
                    throw atom_error;
                }
                throw;
            }
        }
    }

    FormulaPtr temporal()
    {
        const bool eventually = peek().text == "F";
        ++pos_;
        const Interval first = interval();
        if (eventually && is_keyword_at("G") && peek(1).kind == Tok::LBracket) {
            ++pos_;
            const Interval second = interval();
            return make_eventually_always(first, second, unary());
        }
        auto body = unary();
        return eventually ? make_eventually(first, body) : make_always(first, body);
    }

    Interval interval()
    {
        const Token& open = expect(Tok::LBracket, "'['");
        const int lo = integer();
        expect(Tok::Comma, "','");
        const int hi = integer();
        expect(Tok::RBracket, "']'");
        if (lo > hi) {
            fail("interval [" + std::to_string(lo) + "," + std::to_string(hi) +
                     "] has lower bound greater than upper bound",
                 open);
        }
        return {lo, hi};
    }

    int integer()
    {
        const Token& t = peek();
        if (t.kind != Tok::Number) {
            fail("expected a nonnegative integer time step", t);
        }
        int v = 0;
        auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        if (res.ec != std::errc() || res.ptr != t.text.data() + t.text.size()) {
            fail("time bound '" + t.text + "' is not a nonnegative integer", t);
        }
        ++pos_;
        return v;
    }

    FormulaPtr atom()
    {
        auto lhs = expr();
        Relation rel;
        switch (peek().kind) {
        case Tok::Le: rel = Relation::LessEqual; break;
        case Tok::Lt: rel = Relation::Less; break;
        case Tok::Ge: rel = Relation::GreaterEqual; break;
        case Tok::Gt: rel = Relation::Greater; break;
        default:
            fail("expected a comparison ('<=', '<', '>=', '>')", peek());
        }
        ++pos_;
        auto rhs = expr();
        return make_atom(std::move(lhs), rel, std::move(rhs));
    }

    ExprPtr expr()
    {
        auto e = term();
        while (true) {
            if (accept(Tok::Plus)) {
                e = make_add(e, term());
            }
            else if (accept(Tok::Minus)) {
                e = make_subtract(e, term());
            }
            else {
                return e;
            }
        }
    }

    ExprPtr term()
    {
        auto e = factor();
        while (peek().kind == Tok::Star) {
            const Token& star = tokens_[pos_++];
            auto rhs = factor();
            try {
                e = make_multiply(e, rhs);
            }
            catch (const DomainError& err) {
                fail(err.what(), star);
            }
        }
        return e;
    }

    ExprPtr factor()
    {
        if (accept(Tok::Minus)) {
            if (peek().kind == Tok::Number) {
                return make_constant(-number());
            }
            return make_negate(factor());
        }
        const Token& t = peek();
        switch (t.kind) {
        case Tok::Number:
            return make_constant(number());
        case Tok::LParen: {
            ++pos_;
            auto e = expr();
            expect(Tok::RParen, "')'");
            return e;
        }
        case Tok::Ident:
            return name_or_call();
        default:
            fail(t.kind == Tok::End ? "unexpected end of input" : "unexpected '" + t.text + "'", t);
        }
    }

    double number()
    {
        const Token& t = tokens_[pos_];
        double v = 0.0;
        auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        if (res.ec != std::errc() || res.ptr != t.text.data() + t.text.size()) {
            fail("malformed number '" + t.text + "'", t);
        }
        ++pos_;
        return v;
    }

    ExprPtr name_or_call()
    {
        const Token& t = tokens_[pos_];
        if ((t.text == "abs" || t.text == "norm2" || t.text == "norminf") && peek(1).kind == Tok::LParen) {
            pos_ += 2;
            std::vector<ExprPtr> args;
            args.push_back(expr());
            while (accept(Tok::Comma)) {
                args.push_back(expr());
            }
            expect(Tok::RParen, "')'");
            if (t.text == "abs") {
                if (args.size() != 1) {
                    fail("abs takes exactly one argument", t);
                }
                return make_abs(args[0]);
            }
            return t.text == "norm2" ? make_norm2(std::move(args)) : make_norm_inf(std::move(args));
        }
        auto it = std::find(schema_.begin(), schema_.end(), t.text);
        if (it == schema_.end()) {
            fail("unknown variable '" + t.text + "'", t);
        }
        ++pos_;
        return make_variable(static_cast<std::size_t>(it - schema_.begin()), t.text);
    }

    std::vector<Token> tokens_;
    std::span<const std::string> schema_;
    std::size_t pos_ = 0;
    std::size_t failed_at_ = 0;
};

} // namespace

ParseError::ParseError(const std::string& message, int line, int column)
    : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + message),
      message_(message),
      line_(line),
      column_(column)
{
}

ConfigError::ConfigError(std::string key, const std::string& message)
    : Error(key.empty() ? message : key + ": " + message), key_(std::move(key))
{
}

FormulaPtr parse_stl(std::string_view text, std::span<const std::string> schema)
{
    Parser p(tokenize(text), schema);
    return p.parse_top();
}

FormulaPtr parse_formula(std::string_view text, std::span<const std::string> schema)
{
    auto f = parse_stl(text, schema);
    classify_fragment(*f);
    return f;
}

ExprPtr parse_expression(std::string_view text, std::span<const std::string> schema)
{
    Parser p(tokenize(text), schema);
    return p.parse_expr_top();
}

} // namespace stlfunnel
