#pragma once

#include <cctype>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "diffgeo/core.hpp"

namespace diffgeo {

/// Parsed arithmetic expression over named coordinates.
///
/// Grammar: + - * / ^ (right-assoc), unary minus, parentheses, numeric
/// literals, the constants pi and e, the functions sin cos exp log, and the
/// coordinate names supplied at parse time.
class Expression {
public:
    static Expression parse(const std::string& text, const std::vector<std::string>& coords) {
        Parser p{text, coords, 0};
        Expression e;
        e.root_ = p.parse_expr();
        p.skip_ws();
        if (p.pos != text.size())
            throw Error("expression: trailing input at position " + std::to_string(p.pos) +
                        " in '" + text + "'");
        e.text_ = text;
        return e;
    }

    double eval(const Vec& x) const { return root_->eval(x); }
    const std::string& text() const { return text_; }

private:
    struct Node {
        virtual ~Node() = default;
        virtual double eval(const Vec& x) const = 0;
    };
    using NodePtr = std::unique_ptr<Node>;

    struct Num : Node {
        double v;
        explicit Num(double v) : v(v) {}
        double eval(const Vec&) const override { return v; }
    };
    struct Var : Node {
        int index;
        explicit Var(int i) : index(i) {}
        double eval(const Vec& x) const override { return x[index]; }
    };
    struct Neg : Node {
        NodePtr arg;
        explicit Neg(NodePtr a) : arg(std::move(a)) {}
        double eval(const Vec& x) const override { return -arg->eval(x); }
    };
    struct Bin : Node {
        char op;
        NodePtr l, r;
        Bin(char op, NodePtr l, NodePtr r) : op(op), l(std::move(l)), r(std::move(r)) {}
        double eval(const Vec& x) const override {
            double a = l->eval(x), b = r->eval(x);
            switch (op) {
                case '+': return a + b;
                case '-': return a - b;
                case '*': return a * b;
                case '/': return a / b;
                default: return std::pow(a, b);
            }
        }
    };
    struct Fun : Node {
        int kind;  // 0 sin, 1 cos, 2 exp, 3 log
        NodePtr arg;
        Fun(int k, NodePtr a) : kind(k), arg(std::move(a)) {}
        double eval(const Vec& x) const override {
            double a = arg->eval(x);
            switch (kind) {
                case 0: return std::sin(a);
                case 1: return std::cos(a);
                case 2: return std::exp(a);
                default: return std::log(a);
            }
        }
    };

    struct Parser {
        const std::string& s;
        const std::vector<std::string>& coords;
        size_t pos;

        void skip_ws() {
            while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        }
        bool eat(char c) {
            skip_ws();
            if (pos < s.size() && s[pos] == c) {
                ++pos;
                return true;
            }
            return false;
        }

        NodePtr parse_expr() {
            NodePtr lhs = parse_term();
            for (;;) {
                if (eat('+')) lhs = std::make_unique<Bin>('+', std::move(lhs), parse_term());
                else if (eat('-')) lhs = std::make_unique<Bin>('-', std::move(lhs), parse_term());
                else return lhs;
            }
        }
        NodePtr parse_term() {
            NodePtr lhs = parse_unary();
            for (;;) {
                if (eat('*')) lhs = std::make_unique<Bin>('*', std::move(lhs), parse_unary());
                else if (eat('/')) lhs = std::make_unique<Bin>('/', std::move(lhs), parse_unary());
                else return lhs;
            }
        }
        NodePtr parse_unary() {
            if (eat('-')) return std::make_unique<Neg>(parse_unary());
            return parse_power();
        }
        NodePtr parse_power() {
            NodePtr base = parse_primary();
            if (eat('^'))  // right associative; exponent may carry a sign
                return std::make_unique<Bin>('^', std::move(base), parse_unary());
            return base;
        }
        NodePtr parse_primary() {
            skip_ws();
            if (pos >= s.size()) throw Error("expression: unexpected end of input in '" + s + "'");
            char c = s[pos];
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
            if (c == '(') {
                ++pos;
                NodePtr e = parse_expr();
                if (!eat(')')) throw Error("expression: missing ')' in '" + s + "'");
                return e;
            }
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
            throw Error(std::string("expression: unexpected character '") + c + "' in '" + s + "'");
        }
        NodePtr parse_number() {
            size_t end = pos;
            while (end < s.size() &&
                   (std::isdigit(static_cast<unsigned char>(s[end])) || s[end] == '.' ||
                    s[end] == 'e' || s[end] == 'E' ||
                    ((s[end] == '+' || s[end] == '-') && end > pos &&
                     (s[end - 1] == 'e' || s[end - 1] == 'E'))))
                ++end;
            // a bare 'e' after digits is the constant, not an exponent marker
            while (end > pos && (s[end - 1] == 'e' || s[end - 1] == 'E')) --end;
            size_t used = 0;
            double v = std::stod(s.substr(pos, end - pos), &used);
            pos += used;
            return std::make_unique<Num>(v);
        }
        NodePtr parse_ident() {
            size_t end = pos;
            while (end < s.size() && (std::isalnum(static_cast<unsigned char>(s[end])) || s[end] == '_'))
                ++end;
            std::string name = s.substr(pos, end - pos);
            pos = end;
            if (name == "pi") return std::make_unique<Num>(kPi);
            if (name == "e") return std::make_unique<Num>(std::exp(1.0));
            static const std::vector<std::string> fns = {"sin", "cos", "exp", "log"};
            for (int k = 0; k < 4; ++k) {
                if (name == fns[k]) {
                    if (!eat('(')) throw Error("expression: '" + name + "' needs '(' in '" + s + "'");
                    NodePtr a = parse_expr();
                    if (!eat(')')) throw Error("expression: missing ')' in '" + s + "'");
                    return std::make_unique<Fun>(k, std::move(a));
                }
            }
            for (size_t i = 0; i < coords.size(); ++i)
                if (name == coords[i]) return std::make_unique<Var>(static_cast<int>(i));
            throw Error("expression: unknown identifier '" + name + "' in '" + s + "'");
        }
    };

    std::shared_ptr<Node> root_;
    std::string text_;
};

}  // namespace diffgeo
