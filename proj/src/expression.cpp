#include "aatk/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

namespace aatk::expr {

enum class Op {
    num, var, add, sub, mul, div, pow, pow_int, neg,
    fn_sin, fn_cos, fn_exp, fn_sqrt
};

struct Node {
    Op op;
    double num = 0.0;   // Op::num value or pow_int exponent
    int var = -1;       // Op::var slot
    std::shared_ptr<const Node> a, b;
};

namespace {

using P = std::shared_ptr<const Node>;

P make(Op op, P a = nullptr, P b = nullptr) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

struct DVal {
    double v;
    Vec g;
};

DVal eval_node(const Node& n, const Vec& z, bool want_grad) {
    const auto dim = z.size();
    auto leaf = [&](double v) {
        DVal d{v, Vec()};
        if (want_grad) d.g = Vec::Zero(dim);
        return d;
    };
    switch (n.op) {
        case Op::num: return leaf(n.num);
        case Op::var: {
            DVal d = leaf(z[n.var]);
            if (want_grad) d.g[n.var] = 1.0;
            return d;
        }
        case Op::neg: {
            DVal a = eval_node(*n.a, z, want_grad);
            a.v = -a.v;
            if (want_grad) a.g = -a.g;
            return a;
        }
        default: break;
    }
    DVal a = eval_node(*n.a, z, want_grad);
    switch (n.op) {
        case Op::fn_sin: {
            DVal r = leaf(std::sin(a.v));
            if (want_grad) r.g = std::cos(a.v) * a.g;
            return r;
        }
        case Op::fn_cos: {
            DVal r = leaf(std::cos(a.v));
            if (want_grad) r.g = -std::sin(a.v) * a.g;
            return r;
        }
        case Op::fn_exp: {
            DVal r = leaf(std::exp(a.v));
            if (want_grad) r.g = r.v * a.g;
            return r;
        }
        case Op::fn_sqrt: {
            DVal r = leaf(std::sqrt(a.v));
            if (want_grad) r.g = (0.5 / r.v) * a.g;
            return r;
        }
        case Op::pow_int: {
            const int k = static_cast<int>(n.num);
            double v = 1.0;
            for (int i = 0; i < std::abs(k); ++i) v *= a.v;
            if (k < 0) v = 1.0 / v;
            DVal r = leaf(v);
            if (want_grad) {
                double vm = 1.0;
                for (int i = 0; i < std::abs(k) - 1; ++i) vm *= a.v;
                if (k < 0) vm = 1.0 / (vm * a.v * a.v);
                r.g = (static_cast<double>(k) * vm) * a.g;
            }
            return r;
        }
        default: break;
    }
    DVal b = eval_node(*n.b, z, want_grad);
    switch (n.op) {
        case Op::add: {
            DVal r = leaf(a.v + b.v);
            if (want_grad) r.g = a.g + b.g;
            return r;
        }
        case Op::sub: {
            DVal r = leaf(a.v - b.v);
            if (want_grad) r.g = a.g - b.g;
            return r;
        }
        case Op::mul: {
            DVal r = leaf(a.v * b.v);
            if (want_grad) r.g = b.v * a.g + a.v * b.g;
            return r;
        }
        case Op::div: {
            DVal r = leaf(a.v / b.v);
            if (want_grad) r.g = (a.g - r.v * b.g) / b.v;
            return r;
        }
        case Op::pow: {
            DVal r = leaf(std::pow(a.v, b.v));
            if (want_grad)
                r.g = r.v * (std::log(a.v) * b.g + (b.v / a.v) * a.g);
            return r;
        }
        default:
            throw EvaluationError("expression: corrupt node");
    }
}

class Parser {
public:
    Parser(const std::string& s, int n) : s_(s), n_(n) {}

    P run() {
        P e = expr();
        skip_ws();
        if (pos_ != s_.size()) fail("unexpected trailing input");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw InvalidInputError("parse error at column " +
                                std::to_string(pos_ + 1) + ": " + what);
    }

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_])))
            ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < s_.size() ? s_[pos_] : '\0';
    }

    P expr() {
        P e = term();
        for (;;) {
            if (accept('+')) e = make(Op::add, e, term());
            else if (accept('-')) e = make(Op::sub, e, term());
            else return e;
        }
    }

    P term() {
        P e = unary();
        for (;;) {
            if (accept('*')) e = make(Op::mul, e, unary());
            else if (accept('/')) e = make(Op::div, e, unary());
            else return e;
        }
    }

    P unary() {
        if (accept('-')) return make(Op::neg, unary());
        if (accept('+')) return unary();
        return power();
    }

    P power() {
        P base = primary();
        if (!accept('^')) return base;
        P e = unary();  // right associative, -x binds into the exponent
        // integer literal exponents get the exact repeated-product rule
        if (e->op == Op::num && e->num == std::floor(e->num) &&
            std::fabs(e->num) <= 64) {
            auto n = std::make_shared<Node>();
            n->op = Op::pow_int;
            n->num = e->num;
            n->a = base;
            return n;
        }
        return make(Op::pow, base, e);
    }

    P primary() {
        skip_ws();
        if (pos_ >= s_.size()) fail("unexpected end of expression");
        const char c = s_[pos_];
        if (c == '(') {
            ++pos_;
            P e = expr();
            if (!accept(')')) fail("missing ')'");
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
        fail(std::string("unexpected character '") + c + "'");
    }

    P number() {
        const char* begin = s_.c_str() + pos_;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin) fail("malformed number");
        pos_ += static_cast<std::size_t>(end - begin);
        auto n = std::make_shared<Node>();
        n->op = Op::num;
        n->num = v;
        return n;
    }

    P identifier() {
        const std::size_t start = pos_;
        while (pos_ < s_.size() &&
               (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
            ++pos_;
        const std::string name = s_.substr(start, pos_ - start);
        if (name == "sin" || name == "cos" || name == "exp" || name == "sqrt") {
            if (!accept('(')) fail("expected '(' after " + name);
            P arg = expr();
            if (!accept(')')) fail("missing ')'");
            if (name == "sin") return make(Op::fn_sin, arg);
            if (name == "cos") return make(Op::fn_cos, arg);
            if (name == "exp") return make(Op::fn_exp, arg);
            return make(Op::fn_sqrt, arg);
        }
        if ((name[0] == 'q' || name[0] == 'p') && name.size() > 1) {
            int idx = 0;
            bool digits = true;
            for (std::size_t i = 1; i < name.size(); ++i) {
                if (!std::isdigit(static_cast<unsigned char>(name[i]))) {
                    digits = false;
                    break;
                }
                idx = idx * 10 + (name[i] - '0');
            }
            if (digits) {
                if (idx < 1 || idx > n_) {
                    pos_ = start;
                    fail("unknown identifier '" + name + "' (index out of range for n=" +
                         std::to_string(n_) + ")");
                }
                auto v = std::make_shared<Node>();
                v->op = Op::var;
                v->var = (name[0] == 'q') ? idx - 1 : n_ + idx - 1;
                return v;
            }
        }
        pos_ = start;
        fail("unknown identifier '" + name + "'");
    }

    const std::string& s_;
    int n_;
    std::size_t pos_ = 0;
};

}  // namespace

Expression Expression::parse(const std::string& text, int n_dof) {
    require(n_dof >= 1, "expression: n must be positive");
    Expression e;
    e.root_ = Parser(text, n_dof).run();
    e.text_ = text;
    e.n_ = n_dof;
    return e;
}

double Expression::eval(const Vec& z) const {
    require(root_ != nullptr, "expression: not parsed");
    require(z.size() == 2 * n_, "expression: point dimension mismatch");
    return eval_node(*root_, z, false).v;
}

Vec Expression::gradient(const Vec& z) const {
    require(root_ != nullptr, "expression: not parsed");
    require(z.size() == 2 * n_, "expression: point dimension mismatch");
    return eval_node(*root_, z, true).g;
}

}  // namespace aatk::expr
