#pragma once

// Concrete syntax: printer, parser, prelude, definitions files, contexts and
// frame stacks.

#include "lop/term.hpp"

#include <cctype>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lop {

// ---------------------------------------------------------------- printing

namespace detail {

struct Printer {
    std::set<std::string> avoid;
    std::vector<std::string> scope;  // innermost binder last
    std::string out;

    // levels: 0 term, 1 choice operand, 2 application head, 3 atom
    void go(const Term& t, int level) {
        switch (t.kind()) {
            case TermKind::Free: out += t.name(); return;
            case TermKind::Bound: {
                if (t.index() < scope.size()) out += scope[scope.size() - 1 - t.index()];
                else out += "#" + std::to_string(t.index() - scope.size());
                return;
            }
            case TermKind::Abs: {
                if (level > 0) out += "(";
                out += "\\";
                Term cur = t;
                std::size_t pushed = 0;
                while (cur.is_abs()) {
                    std::string x = fresh_name(cur.name().empty() ? "x" : cur.name(), avoid);
                    avoid.insert(x);
                    scope.push_back(x);
                    ++pushed;
                    if (pushed > 1) out += " ";
                    out += x;
                    cur = cur.body();
                }
                out += ". ";
                go(cur, 0);
                for (std::size_t i = 0; i < pushed; ++i) {
                    avoid.erase(scope.back());
                    scope.pop_back();
                }
                if (level > 0) out += ")";
                return;
            }
            case TermKind::Choice: {
                if (level > 1) out += "(";
                go(t.left(), 2);
                out += " (+) ";
                go(t.right(), 1);
                if (level > 1) out += ")";
                return;
            }
            case TermKind::App: {
                if (level > 2) out += "(";
                go(t.fun(), 2);
                out += " ";
                go(t.arg(), 3);
                if (level > 2) out += ")";
                return;
            }
        }
    }
};

}  // namespace detail

// Binder names come from the hints, renamed (base + least unused suffix) so
// that no binder shadows a free variable or an enclosing binder.
inline std::string print(const Term& t) {
    detail::Printer p;
    p.avoid = free_vars(t);
    p.go(t, 0);
    return p.out;
}

inline std::ostream& operator<<(std::ostream& os, const Term& t) { return os << print(t); }

// ---------------------------------------------------------------- prelude

using NamedEnv = std::map<std::string, Term>;

// Q_n = λx1..xn. xn x1 .. x(n-1)
inline Term bohm_permutator(unsigned n) {
    if (n == 0) throw std::invalid_argument("permutator arity must be positive");
    std::vector<std::string> xs;
    for (unsigned i = 1; i <= n; ++i) xs.push_back("x" + std::to_string(i));
    std::vector<Term> args;
    for (unsigned i = 0; i + 1 < n; ++i) args.push_back(Term::free(xs[i]));
    return Term::lams(xs, Term::app(Term::free(xs[n - 1]), args));
}

inline Term omega_term() {
    Term d = Term::lam("x", Term::app(Term::free("x"), Term::free("x")));
    return Term::app(d, d);
}

// ⊎Q^r_n = λx1..xr. Ω ⊕ (λx(r+1)..xn. xn x1..x(n-1)); r = 0 gives Ω ⊕ Q_n
inline Term oplus_permutator(unsigned n, unsigned r = 0) {
    if (n == 0 || r >= n) throw std::invalid_argument("⊎-permutator needs 0 <= r < n");
    std::vector<std::string> xs;
    for (unsigned i = 1; i <= n; ++i) xs.push_back("x" + std::to_string(i));
    std::vector<Term> args;
    for (unsigned i = 0; i + 1 < n; ++i) args.push_back(Term::free(xs[i]));
    Term inner = Term::lams(std::vector<std::string>(xs.begin() + r, xs.end()),
                           Term::app(Term::free(xs[n - 1]), args));
    return Term::lams(std::vector<std::string>(xs.begin(), xs.begin() + r),
                     Term::choice(omega_term(), inner));
}

inline NamedEnv prelude() {
    NamedEnv env;
    Term x = Term::free("x"), y = Term::free("y");
    env["I"] = Term::lam("x", x);
    env["K"] = Term::lams({"x", "y"}, x);
    env["OMEGA"] = omega_term();
    Term xi = Term::lams({"x", "y"}, Term::app(x, x));
    env["XI"] = Term::app(xi, xi);
    return env;
}

// ---------------------------------------------------------------- parsing

struct ParseError : std::runtime_error {
    int line, column;
    ParseError(const std::string& msg, int l, int c)
        : std::runtime_error(std::to_string(l) + ":" + std::to_string(c) + ": " + msg), line(l), column(c) {}
};

// named syntax tree, before resolution
struct Syn {
    enum Kind { Var, Lam, App, Choice, Hole } kind = Var;
    std::string name;
    std::shared_ptr<Syn> a, b;
    int line = 1, col = 1;
};
using SynPtr = std::shared_ptr<Syn>;

namespace detail {

struct Token {
    enum Kind { Ident, Lambda, Dot, LParen, RParen, Plus, End } kind;
    std::string text;
    int line, col;
};

inline std::vector<Token> lex(const std::string& s, int line0 = 1) {
    std::vector<Token> out;
    int line = line0, col = 1;
    std::size_t i = 0;
    auto adv = [&](std::size_t n) {
        for (std::size_t k = 0; k < n; ++k, ++i) {
            if (s[i] == '\n') { ++line; col = 1; }
            else if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) ++col;
        }
    };
    while (i < s.size()) {
        char c = s[i];
        if (std::isspace(static_cast<unsigned char>(c))) { adv(1); continue; }
        if (c == '#') {
            while (i < s.size() && s[i] != '\n') adv(1);
            continue;
        }
        int l = line, cl = col;
        if (s.compare(i, 3, "(+)") == 0) { out.push_back({Token::Plus, "(+)", l, cl}); adv(3); continue; }
        if (s.compare(i, 3, "\xE2\x8A\x95") == 0) { out.push_back({Token::Plus, "⊕", l, cl}); adv(3); continue; }
        if (s.compare(i, 2, "\xCE\xBB") == 0) { out.push_back({Token::Lambda, "λ", l, cl}); adv(2); continue; }
        if (c == '\\') { out.push_back({Token::Lambda, "\\", l, cl}); adv(1); continue; }
        if (c == '.') { out.push_back({Token::Dot, ".", l, cl}); adv(1); continue; }
        if (c == '(') { out.push_back({Token::LParen, "(", l, cl}); adv(1); continue; }
        if (c == ')') { out.push_back({Token::RParen, ")", l, cl}); adv(1); continue; }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i;
            while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_' || s[j] == '\''))
                ++j;
            out.push_back({Token::Ident, s.substr(i, j - i), l, cl});
            adv(j - i);
            continue;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", l, cl);
    }
    out.push_back({Token::End, "", line, col});
    return out;
}

struct SynParser {
    std::vector<Token> toks;
    std::size_t pos = 0;

    const Token& peek() const { return toks[pos]; }
    Token take() { return toks[pos++]; }
    [[noreturn]] void fail(const std::string& msg) const {
        const Token& t = peek();
        throw ParseError(msg + (t.kind == Token::End ? " at end of input" : " near '" + t.text + "'"), t.line, t.col);
    }
    static SynPtr mk(Syn::Kind k, const Token& at) {
        auto s = std::make_shared<Syn>();
        s->kind = k;
        s->line = at.line;
        s->col = at.col;
        return s;
    }

    SynPtr term() {
        if (peek().kind == Token::Lambda) return lambda();
        return choice();
    }
    SynPtr lambda() {
        Token at = take();
        std::vector<Token> names;
        while (peek().kind == Token::Ident) names.push_back(take());
        if (names.empty()) fail("expected binder after λ");
        if (peek().kind != Token::Dot) fail("expected '.'");
        take();
        SynPtr body = term();
        for (auto it = names.rbegin(); it != names.rend(); ++it) {
            if (it->text == "_") throw ParseError("'_' cannot be a binder", it->line, it->col);
            auto l = mk(Syn::Lam, at);
            l->name = it->text;
            l->a = body;
            body = l;
        }
        return body;
    }
    SynPtr choice() {
        Token at = peek();
        SynPtr l = app();
        if (peek().kind == Token::Plus) {
            take();
            SynPtr r = peek().kind == Token::Lambda ? lambda() : choice();
            auto c = mk(Syn::Choice, at);
            c->a = l;
            c->b = r;
            return c;
        }
        return l;
    }
    bool atom_start() const {
        auto k = peek().kind;
        return k == Token::Ident || k == Token::LParen;
    }
    SynPtr app() {
        Token at = peek();
        if (!atom_start()) fail("expected a term");
        SynPtr f = atom();
        while (atom_start() || peek().kind == Token::Lambda) {
            SynPtr a = peek().kind == Token::Lambda ? lambda() : atom();
            auto ap = mk(Syn::App, at);
            ap->a = f;
            ap->b = a;
            f = ap;
        }
        return f;
    }
    SynPtr atom() {
        Token t = take();
        if (t.kind == Token::Ident) {
            auto v = mk(t.text == "_" ? Syn::Hole : Syn::Var, t);
            v->name = t.text;
            return v;
        }
        if (t.kind == Token::LParen) {
            SynPtr inner = term();
            if (peek().kind != Token::RParen) fail("expected ')'");
            take();
            return inner;
        }
        --pos;
        fail("expected a term");
    }
};

inline std::optional<unsigned> numbered(const std::string& name, const std::string& prefix) {
    if (name.size() <= prefix.size() || name.compare(0, prefix.size(), prefix) != 0) return std::nullopt;
    std::string rest = name.substr(prefix.size());
    if (rest.find_first_not_of("0123456789") != std::string::npos || rest[0] == '0' || rest.size() > 4)
        return std::nullopt;
    return static_cast<unsigned>(std::stoul(rest));
}

}  // namespace detail

inline SynPtr parse_syntax(const std::string& text, int line0 = 1) {
    detail::SynParser p{detail::lex(text, line0)};
    SynPtr s = p.term();
    if (p.peek().kind != detail::Token::End) p.fail("unexpected trailing input");
    return s;
}

struct ParseOptions {
    bool allow_free = false;   // unknown names become free variables
    bool allow_holes = false;  // `_` becomes the free variable "_"
};

namespace detail {

// Qn and OQn (Ω ⊕ Qn) resolve on demand
inline std::optional<Term> resolve_builtin(const std::string& name) {
    if (auto n = numbered(name, "OQ")) return oplus_permutator(*n, 0);
    if (auto n = numbered(name, "Q")) return bohm_permutator(*n);
    return std::nullopt;
}

inline Term resolve(const Syn& s, const NamedEnv& env, const ParseOptions& opt, std::vector<std::string>& scope) {
    switch (s.kind) {
        case Syn::Hole:
            if (!opt.allow_holes) throw ParseError("hole '_' not allowed here", s.line, s.col);
            return Term::free("_");
        case Syn::Var: {
            for (auto it = scope.rbegin(); it != scope.rend(); ++it)
                if (*it == s.name) return Term::free(s.name);
            if (auto e = env.find(s.name); e != env.end()) return e->second;
            if (auto b = resolve_builtin(s.name)) return *b;
            if (opt.allow_free) return Term::free(s.name);
            throw ParseError("unbound name '" + s.name + "'", s.line, s.col);
        }
        case Syn::Lam: {
            scope.push_back(s.name);
            Term body = resolve(*s.a, env, opt, scope);
            scope.pop_back();
            return Term::lam(s.name, body);
        }
        case Syn::App: return Term::app(resolve(*s.a, env, opt, scope), resolve(*s.b, env, opt, scope));
        case Syn::Choice: return Term::choice(resolve(*s.a, env, opt, scope), resolve(*s.b, env, opt, scope));
    }
    throw std::logic_error("unreachable");
}

}  // namespace detail

inline Term resolve_syntax(const Syn& s, const NamedEnv& env, const ParseOptions& opt = {}) {
    std::vector<std::string> scope;
    return detail::resolve(s, env, opt, scope);
}

inline Term parse_term(const std::string& text, const NamedEnv& env = prelude(), const ParseOptions& opt = {}) {
    return resolve_syntax(*parse_syntax(text), env, opt);
}

// `name = term` lines; later definitions may use earlier ones.
inline NamedEnv parse_definitions(const std::string& text, NamedEnv env = prelude()) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        std::string body = hash == std::string::npos ? line : line.substr(0, hash);
        if (body.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto eq = body.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'name = term'", lineno, 1);
        std::string name = body.substr(0, eq);
        name.erase(0, name.find_first_not_of(" \t"));
        name.erase(name.find_last_not_of(" \t") + 1);
        if (name.empty() || !(std::isalpha(static_cast<unsigned char>(name[0])) || name[0] == '_') ||
            name.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_'") !=
                std::string::npos)
            throw ParseError("bad definition name '" + name + "'", lineno, 1);
        SynPtr s;
        try {
            s = parse_syntax(body.substr(eq + 1), lineno);
        } catch (const ParseError& e) {
            throw ParseError(std::string(e.what()).substr(std::string(e.what()).find(": ") + 2), lineno,
                             e.column + static_cast<int>(eq) + 1);
        }
        Term t = resolve_syntax(*s, env);
        env[name] = t;
    }
    return env;
}

// ---------------------------------------------------------------- contexts

// Single-hole context. Side terms are kept with named free variables so that
// binders of the context capture them when plugged.
class Context {
public:
    enum Kind { Hole, Abs, AppL, AppR, ChoiceL, ChoiceR };

    static Context hole() { return Context(std::make_shared<Node>(Node{Hole, {}, {}, {}})); }
    static Context abs(std::string x, Context c) { return Context(std::make_shared<Node>(Node{Abs, std::move(x), {}, c.n_})); }
    static Context app_left(Context c, Term n) { return Context(std::make_shared<Node>(Node{AppL, {}, std::move(n), c.n_})); }
    static Context app_right(Term m, Context c) { return Context(std::make_shared<Node>(Node{AppR, {}, std::move(m), c.n_})); }
    static Context choice_left(Context c, Term n) { return Context(std::make_shared<Node>(Node{ChoiceL, {}, std::move(n), c.n_})); }
    static Context choice_right(Term m, Context c) { return Context(std::make_shared<Node>(Node{ChoiceR, {}, std::move(m), c.n_})); }

    Kind kind() const { return n_->kind; }

    Term plug(const Term& m) const { return plug_rec(*n_, m); }

    // resolves a syntax tree containing exactly one `_`
    static Context from_syntax(const Syn& s, const NamedEnv& env) {
        int holes = count_holes(s);
        if (holes != 1) throw ParseError("context must contain exactly one hole, found " + std::to_string(holes), s.line, s.col);
        std::vector<std::string> scope;
        return build(s, env, scope);
    }

    std::string to_string() const { return print(plug(Term::free("[.]"))); }

private:
    struct Node {
        Kind kind;
        std::string binder;
        Term side;
        std::shared_ptr<const Node> sub;
    };
    explicit Context(std::shared_ptr<const Node> n) : n_(std::move(n)) {}

    static Term plug_rec(const Node& n, const Term& m) {
        switch (n.kind) {
            case Hole: return m;
            case Abs: return Term::lam(n.binder, plug_rec(*n.sub, m));
            case AppL: return Term::app(plug_rec(*n.sub, m), n.side);
            case AppR: return Term::app(n.side, plug_rec(*n.sub, m));
            case ChoiceL: return Term::choice(plug_rec(*n.sub, m), n.side);
            case ChoiceR: return Term::choice(n.side, plug_rec(*n.sub, m));
        }
        throw std::logic_error("unreachable");
    }
    static int count_holes(const Syn& s) {
        if (s.kind == Syn::Hole) return 1;
        int c = 0;
        if (s.a) c += count_holes(*s.a);
        if (s.b) c += count_holes(*s.b);
        return c;
    }
    static Context build(const Syn& s, const NamedEnv& env, std::vector<std::string>& scope) {
        ParseOptions opt;
        opt.allow_free = true;  // names bound by enclosing context binders
        auto side = [&](const Syn& t) {
            // unbound names are only legal if some context binder captures them
            Term r = detail::resolve(t, env, opt, scope);
            for (const auto& v : free_vars(r)) {
                bool ok = false;
                for (const auto& b : scope) ok = ok || b == v;
                if (!ok) throw ParseError("unbound name '" + v + "'", t.line, t.col);
            }
            return r;
        };
        switch (s.kind) {
            case Syn::Hole: return hole();
            case Syn::Lam: {
                scope.push_back(s.name);
                Context c = build(*s.a, env, scope);
                scope.pop_back();
                return abs(s.name, c);
            }
            case Syn::App:
                if (count_holes(*s.a)) return app_left(build(*s.a, env, scope), side(*s.b));
                return app_right(side(*s.a), build(*s.b, env, scope));
            case Syn::Choice:
                if (count_holes(*s.a)) return choice_left(build(*s.a, env, scope), side(*s.b));
                return choice_right(side(*s.a), build(*s.b, env, scope));
            case Syn::Var: break;
        }
        throw std::logic_error("unreachable");
    }

    std::shared_ptr<const Node> n_;
};

inline Context parse_context(const std::string& text, const NamedEnv& env = prelude()) {
    return Context::from_syntax(*parse_syntax(text), env);
}

// ---------------------------------------------------------------- frame stacks

// Persistent stack of argument terms; the top frame is applied first.
class FrameStack {
public:
    FrameStack() = default;
    static FrameStack from(const std::vector<Term>& top_first) {
        FrameStack s;
        for (auto it = top_first.rbegin(); it != top_first.rend(); ++it) s = s.push(*it);
        return s;
    }

    bool empty() const { return !n_; }
    std::size_t size() const { return n_ ? n_->size : 0; }
    const Term& top() const { return n_->arg; }
    FrameStack pop() const { return FrameStack(n_->next); }
    FrameStack push(Term m) const {
        return FrameStack(std::make_shared<const Node>(Node{std::move(m), n_, size() + 1}));
    }

    std::vector<Term> frames() const {
        std::vector<Term> out;
        for (auto p = n_; p; p = p->next) out.push_back(p->arg);
        return out;
    }

    // nil[M] = M, (N::S)[M] = S[M N]
    Term plug(Term m) const {
        for (auto p = n_; p; p = p->next) m = Term::app(std::move(m), p->arg);
        return m;
    }

    std::string to_string() const {
        if (empty()) return "nil";
        std::string s;
        for (auto p = n_; p; p = p->next) {
            if (!s.empty()) s += " :: ";
            s += "(" + print(p->arg) + ")";
        }
        return s + " :: nil";
    }

    friend bool operator==(const FrameStack& a, const FrameStack& b) {
        auto p = a.n_, q = b.n_;
        for (; p && q; p = p->next, q = q->next)
            if (p != q && !(p->arg == q->arg)) return false;
        return !p && !q;
    }

private:
    struct Node {
        Term arg;
        std::shared_ptr<const Node> next;
        std::size_t size;
    };
    explicit FrameStack(std::shared_ptr<const Node> n) : n_(std::move(n)) {}
    std::shared_ptr<const Node> n_;
};

// `;`-separated argument terms, leftmost is the top frame
inline FrameStack parse_stack(const std::string& text, const NamedEnv& env = prelude()) {
    std::vector<Term> frames;
    std::string cur;
    std::istringstream in(text);
    while (std::getline(in, cur, ';')) {
        if (cur.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        frames.push_back(parse_term(cur, env));
    }
    return FrameStack::from(frames);
}

}  // namespace lop
