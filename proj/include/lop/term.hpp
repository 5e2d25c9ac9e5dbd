#pragma once

// Locally nameless Λ⊕ terms. Bound variables are de Bruijn indices, free
// variables are names; abstractions keep their binder name only as a hint for
// printing. Nodes are immutable and shared, and carry an α-invariant hash.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <functional>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lop {

enum class TermKind : std::uint8_t { Free, Bound, Abs, App, Choice };

class Term {
    struct Node;

public:
    Term() = default;

    static Term free(std::string name);
    static Term bound(std::uint32_t index);
    // body must already refer to this binder as Bound(0)
    static Term abs_raw(std::string hint, Term body);
    // named abstraction: closes the free variable x in body
    static Term lam(const std::string& x, const Term& body);
    static Term lams(const std::vector<std::string>& xs, const Term& body);
    static Term app(Term f, Term a);
    static Term app(Term f, const std::vector<Term>& args);
    static Term choice(Term l, Term r);

    bool valid() const { return n_ != nullptr; }
    TermKind kind() const;
    bool is_abs() const { return kind() == TermKind::Abs; }
    bool is_app() const { return kind() == TermKind::App; }
    bool is_choice() const { return kind() == TermKind::Choice; }
    bool is_var() const { return kind() == TermKind::Free; }

    const std::string& name() const;  // Free name or Abs hint
    std::uint32_t index() const;
    const Term& body() const;
    const Term& fun() const;
    const Term& arg() const;
    const Term& left() const { return fun(); }
    const Term& right() const { return arg(); }

    std::size_t hash() const;
    std::size_t size() const;
    std::uint32_t loose() const;
    bool locally_closed() const { return loose() == 0; }
    bool has_free() const;
    bool closed() const { return loose() == 0 && !has_free(); }
    // closed λ-abstraction
    bool is_value() const { return is_abs() && closed(); }
    bool same_node(const Term& o) const { return n_ == o.n_; }

    // α-equivalence (structural on the locally nameless form)
    friend bool operator==(const Term& x, const Term& y) { return alpha_eq(x, y); }
    friend bool operator!=(const Term& x, const Term& y) { return !alpha_eq(x, y); }
    static bool alpha_eq(const Term& x, const Term& y);
    // total order compatible with ==, for canonical sorting
    static int compare(const Term& x, const Term& y);

private:
    explicit Term(std::shared_ptr<const Node> n) : n_(std::move(n)) {}
    std::shared_ptr<const Node> n_;
};

struct Term::Node {
    TermKind kind;
    std::uint32_t index = 0;
    std::uint32_t loose = 0;  // 1 + largest dangling index, 0 if locally closed
    bool has_free = false;
    std::size_t hash = 0;
    std::size_t size = 1;
    std::string name;
    Term a, b;
};

inline TermKind Term::kind() const { return n_->kind; }
inline const std::string& Term::name() const { return n_->name; }
inline std::uint32_t Term::index() const { return n_->index; }
inline const Term& Term::body() const { return n_->a; }
inline const Term& Term::fun() const { return n_->a; }
inline const Term& Term::arg() const { return n_->b; }
inline std::size_t Term::hash() const { return n_->hash; }
inline std::size_t Term::size() const { return n_->size; }
inline std::uint32_t Term::loose() const { return n_->loose; }
inline bool Term::has_free() const { return n_->has_free; }

namespace detail {
inline std::size_t mix(std::size_t h, std::size_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h * 0x100000001b3ULL;
}
inline std::size_t fnv(const std::string& s) {
    std::size_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
    return h;
}
}  // namespace detail

inline Term Term::free(std::string name) {
    auto n = std::make_shared<Node>();
    n->kind = TermKind::Free;
    n->has_free = true;
    n->hash = detail::mix(1, detail::fnv(name));
    n->name = std::move(name);
    return Term(std::move(n));
}

inline Term Term::bound(std::uint32_t index) {
    auto n = std::make_shared<Node>();
    n->kind = TermKind::Bound;
    n->index = index;
    n->loose = index + 1;
    n->hash = detail::mix(2, index);
    return Term(std::move(n));
}

inline Term Term::abs_raw(std::string hint, Term body) {
    auto n = std::make_shared<Node>();
    n->kind = TermKind::Abs;
    n->loose = body.loose() > 0 ? body.loose() - 1 : 0;
    n->has_free = body.has_free();
    n->hash = detail::mix(3, body.hash());
    n->size = body.size() + 1;
    n->name = std::move(hint);
    n->a = std::move(body);
    return Term(std::move(n));
}

inline Term Term::app(Term f, Term a) {
    auto n = std::make_shared<Node>();
    n->kind = TermKind::App;
    n->loose = std::max(f.loose(), a.loose());
    n->has_free = f.has_free() || a.has_free();
    n->hash = detail::mix(detail::mix(4, f.hash()), a.hash());
    n->size = f.size() + a.size() + 1;
    n->a = std::move(f);
    n->b = std::move(a);
    return Term(std::move(n));
}

inline Term Term::app(Term f, const std::vector<Term>& args) {
    for (const auto& x : args) f = app(std::move(f), x);
    return f;
}

inline Term Term::choice(Term l, Term r) {
    auto n = std::make_shared<Node>();
    n->kind = TermKind::Choice;
    n->loose = std::max(l.loose(), r.loose());
    n->has_free = l.has_free() || r.has_free();
    n->hash = detail::mix(detail::mix(5, l.hash()), r.hash());
    n->size = l.size() + r.size() + 1;
    n->a = std::move(l);
    n->b = std::move(r);
    return Term(std::move(n));
}

inline bool Term::alpha_eq(const Term& x, const Term& y) {
    if (x.n_ == y.n_) return true;
    if (x.hash() != y.hash() || x.size() != y.size() || x.kind() != y.kind()) return false;
    switch (x.kind()) {
        case TermKind::Free: return x.name() == y.name();
        case TermKind::Bound: return x.index() == y.index();
        case TermKind::Abs: return alpha_eq(x.body(), y.body());
        default: return alpha_eq(x.n_->a, y.n_->a) && alpha_eq(x.n_->b, y.n_->b);
    }
}

inline int Term::compare(const Term& x, const Term& y) {
    if (x.n_ == y.n_) return 0;
    if (x.size() != y.size()) return x.size() < y.size() ? -1 : 1;
    if (x.kind() != y.kind()) return x.kind() < y.kind() ? -1 : 1;
    switch (x.kind()) {
        case TermKind::Free: return x.name().compare(y.name()) < 0 ? -1 : (x.name() == y.name() ? 0 : 1);
        case TermKind::Bound: return x.index() == y.index() ? 0 : (x.index() < y.index() ? -1 : 1);
        case TermKind::Abs: return compare(x.body(), y.body());
        default: {
            int c = compare(x.n_->a, y.n_->a);
            return c != 0 ? c : compare(x.n_->b, y.n_->b);
        }
    }
}

struct TermHash {
    std::size_t operator()(const Term& t) const { return t.hash(); }
};
struct TermLess {
    bool operator()(const Term& a, const Term& b) const { return Term::compare(a, b) < 0; }
};

namespace detail {

// replace Bound(k) (k = binder depth) by the locally closed term u
inline Term open_rec(const Term& t, std::uint32_t k, const Term& u) {
    if (t.loose() <= k) return t;
    switch (t.kind()) {
        case TermKind::Bound: return t.index() == k ? u : t;
        case TermKind::Abs: return Term::abs_raw(t.name(), open_rec(t.body(), k + 1, u));
        case TermKind::App: return Term::app(open_rec(t.fun(), k, u), open_rec(t.arg(), k, u));
        case TermKind::Choice: return Term::choice(open_rec(t.left(), k, u), open_rec(t.right(), k, u));
        default: return t;
    }
}

inline Term close_rec(const Term& t, std::uint32_t k, const std::string& x) {
    if (!t.has_free()) return t;
    switch (t.kind()) {
        case TermKind::Free: return t.name() == x ? Term::bound(k) : t;
        case TermKind::Abs: return Term::abs_raw(t.name(), close_rec(t.body(), k + 1, x));
        case TermKind::App: return Term::app(close_rec(t.fun(), k, x), close_rec(t.arg(), k, x));
        case TermKind::Choice: return Term::choice(close_rec(t.left(), k, x), close_rec(t.right(), k, x));
        default: return t;
    }
}

inline Term subst_rec(const Term& t, const std::string& x, const Term& u) {
    if (!t.has_free()) return t;
    switch (t.kind()) {
        case TermKind::Free: return t.name() == x ? u : t;
        case TermKind::Abs: return Term::abs_raw(t.name(), subst_rec(t.body(), x, u));
        case TermKind::App: return Term::app(subst_rec(t.fun(), x, u), subst_rec(t.arg(), x, u));
        case TermKind::Choice: return Term::choice(subst_rec(t.left(), x, u), subst_rec(t.right(), x, u));
        default: return t;
    }
}

inline void free_vars_rec(const Term& t, std::set<std::string>& out) {
    if (!t.has_free()) return;
    switch (t.kind()) {
        case TermKind::Free: out.insert(t.name()); break;
        case TermKind::Abs: free_vars_rec(t.body(), out); break;
        case TermKind::App:
        case TermKind::Choice:
            free_vars_rec(t.fun(), out);
            free_vars_rec(t.arg(), out);
            break;
        default: break;
    }
}

}  // namespace detail

// body of an abstraction instantiated with u (u must be locally closed)
inline Term open(const Term& body, const Term& u) { return detail::open_rec(body, 0, u); }

inline Term Term::lam(const std::string& x, const Term& body) {
    return abs_raw(x, detail::close_rec(body, 0, x));
}
inline Term Term::lams(const std::vector<std::string>& xs, const Term& body) {
    Term t = body;
    for (auto it = xs.rbegin(); it != xs.rend(); ++it) t = lam(*it, t);
    return t;
}

// capture-avoiding M[N/x]; N must be locally closed
inline Term subst(const Term& m, const std::string& x, const Term& n) {
    if (!n.locally_closed()) throw std::invalid_argument("subst: replacement is not locally closed");
    return detail::subst_rec(m, x, n);
}

inline std::set<std::string> free_vars(const Term& t) {
    std::set<std::string> out;
    detail::free_vars_rec(t, out);
    return out;
}

// base, base1, base2, ... first one not in avoid
inline std::string fresh_name(const std::string& base, const std::set<std::string>& avoid) {
    std::string stem = base;
    while (!stem.empty() && std::isdigit(static_cast<unsigned char>(stem.back()))) stem.pop_back();
    if (stem.empty()) stem = "x";
    if (!avoid.count(base)) return base;
    for (unsigned i = 1;; ++i) {
        std::string c = stem + std::to_string(i);
        if (!avoid.count(c)) return c;
    }
}

// head and argument list of an application spine
inline std::pair<Term, std::vector<Term>> spine(const Term& t) {
    std::vector<Term> args;
    Term h = t;
    while (h.is_app()) {
        args.push_back(h.arg());
        h = h.fun();
    }
    return {h, std::vector<Term>(args.rbegin(), args.rend())};
}

}  // namespace lop

template <>
struct std::hash<lop::Term> {
    std::size_t operator()(const lop::Term& t) const { return t.hash(); }
};
