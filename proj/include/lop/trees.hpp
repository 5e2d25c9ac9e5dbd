#pragma once

// Lazy head reduction of pure (possibly open) λ-terms, depth-truncated
// Levy-Longo trees, and the level-indexed open-bisimulation game.

#include "lop/eval.hpp"

#include <set>

namespace lop {

inline bool is_pure(const Term& t) {
    switch (t.kind()) {
        case TermKind::Choice: return false;
        case TermKind::Abs: return is_pure(t.body());
        case TermKind::App: return is_pure(t.fun()) && is_pure(t.arg());
        default: return true;
    }
}

inline void require_pure(const Term& t, const char* what) {
    if (!is_pure(t)) throw std::invalid_argument(std::string(what) + ": term contains a choice: " + print(t));
}

struct HeadForm {
    enum Kind {
        Hnf,               // λbinders. head args
        AbstractionChain,  // budget ran out after peeling `binders`
        Exhausted,         // budget ran out before any abstraction
        Unsolvable,        // detected: reduction loops after peeling `binders`
        OrderInfinite,     // detected: peeling repeats forever
    } kind = Exhausted;
    std::vector<std::string> binders;
    std::string head;
    std::vector<Term> args;
    Term residual;  // AbstractionChain, Exhausted: the term reached
    unsigned steps = 0;
};

// Lazy head reduction: β-steps in head position, peeling each abstraction
// into a fresh free variable. Peeling is free; `budget` bounds β-steps. With
// `detect`, a term repeated between peels is certified unsolvable of the
// current order, and a term repeated at two peel points certifies order ∞.
inline HeadForm head_reduce(const Term& m, unsigned budget, bool detect = true,
                            const std::set<std::string>& scope = {}) {
    require_pure(m, "head_reduce");
    HeadForm hf;
    std::set<std::string> avoid = free_vars(m);
    avoid.insert(scope.begin(), scope.end());
    std::unordered_set<Term> since_peel, peel_points;
    Term t = m;
    for (;;) {
        if (t.is_abs()) {
            std::string x = fresh_name(t.name(), avoid);
            avoid.insert(x);
            hf.binders.push_back(x);
            t = open(t.body(), Term::free(x));
            if (detect) {
                if (!peel_points.insert(t).second) {
                    hf.kind = HeadForm::OrderInfinite;
                    return hf;
                }
                since_peel.clear();
            }
            continue;
        }
        auto [h, args] = spine(t);
        if (h.is_var()) {
            hf.kind = HeadForm::Hnf;
            hf.head = h.name();
            hf.args = std::move(args);
            return hf;
        }
        if (hf.steps == budget) {
            hf.kind = hf.binders.empty() ? HeadForm::Exhausted : HeadForm::AbstractionChain;
            hf.residual = t;
            return hf;
        }
        if (detect && !since_peel.insert(t).second) {
            hf.kind = HeadForm::Unsolvable;
            return hf;
        }
        StepOutcome s = cbn_step(t);
        if (s.kind != StepOutcome::Deterministic) throw std::logic_error("head_reduce: no head redex in " + print(t));
        t = s.next;
        ++hf.steps;
    }
}

// ---------------------------------------------------------------- trees

struct LevyLongoTree {
    enum Kind { Bottom, Top, Head, Unknown } kind = Unknown;
    std::vector<std::string> binders;  // Bottom: λ-prefix of the unsolvable; Head, Unknown: peeled binders
    std::string head;
    std::vector<LevyLongoTree> children;
    std::string note;  // Unknown: why
};

inline LevyLongoTree llt(const Term& m, unsigned depth, unsigned budget, bool detect = true,
                         const std::set<std::string>& scope = {}) {
    require_pure(m, "llt");
    LevyLongoTree t;
    if (depth == 0) {
        t.note = "depth";
        return t;
    }
    HeadForm hf = head_reduce(m, budget, detect, scope);
    t.binders = hf.binders;
    switch (hf.kind) {
        case HeadForm::Hnf: {
            t.kind = LevyLongoTree::Head;
            t.head = hf.head;
            std::set<std::string> inner = scope;
            inner.insert(hf.binders.begin(), hf.binders.end());
            for (const Term& a : hf.args) t.children.push_back(llt(a, depth - 1, budget, detect, inner));
            break;
        }
        case HeadForm::Unsolvable: t.kind = LevyLongoTree::Bottom; break;
        case HeadForm::OrderInfinite:
            t.kind = LevyLongoTree::Top;
            t.binders.clear();
            break;
        default: t.note = "budget"; break;
    }
    return t;
}

inline std::string node_label(const LevyLongoTree& t) {
    std::string prefix;
    if (!t.binders.empty()) {
        prefix = "λ";
        for (std::size_t i = 0; i < t.binders.size(); ++i) prefix += (i ? " " : "") + t.binders[i];
        prefix += ". ";
    }
    switch (t.kind) {
        case LevyLongoTree::Bottom: return prefix + "⊥";
        case LevyLongoTree::Top: return "⊤";
        case LevyLongoTree::Head: return prefix + t.head;
        default: return prefix + "?";
    }
}

// one node per line, children indented by two spaces
inline std::string to_string(const LevyLongoTree& t, int indent = 0) {
    std::string out(static_cast<std::size_t>(indent) * 2, ' ');
    out += node_label(t) + "\n";
    for (const auto& c : t.children) out += to_string(c, indent + 1);
    return out;
}

inline bool has_unknown(const LevyLongoTree& t) {
    if (t.kind == LevyLongoTree::Unknown) return true;
    for (const auto& c : t.children)
        if (has_unknown(c)) return true;
    return false;
}

namespace detail {

inline void canonical(const LevyLongoTree& t, std::map<std::string, int>& env, int& level, std::string& out) {
    std::map<std::string, int> saved = env;
    int saved_level = level;
    for (const auto& b : t.binders) env[b] = level++;
    out += "(" + std::to_string(static_cast<int>(t.kind)) + ":" + std::to_string(t.binders.size());
    if (t.kind == LevyLongoTree::Head) {
        auto it = env.find(t.head);
        out += it == env.end() ? " free " + t.head : " #" + std::to_string(it->second);
        for (const auto& c : t.children) canonical(c, env, level, out);
    }
    out += ")";
    env = std::move(saved);
    level = saved_level;
}

}  // namespace detail

// structural equality up to the names of binders
inline bool same_tree(const LevyLongoTree& a, const LevyLongoTree& b) {
    std::map<std::string, int> ea, eb;
    int la = 0, lb = 0;
    std::string ca, cb;
    detail::canonical(a, ea, la, ca);
    detail::canonical(b, eb, lb, cb);
    return ca == cb;
}

// ---------------------------------------------------------------- the game

struct WeakHead {
    enum Kind { Lambda, HeadVar, Diverges, Exhausted } kind = Exhausted;
    Term term;  // the abstraction, or the head-variable application
};

// lazy reduction to an abstraction or a variable-headed application
inline WeakHead weak_head(const Term& m, unsigned budget, bool detect) {
    std::unordered_set<Term> seen;
    Term t = m;
    for (unsigned steps = 0;; ++steps) {
        if (t.is_abs()) return {WeakHead::Lambda, t};
        if (spine(t).first.is_var()) return {WeakHead::HeadVar, t};
        if (steps == budget) return {WeakHead::Exhausted, t};
        if (detect && !seen.insert(t).second) return {WeakHead::Diverges, t};
        t = cbn_step(t).next;
    }
}

struct LltEqVerdict {
    enum Kind { Different, SameUpTo, Inconclusive } kind = SameUpTo;
    unsigned level = 0;             // Different: least failing approximant; SameUpTo: the level asked
    std::vector<std::string> path;  // Different: binders peeled and argument positions taken
    std::string clause;
    std::string left, right;        // Different: the terms at the failing position
};

namespace detail {

inline LltEqVerdict game(const Term& m, const Term& n, unsigned n_left, unsigned descent, unsigned budget,
                         bool detect, std::vector<std::string>& path) {
    LltEqVerdict ok;
    if (n_left == 0) return ok;
    WeakHead a = weak_head(m, budget, detect), b = weak_head(n, budget, detect);
    auto differ = [&](const char* clause) {
        LltEqVerdict v;
        v.kind = LltEqVerdict::Different;
        v.level = descent + 1;
        v.path = path;
        v.clause = clause;
        v.left = print(a.term);
        v.right = print(b.term);
        return v;
    };
    if (a.kind == WeakHead::Diverges && b.kind == WeakHead::Diverges) return ok;
    if (a.kind == WeakHead::Exhausted || b.kind == WeakHead::Exhausted) {
        ok.kind = LltEqVerdict::Inconclusive;
        return ok;
    }
    if (a.kind == WeakHead::Diverges || b.kind == WeakHead::Diverges) return differ("only one side converges");
    if (a.kind != b.kind) return differ("abstraction against variable-headed term");
    if (a.kind == WeakHead::Lambda) {
        std::set<std::string> avoid = free_vars(a.term);
        for (const auto& x : free_vars(b.term)) avoid.insert(x);
        std::string z = fresh_name(a.term.name(), avoid);
        path.push_back("λ" + z);
        LltEqVerdict r = game(open(a.term.body(), Term::free(z)), open(b.term.body(), Term::free(z)), n_left - 1,
                              descent + 1, budget, detect, path);
        path.pop_back();
        return r;
    }
    auto [ha, xs] = spine(a.term);
    auto [hb, ys] = spine(b.term);
    if (ha.name() != hb.name()) return differ("different head variables");
    if (xs.size() != ys.size()) return differ("different numbers of arguments");
    LltEqVerdict best = ok;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        path.push_back("arg " + std::to_string(i + 1));
        LltEqVerdict r = game(xs[i], ys[i], n_left - 1, descent + 1, budget, detect, path);
        path.pop_back();
        if (r.kind == LltEqVerdict::Different && (best.kind != LltEqVerdict::Different || r.level < best.level))
            best = r;
        else if (r.kind == LltEqVerdict::Inconclusive && best.kind == LltEqVerdict::SameUpTo)
            best = r;
    }
    return best;
}

}  // namespace detail

// M ~n N by the clauses of the approximants: level 0 relates everything; a
// clause failing after j descents means the terms differ from level j+1 on.
inline LltEqVerdict llt_eq(const Term& m, const Term& n, unsigned level, unsigned budget, bool detect = true) {
    require_pure(m, "llt_eq");
    require_pure(n, "llt_eq");
    std::vector<std::string> path;
    LltEqVerdict v = detail::game(m, n, level, 0, budget, detect, path);
    if (v.kind != LltEqVerdict::Different) v.level = level;
    return v;
}

inline std::string to_string(const LltEqVerdict& v) {
    switch (v.kind) {
        case LltEqVerdict::SameUpTo: return "same up to level " + std::to_string(v.level);
        case LltEqVerdict::Inconclusive: return "inconclusive at level " + std::to_string(v.level) + " (budget)";
        default: break;
    }
    std::string p;
    for (const auto& s : v.path) p += (p.empty() ? "" : " / ") + s;
    return "different at level " + std::to_string(v.level) + ": " + v.clause + " at [" + p + "]: " + v.left +
           "  vs  " + v.right;
}

}  // namespace lop
