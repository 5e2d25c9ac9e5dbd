#pragma once

// Böhm-out: turn a level-n difference between two pure terms into closing
// permutator substitutions and arguments under which the convergence
// probabilities differ, then check the result by evaluation.

#include "lop/trees.hpp"

#include <functional>

namespace lop {

// how a free variable is instantiated: f_x(m + offset)
struct PermutatorChoice {
    unsigned offset = 1;
    bool oplus = false;  // ⊎Q_n instead of Q_n
};

inline Term permutator(const PermutatorChoice& c, unsigned degree) {
    return c.oplus ? oplus_permutator(degree, 0) : bohm_permutator(degree);
}

struct SeparationWitness {
    std::map<std::string, PermutatorChoice> choices;
    std::map<std::string, Term> substitution;
    unsigned k = 0, m = 0;
    std::vector<Term> arguments;
    ProbInterval left, right;
    unsigned depth = 0;  // evaluation depth at which the intervals came apart
};

// M[f~/x~] R~
inline Term close_with(const Term& t, const SeparationWitness& w) {
    Term r = t;
    for (const auto& [x, f] : w.substitution) r = subst(r, x, f);
    return Term::app(r, w.arguments);
}

inline EvalOptions witness_eval_options() {
    EvalOptions o;
    o.detect_divergence = true;
    return o;
}

// Evaluates both closed instances at `depth`; true iff the intervals are
// disjoint. Records the intervals in w.
inline bool verify_witness(const Term& m, const Term& n, SeparationWitness& w, unsigned depth) {
    Term a = close_with(m, w), b = close_with(n, w);
    if (!a.locally_closed() || !b.locally_closed() || !free_vars(a).empty() || !free_vars(b).empty()) return false;
    w.left = converge_prob(a, depth, witness_eval_options());
    w.right = converge_prob(b, depth, witness_eval_options());
    w.depth = depth;
    return w.left.disjoint_from(w.right);
}

inline bool verify_witness(const Term& m, const Term& n, const SeparationWitness& w, unsigned depth) {
    SeparationWitness copy = w;
    return verify_witness(m, n, copy, depth);
}

struct SeparateResult {
    enum Kind {
        Separated,
        NotSeparatedAtLevel,  // the approximants agree up to the level
        Inconclusive,         // head reduction ran out of budget first
        VerificationTimeout,  // a witness was built but never came apart by depth 64
    } kind = NotSeparatedAtLevel;
    LltEqVerdict difference;
    SeparationWitness witness;
};

namespace detail {

struct Plan {
    std::map<std::string, PermutatorChoice> vars;
    unsigned k = 0;
    std::function<std::vector<Term>(unsigned, const std::map<std::string, PermutatorChoice>&)> args =
        [](unsigned, const std::map<std::string, PermutatorChoice>&) { return std::vector<Term>{}; };
};

inline PermutatorChoice choice_of(const std::map<std::string, PermutatorChoice>& vs, const std::string& x) {
    auto it = vs.find(x);
    return it == vs.end() ? PermutatorChoice{} : it->second;
}

inline std::vector<Term> omegas(unsigned n) { return std::vector<Term>(n, omega_term()); }

// λx1..xn. xi
inline Term selector(unsigned n, unsigned i) {
    std::vector<std::string> xs;
    for (unsigned j = 1; j <= n; ++j) xs.push_back("x" + std::to_string(j));
    return Term::lams(xs, Term::free(xs[i - 1]));
}

// the level-1 cases: the weak heads a, b already disagree
inline Plan base_plan(const WeakHead& a, const WeakHead& b) {
    Plan p;
    auto ka = a.kind, kb = b.kind;
    if (ka == WeakHead::Diverges || kb == WeakHead::Diverges) {
        const WeakHead& live = ka == WeakHead::Diverges ? b : a;
        if (live.kind == WeakHead::HeadVar) {
            auto [h, xs] = spine(live.term);
            p.vars[h.name()] = {static_cast<unsigned>(xs.size()) + 1, false};
        }
        return p;
    }
    if (ka != kb) {
        const WeakHead& var = ka == WeakHead::HeadVar ? a : b;
        p.vars[spine(var.term).first.name()] = {1, true};
        return p;
    }
    if (ka != WeakHead::HeadVar) throw std::logic_error("separator: no difference at the end of the path");
    auto [hx, xs] = spine(a.term);
    auto [hy, ys] = spine(b.term);
    const unsigned t = static_cast<unsigned>(xs.size()), s = static_cast<unsigned>(ys.size());
    if (hx.name() == hy.name()) {
        if (t == s) throw std::logic_error("separator: heads and arities agree at the end of the path");
        p.vars[hx.name()] = {std::max(t, s), false};
    } else {
        // the head with fewer arguments gets one more unit of degree
        const unsigned hi = std::max(t, s);
        p.vars[hx.name()] = {t <= s ? hi + 1 : hi, false};
        p.vars[hy.name()] = {t <= s ? hi : hi + 1, false};
    }
    p.args = [](unsigned m, const std::map<std::string, PermutatorChoice>&) { return omegas(m); };
    return p;
}

}  // namespace detail

// Follows the path of the least approximant difference, builds the witness
// from the leaf upwards, fixes m = k+1, and verifies by evaluation at
// depths 4, 8, ..., 64.
inline SeparateResult separate(const Term& m, const Term& n, unsigned max_level, unsigned budget) {
    SeparateResult res;
    res.difference = llt_eq(m, n, max_level, budget);
    if (res.difference.kind == LltEqVerdict::SameUpTo) return res;
    if (res.difference.kind == LltEqVerdict::Inconclusive) {
        res.kind = SeparateResult::Inconclusive;
        return res;
    }

    struct Step {
        bool lambda;
        std::string var;  // lambda: the opened variable; else the shared head
        unsigned arity = 0, index = 0;
    };
    // walk the path again, opening binders with names unique along it so
    // one choice map covers every variable met
    std::vector<Step> steps;
    std::set<std::string> used = free_vars(m);
    for (const auto& x : free_vars(n)) used.insert(x);
    Term a = m, b = n;
    for (const std::string& p : res.difference.path) {
        WeakHead wa = weak_head(a, budget, true), wb = weak_head(b, budget, true);
        if (p.rfind("λ", 0) == 0) {
            std::string z = fresh_name(wa.term.name(), used);
            used.insert(z);
            steps.push_back({true, z});
            a = open(wa.term.body(), Term::free(z));
            b = open(wb.term.body(), Term::free(z));
        } else {
            unsigned i = static_cast<unsigned>(std::stoul(p.substr(4)));
            auto [h, xs] = spine(wa.term);
            auto ys = spine(wb.term).second;
            steps.push_back({false, h.name(), static_cast<unsigned>(xs.size()), i});
            a = xs[i - 1];
            b = ys[i - 1];
        }
    }
    detail::Plan plan = detail::base_plan(weak_head(a, budget, true), weak_head(b, budget, true));

    for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
        auto inner = plan.args;
        if (it->lambda) {
            // R = f_z(m + m_z) S
            std::string z = it->var;
            plan.args = [inner, z](unsigned mm, const std::map<std::string, PermutatorChoice>& vs) {
                PermutatorChoice cz = detail::choice_of(vs, z);
                std::vector<Term> r{permutator(cz, mm + cz.offset)};
                auto rest = inner(mm, vs);
                r.insert(r.end(), rest.begin(), rest.end());
                return r;
            };
        } else {
            // R = Ω^(m+m_x-s-1) (λx1..x(m+m_x-1). xi) S
            const std::string x = it->var;
            const unsigned s = it->arity, i = it->index;
            if (plan.k <= s) plan.k = s + 1;
            plan.args = [inner, x, s, i](unsigned mm, const std::map<std::string, PermutatorChoice>& vs) {
                const unsigned deg = mm + detail::choice_of(vs, x).offset;
                std::vector<Term> r = detail::omegas(deg - s - 1);
                r.push_back(detail::selector(deg - 1, i));
                auto rest = inner(mm, vs);
                r.insert(r.end(), rest.begin(), rest.end());
                return r;
            };
        }
    }

    SeparationWitness& w = res.witness;
    w.k = plan.k;
    w.m = plan.k + 1;
    std::set<std::string> fv = free_vars(m);
    for (const auto& x : free_vars(n)) fv.insert(x);
    for (const auto& x : fv) w.choices[x] = detail::choice_of(plan.vars, x);
    for (const auto& [x, c] : w.choices) w.substitution[x] = permutator(c, w.m + c.offset);
    w.arguments = plan.args(w.m, plan.vars);
    for (unsigned d = 4; d <= 64; d *= 2)
        if (verify_witness(m, n, w, d)) {
            res.kind = SeparateResult::Separated;
            return res;
        }
    res.kind = SeparateResult::VerificationTimeout;
    return res;
}

inline std::string to_string(const SeparationWitness& w) {
    std::string out = "substitution:\n";
    if (w.substitution.empty()) out += "  (none)\n";
    for (const auto& [x, f] : w.substitution) {
        const PermutatorChoice& c = w.choices.count(x) ? w.choices.at(x) : PermutatorChoice{};
        out += "  " + x + " := " + (c.oplus ? "OQ" : "Q") + std::to_string(w.m + c.offset) + " = " + print(f) + "\n";
    }
    out += "arguments (m = " + std::to_string(w.m) + "):\n";
    if (w.arguments.empty()) out += "  (none)\n";
    for (const Term& a : w.arguments) out += "  " + print(a) + "\n";
    out += "left:  " + to_string(w.left) + "\nright: " + to_string(w.right) + "\n";
    return out;
}

}  // namespace lop
