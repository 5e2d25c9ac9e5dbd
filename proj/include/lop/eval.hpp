#pragma once

// Probabilistic evaluation: one-step reduction, the depth-bounded big-step
// approximation semantics, and convergence intervals. All arithmetic is exact.

#include "lop/rational.hpp"
#include "lop/syntax.hpp"

#include <map>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace lop {

enum class Strategy { CBN, CBV };

inline const char* to_string(Strategy s) { return s == Strategy::CBN ? "cbn" : "cbv"; }

struct EvalOptions {
    Strategy strategy = Strategy::CBN;
    // Certify a cut term as divergent when its deterministic reduction
    // revisits an α-equal term; such cuts then add nothing to the upper bound.
    bool detect_divergence = false;
    unsigned cycle_limit = 64;
    std::size_t size_limit = 1u << 14;
};

// ---------------------------------------------------------------- distributions

class ValueDistribution {
public:
    using Map = std::map<Term, Rational, TermLess>;

    void add(const Term& v, const Rational& p) {
        if (p == 0) return;
        auto [it, fresh] = m_.try_emplace(v, p);
        if (!fresh) it->second += p;
        mass_ += p;
    }
    void add_scaled(const ValueDistribution& d, const Rational& w) {
        if (w == 0) return;
        for (const auto& [v, p] : d.m_) add(v, p * w);
    }

    const Rational& mass() const { return mass_; }
    bool empty() const { return m_.empty(); }
    std::size_t size() const { return m_.size(); }
    Rational at(const Term& v) const {
        auto it = m_.find(v);
        return it == m_.end() ? Rational(0) : it->second;
    }
    Map::const_iterator begin() const { return m_.begin(); }
    Map::const_iterator end() const { return m_.end(); }

    // pointwise order
    bool leq(const ValueDistribution& o) const {
        for (const auto& [v, p] : m_)
            if (p > o.at(v)) return false;
        return true;
    }
    // pointwise supremum of two comparable distributions
    static ValueDistribution lub(const ValueDistribution& a, const ValueDistribution& b) {
        ValueDistribution r;
        for (const auto& [v, p] : a.m_) r.add(v, std::max(p, b.at(v)));
        for (const auto& [v, p] : b.m_)
            if (a.at(v) == 0) r.add(v, p);
        return r;
    }

    friend bool operator==(const ValueDistribution& a, const ValueDistribution& b) {
        if (a.m_.size() != b.m_.size() || a.mass_ != b.mass_) return false;
        auto i = a.m_.begin();
        auto j = b.m_.begin();
        for (; i != a.m_.end(); ++i, ++j)
            if (!(i->first == j->first) || i->second != j->second) return false;
        return true;
    }

private:
    Map m_;
    Rational mass_ = 0;
};

// lines `a/b<TAB>term`, heaviest first, ties in canonical term order
inline std::string to_string(const ValueDistribution& d) {
    std::vector<std::pair<Term, Rational>> rows(d.begin(), d.end());
    std::stable_sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) { return x.second > y.second; });
    std::string out;
    for (const auto& [v, p] : rows) out += to_string(p) + "\t" + print(v) + "\n";
    return out;
}

// lower approximation plus the mass cut off by the budget
struct Approx {
    ValueDistribution dist;
    Rational residual = 0;

    ProbInterval interval() const { return {dist.mass(), dist.mass() + residual}; }
};

// ---------------------------------------------------------------- small steps

struct StepOutcome {
    enum Kind { Value, Deterministic, Split, Stuck } kind = Stuck;
    Term next;   // Deterministic
    Term left;   // Split
    Term right;  // Split
};

namespace detail {

inline StepOutcome lift_app_fun(const StepOutcome& s, const Term& a) {
    StepOutcome r;
    r.kind = s.kind;
    if (s.kind == StepOutcome::Deterministic) r.next = Term::app(s.next, a);
    if (s.kind == StepOutcome::Split) {
        r.left = Term::app(s.left, a);
        r.right = Term::app(s.right, a);
    }
    return r;
}

}  // namespace detail

inline StepOutcome cbn_step(const Term& m) {
    switch (m.kind()) {
        case TermKind::Abs: return {StepOutcome::Value, {}, {}, {}};
        case TermKind::Choice: return {StepOutcome::Split, {}, m.left(), m.right()};
        case TermKind::App: {
            const Term& f = m.fun();
            if (f.is_abs()) {
                if (!m.arg().locally_closed()) return {};
                return {StepOutcome::Deterministic, open(f.body(), m.arg()), {}, {}};
            }
            StepOutcome s = cbn_step(f);
            if (s.kind == StepOutcome::Value) return {};
            return detail::lift_app_fun(s, m.arg());
        }
        default: return {};
    }
}

inline StepOutcome cbv_step(const Term& m) {
    switch (m.kind()) {
        case TermKind::Abs: return {StepOutcome::Value, {}, {}, {}};
        case TermKind::Choice: return {StepOutcome::Split, {}, m.left(), m.right()};
        case TermKind::App: {
            const Term& f = m.fun();
            const Term& a = m.arg();
            if (!f.is_abs()) {
                StepOutcome s = cbv_step(f);
                if (s.kind == StepOutcome::Value) return {};
                return detail::lift_app_fun(s, a);
            }
            if (!a.is_abs()) {
                StepOutcome s = cbv_step(a);
                StepOutcome r;
                r.kind = s.kind;
                if (s.kind == StepOutcome::Deterministic) r.next = Term::app(f, s.next);
                else if (s.kind == StepOutcome::Split) {
                    r.left = Term::app(f, s.left);
                    r.right = Term::app(f, s.right);
                } else r.kind = StepOutcome::Stuck;
                return r;
            }
            if (!a.locally_closed()) return {};
            return {StepOutcome::Deterministic, open(f.body(), a), {}, {}};
        }
        default: return {};
    }
}

inline StepOutcome step(const Term& m, Strategy s) { return s == Strategy::CBN ? cbn_step(m) : cbv_step(m); }

// True if the deterministic reduction of m provably loops: it revisits an
// α-equal term before any split, value, or the step limit.
inline bool certified_divergent(const Term& m, const EvalOptions& opt) {
    std::unordered_set<Term> seen;
    Term cur = m;
    for (unsigned i = 0; i <= opt.cycle_limit; ++i) {
        if (cur.size() > opt.size_limit) return false;
        if (!seen.insert(cur).second) return true;
        StepOutcome s = step(cur, opt.strategy);
        if (s.kind != StepOutcome::Deterministic) return false;
        cur = s.next;
    }
    return false;
}

// ---------------------------------------------------------------- big steps

// One evaluator per query; the memo table lives with it.
class Evaluator {
public:
    explicit Evaluator(EvalOptions opt = {}) : opt_(opt) {}

    const EvalOptions& options() const { return opt_; }

    // depth counts ba/bs rule applications along a derivation path; bv needs
    // depth >= 1 and bt cuts at depth 0
    const Approx& eval(const Term& m, unsigned depth) {
        Key k{m, depth};
        if (auto it = memo_.find(k); it != memo_.end()) return it->second;
        Approx r = compute(m, depth);
        return memo_.emplace(std::move(k), std::move(r)).first->second;
    }

    bool divergent(const Term& m) {
        if (auto it = div_.find(m); it != div_.end()) return it->second;
        bool d = certified_divergent(m, opt_);
        div_.emplace(m, d);
        return d;
    }

private:
    struct Key {
        Term t;
        unsigned d;
        bool operator==(const Key& o) const { return d == o.d && t == o.t; }
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const { return detail::mix(k.t.hash(), k.d); }
    };

    Approx cut(const Term& m) {
        Approx r;
        r.residual = (opt_.detect_divergence && divergent(m)) ? Rational(0) : Rational(1);
        return r;
    }

    Approx compute(const Term& m, unsigned depth) {
        if (depth == 0) return cut(m);
        Approx r;
        // a certified loop has empty semantics, whatever the budget
        if (opt_.detect_divergence && m.is_app() && divergent(m)) return r;
        switch (m.kind()) {
            case TermKind::Abs:
                if (m.closed()) r.dist.add(m, 1);
                return r;
            case TermKind::Choice: {
                static const Rational half(1, 2);
                const Approx& a = eval(m.left(), depth - 1);
                r.dist.add_scaled(a.dist, half);
                r.residual += a.residual * half;
                const Approx& b = eval(m.right(), depth - 1);
                r.dist.add_scaled(b.dist, half);
                r.residual += b.residual * half;
                return r;
            }
            case TermKind::App: {
                if (!m.closed()) return r;  // stuck
                Approx f = eval(m.fun(), depth - 1);
                r.residual = f.residual;
                if (f.dist.empty()) return r;
                if (opt_.strategy == Strategy::CBN) {
                    for (const auto& [v, p] : f.dist) {
                        const Approx& b = eval(open(v.body(), m.arg()), depth - 1);
                        r.dist.add_scaled(b.dist, p);
                        r.residual += b.residual * p;
                    }
                } else {
                    Approx a = eval(m.arg(), depth - 1);
                    r.residual += f.dist.mass() * a.residual;
                    for (const auto& [v, p] : f.dist)
                        for (const auto& [w, q] : a.dist) {
                            const Approx& b = eval(open(v.body(), w), depth - 1);
                            r.dist.add_scaled(b.dist, p * q);
                            r.residual += b.residual * p * q;
                        }
                }
                return r;
            }
            default: return r;  // stuck on a variable
        }
    }

    EvalOptions opt_;
    std::unordered_map<Key, Approx, KeyHash> memo_;
    std::unordered_map<Term, bool> div_;
};

inline void require_closed(const Term& m, const char* what) {
    if (!m.closed()) throw std::invalid_argument(std::string(what) + ": term is not closed: " + print(m));
}

inline ValueDistribution approx_semantics(const Term& m, unsigned depth, const EvalOptions& opt = {}) {
    require_closed(m, "approx_semantics");
    Evaluator ev(opt);
    return ev.eval(m, depth).dist;
}

inline Approx approximate(const Term& m, unsigned depth, const EvalOptions& opt = {}) {
    require_closed(m, "approximate");
    Evaluator ev(opt);
    return ev.eval(m, depth);
}

inline ProbInterval converge_prob(const Term& m, unsigned depth, const EvalOptions& opt = {}) {
    return approximate(m, depth, opt).interval();
}

struct LubResult {
    ValueDistribution dist;
    Rational gap;      // upper - lower at the last depth tried
    unsigned depth = 0;
    bool reached = false;
};

// iterative deepening until the unexplored mass drops below mass_gap
inline LubResult semantics_lub(const Term& m, const Rational& mass_gap, unsigned max_depth,
                               const EvalOptions& opt = {}) {
    if (mass_gap <= 0) throw std::invalid_argument("semantics_lub: mass gap must be positive");
    require_closed(m, "semantics_lub");
    Evaluator ev(opt);
    LubResult out;
    for (unsigned d = 0; d <= max_depth; ++d) {
        const Approx& a = ev.eval(m, d);
        out.dist = a.dist;
        out.gap = a.residual;
        out.depth = d;
        if (a.residual < mass_gap) {
            out.reached = true;
            break;
        }
    }
    return out;
}

// Exhaustive exploration of the small-step reduction tree, every path cut
// after `steps` steps.
inline Approx smallstep_distribution(const Term& m, unsigned steps, Strategy s = Strategy::CBN) {
    require_closed(m, "smallstep_distribution");
    struct Walker {
        Strategy s;
        std::unordered_map<Term, std::map<unsigned, Approx>> memo;
        Approx go(const Term& t, unsigned n) {
            auto& slot = memo[t];
            if (auto it = slot.find(n); it != slot.end()) return it->second;
            Approx r;
            StepOutcome o = step(t, s);
            if (o.kind == StepOutcome::Value) r.dist.add(t, 1);
            else if (o.kind == StepOutcome::Stuck) {
            } else if (n == 0) r.residual = 1;
            else if (o.kind == StepOutcome::Deterministic) r = go(o.next, n - 1);
            else {
                static const Rational half(1, 2);
                Approx a = go(o.left, n - 1), b = go(o.right, n - 1);
                r.dist.add_scaled(a.dist, half);
                r.dist.add_scaled(b.dist, half);
                r.residual = (a.residual + b.residual) * half;
            }
            memo[t].emplace(n, r);
            return r;
        }
    } w{s, {}};
    return w.go(m, steps);
}

}  // namespace lop
