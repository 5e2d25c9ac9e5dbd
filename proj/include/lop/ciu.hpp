#pragma once

// Frame-stack machine for call-by-name evaluation and CIU testing: a term is
// compared with another under a family of stacks of arguments.

#include "lop/applicative.hpp"
#include "lop/eval.hpp"

namespace lop {

struct StackConfig {
    FrameStack stack;
    Term term;
};

// (S, MN) -> (N::S, M); (S, M(+)N) -> (S,M),(S,N); (N::S, \x.M) -> (S, M[N/x]).
// Empty for (nil, V) and for stuck configurations.
inline std::vector<StackConfig> stack_step(const StackConfig& c) {
    const Term& m = c.term;
    switch (m.kind()) {
        case TermKind::App: return {{c.stack.push(m.arg()), m.fun()}};
        case TermKind::Choice: return {{c.stack, m.left()}, {c.stack, m.right()}};
        case TermKind::Abs:
            if (c.stack.empty() || !c.stack.top().locally_closed()) return {};
            return {{c.stack.pop(), open(m.body(), c.stack.top())}};
        default: return {};
    }
}

enum class StackMetric {
    Steps,   // one unit per machine step; (nil, V) is free
    Nested,  // frames carry the budget of the application that pushed them
};

struct StackOptions {
    StackMetric metric = StackMetric::Steps;
    // a cut configuration whose deterministic machine run revisits itself
    // contributes nothing to the upper bound
    bool detect_divergence = false;
    unsigned cycle_limit = 64;
};

namespace detail {

inline std::size_t stack_hash(const FrameStack& s, const Term& m, std::size_t extra) {
    std::size_t h = mix(m.hash(), extra);
    for (const Term& f : s.frames()) h = mix(h, f.hash());
    return h;
}

class StackMachine {
public:
    explicit StackMachine(StackOptions o) : o_(o) {}

    Approx steps(const FrameStack& s, const Term& m, unsigned d) {
        if (s.empty() && m.is_abs()) return unit();
        Key k{s, m, {}, d};
        if (auto it = memo_.find(k); it != memo_.end()) return it->second;
        Approx r;
        if (d == 0) r = cut(s, m);
        else {
            auto next = stack_step({s, m});
            Rational w(1, static_cast<long>(std::max<std::size_t>(next.size(), 1)));
            for (const auto& c : next) {
                Approx a = steps(c.stack, c.term, d - 1);
                r.dist.add_scaled(a.dist, w);
                r.residual += a.residual * w;
            }
        }
        memo_.emplace(std::move(k), r);
        return r;
    }

    // budgets[i] belongs to the i-th frame from the top
    Approx nested(const FrameStack& s, const std::vector<unsigned>& budgets, const Term& m, unsigned e) {
        Key k{s, m, budgets, e};
        if (auto it = memo_.find(k); it != memo_.end()) return it->second;
        Approx r;
        if (e == 0) r = cut(s, m);
        else if (m.is_app()) {
            std::vector<unsigned> b{e - 1};
            b.insert(b.end(), budgets.begin(), budgets.end());
            r = nested(s.push(m.arg()), b, m.fun(), e - 1);
        } else if (m.is_choice()) {
            static const Rational half(1, 2);
            for (const Term& x : {m.left(), m.right()}) {
                Approx a = nested(s, budgets, x, e - 1);
                r.dist.add_scaled(a.dist, half);
                r.residual += a.residual * half;
            }
        } else if (m.is_abs()) {
            if (s.empty()) r = unit();
            else if (s.top().locally_closed()) {
                std::vector<unsigned> b(budgets.begin() + 1, budgets.end());
                r = nested(s.pop(), b, open(m.body(), s.top()), budgets.front());
            }
        }
        memo_.emplace(std::move(k), r);
        return r;
    }

private:
    struct Key {
        FrameStack s;
        Term m;
        std::vector<unsigned> b;
        unsigned d;
        bool operator==(const Key& o) const { return d == o.d && b == o.b && m == o.m && s == o.s; }
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const {
            std::size_t h = stack_hash(k.s, k.m, k.d);
            for (unsigned x : k.b) h = mix(h, x);
            return h;
        }
    };

    static Approx unit() {
        Approx a;
        a.dist.add(Term::abs_raw("_", Term::bound(0)), 1);
        return a;
    }

    Approx cut(const FrameStack& s, const Term& m) {
        Approx a;
        a.residual = (o_.detect_divergence && loops(s, m)) ? Rational(0) : Rational(1);
        return a;
    }

    bool loops(FrameStack s, Term m) const {
        std::vector<std::pair<FrameStack, Term>> seen;
        for (unsigned i = 0; i <= o_.cycle_limit; ++i) {
            for (const auto& [s2, m2] : seen)
                if (m2 == m && s2 == s) return true;
            seen.emplace_back(s, m);
            auto next = stack_step({s, m});
            if (next.size() != 1) return false;
            s = next[0].stack;
            m = next[0].term;
        }
        return false;
    }

    StackOptions o_;
    std::unordered_map<Key, Approx, KeyHash> memo_;
};

}  // namespace detail

// Bounds on ⊢sup(S, M): the lower end sums the (value) leaves reached within
// the budget, the upper end adds the mass cut off by it.
inline ProbInterval stack_prob(const FrameStack& s, const Term& m, unsigned depth, const StackOptions& o = {}) {
    require_closed(m, "stack_prob");
    for (const Term& f : s.frames()) require_closed(f, "stack_prob frame");
    detail::StackMachine sm(o);
    if (o.metric == StackMetric::Steps) return sm.steps(s, m, depth).interval();
    // S[M] at depth d: M runs with d-k, the i-th frame from the top with d-k+i-1
    const unsigned k = static_cast<unsigned>(s.size());
    if (depth < k) return {0, 1};
    std::vector<unsigned> b;
    for (unsigned i = 1; i <= k; ++i) b.push_back(depth - k + i - 1);
    return sm.nested(s, b, m, depth - k).interval();
}

// Both the step-metered machine and the nested-budget machine against the
// big-step semantics of S[M]: the former must overlap it, the latter must
// coincide with it.
inline bool stack_vs_bigstep(const FrameStack& s, const Term& m, unsigned depth) {
    ProbInterval big = converge_prob(s.plug(m), depth);
    ProbInterval steps = stack_prob(s, m, depth);
    StackOptions o;
    o.metric = StackMetric::Nested;
    ProbInterval nested = stack_prob(s, m, depth, o);
    bool overlap = !(steps.upper < big.lower || big.upper < steps.lower);
    return overlap && nested.lower == big.lower && nested.upper == big.upper;
}

// all stacks of length <= max_len over the given arguments, shortest first
inline std::vector<FrameStack> enumerate_stacks(const std::vector<Term>& args, unsigned max_len = 2) {
    std::vector<FrameStack> out{FrameStack()};
    std::size_t from = 0;
    for (unsigned len = 1; len <= max_len; ++len) {
        std::size_t to = out.size();
        for (std::size_t i = from; i < to; ++i)
            for (const Term& a : args) {
                auto fr = out[i].frames();
                fr.push_back(a);
                out.push_back(FrameStack::from(fr));
            }
        from = to;
    }
    return out;
}

inline const std::vector<FrameStack>& default_stacks() {
    static const std::vector<FrameStack> s = enumerate_stacks(default_arguments(), 2);
    return s;
}

struct CiuVerdict {
    enum Kind { NotCIULess, ConsistentUpToBound } kind = ConsistentUpToBound;
    FrameStack witness;
    ProbInterval m, n;
    std::size_t stacks_tried = 0;
};

// Refutes M <=CIU N only on a stack where M's lower bound beats N's upper one.
inline CiuVerdict ciu_compare(const Term& m, const Term& n, const std::vector<FrameStack>& stacks, unsigned depth,
                              const StackOptions& o = {}) {
    CiuVerdict v;
    for (const FrameStack& s : stacks) {
        ++v.stacks_tried;
        ProbInterval a = stack_prob(s, m, depth, o), b = stack_prob(s, n, depth, o);
        if (a.lower > b.upper) {
            v.kind = CiuVerdict::NotCIULess;
            v.witness = s;
            v.m = a;
            v.n = b;
            return v;
        }
    }
    return v;
}

}  // namespace lop
