#include "corpus_terms.hpp"
#include "oracle.hpp"

#include "lop/ciu.hpp"
#include "lop/trees.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace lop;

namespace {

Term P(const std::string& s) { return parse_term(s); }
Term O(const std::string& s) {
    ParseOptions o;
    o.allow_free = true;
    return parse_term(s, prelude(), o);
}
FrameStack S(const std::string& s) { return parse_stack(s); }

const char* kXi = "(\\x y. x x) (\\x y. x x)";
std::string mn_m() { return std::string("\\x. x (\\y. x (") + kXi + ") OMEGA y) (" + kXi + ")"; }
std::string mn_n() { return std::string("\\x. x (x (") + kXi + ") OMEGA) (" + kXi + ")"; }

// random closed pure term over binders in scope
Term random_pure(std::mt19937& rng, int depth, std::vector<std::string>& scope) {
    auto uni = [&](int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); };
    int pick = depth <= 0 ? 0 : uni(0, 4);
    if ((pick == 0 || pick == 3) && !scope.empty()) return Term::free(scope[uni(0, static_cast<int>(scope.size()) - 1)]);
    if (pick == 1 || pick == 0 || scope.empty()) {
        std::string x = std::string(1, static_cast<char>('a' + scope.size()));
        scope.push_back(x);
        Term b = random_pure(rng, depth - 1, scope);
        scope.pop_back();
        return Term::lam(x, b);
    }
    return Term::app(random_pure(rng, depth - 1, scope), random_pure(rng, depth - 1, scope));
}

}  // namespace

// ---------------------------------------------------------------- machine

TEST(Ciu, StackStepRules) {
    auto c = stack_step({S(""), P("I K")});
    ASSERT_EQ(c.size(), 1u);
    EXPECT_EQ(c[0].term, P("I"));
    EXPECT_EQ(c[0].stack, S("K"));
    c = stack_step({S("K"), P("I (+) OMEGA")});
    ASSERT_EQ(c.size(), 2u);
    EXPECT_EQ(c[0].term, P("I"));
    EXPECT_EQ(c[1].term, P("OMEGA"));
    EXPECT_EQ(c[1].stack, S("K"));
    c = stack_step({S("K; I"), P("\\x. x x")});
    ASSERT_EQ(c.size(), 1u);
    EXPECT_EQ(c[0].term, P("K K"));
    EXPECT_EQ(c[0].stack, S("I"));
    EXPECT_TRUE(stack_step({S(""), P("I")}).empty());
}

TEST(Ciu, StackProbExamples) {
    for (unsigned d = 0; d < 4; ++d) {
        ProbInterval i = stack_prob(S(""), P("I"), d);
        EXPECT_EQ(i.lower, 1);
        EXPECT_EQ(i.upper, 1);
        ProbInterval o = stack_prob(S(""), P("OMEGA"), d);
        EXPECT_EQ(o.lower, 0);
        EXPECT_EQ(o.upper, 1);
    }
    EXPECT_EQ(stack_prob(S(""), P("I (+) OMEGA"), 2).lower, Rational(1, 2));
    EXPECT_EQ(stack_prob(S(""), P("I (+) (K (+) OMEGA)"), 4).lower, Rational(3, 4));
    // K::nil with I: (K::nil, I) -> (nil, K)
    EXPECT_EQ(stack_prob(S("K"), P("I"), 1).lower, 1);
    StackOptions det;
    det.detect_divergence = true;
    EXPECT_EQ(stack_prob(S(""), P("OMEGA"), 3, det).upper, 0);
}

TEST(Ciu, StackAgreesWithBigStep) {
    EXPECT_TRUE(stack_vs_bigstep(S(""), P("I (+) (K (+) OMEGA)"), 4));
    EXPECT_TRUE(stack_vs_bigstep(S("K"), P("I"), 3));
    EXPECT_TRUE(stack_vs_bigstep(S(""), P("OMEGA"), 6));
    EXPECT_EQ(converge_prob(P("I K"), 3).lower, 1);
}

// The nested-budget machine equals the oracle's big-step run of S[M] at the
// same depth, for corpus terms under corpus stacks.
TEST(Ciu, NestedMetricMatchesOracle) {
    std::mt19937 rng(11);
    const auto& ts = corpus_terms();
    const auto& stacks = default_stacks();
    StackOptions o;
    o.metric = StackMetric::Nested;
    for (int i = 0; i < 50; ++i) {
        Term m = P(ts[rng() % ts.size()]);
        const FrameStack& s = stacks[rng() % stacks.size()];
        for (unsigned d = 0; d <= 7; ++d) {
            ProbInterval a = stack_prob(s, m, d, o);
            EXPECT_EQ(a.lower, oracle::bigstep(oracle::from_term(s.plug(m)), d).mass())
                << s.to_string() << " | " << print(m) << " @" << d;
            ProbInterval b = converge_prob(s.plug(m), d);
            EXPECT_EQ(a.upper, b.upper);
        }
    }
}

TEST(Ciu, StepsMetricMonotoneAndSound) {
    const auto& ts = corpus_terms();
    const auto& stacks = default_stacks();
    for (std::size_t i = 0; i < ts.size(); i += 2) {
        Term m = P(ts[i]);
        const FrameStack& s = stacks[(i * 7) % stacks.size()];
        ProbInterval prev{0, 1};
        ProbInterval big = converge_prob(s.plug(m), 12);
        for (unsigned d = 0; d <= 10; ++d) {
            ProbInterval cur = stack_prob(s, m, d);
            EXPECT_LE(prev.lower, cur.lower);
            EXPECT_GE(prev.upper, cur.upper);
            // both enclose the same true probability
            EXPECT_FALSE(cur.disjoint_from(big)) << s.to_string() << " | " << ts[i];
            prev = cur;
        }
    }
}

TEST(Ciu, BetaStability) {
    const auto& ts = corpus_terms();
    const auto& stacks = default_stacks();
    Term body = P("\\x. x (+) (x I)");
    for (std::size_t i = 0; i < ts.size(); i += 3) {
        Term n = P(ts[i]);
        Term redex = Term::app(body, n), contractum = open(body.body(), n);
        const FrameStack& s = stacks[i % stacks.size()];
        for (unsigned d = 0; d <= 8; ++d) {
            ProbInterval a = stack_prob(s, redex, d + 2), b = stack_prob(s, contractum, d);
            EXPECT_EQ(a.lower, b.lower);
            EXPECT_EQ(a.upper, b.upper);
        }
    }
}

TEST(Ciu, Compare) {
    EXPECT_EQ(default_stacks().size(), 43u);
    for (const char* t : {"I", "OMEGA", "I (+) OMEGA"})
        EXPECT_EQ(ciu_compare(P(t), P(t), default_stacks(), 8).kind, CiuVerdict::ConsistentUpToBound);
    Term m = P("\\x y. x (+) y"), n = P("(\\x y. x) (+) (\\x y. y)");
    StackOptions det;
    det.detect_divergence = true;
    EXPECT_EQ(ciu_compare(m, n, default_stacks(), 12, det).kind, CiuVerdict::ConsistentUpToBound);
    EXPECT_EQ(ciu_compare(n, m, default_stacks(), 12, det).kind, CiuVerdict::ConsistentUpToBound);
    // equal probabilities on every default stack, once deep enough
    for (const auto& s : default_stacks()) {
        ProbInterval a = stack_prob(s, m, 16, det), b = stack_prob(s, n, 16, det);
        EXPECT_EQ(a.lower, b.lower) << s.to_string();
        EXPECT_EQ(a.upper, a.lower) << s.to_string();
    }
    // Ω keeps an open upper bound without divergence detection
    EXPECT_EQ(ciu_compare(P("I"), P("OMEGA"), {S("")}, 10).kind, CiuVerdict::ConsistentUpToBound);
    CiuVerdict v = ciu_compare(P("I"), P("OMEGA"), {S("")}, 10, det);
    EXPECT_EQ(v.kind, CiuVerdict::NotCIULess);
    EXPECT_TRUE(v.witness.empty());
    // a stack separates I (+) OMEGA from I in one direction only
    EXPECT_EQ(ciu_compare(P("I"), P("I (+) OMEGA"), default_stacks(), 6, det).kind, CiuVerdict::NotCIULess);
    EXPECT_EQ(ciu_compare(P("I (+) OMEGA"), P("I"), default_stacks(), 6, det).kind, CiuVerdict::ConsistentUpToBound);
}

// ---------------------------------------------------------------- trees

TEST(Trees, HeadReduce) {
    HeadForm k = head_reduce(P("I K"), 5);
    ASSERT_EQ(k.kind, HeadForm::Hnf);
    EXPECT_EQ(k.binders, (std::vector<std::string>{"x", "y"}));
    EXPECT_EQ(k.head, "x");
    EXPECT_TRUE(k.args.empty());
    EXPECT_EQ(head_reduce(P("OMEGA"), 10, false).kind, HeadForm::Exhausted);
    EXPECT_EQ(head_reduce(P("OMEGA"), 10, true).kind, HeadForm::Unsolvable);
    std::size_t prev = 0;
    for (unsigned b = 1; b <= 6; ++b) {
        HeadForm xi = head_reduce(P("XI"), b, false);
        ASSERT_EQ(xi.kind, HeadForm::AbstractionChain);
        EXPECT_GT(xi.binders.size(), prev);
        prev = xi.binders.size();
    }
    EXPECT_EQ(head_reduce(P("XI"), 10, true).kind, HeadForm::OrderInfinite);
    HeadForm open_hnf = head_reduce(O("(\\x. f x x) z"), 3);
    ASSERT_EQ(open_hnf.kind, HeadForm::Hnf);
    EXPECT_EQ(open_hnf.head, "f");
    EXPECT_EQ(open_hnf.args.size(), 2u);
    EXPECT_THROW(head_reduce(P("I (+) K"), 3), std::invalid_argument);
}

TEST(Trees, DrawnTrees) {
    EXPECT_EQ(to_string(llt(P("OMEGA"), 3, 50)), "⊥\n");
    EXPECT_EQ(to_string(llt(P("\\x. OMEGA"), 3, 50)), "λx. ⊥\n");
    EXPECT_EQ(to_string(llt(P(kXi), 3, 50)), "⊤\n");
    EXPECT_EQ(to_string(llt(P(mn_m()), 3, 50)), "λx. x\n  λy. x\n    ⊤\n    ⊥\n    y\n  ⊤\n");
    EXPECT_EQ(to_string(llt(P(mn_n()), 3, 50)), "λx. x\n  x\n    ⊤\n    ⊥\n  ⊤\n");
    // without the heuristic, budget-bound nodes stay unknown
    EXPECT_EQ(to_string(llt(P("OMEGA"), 3, 50, false)), "?\n");
    EXPECT_EQ(to_string(llt(P("\\x. OMEGA"), 3, 50, false)), "λx. ?\n");
    // truncation frontier
    EXPECT_EQ(to_string(llt(P(mn_m()), 1, 50)), "λx. x\n  ?\n  ?\n");
}

TEST(Trees, ExamplePairsDiffer) {
    LltEqVerdict v = llt_eq(P(mn_m()), P(mn_n()), 5, 50);
    ASSERT_EQ(v.kind, LltEqVerdict::Different);
    EXPECT_EQ(v.level, 3u);
    EXPECT_EQ(v.path, (std::vector<std::string>{"λx", "arg 1"}));
    EXPECT_EQ(llt_eq(P(mn_m()), P(mn_n()), 2, 50).kind, LltEqVerdict::SameUpTo);
    LltEqVerdict w = llt_eq(P("\\x. x x"), P("\\x. x (\\y. x y)"), 5, 50);
    ASSERT_EQ(w.kind, LltEqVerdict::Different);
    EXPECT_EQ(w.level, 3u);
    EXPECT_EQ(llt_eq(P("OMEGA"), P("\\x. OMEGA"), 3, 50).kind, LltEqVerdict::Different);
    EXPECT_EQ(llt_eq(P("OMEGA"), P("XI"), 3, 50).kind, LltEqVerdict::Different);
    EXPECT_EQ(llt_eq(P("OMEGA"), P("OMEGA"), 3, 50, false).kind, LltEqVerdict::Inconclusive);
}

TEST(Trees, AlphaVariantsAgree) {
    const std::vector<std::pair<const char*, const char*>> pairs = {
        {"\\x y. x", "\\a b. a"},
        {"\\x. x (\\y. x y)", "\\u. u (\\v. u v)"},
        {"(\\x y. x x) (\\x y. x x)", "(\\p q. p p) (\\r s. r r)"}};
    for (auto [a, b] : pairs) {
        EXPECT_EQ(llt_eq(P(a), P(b), 5, 50).kind, LltEqVerdict::SameUpTo) << a;
        EXPECT_TRUE(same_tree(llt(P(a), 5, 50), llt(P(b), 5, 50))) << a;
    }
    EXPECT_EQ(llt_eq(P(mn_m()), P(mn_m()), 5, 50).kind, LltEqVerdict::SameUpTo);
}

TEST(Trees, ApproximantProperties) {
    std::mt19937 rng(5);
    int compared = 0;
    for (int i = 0; i < 300; ++i) {
        std::vector<std::string> scope;
        Term a = random_pure(rng, 4, scope), b = random_pure(rng, 4, scope);
        if (i % 5 == 0) b = a;
        EXPECT_EQ(llt_eq(a, b, 0, 30).kind, LltEqVerdict::SameUpTo);
        // Different is stable upward, SameUpTo downward
        LltEqVerdict prev = llt_eq(a, b, 1, 30);
        for (unsigned k = 2; k <= 7; ++k) {
            LltEqVerdict cur = llt_eq(a, b, k, 30);
            if (prev.kind == LltEqVerdict::Different) {
                EXPECT_EQ(cur.kind, LltEqVerdict::Different);
                EXPECT_EQ(cur.level, prev.level);
            }
            if (cur.kind == LltEqVerdict::SameUpTo) {
                EXPECT_EQ(prev.kind, LltEqVerdict::SameUpTo);
            }
            prev = cur;
        }
        // complete trees: equal exactly when no approximant tells them apart
        LevyLongoTree ta = llt(a, 12, 30), tb = llt(b, 12, 30);
        if (has_unknown(ta) || has_unknown(tb)) continue;
        ++compared;
        LltEqVerdict deep = llt_eq(a, b, 40, 30);
        EXPECT_NE(deep.kind, LltEqVerdict::Inconclusive);
        EXPECT_EQ(same_tree(ta, tb), deep.kind == LltEqVerdict::SameUpTo) << print(a) << " vs " << print(b);
    }
    EXPECT_GT(compared, 100);
}
