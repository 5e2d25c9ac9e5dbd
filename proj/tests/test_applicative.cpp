#include "corpus_terms.hpp"
#include "oracle.hpp"

#include "lop/applicative.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace lop;

namespace {

Term P(const std::string& s) { return parse_term(s); }

AppParams small(unsigned k, unsigned d, std::vector<std::string> args) {
    AppParams p;
    p.args.clear();
    for (auto& a : args) p.args.push_back(P(a));
    p.k = k;
    p.d = d;
    return p;
}

const char* kCountM = "\\x. (\\z. OMEGA) (+) (\\y z. OMEGA)";
const char* kCountN = "(\\x z. OMEGA) (+) (\\x y z. OMEGA)";
const char* kPropM = "\\x y. x (+) y";
const char* kPropN = "(\\x y. x) (+) (\\x y. y)";

}  // namespace

TEST(Applicative, IdentityFragmentHasThreeStates) {
    AppFragment f = AppFragment::build({P("I")}, small(1, 1, {"K"}));
    ASSERT_EQ(f.states.size(), 3u);
    int i = f.index_of(P("I"), false), nu = f.index_of(P("I"), true), k = f.index_of(P("K"), false);
    ASSERT_GE(i, 0);
    ASSERT_GE(nu, 0);
    ASSERT_GE(k, 0);
    // I -tau-> nu x.x with 1, nu x.x -K-> K with 1
    EXPECT_EQ(f.lmc.row(i, 0), (Row{{nu, 1}}));
    EXPECT_EQ(f.lmc.row(nu, 1), (Row{{k, 1}}));
    EXPECT_EQ(f.lmc.sort(i), 0);
    EXPECT_EQ(f.lmc.sort(nu), 1);
    EXPECT_TRUE(f.states[k].truncated);
    EXPECT_FALSE(f.states[i].truncated);
}

TEST(Applicative, OmegaFragment) {
    AppParams p = small(4, 2, {"I"});
    p.detect_divergence = false;
    AppFragment f = AppFragment::build({P("OMEGA")}, p);
    ASSERT_EQ(f.states.size(), 1u);
    EXPECT_TRUE(f.lmc.row(0, 0).empty());
    EXPECT_EQ(f.states[0].residual, 1);
    p.detect_divergence = true;
    EXPECT_EQ(AppFragment::build({P("OMEGA")}, p).states[0].residual, 0);
}

TEST(Applicative, CbvUsesValueArgumentsOnly) {
    AppParams p = small(4, 2, {"I", "I (+) OMEGA", "K"});
    p.strategy = Strategy::CBV;
    AppFragment f = AppFragment::build({P("I")}, p);
    EXPECT_EQ(f.labels.size(), 2u);
    p.strategy = Strategy::CBN;
    EXPECT_EQ(AppFragment::build({P("I")}, p).labels.size(), 3u);
}

TEST(Applicative, StateCapMarksTruncation) {
    AppParams p;
    p.max_states = 3;
    AppFragment f = AppFragment::build({P(kCountM)}, p);
    EXPECT_LE(f.states.size(), 3u);
    bool any = false;
    for (auto& s : f.states) any = any || s.truncated;
    EXPECT_TRUE(any);
}

TEST(Applicative, CountingExampleNotBisimilar) {
    AppParams p;
    BisimVerdict v = check_bounded_bisim(P(kCountM), P(kCountN), p);
    ASSERT_EQ(v.kind, BisimVerdict::NotBisimilar);
    EXPECT_TRUE(replay(v, P(kCountM), P(kCountN), p));
    std::string cert = format_certificate(v, P(kCountM), P(kCountN), p);
    EXPECT_NE(cert.find("not bisimilar"), std::string::npos);
    EXPECT_NE(cert.find("tau into"), std::string::npos);
    // a single discriminating argument suffices
    AppParams one = small(8, 3, {"\\z. OMEGA"});
    EXPECT_EQ(check_bounded_bisim(P(kCountM), P(kCountN), one).kind, BisimVerdict::NotBisimilar);
    // tampering with the trace breaks the replay
    BisimVerdict bad = v;
    bad.trace.front().is.lower += 1;
    EXPECT_FALSE(replay(bad, P(kCountM), P(kCountN), p));
}

TEST(Applicative, ReflexiveAndSameSemanticsPairs) {
    for (const char* s : {"I", "OMEGA", kCountM, "I (+) OMEGA"}) {
        EXPECT_EQ(check_bounded_bisim(P(s), P(s)).kind, BisimVerdict::IndistinguishableUpToBound);
        EXPECT_EQ(check_bounded_sim(P(s), P(s)).kind, SimVerdict::IndistinguishableUpToBound);
    }
    EXPECT_EQ(check_bounded_bisim(P("(\\x. x) K"), P("K")).kind, BisimVerdict::IndistinguishableUpToBound);
    EXPECT_EQ(check_bounded_sim(P("(\\x. x) K"), P("K")).kind, SimVerdict::IndistinguishableUpToBound);
    EXPECT_EQ(check_bounded_sim(P("K"), P("(\\x. x) K")).kind, SimVerdict::IndistinguishableUpToBound);
}

TEST(Applicative, ChoiceUnderLambdaNotSimilar) {
    AppParams p;
    SimVerdict v = check_bounded_sim(P(kPropM), P(kPropN), p);
    ASSERT_EQ(v.kind, SimVerdict::NotSimilar);
    EXPECT_TRUE(replay(v, P(kPropM), P(kPropN), p));
    EXPECT_NE(format_certificate(v, P(kPropM), P(kPropN), p).find("not similar"), std::string::npos);
    // the other direction also fails: N's branches each need something M lacks
    EXPECT_EQ(check_bounded_bisim(P(kPropM), P(kPropN), p).kind, BisimVerdict::NotBisimilar);
}

TEST(Applicative, OmegaBelowEverything) {
    for (const char* s : {"I", "OMEGA", kCountM, kPropN, "I (+) OMEGA"})
        EXPECT_EQ(check_bounded_sim(P("OMEGA"), P(s)).kind, SimVerdict::IndistinguishableUpToBound) << s;
    SimVerdict v = check_bounded_sim(P("I"), P("OMEGA"));
    EXPECT_EQ(v.kind, SimVerdict::NotSimilar);
    EXPECT_TRUE(replay(v, P("I"), P("OMEGA"), AppParams{}));
}

TEST(Applicative, Adequacy) {
    // without certified divergence Ω keeps an open interval
    AdequacyResult r = adequacy_check(P("I"), P("OMEGA"), 0);
    EXPECT_FALSE(r.refuted);
    r = adequacy_check(P("I (+) OMEGA"), P("I"), 2);
    EXPECT_TRUE(r.refuted);
    EXPECT_EQ(r.m.lower, Rational(1, 2));
    EXPECT_EQ(r.m.upper, Rational(1, 2));
    EXPECT_EQ(r.n.lower, 1);
    for (const auto& s : corpus_terms()) EXPECT_FALSE(adequacy_check(P(s), P(s), 6).refuted) << s;
}

// Every refutation over random corpus pairs replays.
TEST(Applicative, CorpusSoundness) {
    std::mt19937 rng(7);
    const auto& ts = corpus_terms();
    AppParams p;
    p.k = 6;
    p.d = 2;
    int refuted = 0;
    for (int i = 0; i < 40; ++i) {
        Term a = P(ts[rng() % ts.size()]), b = P(ts[rng() % ts.size()]);
        BisimVerdict v = check_bounded_bisim(a, b, p);
        if (v.kind == BisimVerdict::NotBisimilar) {
            ++refuted;
            EXPECT_TRUE(replay(v, a, b, p)) << print(a) << " vs " << print(b);
        }
        SimVerdict s = check_bounded_sim(a, b, p);
        if (s.kind == SimVerdict::NotSimilar) {
            EXPECT_TRUE(replay(s, a, b, p)) << print(a) << " vs " << print(b);
        }
    }
    EXPECT_GT(refuted, 0);
}

TEST(Applicative, BetaAndChoiceSymmetryNeverSplit) {
    AppParams p;
    p.k = 6;
    p.d = 2;
    const auto& ts = corpus_terms();
    for (std::size_t i = 0; i + 1 < ts.size(); i += 3) {
        Term m = P(ts[i]), n = P(ts[i + 1]);
        Term redex = Term::app(P("\\x. x"), m);
        EXPECT_EQ(check_bounded_bisim(redex, m, p).kind, BisimVerdict::IndistinguishableUpToBound) << ts[i];
        Term l = Term::choice(m, n), r = Term::choice(n, m);
        EXPECT_EQ(check_bounded_bisim(l, r, p).kind, BisimVerdict::IndistinguishableUpToBound) << ts[i];
        // (λx.M')N vs M'[N/x] with a non-trivial body
        Term body = P("\\y. y (+) K");
        Term beta = Term::app(body, n);
        EXPECT_EQ(check_bounded_bisim(beta, open(body.body(), n), p).kind, BisimVerdict::IndistinguishableUpToBound);
    }
}

TEST(Applicative, EvidenceIsMonotone) {
    const std::vector<std::pair<const char*, const char*>> pairs = {
        {kCountM, kCountN}, {kPropM, kPropN}, {"I", "OMEGA"}, {"I (+) OMEGA", "I"}};
    for (auto [a, b] : pairs) {
        bool seen = false;
        for (unsigned d = 1; d <= 3; ++d)
            for (unsigned k = 2; k <= 8; k += 3) {
                AppParams p;
                p.k = k;
                p.d = d;
                bool refuted = check_bounded_bisim(P(a), P(b), p).kind == BisimVerdict::NotBisimilar;
                // grow d at the largest k seen so far: once refuted, stays refuted
                if (seen && k == 8) {
                    EXPECT_TRUE(refuted) << a << " vs " << b << " k=" << k << " d=" << d;
                }
                if (refuted && k == 8) seen = true;
            }
        EXPECT_TRUE(seen) << a << " vs " << b;
    }
    for (unsigned k = 2; k <= 10; ++k) {
        AppParams p;
        p.k = k;
        bool r = check_bounded_bisim(P(kCountM), P(kCountN), p).kind == BisimVerdict::NotBisimilar;
        if (k >= 4) {
            EXPECT_TRUE(r) << k;
        }
    }
}

// The interval bounds bracket the oracle's convergence probability of each
// explored term state.
TEST(Applicative, ResidualsBracketTheOracle) {
    AppFragment f = AppFragment::build({P(kCountM), P(kCountN)}, AppParams{});
    for (std::size_t s = 0; s < f.states.size(); ++s) {
        if (f.states[s].value || f.states[s].truncated) continue;
        Rational lo = f.lmc.mass(static_cast<int>(s), 0);
        Rational mass = oracle::bigstep(oracle::from_term(f.states[s].term), 10).mass();
        EXPECT_LE(lo, mass);
        EXPECT_LE(mass, lo + f.states[s].residual);
    }
}
