#include "corpus_terms.hpp"
#include "oracle.hpp"

#include "lop/fs.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace lop;

namespace {

Term P(const std::string& s) { return parse_term(s); }
ExtTerm E(const std::string& s) { return parse_ext_term(s); }
Rational R(long a, long b = 1) { return Rational(a, b); }

const char* kRevisited = R"(
[DEFS]
L = \z. OMEGA
P = \y z. OMEGA
M = \x. L (+) P
N = (\x. L) (+) (\x. P)
[V]
M | N
[E]
{1: M} | {1/2: \x. L, 1/2: \x. P}
{1: L (+) P} | {1/2: L, 1/2: P}
{1/2: L, 1/2: P} | {1/2: L, 1/2: P}
{1/2: OMEGA, 1/2: \u. OMEGA} | {1/2: OMEGA, 1/2: \u. OMEGA}
{1/2: \u. OMEGA} | {1/2: \u. OMEGA}
{1/2: OMEGA} | {1/2: OMEGA}
{} | {}
)";

}  // namespace

TEST(Fs, FormalSumBasics) {
    FormalSum h = parse_formal_sum("{1/2: I, 1/4: K, 1/4: \\a. a}");
    EXPECT_EQ(h.size(), 2u);  // I and \a. a merge
    EXPECT_EQ(h.mass(), 1);
    EXPECT_TRUE(h.is_value());
    EXPECT_EQ(parse_formal_sum("{}").mass(), 0);
    EXPECT_THROW(parse_formal_sum("{1/2: I, 3/4: K}"), std::invalid_argument);
    EXPECT_THROW(parse_formal_sum("{I}"), ParseError);
    EXPECT_FALSE(parse_formal_sum("{1/2: I K}").is_value());
    EXPECT_EQ(to_string(parse_formal_sum("{1/4: K, 1/2: I}")), to_string(parse_formal_sum("{1/2: I, 1/4: K}")));
}

TEST(Fs, ParseExtendedTerms) {
    ExtTerm e = E("{1/2: I, 1/2: K} K (K I) \\x. x");
    ASSERT_TRUE(e.is_sum);
    EXPECT_EQ(e.args, (std::vector<Term>{P("K"), P("K I"), P("\\x. x")}));
    EXPECT_FALSE(E("I K").is_sum);
    EXPECT_EQ(to_string(E("{1/2: I} (\\a. a a) I")), "{1/2: \\x. x} (\\a. a a) (\\x. x)");
}

TEST(Fs, StepRules) {
    FsStepResult s = fs_step(E("I (+) K"));
    EXPECT_EQ(s.rule, std::string("ss"));
    EXPECT_EQ(s.next, E("{1/2: I, 1/2: K}"));
    s = fs_step(E("\\x. x x"));
    EXPECT_EQ(s.rule, std::string("sl"));
    EXPECT_EQ(s.next, E("{1: \\x. x x}"));
    s = fs_step(E("{1/2: \\x. x, 1/2: K} I"));
    EXPECT_EQ(s.rule, std::string("sp"));
    EXPECT_EQ(s.next, E("{1/2: I, 1/2: \\y. I}"));
    s = fs_step(E("(I (+) K) K"));
    EXPECT_EQ(s.rule, std::string("sa(ss)"));
    EXPECT_EQ(s.next, E("{1/2: I, 1/2: K} K"));
    // spc: the non-value component is replaced by its semantics
    s = fs_step(E("{1/2: I K, 1/2: K}"));
    EXPECT_EQ(s.rule, std::string("spc"));
    EXPECT_EQ(s.next, E("{1: K}"));
    s = fs_step(E("{1: OMEGA}"));
    EXPECT_EQ(s.next, E("{}"));
    EXPECT_EQ(s.residual, 0);
    FsOptions nodetect;
    nodetect.eval.detect_divergence = false;
    EXPECT_EQ(fs_step(E("{1/2: OMEGA}"), nodetect).residual, R(1, 2));
    EXPECT_THROW(fs_step(E("{1: I}")), std::invalid_argument);
}

TEST(Fs, Apply) {
    EXPECT_EQ(fs_apply(parse_formal_sum("{1/2: \\x. x}"), P("K")), parse_formal_sum("{1/2: K}"));
    EXPECT_TRUE(fs_apply(FormalSum{}, P("K")).empty());
    // the N-side value of the counting example: x is not used
    FormalSum z = parse_formal_sum("{1/2: \\x z. OMEGA, 1/2: \\x y z. OMEGA}");
    EXPECT_EQ(fs_apply(z, P("I")), parse_formal_sum("{1/2: \\z. OMEGA, 1/2: \\y z. OMEGA}"));
    EXPECT_THROW(fs_apply(parse_formal_sum("{1/2: I K}"), P("K")), std::invalid_argument);
}

TEST(Fs, EvalExamples) {
    FsEvalResult r = fs_eval(E("I (+) (K (+) OMEGA)"), 10);
    ASSERT_TRUE(r.reached);
    EXPECT_EQ(r.value, parse_formal_sum("{1/2: I, 1/4: K}"));
    EXPECT_EQ(r.value.mass(), R(3, 4));
    r = fs_eval(E("\\x. OMEGA"), 10);
    EXPECT_EQ(r.steps, 1u);
    EXPECT_EQ(r.value, parse_formal_sum("{1: \\x. OMEGA}"));
    r = fs_eval(E("{}"), 10);
    EXPECT_EQ(r.steps, 0u);
    EXPECT_EQ(r.value.mass(), 0);
    r = fs_eval(E("(\\x. x) (\\y. y) K"), 1);
    EXPECT_FALSE(r.reached);
    EXPECT_EQ(r.residual, 1);
}

TEST(Fs, DistExtract) {
    EXPECT_EQ(dist_extract(E("I K")), parse_formal_sum("{1: I K}"));
    EXPECT_EQ(dist_extract(E("{1/2: I, 1/4: K}")), parse_formal_sum("{1/2: I, 1/4: K}"));
    EXPECT_EQ(dist_extract(E("{1/2: I, 1/2: OMEGA} K")), parse_formal_sum("{1/2: I K, 1/2: OMEGA K}"));
}

TEST(Fs, SumAlgebra) {
    std::mt19937 rng(3);
    const auto& ts = corpus_terms();
    auto random_sum = [&] {
        FormalSum h;
        Rational left = 1;
        for (int i = 0; i < 3; ++i) {
            Rational w(static_cast<long>(rng() % 3), 8);
            if (w > left) break;
            h.add(P(ts[rng() % ts.size()]), w);
            left -= w;
        }
        return h;
    };
    for (int i = 0; i < 200; ++i) {
        FormalSum h = random_sum(), k = random_sum();
        FormalSum hk = oplus(h, k);
        EXPECT_EQ(hk.mass(), (h.mass() + k.mass()) / 2);
        EXPECT_EQ(oplus(h, h), h);  // idempotent after merging
        EXPECT_EQ(hk, oplus(k, h));
        EXPECT_EQ(flatten({{h, 1}}), h);
        EXPECT_EQ(flatten({{h, R(1, 2)}, {k, R(1, 2)}}), hk);
        EXPECT_EQ(oplus(FormalSum{}, FormalSum{}), FormalSum{});
    }
}

TEST(Fs, Determinism) {
    for (const auto& s : corpus_terms()) {
        FsEvalResult a = fs_eval(E(s), 64), b = fs_eval(E(s), 64);
        EXPECT_EQ(to_string(a.value), to_string(b.value));
        EXPECT_EQ(a.steps, b.steps);
    }
}

// The formal-sum evaluation agrees with the approximation semantics once the
// budget is large enough for both; below that it is never behind.
TEST(Fs, AgreesWithApproximationSemantics) {
    EvalOptions det;
    det.detect_divergence = true;
    for (const auto& s : corpus_terms()) {
        Term m = P(s);
        for (unsigned d : {2u, 4u, 8u, 16u}) {
            FsOptions o;
            o.sem_depth = d;
            FsEvalResult r = fs_eval(ExtTerm::term(m), 64, o);
            ASSERT_TRUE(r.reached) << s;
            Rational lower = approximate(m, d, det).dist.mass();
            if (d >= 8) {
                EXPECT_EQ(r.value.mass(), lower) << s << " @" << d;
            } else {
                EXPECT_GE(r.value.mass(), lower) << s << " @" << d;
            }
            EXPECT_LE(r.value.mass() + r.residual, 1);
            // the oracle never sees less mass than the sum reports
            EXPECT_LE(r.value.mass(), oracle::bigstep(oracle::from_term(m), 24).mass() + r.residual) << s;
        }
    }
}

TEST(Fs, ParseRelation) {
    CoupledRelation r = parse_relation(kRevisited);
    EXPECT_EQ(r.v.size(), 1u);
    EXPECT_EQ(r.e.size(), 8u);
    EXPECT_THROW(parse_relation("[V]\nI | K | I\n"), ParseError);
    EXPECT_THROW(parse_relation("I | K\n"), ParseError);
    EXPECT_THROW(parse_relation("[X]\n"), ParseError);
    EXPECT_THROW(parse_relation("[CTX]\n_ y\n"), ParseError);
    try {
        parse_relation("[V]\nI | K\n[E]\nI | {1/2: FOO}\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line, 4);
    }
}

TEST(Fs, CountingRelationPasses) {
    CoupledRelation r = parse_relation(kRevisited);
    for (ClbMode m : {ClbMode::SmallStep, ClbMode::BigStep, ClbMode::UpToFormalSums, ClbMode::UpToContexts}) {
        ClbVerdict v = check_clb(r, m);
        EXPECT_EQ(v.kind, ClbVerdict::Pass) << to_string(m) << ": " << to_string(v, r);
    }
}

TEST(Fs, EmptyRelationPasses) {
    for (ClbMode m : {ClbMode::SmallStep, ClbMode::BigStep, ClbMode::UpToFormalSums, ClbMode::UpToContexts})
        EXPECT_EQ(check_clb(CoupledRelation{}, m).kind, ClbVerdict::Pass);
}

TEST(Fs, MassMismatchFails) {
    CoupledRelation r = parse_relation("[E]\n{1: I} | {1/2: I}\n");
    ClbVerdict v = check_clb(r, ClbMode::SmallStep);
    ASSERT_EQ(v.kind, ClbVerdict::Fail);
    EXPECT_EQ(v.clause, "value-mass");
    EXPECT_TRUE(replay(v, r, ClbMode::SmallStep));
    EXPECT_EQ(check_clb(r, ClbMode::BigStep).clause, "value-mass");
}

TEST(Fs, StepAndArgumentFailuresReplay) {
    // the applicatively distinguishable pair is no coupled bisimulation on its own
    CoupledRelation r = parse_relation("[V]\nI | K\n");
    ClbVerdict v = check_clb(r, ClbMode::SmallStep);
    ASSERT_EQ(v.kind, ClbVerdict::Fail);
    EXPECT_EQ(v.clause, "step");
    EXPECT_TRUE(replay(v, r, ClbMode::SmallStep));
    ClbVerdict b = check_clb(r, ClbMode::BigStep);
    ASSERT_EQ(b.kind, ClbVerdict::Fail);
    EXPECT_EQ(b.clause, "value-arg");
    ASSERT_TRUE(b.argument.has_value());
    EXPECT_TRUE(replay(b, r, ClbMode::BigStep));
    // tampering with the record breaks the replay
    ClbVerdict t = b;
    t.clause = "value-mass";
    EXPECT_FALSE(replay(t, r, ClbMode::BigStep));
}

TEST(Fs, UpToTechniquesAcceptMore) {
    // β-related terms: the big-step game sees equal values, the small-step
    // game needs the intermediate reduct
    CoupledRelation beta = parse_relation("[V]\n(\\x. x) K | K\n");
    EXPECT_EQ(check_clb(beta, ClbMode::BigStep).kind, ClbVerdict::Pass);
    EXPECT_EQ(check_clb(beta, ClbMode::SmallStep).kind, ClbVerdict::Fail);
    CoupledRelation beta2 = parse_relation("[V]\n(\\x. x) K | K\n[E]\n{1: I} K | K\n");
    EXPECT_EQ(check_clb(beta2, ClbMode::SmallStep).kind, ClbVerdict::Pass);
    // a choice split into related halves
    CoupledRelation split = parse_relation("[E]\nI (+) (K I) | I (+) (\\y. I)\nK I | \\y. I\n{1: K} I | \\y. I\n");
    EXPECT_EQ(check_clb(split, ClbMode::UpToFormalSums).kind, ClbVerdict::Pass);
    EXPECT_EQ(check_clb(split, ClbMode::SmallStep).kind, ClbVerdict::Fail);
    // up to contexts: E pairs may fill the holes left by an argument
    CoupledRelation ctx = parse_relation("[V]\n\\x. I (+) I | \\x. I\n[E]\nI (+) I | I\n");
    EXPECT_EQ(check_clb(ctx, ClbMode::BigStep).kind, ClbVerdict::Fail);
    EXPECT_EQ(check_clb(ctx, ClbMode::UpToContexts).kind, ClbVerdict::Pass);
}

// Adding identical-component pairs never breaks a passing relation.
TEST(Fs, IdentityPairsAreHarmless) {
    CoupledRelation base = parse_relation(kRevisited);
    std::mt19937 rng(9);
    const auto& ts = corpus_terms();
    for (int i = 0; i < 20; ++i) {
        CoupledRelation r = base;
        for (int j = 0; j < 3; ++j) {
            ExtTerm t = ExtTerm::term(P(ts[rng() % ts.size()]));
            r.e.push_back({t, t});
            FsEvalResult z = fs_eval(t, 64);
            r.e.push_back({ExtTerm::of_sum(z.value), ExtTerm::of_sum(z.value)});
        }
        for (ClbMode m : {ClbMode::SmallStep, ClbMode::BigStep, ClbMode::UpToFormalSums, ClbMode::UpToContexts})
            EXPECT_EQ(check_clb(r, m).kind, ClbVerdict::Pass) << to_string(m);
    }
}

TEST(Fs, RejectsMalformedRelations) {
    CoupledRelation r;
    r.v.push_back({P("I"), P("K")});
    EXPECT_THROW(check_clb(r, ClbMode::SmallStep), std::invalid_argument);  // V not inside E
    ParseOptions o;
    o.allow_free = true;
    CoupledRelation open;
    open.e.push_back({ExtTerm::term(parse_term("x", prelude(), o)), ExtTerm::term(P("I"))});
    EXPECT_THROW(check_clb(open, ClbMode::SmallStep), std::invalid_argument);
}
