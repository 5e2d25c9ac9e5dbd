#include "oracle.hpp"

#include "lop/separator.hpp"

#include <gtest/gtest.h>

using namespace lop;

namespace {

Term P(const std::string& s) { return parse_term(s); }
Term O(const std::string& s) {
    ParseOptions o;
    o.allow_free = true;
    return parse_term(s, prelude(), o);
}

const std::string kXi = "((\\x y. x x) (\\x y. x x))";
const std::string kMnM = "\\x. x (\\y. x " + kXi + " OMEGA y) " + kXi;
const std::string kMnN = "\\x. x (x " + kXi + " OMEGA) " + kXi;

// closed pure terms with assorted tree shapes
const std::vector<std::string>& pure_corpus() {
    static const std::vector<std::string> ts = {
        "I", "K", "K I", "OMEGA", "XI", "\\x. OMEGA", "\\x y. OMEGA", "\\x. x x", "\\x. x (\\y. x y)",
        kMnM, kMnN, "\\x y. y", "\\x y. y x", "Q3", "\\x y z. x z (y z)", "\\x. x x x", "\\x. x I",
        "\\x. x OMEGA", "\\x. x XI", "\\x. x (\\y. y)", "\\x y. x y", "\\x. x OMEGA OMEGA", "\\x. x (x I)",
        "\\x. x (\\y. OMEGA)", "\\x. x K I", "\\x. x (x (x I))"};
    return ts;
}

}  // namespace

TEST(Separator, WitnessGivesHalfVersusQuarter) {
    SeparateResult r = separate(P(kMnM), P(kMnN), 5, 50);
    ASSERT_EQ(r.kind, SeparateResult::Separated);
    const SeparationWitness& w = r.witness;
    EXPECT_TRUE(w.substitution.empty());
    EXPECT_EQ(w.left.lower, Rational(1, 2));
    EXPECT_EQ(w.left.upper, Rational(1, 2));
    EXPECT_EQ(w.right.lower, Rational(1, 4));
    EXPECT_EQ(w.right.upper, Rational(1, 4));
    // hand-built: k = s+1 = 3, m = 4, x := ⊎Q5, then Ω Ω and the arity-4
    // selector of the first argument
    ASSERT_EQ(w.m, 4u);
    std::vector<Term> expected = {P("OQ5"), P("OMEGA"), P("OMEGA"), P("\\a b c d. a")};
    EXPECT_EQ(w.arguments, expected);
}

TEST(Separator, WitnessOracleMasses) {
    // independent evaluation of the hand-built instances
    Term ml = Term::app(P(kMnM), {P("OQ5"), P("OMEGA"), P("OMEGA"), P("\\a b c d. a")});
    Term nl = Term::app(P(kMnN), {P("OQ5"), P("OMEGA"), P("OMEGA"), P("\\a b c d. a")});
    EXPECT_EQ(oracle::bigstep(oracle::from_term(ml), 12).mass(), Rational(1, 2));
    EXPECT_EQ(oracle::bigstep(oracle::from_term(nl), 12).mass(), Rational(1, 4));
    SeparationWitness w = separate(P(kMnM), P(kMnN), 5, 50).witness;
    EXPECT_FALSE(verify_witness(P(kMnM), P(kMnN), w, 6));
    EXPECT_TRUE(verify_witness(P(kMnM), P(kMnN), w, 8));
    EXPECT_EQ(w.left.lower, Rational(1, 2));
    EXPECT_EQ(w.right.upper, Rational(1, 4));
}

TEST(Separator, ExternalWitnessForSecondExample) {
    SeparationWitness w;
    w.arguments = {P("I (+) OMEGA")};
    Term m = P("\\x. x x"), n = P("\\x. x (\\y. x y)");
    ASSERT_TRUE(verify_witness(m, n, w, 8));
    EXPECT_EQ(w.left.lower, Rational(1, 4));
    EXPECT_EQ(w.left.upper, Rational(1, 4));
    EXPECT_EQ(w.right.lower, Rational(1, 2));
    EXPECT_EQ(w.right.upper, Rational(1, 2));
    // the synthesised witness works too
    EXPECT_EQ(separate(m, n, 5, 50).kind, SeparateResult::Separated);
}

TEST(Separator, DistinctFreeVariables) {
    SeparateResult r = separate(O("x"), O("y"), 3, 10);
    ASSERT_EQ(r.kind, SeparateResult::Separated);
    EXPECT_EQ(r.witness.choices.at("x").offset, 1u);
    EXPECT_EQ(r.witness.choices.at("y").offset, 0u);
    EXPECT_EQ(r.witness.arguments.size(), r.witness.m);
    EXPECT_EQ(r.witness.left.lower, 1);
    EXPECT_EQ(r.witness.right.upper, 0);
    // same head, different arities; a λ against a head variable
    EXPECT_EQ(separate(O("x I"), O("x I I"), 3, 10).kind, SeparateResult::Separated);
    SeparateResult l = separate(O("\\z. z"), O("y I"), 3, 10);
    ASSERT_EQ(l.kind, SeparateResult::Separated);
    EXPECT_TRUE(l.witness.choices.at("y").oplus);
}

TEST(Separator, NoDifferenceNoWitness) {
    EXPECT_EQ(separate(P("I"), P("\\z. z"), 5, 50).kind, SeparateResult::NotSeparatedAtLevel);
    EXPECT_EQ(separate(P(kMnM), P(kMnN), 2, 50).kind, SeparateResult::NotSeparatedAtLevel);
    SeparationWitness w = separate(P(kMnM), P(kMnN), 5, 50).witness;
    EXPECT_FALSE(verify_witness(P(kMnN), P(kMnN), w, 16));
    EXPECT_FALSE(verify_witness(P(kMnM), P(kMnM), w, 16));
}

// Every difference within level 4 yields a witness that replays, and a
// witness exists exactly when the approximants differ.
TEST(Separator, SoundAndCorrespondsToApproximants) {
    const auto& ts = pure_corpus();
    int separated = 0;
    for (const auto& a : ts)
        for (const auto& b : ts) {
            Term m = P(a), n = P(b);
            LltEqVerdict v = llt_eq(m, n, 4, 50);
            SeparateResult r = separate(m, n, 4, 50);
            ASSERT_NE(v.kind, LltEqVerdict::Inconclusive) << a << " vs " << b;
            EXPECT_EQ(v.kind == LltEqVerdict::Different, r.kind == SeparateResult::Separated) << a << " vs " << b;
            if (r.kind == SeparateResult::Separated) {
                ++separated;
                EXPECT_TRUE(verify_witness(m, n, r.witness, r.witness.depth)) << a << " vs " << b;
            }
        }
    EXPECT_GT(separated, 400);
}

TEST(Separator, PrintsWitness) {
    SeparateResult r = separate(O("x"), O("y"), 3, 10);
    std::string s = to_string(r.witness);
    EXPECT_NE(s.find("x := Q2"), std::string::npos);
    EXPECT_NE(s.find("y := Q1"), std::string::npos);
    EXPECT_NE(s.find("left:  [1/1, 1/1]"), std::string::npos);
}
