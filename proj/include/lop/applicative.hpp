#pragma once

// The applicative labelled Markov chain of a set of closed terms, explored to
// a bounded fragment, and sound refutation of applicative bisimilarity and
// similarity on that fragment.

#include "lop/eval.hpp"
#include "lop/lmc.hpp"

#include <deque>
#include <set>

namespace lop {

inline std::vector<Term> default_arguments() {
    std::vector<Term> out;
    for (const char* s : {"I", "K", "\\z. OMEGA", "\\y z. OMEGA", "OMEGA (+) (\\z u. z)", "I (+) OMEGA"})
        out.push_back(parse_term(s));
    return out;
}

struct AppParams {
    std::vector<Term> args = default_arguments();
    unsigned k = 8;  // semantics depth of each τ-row
    unsigned d = 3;  // argument applications explored
    Strategy strategy = Strategy::CBN;
    bool detect_divergence = true;
    std::size_t max_states = 5000;

    EvalOptions eval_options() const {
        EvalOptions o;
        o.strategy = strategy;
        o.detect_divergence = detect_divergence;
        return o;
    }
};

inline std::string to_string(const AppParams& p) {
    std::string out = "k=" + std::to_string(p.k) + " d=" + std::to_string(p.d) + " strategy=" + to_string(p.strategy) +
                      " args=[";
    for (std::size_t i = 0; i < p.args.size(); ++i) out += (i ? ", " : "") + print(p.args[i]);
    return out + "]";
}

// A state is a closed term or a distinguished value νx.M (kept as the
// abstraction itself with value = true).
struct AppState {
    Term term;
    bool value = false;
    unsigned depth = 0;
    bool truncated = false;  // behaviour not explored: masses into it are undetermined
    Rational residual = 0;   // τ-mass cut off by the semantics depth
};

inline std::string state_name(const AppState& s) { return s.value ? "nu " + print(s.term) : print(s.term); }

// Sort 0 holds term states, sort 1 value states. Label 0 is τ, label i+1 is
// the i-th usable argument.
class AppFragment {
public:
    AppParams params;
    std::vector<AppState> states;
    std::vector<Term> labels;  // usable arguments; τ is not listed
    std::vector<int> roots;
    MLMC lmc;

    int index_of(const Term& t, bool value) const {
        auto it = index_.find({t, value});
        return it == index_.end() ? -1 : it->second;
    }
    bool determined(int s) const { return !states[s].truncated; }
    std::string label_name(int l) const { return l == 0 ? "tau" : print(labels[l - 1]); }

    // Build by breadth-first exploration from the given terms.
    static AppFragment build(const std::vector<Term>& terms, const AppParams& p) {
        AppFragment f;
        f.params = p;
        for (const Term& a : p.args) {
            require_closed(a, "applicative argument");
            if (p.strategy == Strategy::CBN || a.is_value()) f.labels.push_back(a);
        }
        Evaluator ev(p.eval_options());
        std::deque<int> queue;
        std::vector<std::tuple<int, int, int, Rational>> trans;
        auto intern = [&](const Term& t, bool value, unsigned depth) -> int {
            if (int i = f.index_of(t, value); i >= 0) return i;
            if (f.states.size() >= p.max_states) return -1;
            int i = static_cast<int>(f.states.size());
            f.states.push_back({t, value, depth, false, 0});
            f.index_.emplace(Key{t, value}, i);
            queue.push_back(i);
            return i;
        };
        for (const Term& t : terms) {
            require_closed(t, "applicative term");
            int i = intern(t, false, 0);
            if (i < 0) throw std::length_error("state cap too small for the initial terms");
            f.roots.push_back(i);
        }
        while (!queue.empty()) {
            int s = queue.front();
            queue.pop_front();
            AppState st = f.states[s];
            if (st.depth >= p.d) {
                f.states[s].truncated = true;
                continue;
            }
            if (!st.value) {
                const Approx& a = ev.eval(st.term, p.k);
                f.states[s].residual = a.residual;
                for (const auto& [v, q] : a.dist) {
                    int t = intern(v, true, st.depth);
                    if (t < 0) {
                        f.states[s].truncated = true;
                        break;
                    }
                    trans.emplace_back(s, 0, t, q);
                }
            } else {
                for (std::size_t l = 0; l < f.labels.size(); ++l) {
                    int t = intern(open(st.term.body(), f.labels[l]), false, st.depth + 1);
                    if (t < 0) {
                        f.states[s].truncated = true;
                        break;
                    }
                    trans.emplace_back(s, static_cast<int>(l) + 1, t, Rational(1));
                }
            }
        }
        std::vector<int> ss, ls{0};
        for (const auto& st : f.states) ss.push_back(st.value ? 1 : 0);
        for (std::size_t l = 0; l < f.labels.size(); ++l) ls.push_back(1);
        f.lmc = MLMC(ss, ls, 2);
        for (auto& [s, l, t, q] : trans)
            if (f.determined(s)) f.lmc.add(s, l, t, q);
        return f;
    }

    // Mass from s under l that is not pinned to a determined state: the
    // semantics residual plus whatever enters truncated states.
    Rational slack(int s, int l) const {
        Rational r = l == 0 ? states[s].residual : Rational(0);
        for (const auto& [t, q] : lmc.row(s, l))
            if (!determined(t)) r += q;
        return r;
    }
    // Bounds on the true P(s, l, T) for any T with C ⊆ T ⊆ C ∪ B ∪ truncated.
    ProbInterval mass_interval(int s, int l, const std::vector<bool>& C, const std::vector<bool>& B) const {
        ProbInterval iv{0, slack(s, l)};
        for (const auto& [t, q] : lmc.row(s, l)) {
            if (!determined(t)) continue;
            if (C[t]) iv.lower += q;
            else if (B[t]) iv.upper += q;
        }
        iv.upper += iv.lower;
        return iv;
    }

private:
    struct Key {
        Term t;
        bool value;
        bool operator==(const Key& o) const { return value == o.value && t == o.t; }
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const { return k.t.hash() * 2 + (k.value ? 1 : 0); }
    };
    std::unordered_map<Key, int, KeyHash> index_;
};

inline MLMC build_applicative_lmc(const std::vector<Term>& terms, const AppParams& p = {}) {
    return AppFragment::build(terms, p).lmc;
}

namespace detail {

inline std::vector<bool> as_set(int n, const std::vector<int>& members) {
    std::vector<bool> X(n, false);
    for (int s : members) X[s] = true;
    return X;
}

}  // namespace detail

// ---------------------------------------------------------------- bisimulation

// The true bisimilarity classes meeting a set C of determined states lie in
// C ∪ B(C) ∪ truncated, where the boundary B(C) holds the determined states
// outside C not yet known apart from some member. Masses into the boundary
// and into truncated states are charged to the slack, so disjoint interval
// bounds on P(s,l,·) separate s from t in the unbounded chain, whatever C is.
struct SplitEvent {
    int s = -1, t = -1, label = 0;
    std::vector<int> splitter;  // C
    ProbInterval is, it;        // bounds on P(s,l,T) and P(t,l,T)
};

struct BisimVerdict {
    enum Kind { NotBisimilar, IndistinguishableUpToBound } kind = IndistinguishableUpToBound;
    std::vector<SplitEvent> trace;  // every apartness found, in order
    int m = -1, n = -1;             // root states
    std::string params;
};

class Apartness {
public:
    explicit Apartness(const AppFragment& f) : f_(f), n_(static_cast<int>(f.states.size())), a_(n_ * n_, 0) {}

    bool apart(int s, int t) const {
        if (f_.lmc.sort(s) != f_.lmc.sort(t)) return true;
        return a_[static_cast<std::size_t>(s) * n_ + t] != 0;
    }
    void mark(int s, int t) {
        a_[static_cast<std::size_t>(s) * n_ + t] = 1;
        a_[static_cast<std::size_t>(t) * n_ + s] = 1;
    }

    std::vector<bool> boundary(const std::vector<bool>& C) const {
        std::vector<bool> B(n_, false);
        for (int x = 0; x < n_; ++x) {
            if (!C[x]) continue;
            for (int y = 0; y < n_; ++y)
                if (!C[y] && f_.determined(y) && !apart(x, y)) B[y] = true;
        }
        return B;
    }

    // connected components of the not-apart graph over determined states
    std::vector<std::vector<int>> components() const {
        std::vector<int> comp(n_, -1);
        std::vector<std::vector<int>> out;
        for (int s = 0; s < n_; ++s) {
            if (comp[s] >= 0 || !f_.determined(s)) continue;
            std::vector<int> stack{s}, members;
            comp[s] = static_cast<int>(out.size());
            while (!stack.empty()) {
                int x = stack.back();
                stack.pop_back();
                members.push_back(x);
                for (int y = 0; y < n_; ++y)
                    if (comp[y] < 0 && f_.determined(y) && !apart(x, y)) {
                        comp[y] = comp[s];
                        stack.push_back(y);
                    }
            }
            std::sort(members.begin(), members.end());
            out.push_back(std::move(members));
        }
        return out;
    }

    // {x} together with everything not apart from x
    std::vector<int> neighbourhood(int x) const {
        std::vector<int> out;
        for (int y = 0; y < n_; ++y)
            if (f_.determined(y) && !apart(x, y)) out.push_back(y);
        return out;
    }

private:
    const AppFragment& f_;
    int n_;
    std::vector<char> a_;
};

// Rounds of pairwise checks until nothing changes, or until stop_a and
// stop_b are apart. Candidate splitters of a round: the components of the
// not-apart graph (empty boundary), each state alone, and each state with
// its neighbourhood. A candidate's boundary only shrinks as apartness grows,
// so bounds computed at the start of a round remain valid through it.
inline std::vector<SplitEvent> refine_fragment(const AppFragment& f, Apartness& ap, int stop_a = -1,
                                               int stop_b = -1) {
    const int n = static_cast<int>(f.states.size());
    const int L = f.lmc.labels();
    std::vector<SplitEvent> trace;
    auto done = [&] { return stop_a >= 0 && ap.apart(stop_a, stop_b); };
    std::vector<std::vector<Rational>> slack(n, std::vector<Rational>(L));
    for (int s = 0; s < n; ++s)
        for (int l = 0; l < L; ++l)
            if (f.determined(s) && f.lmc.label_sort(l) == f.lmc.sort(s)) slack[s][l] = f.slack(s, l);
    for (bool changed = true; changed && !done();) {
        changed = false;
        std::set<std::vector<int>> seen;
        std::vector<std::vector<int>> cand;
        auto offer = [&](std::vector<int> c) {
            if (!c.empty() && seen.insert(c).second) cand.push_back(std::move(c));
        };
        for (auto& c : ap.components()) offer(std::move(c));
        for (int x = 0; x < n; ++x)
            if (f.determined(x)) {
                offer({x});
                offer(ap.neighbourhood(x));
            }
        // tag[c][x]: 1 inside C, 2 on its boundary
        std::vector<std::vector<char>> tag(cand.size(), std::vector<char>(n, 0));
        std::vector<std::vector<int>> cand_of(n);
        for (std::size_t c = 0; c < cand.size(); ++c) {
            std::vector<bool> C = detail::as_set(n, cand[c]);
            std::vector<bool> B = ap.boundary(C);
            for (int x = 0; x < n; ++x) tag[c][x] = C[x] ? 1 : (B[x] ? 2 : 0);
            for (int x : cand[c]) cand_of[x].push_back(static_cast<int>(c));
        }
        auto bounds = [&](int s, int l, std::size_t c) {
            ProbInterval iv{0, slack[s][l]};
            for (const auto& [x, q] : f.lmc.row(s, l)) {
                if (tag[c][x] == 1) iv.lower += q;
                else if (tag[c][x] == 2) iv.upper += q;
            }
            iv.upper += iv.lower;
            return iv;
        };
        for (int s = 0; s < n && !done(); ++s) {
            if (!f.determined(s)) continue;
            for (int t = s + 1; t < n && !done(); ++t) {
                if (!f.determined(t) || ap.apart(s, t)) continue;
                for (int l = 0; l < L; ++l) {
                    if (f.lmc.label_sort(l) != f.lmc.sort(s)) continue;
                    std::set<int> cs;
                    for (int x : {s, t})
                        for (const auto& [y, q] : f.lmc.row(x, l)) cs.insert(cand_of[y].begin(), cand_of[y].end());
                    bool hit = false;
                    for (int c : cs) {
                        ProbInterval a = bounds(s, l, c), b = bounds(t, l, c);
                        if (!a.disjoint_from(b)) continue;
                        trace.push_back({s, t, l, cand[c], a, b});
                        ap.mark(s, t);
                        hit = true;
                        break;
                    }
                    if (hit) {
                        changed = true;
                        break;
                    }
                }
            }
        }
    }
    return trace;
}

inline BisimVerdict check_bounded_bisim(const Term& m, const Term& n, const AppParams& p = {}) {
    AppFragment f = AppFragment::build({m, n}, p);
    BisimVerdict v;
    v.m = f.roots[0];
    v.n = f.roots[1];
    v.params = to_string(p);
    if (v.m == v.n || !f.determined(v.m) || !f.determined(v.n)) return v;
    Apartness ap(f);
    v.trace = refine_fragment(f, ap, v.m, v.n);
    if (ap.apart(v.m, v.n)) v.kind = BisimVerdict::NotBisimilar;
    else v.trace.clear();
    return v;
}

// Re-evaluate the fragment and check each event in order against the
// apartness established by the events before it: the recomputed bounds equal
// the recorded ones and are disjoint.
inline bool replay(const BisimVerdict& v, const Term& m, const Term& n, const AppParams& p) {
    if (v.kind != BisimVerdict::NotBisimilar) return false;
    AppFragment f = AppFragment::build({m, n}, p);
    const int N = static_cast<int>(f.states.size());
    Apartness ap(f);
    for (const auto& e : v.trace) {
        if (e.s < 0 || e.t < 0 || e.s >= N || e.t >= N || e.label < 0 || e.label >= f.lmc.labels()) return false;
        if (!f.determined(e.s) || !f.determined(e.t)) return false;
        for (int x : e.splitter)
            if (x < 0 || x >= N || !f.determined(x)) return false;
        std::vector<bool> C = detail::as_set(N, e.splitter);
        std::vector<bool> B = ap.boundary(C);
        ProbInterval a = f.mass_interval(e.s, e.label, C, B), b = f.mass_interval(e.t, e.label, C, B);
        // the recorded bounds were computed against an older, larger
        // boundary, so they may only be wider than the replayed ones
        if (a.lower != e.is.lower || b.lower != e.it.lower || a.upper > e.is.upper || b.upper > e.it.upper)
            return false;
        if (!e.is.disjoint_from(e.it)) return false;
        ap.mark(e.s, e.t);
    }
    return ap.apart(v.m, v.n);
}

namespace detail {

inline std::string state_set(const AppFragment& f, const std::vector<int>& xs, std::size_t limit = 3) {
    std::string out = "{";
    for (std::size_t i = 0; i < xs.size() && i < limit; ++i) out += (i ? ", " : "") + state_name(f.states[xs[i]]);
    if (xs.size() > limit) out += ", ... (" + std::to_string(xs.size()) + " states)";
    return out + "}";
}

}  // namespace detail

// Experiment trace: the event separating the roots, then for each event one
// pair of successors (inside and outside its splitter) and why they differ.
inline std::string format_certificate(const BisimVerdict& v, const Term& m, const Term& n, const AppParams& p) {
    if (v.kind != BisimVerdict::NotBisimilar) return "indistinguishable up to bound (" + v.params + ")\n";
    AppFragment f = AppFragment::build({m, n}, p);
    std::map<std::pair<int, int>, std::size_t> by_pair;
    for (std::size_t i = 0; i < v.trace.size(); ++i) {
        auto key = std::minmax(v.trace[i].s, v.trace[i].t);
        by_pair.emplace(std::pair<int, int>(key.first, key.second), i);
    }
    std::string out = "not bisimilar (" + v.params + ")\n";
    std::set<std::size_t> shown;
    auto explain = [&](auto&& self, int a, int b, int indent) -> void {
        std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
        auto key = std::minmax(a, b);
        auto it = by_pair.find({key.first, key.second});
        if (it == by_pair.end()) return;
        const auto& e = v.trace[it->second];
        bool flip = e.s != a;
        out += pad + state_name(f.states[a]) + "  vs  " + state_name(f.states[b]) + "\n";
        out += pad + "  " + f.label_name(e.label) + " into " + detail::state_set(f, e.splitter) + ": " +
               to_string(flip ? e.it : e.is) + " vs " + to_string(flip ? e.is : e.it) + "\n";
        if (!shown.insert(it->second).second || indent > 12) return;
        // a successor inside C against a successor of the other side outside it
        std::vector<bool> C = detail::as_set(static_cast<int>(f.states.size()), e.splitter);
        for (auto [x0, y0] : {std::pair<int, int>{e.s, e.t}, {e.t, e.s}})
            for (const auto& [x, q] : f.lmc.row(x0, e.label)) {
                if (!C[x]) continue;
                for (const auto& [y, r] : f.lmc.row(y0, e.label))
                    if (!C[y] && f.determined(y) && by_pair.count({std::min(x, y), std::max(x, y)})) {
                        self(self, x, y, indent + 1);
                        return;
                    }
            }
    };
    explain(explain, v.m, v.n, 1);
    return out;
}

// ---------------------------------------------------------------- simulation

struct RemovalEvent {
    int s = -1, t = -1, label = 0;
    std::vector<int> X;  // violating set: lower mass of s into X exceeds t's upper mass into R(X)
    Rational lower_s, upper_t;
};

struct SimVerdict {
    enum Kind { NotSimilar, IndistinguishableUpToBound } kind = IndistinguishableUpToBound;
    std::vector<RemovalEvent> trace;
    int m = -1, n = -1;
    std::string params;
};

namespace detail {

inline Row determined_row(const AppFragment& f, int s, int l) {
    Row r;
    for (const auto& e : f.lmc.row(s, l))
        if (f.determined(e.first)) r.push_back(e);
    return r;
}

// Try to remove (s,t) from r; on success fill the event.
inline bool removal(const AppFragment& f, const StateRelation& r, int s, int t, RemovalEvent& ev) {
    for (int l = 0; l < f.lmc.labels(); ++l) {
        if (f.lmc.label_sort(l) != f.lmc.sort(s)) continue;
        Row rs = determined_row(f, s, l), rt = determined_row(f, t, l);
        std::vector<int> X;
        if (row_dominated(rs, rt, f.slack(t, l), r, &X)) continue;
        std::vector<bool> xs(r.size(), false);
        for (int x : X) xs[x] = true;
        std::vector<bool> img = r.image(xs);
        ev = {s, t, l, X, 0, 0};
        for (const auto& [x, q] : rs)
            if (xs[x]) ev.lower_s += q;
        ev.upper_t = f.slack(t, l);
        for (const auto& [y, q] : rt)
            if (img[y]) ev.upper_t += q;
        return true;
    }
    return false;
}

inline StateRelation initial_relation(const AppFragment& f) {
    const int n = static_cast<int>(f.states.size());
    StateRelation r(n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            if (f.determined(a) && f.determined(b) && f.lmc.sort(a) == f.lmc.sort(b)) r.add(a, b);
    return r;
}

}  // namespace detail

// Greatest-fixed-point removal over determined states; a pair is removed only
// when some set X carries provably more mass from s than t can send into the
// current image of X.
inline SimVerdict check_bounded_sim(const Term& m, const Term& n, const AppParams& p = {}) {
    AppFragment f = AppFragment::build({m, n}, p);
    SimVerdict v;
    v.m = f.roots[0];
    v.n = f.roots[1];
    v.params = to_string(p);
    if (v.m == v.n || !f.determined(v.m) || !f.determined(v.n)) return v;
    StateRelation r = detail::initial_relation(f);
    for (bool changed = true; changed && r.contains(v.m, v.n);) {
        changed = false;
        for (auto [s, t] : r.pairs()) {
            if (s == t) continue;
            RemovalEvent ev;
            if (detail::removal(f, r, s, t, ev)) {
                r.remove(s, t);
                v.trace.push_back(std::move(ev));
                changed = true;
                if (s == v.m && t == v.n) break;
            }
        }
    }
    if (!r.contains(v.m, v.n)) v.kind = SimVerdict::NotSimilar;
    else v.trace.clear();
    return v;
}

inline bool replay(const SimVerdict& v, const Term& m, const Term& n, const AppParams& p) {
    if (v.kind != SimVerdict::NotSimilar) return false;
    AppFragment f = AppFragment::build({m, n}, p);
    StateRelation r = detail::initial_relation(f);
    const int N = static_cast<int>(f.states.size());
    for (const auto& e : v.trace) {
        if (e.s < 0 || e.t < 0 || e.s >= N || e.t >= N || !r.contains(e.s, e.t)) return false;
        std::vector<bool> xs(N, false);
        for (int x : e.X) xs[x] = true;
        std::vector<bool> img = r.image(xs);
        Rational lo = 0, hi = f.slack(e.t, e.label);
        for (const auto& [x, q] : detail::determined_row(f, e.s, e.label))
            if (xs[x]) lo += q;
        for (const auto& [y, q] : detail::determined_row(f, e.t, e.label))
            if (img[y]) hi += q;
        if (!(lo > hi) || lo != e.lower_s || hi != e.upper_t) return false;
        r.remove(e.s, e.t);
    }
    return !r.contains(v.m, v.n);
}

// The removal of the roots, then for each removal one successor of s inside
// X against a successor of t that X could not reach, and why.
inline std::string format_certificate(const SimVerdict& v, const Term& m, const Term& n, const AppParams& p) {
    if (v.kind != SimVerdict::NotSimilar) return "indistinguishable up to bound (" + v.params + ")\n";
    AppFragment f = AppFragment::build({m, n}, p);
    std::map<std::pair<int, int>, std::size_t> by_pair;
    for (std::size_t i = 0; i < v.trace.size(); ++i) by_pair.emplace(std::pair{v.trace[i].s, v.trace[i].t}, i);
    std::string out = "not similar (" + v.params + ")\n";
    std::set<std::size_t> shown;
    auto explain = [&](auto&& self, int a, int b, int indent) -> void {
        auto it = by_pair.find({a, b});
        if (it == by_pair.end()) return;
        const auto& e = v.trace[it->second];
        std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
        out += pad + state_name(f.states[a]) + "  not below  " + state_name(f.states[b]) + "\n";
        out += pad + "  " + f.label_name(e.label) + ", X = " + detail::state_set(f, e.X) + ": " +
               to_string(e.lower_s) + " > " + to_string(e.upper_t) + "\n";
        if (!shown.insert(it->second).second || indent > 12) return;
        for (int x : e.X)
            for (const auto& [y, q] : f.lmc.row(b, e.label))
                if (by_pair.count({x, y}) && by_pair.at({x, y}) < it->second) {
                    self(self, x, y, indent + 1);
                    return;
                }
    };
    explain(explain, v.m, v.n, 1);
    return out;
}

// ---------------------------------------------------------------- adequacy

struct AdequacyResult {
    bool refuted = false;
    ProbInterval m, n;
};

// Convergence probabilities with certified divergence; refuted only when the
// two intervals are disjoint.
inline AdequacyResult adequacy_check(const Term& m, const Term& n, unsigned k, Strategy s = Strategy::CBN) {
    EvalOptions o;
    o.strategy = s;
    o.detect_divergence = true;
    AdequacyResult r{false, converge_prob(m, k, o), converge_prob(n, k, o)};
    r.refuted = r.m.disjoint_from(r.n);
    return r;
}

}  // namespace lop
