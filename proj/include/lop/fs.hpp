#pragma once

// Formal sums in redex position, the deterministic reduction ⇝ on them, and
// a checker for finite coupled logical bisimulations.

#include "lop/applicative.hpp"
#include "lop/eval.hpp"

#include <sstream>

namespace lop {

// ---------------------------------------------------------------- formal sums

class FormalSum {
public:
    using Component = std::pair<Term, Rational>;

    FormalSum() = default;
    FormalSum(std::initializer_list<Component> cs) {
        for (const auto& [t, p] : cs) add(t, p);
    }

    // zero weights are dropped; α-equal components merge
    void add(const Term& t, Rational p) {
        p.canonicalize();
        if (p < 0) throw std::invalid_argument("negative weight in formal sum");
        if (p == 0) return;
        auto it = std::lower_bound(cs_.begin(), cs_.end(), t,
                                   [](const Component& c, const Term& x) { return TermLess{}(c.first, x); });
        if (it != cs_.end() && it->first == t) it->second += p;
        else cs_.insert(it, {t, p});
        mass_ += p;
        if (mass_ > 1) throw std::invalid_argument("formal sum has mass above 1: " + to_string(mass_));
    }
    void add_scaled(const FormalSum& h, const Rational& w) {
        for (const auto& [t, p] : h.cs_) add(t, p * w);
    }

    const std::vector<Component>& components() const { return cs_; }
    const Rational& mass() const { return mass_; }
    bool empty() const { return cs_.empty(); }
    std::size_t size() const { return cs_.size(); }

    bool is_value() const {
        for (const auto& c : cs_)
            if (!c.first.is_abs()) return false;
        return true;
    }

    friend bool operator==(const FormalSum& a, const FormalSum& b) { return a.cs_ == b.cs_; }
    friend std::ostream& operator<<(std::ostream& os, const FormalSum& h);

private:
    std::vector<Component> cs_;  // sorted by canonical term order
    Rational mass_ = 0;
};

// H ⊕ K: every weight halved
inline FormalSum oplus(const FormalSum& h, const FormalSum& k) {
    static const Rational half(1, 2);
    FormalSum r;
    r.add_scaled(h, half);
    r.add_scaled(k, half);
    return r;
}

// ⊕_j ⟨H_j, p_j⟩ flattened
inline FormalSum flatten(const std::vector<std::pair<FormalSum, Rational>>& hs) {
    FormalSum r;
    for (const auto& [h, p] : hs) r.add_scaled(h, p);
    return r;
}

inline FormalSum from_distribution(const ValueDistribution& d) {
    FormalSum r;
    for (const auto& [v, p] : d) r.add(v, p);
    return r;
}

// Z • N
inline FormalSum fs_apply(const FormalSum& z, const Term& n) {
    FormalSum r;
    for (const auto& [v, p] : z.components()) {
        if (!v.is_abs()) throw std::invalid_argument("fs_apply: component is not a value: " + print(v));
        r.add(open(v.body(), n), p);
    }
    return r;
}

inline std::string arg_string(const Term& t) {
    std::string s = print(t);
    return s.find_first_of(" .") == std::string::npos ? s : "(" + s + ")";
}

inline std::string to_string(const FormalSum& h) {
    std::string out = "{";
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (i) out += ", ";
        out += to_string(h.components()[i].second) + ": " + print(h.components()[i].first);
    }
    return out + "}";
}

inline std::ostream& operator<<(std::ostream& os, const FormalSum& h) { return os << to_string(h); }

// ---------------------------------------------------------------- extended terms

// Either an ordinary term, or a formal sum applied to ordinary arguments.
struct ExtTerm {
    bool is_sum = false;
    Term plain;
    FormalSum sum;
    std::vector<Term> args;

    static ExtTerm term(Term t) {
        ExtTerm e;
        e.plain = std::move(t);
        return e;
    }
    static ExtTerm of_sum(FormalSum h, std::vector<Term> args = {}) {
        ExtTerm e;
        e.is_sum = true;
        e.sum = std::move(h);
        e.args = std::move(args);
        return e;
    }

    bool summed_value() const { return is_sum && args.empty() && sum.is_value(); }

    friend bool operator==(const ExtTerm& a, const ExtTerm& b) {
        if (a.is_sum != b.is_sum) return false;
        if (!a.is_sum) return a.plain == b.plain;
        return a.sum == b.sum && a.args == b.args;
    }
};

inline std::string to_string(const ExtTerm& e);
inline std::ostream& operator<<(std::ostream& os, const ExtTerm& e) { return os << to_string(e); }

inline std::string to_string(const ExtTerm& e) {
    if (!e.is_sum) return print(e.plain);
    std::string out = to_string(e.sum);
    for (const Term& a : e.args) out += " " + arg_string(a);
    return out;
}

inline void require_closed(const ExtTerm& e, const char* what) {
    if (!e.is_sum) return require_closed(e.plain, what);
    for (const auto& c : e.sum.components()) require_closed(c.first, what);
    for (const Term& a : e.args) require_closed(a, what);
}

namespace detail {

// split at top-level separators, honouring parentheses and braces
inline std::vector<std::string> split_top(const std::string& s, char sep) {
    std::vector<std::string> out;
    int depth = 0;
    std::string cur;
    for (char c : s) {
        if (c == '(' || c == '{') ++depth;
        if (c == ')' || c == '}') --depth;
        if (c == sep && depth == 0) {
            out.push_back(cur);
            cur.clear();
        } else cur += c;
    }
    out.push_back(cur);
    return out;
}

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

// the arguments after a sum: parenthesised groups and names; a top-level
// abstraction runs to the end
inline std::vector<std::string> split_args(const std::string& s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        if (std::isspace(static_cast<unsigned char>(s[i]))) {
            ++i;
            continue;
        }
        if (s[i] == '\\') {
            out.push_back(s.substr(i));
            break;
        }
        std::size_t j = i;
        if (s[i] == '(') {
            int depth = 0;
            for (; j < s.size(); ++j) {
                if (s[j] == '(') ++depth;
                if (s[j] == ')' && --depth == 0) break;
            }
            if (j == s.size()) throw ParseError("unbalanced parentheses in arguments", 1, static_cast<int>(i) + 1);
            ++j;
        } else {
            while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j])) && s[j] != '(') ++j;
        }
        out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

}  // namespace detail

// `{1/2: M, 1/4: N}` optionally followed by arguments, or an ordinary term
inline FormalSum parse_formal_sum(const std::string& text, const NamedEnv& env = prelude()) {
    std::string s = detail::trim(text);
    if (s.size() < 2 || s.front() != '{' || s.back() != '}') throw ParseError("formal sum must be written {w: M, ...}", 1, 1);
    FormalSum h;
    std::string inner = detail::trim(s.substr(1, s.size() - 2));
    if (inner.empty()) return h;
    for (const std::string& part : detail::split_top(inner, ',')) {
        auto colon = part.find(':');
        if (colon == std::string::npos) throw ParseError("component needs 'weight: term': " + detail::trim(part), 1, 1);
        h.add(parse_term(part.substr(colon + 1), env), parse_rational(part.substr(0, colon)));
    }
    return h;
}

inline ExtTerm parse_ext_term(const std::string& text, const NamedEnv& env = prelude()) {
    std::string s = detail::trim(text);
    if (s.empty() || s.front() != '{') return ExtTerm::term(parse_term(s, env));
    int depth = 0;
    std::size_t close = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '{') ++depth;
        if (s[i] == '}' && --depth == 0) {
            close = i;
            break;
        }
    }
    if (depth != 0) throw ParseError("unterminated formal sum", 1, 1);
    ExtTerm e = ExtTerm::of_sum(parse_formal_sum(s.substr(0, close + 1), env));
    for (const auto& a : detail::split_args(s.substr(close + 1))) e.args.push_back(parse_term(a, env));
    return e;
}

// ---------------------------------------------------------------- reduction

struct FsOptions {
    unsigned sem_depth = 16;
    EvalOptions eval = [] {
        EvalOptions o;
        o.detect_divergence = true;
        return o;
    }();
};

struct FsStepResult {
    ExtTerm next;
    const char* rule = "";
    Rational residual = 0;  // mass left unresolved by spc's bounded semantics
};

// One ⇝ step (rules ss, sl, spc, sp, sa). spc replaces every non-value
// component by its semantics approximated at sem_depth.
inline FsStepResult fs_step(const ExtTerm& e, const FsOptions& o = {}) {
    if (e.summed_value()) throw std::invalid_argument("fs_step: summed value has no successor");
    require_closed(e, "fs_step");
    FsStepResult r;
    if (!e.is_sum) {
        auto [h, args] = spine(e.plain);
        if (h.is_abs()) {
            r.next = ExtTerm::of_sum(FormalSum{{h, 1}}, args);
            r.rule = "sl";
        } else if (h.is_choice()) {
            r.next = ExtTerm::of_sum(FormalSum{{h.left(), Rational(1, 2)}, {h.right(), Rational(1, 2)}}, args);
            r.rule = "ss";
        } else throw std::logic_error("fs_step: stuck term " + print(e.plain));
        if (!args.empty()) r.rule = h.is_abs() ? "sa(sl)" : "sa(ss)";
        return r;
    }
    if (!e.sum.is_value()) {
        FormalSum h;
        for (const auto& [m, p] : e.sum.components()) {
            if (m.is_abs()) {
                h.add(m, p);
                continue;
            }
            Approx a = approximate(m, o.sem_depth, o.eval);
            h.add_scaled(from_distribution(a.dist), p);
            r.residual += a.residual * p;
        }
        r.next = ExtTerm::of_sum(std::move(h), e.args);
        r.rule = e.args.empty() ? "spc" : "sa(spc)";
        return r;
    }
    std::vector<Term> rest(e.args.begin() + 1, e.args.end());
    r.next = ExtTerm::of_sum(fs_apply(e.sum, e.args.front()), std::move(rest));
    r.rule = e.args.size() == 1 ? "sp" : "sa(sp)";
    return r;
}

struct FsEvalResult {
    FormalSum value;  // empty when the steps ran out
    Rational residual = 0;
    unsigned steps = 0;
    bool reached = false;
};

// ⇝* to a summed value; mass(value) + residual <= 1
inline FsEvalResult fs_eval(const ExtTerm& e, unsigned steps, const FsOptions& o = {}) {
    FsEvalResult r;
    ExtTerm cur = e;
    while (!cur.summed_value()) {
        if (r.steps == steps) {
            r.residual = cur.is_sum ? cur.sum.mass() + r.residual : Rational(1);
            if (r.residual > 1) r.residual = 1;
            return r;
        }
        FsStepResult s = fs_step(cur, o);
        r.residual += s.residual;
        cur = std::move(s.next);
        ++r.steps;
    }
    r.value = cur.sum;
    r.reached = true;
    return r;
}

// D(M) = ⟨M,1⟩, D(H) = H, D(E M) = ⊕⟨M_i M, p_i⟩
inline FormalSum dist_extract(const ExtTerm& e) {
    if (!e.is_sum) return FormalSum{{e.plain, 1}};
    FormalSum r;
    for (const auto& [m, p] : e.sum.components()) r.add(Term::app(m, e.args), p);
    return r;
}

// ---------------------------------------------------------------- coupled relations

using ExtPair = std::pair<ExtTerm, ExtTerm>;

struct CoupledRelation {
    std::vector<std::pair<Term, Term>> v;
    std::vector<ExtPair> e;
    std::vector<Term> ctx_basis;  // terms over the hole variable "_"; each occurrence is a separate hole
};

inline void validate(const CoupledRelation& r) {
    for (const auto& [a, b] : r.v) {
        require_closed(a, "coupled relation");
        require_closed(b, "coupled relation");
        bool found = false;
        for (const auto& [x, y] : r.e) found = found || (x == ExtTerm::term(a) && y == ExtTerm::term(b));
        if (!found) throw std::invalid_argument("V pair missing from E: " + print(a) + " | " + print(b));
    }
    for (const auto& [a, b] : r.e) {
        require_closed(a, "coupled relation");
        require_closed(b, "coupled relation");
    }
    for (const auto& c : r.ctx_basis)
        for (const auto& x : free_vars(c))
            if (x != "_") throw std::invalid_argument("context has a free variable '" + x + "': " + print(c));
}

// Sections [V], [E], [CTX] (and [DEFS] with `NAME = term` lines). Pair
// lines are `lhs | rhs`; V pairs are added to E. `#` starts a comment.
inline CoupledRelation parse_relation(const std::string& text, NamedEnv env = prelude()) {
    CoupledRelation r;
    std::istringstream in(text);
    std::string line, section, defs;
    int lineno = 0;
    auto fail = [&](const std::string& msg) { throw ParseError(msg, lineno, 1); };
    std::vector<std::pair<int, std::string>> body[3];
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line = line.substr(0, h);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            section = line;
            if (section != "[V]" && section != "[E]" && section != "[CTX]" && section != "[DEFS]")
                fail("unknown section " + section);
            continue;
        }
        if (section.empty()) fail("line outside any section");
        if (section == "[DEFS]") defs += line + "\n";
        else body[section == "[V]" ? 0 : section == "[E]" ? 1 : 2].push_back({lineno, line});
    }
    env = parse_definitions(defs, env);
    auto pair_of = [&](int ln, const std::string& l) {
        lineno = ln;
        auto parts = detail::split_top(l, '|');
        if (parts.size() != 2) fail("pair line needs exactly one '|'");
        try {
            return ExtPair{parse_ext_term(parts[0], env), parse_ext_term(parts[1], env)};
        } catch (const ParseError& e) {
            fail(e.what());
        }
        throw std::logic_error("unreachable");
    };
    for (const auto& [ln, l] : body[0]) {
        ExtPair p = pair_of(ln, l);
        if (p.first.is_sum || p.second.is_sum) fail("V pairs must be ordinary terms");
        r.v.push_back({p.first.plain, p.second.plain});
        r.e.push_back(p);
    }
    for (const auto& [ln, l] : body[1]) {
        ExtPair p = pair_of(ln, l);
        bool dup = false;
        for (const auto& q : r.e) dup = dup || (q.first == p.first && q.second == p.second);
        if (!dup) r.e.push_back(p);
    }
    ParseOptions holes;
    holes.allow_holes = true;
    for (const auto& [ln, l] : body[2]) {
        lineno = ln;
        try {
            r.ctx_basis.push_back(parse_term(l, env, holes));
        } catch (const ParseError& e) {
            fail(e.what());
        }
    }
    validate(r);
    return r;
}

namespace detail {

inline std::size_t count_holes(const Term& c) {
    switch (c.kind()) {
        case TermKind::Free: return c.name() == "_" ? 1 : 0;
        case TermKind::Abs: return count_holes(c.body());
        case TermKind::App: return count_holes(c.fun()) + count_holes(c.arg());
        case TermKind::Choice: return count_holes(c.left()) + count_holes(c.right());
        default: return 0;
    }
}

// holes filled left to right with closed terms
inline Term fill_holes(const Term& c, const std::vector<Term>& fill, std::size_t& next) {
    switch (c.kind()) {
        case TermKind::Free: return c.name() == "_" ? fill.at(next++) : c;
        case TermKind::Abs: return Term::abs_raw(c.name(), fill_holes(c.body(), fill, next));
        case TermKind::App: {
            Term f = fill_holes(c.fun(), fill, next);
            return Term::app(f, fill_holes(c.arg(), fill, next));
        }
        case TermKind::Choice: {
            Term l = fill_holes(c.left(), fill, next);
            return Term::choice(l, fill_holes(c.right(), fill, next));
        }
        default: return c;
    }
}

}  // namespace detail

inline Term fill_holes(const Term& c, const std::vector<Term>& fill) {
    std::size_t next = 0;
    return detail::fill_holes(c, fill, next);
}

// A finite part of the context closure of V: V itself, the contexts
// `_ _`, `\z. _` and `_ (+) _` over it, the caller's contexts filled with
// V pairs (at most 64 fillings each), and identity pairs on the default
// arguments.
inline std::vector<std::pair<Term, Term>> closure_arguments(const CoupledRelation& r) {
    ParseOptions holes;
    holes.allow_holes = true;
    std::vector<Term> ctxs = {parse_term("_", prelude(), holes), parse_term("_ _", prelude(), holes),
                              parse_term("\\z. _", prelude(), holes), parse_term("_ (+) _", prelude(), holes)};
    ctxs.insert(ctxs.end(), r.ctx_basis.begin(), r.ctx_basis.end());
    std::vector<std::pair<Term, Term>> out;
    auto push = [&](const Term& a, const Term& b) {
        for (const auto& [x, y] : out)
            if (x == a && y == b) return;
        out.push_back({a, b});
    };
    for (const Term& c : ctxs) {
        const std::size_t h = detail::count_holes(c);
        if (h == 0) {
            push(c, c);
            continue;
        }
        if (r.v.empty()) continue;
        std::vector<std::size_t> idx(h, 0);
        for (unsigned n = 0; n < 64; ++n) {
            std::vector<Term> ls, rs;
            for (std::size_t i : idx) {
                ls.push_back(r.v[i].first);
                rs.push_back(r.v[i].second);
            }
            push(fill_holes(c, ls), fill_holes(c, rs));
            std::size_t k = 0;
            while (k < h && ++idx[k] == r.v.size()) idx[k++] = 0;
            if (k == h) break;
        }
    }
    for (const Term& a : default_arguments()) push(a, a);
    return out;
}

enum class ClbMode { SmallStep, BigStep, UpToFormalSums, UpToContexts };

inline const char* to_string(ClbMode m) {
    switch (m) {
        case ClbMode::SmallStep: return "smallstep";
        case ClbMode::BigStep: return "bigstep";
        case ClbMode::UpToFormalSums: return "upto_fs";
        case ClbMode::UpToContexts: return "upto_ctx";
    }
    return "?";
}

inline ClbMode parse_clb_mode(const std::string& s) {
    if (s == "smallstep") return ClbMode::SmallStep;
    if (s == "bigstep") return ClbMode::BigStep;
    if (s == "upto_fs") return ClbMode::UpToFormalSums;
    if (s == "upto_ctx") return ClbMode::UpToContexts;
    throw std::invalid_argument("unknown mode '" + s + "' (smallstep, bigstep, upto_fs, upto_ctx)");
}

struct ClbVerdict {
    enum Kind { Pass, Fail } kind = Pass;
    std::size_t pair = 0;  // index into E
    bool converse = false;
    std::string clause;    // "step", "value-mass", "value-arg", "no-value"
    std::string detail;
    std::optional<std::pair<Term, Term>> argument;
    std::size_t pairs_checked = 0;
};

namespace detail {

class ClbChecker {
public:
    ClbChecker(const CoupledRelation& r, ClbMode mode, unsigned steps, const FsOptions& o)
        : r_(r), mode_(mode), steps_(steps), o_(o), args_(closure_arguments(r)) {}

    // the failing clause of one pair, or nullopt
    std::optional<ClbVerdict> check_pair(std::size_t i) const {
        const auto& [e, f] = r_.e[i];
        if (mode_ == ClbMode::BigStep || mode_ == ClbMode::UpToContexts) return big(i, e, f);
        std::optional<ClbVerdict> v = small(i, e, f, false);
        if (!v) v = small(i, f, e, true);
        if (v && mode_ == ClbMode::UpToFormalSums && !e.is_sum && !f.is_sum && upto_fs(e.plain, f.plain))
            return std::nullopt;
        return v;
    }

    const std::vector<std::pair<Term, Term>>& arguments() const { return args_; }

private:
    // (a, b) ∈ E, possibly read as (b, a) ∈ E⁻¹, or identical. After an
    // argument has been consumed (closure = true) the context closure of V
    // counts too; in a step clause that would let I ⇝ {1: I} match K.
    bool member(const ExtTerm& a, const ExtTerm& b, bool converse, bool closure) const {
        const ExtTerm& x = converse ? b : a;
        const ExtTerm& y = converse ? a : b;
        if (x == y) return true;
        for (const auto& [p, q] : r_.e)
            if (p == x && q == y) return true;
        return closure && closure_related(x, y);
    }

    // structural descent where each mismatch must be a V pair, or in
    // UpToContexts any pair of ordinary terms in E
    bool terms_related(const Term& a, const Term& b) const {
        if (a == b) return true;
        for (const auto& [p, q] : r_.v)
            if (p == a && q == b) return true;
        if (mode_ == ClbMode::UpToContexts)
            for (const auto& [p, q] : r_.e)
                if (!p.is_sum && !q.is_sum && p.plain == a && q.plain == b) return true;
        if (a.kind() != b.kind()) return false;
        switch (a.kind()) {
            case TermKind::Abs: return terms_related(a.body(), b.body());
            case TermKind::App: return terms_related(a.fun(), b.fun()) && terms_related(a.arg(), b.arg());
            case TermKind::Choice: return terms_related(a.left(), b.left()) && terms_related(a.right(), b.right());
            default: return false;
        }
    }

    bool closure_related(const ExtTerm& x, const ExtTerm& y) const {
        if (x.is_sum != y.is_sum) return false;
        if (!x.is_sum) return terms_related(x.plain, y.plain);
        if (x.args.size() != y.args.size() || x.sum.size() != y.sum.size()) return false;
        for (std::size_t i = 0; i < x.args.size(); ++i)
            if (!terms_related(x.args[i], y.args[i])) return false;
        // components matched greedily, equal weights
        std::vector<bool> used(y.sum.size(), false);
        for (const auto& [m, p] : x.sum.components()) {
            bool found = false;
            for (std::size_t j = 0; j < y.sum.size() && !found; ++j) {
                const auto& [n, q] = y.sum.components()[j];
                if (!used[j] && p == q && terms_related(m, n)) found = used[j] = true;
            }
            if (!found) return false;
        }
        return true;
    }

    ClbVerdict fail(std::size_t i, bool conv, const char* clause, std::string detail) const {
        ClbVerdict v;
        v.kind = ClbVerdict::Fail;
        v.pair = i;
        v.converse = conv;
        v.clause = clause;
        v.detail = std::move(detail);
        return v;
    }

    // ⇝-iterates of f, f itself first, up to steps_ or a summed value
    std::vector<std::pair<ExtTerm, Rational>> iterates(const ExtTerm& f) const {
        std::vector<std::pair<ExtTerm, Rational>> out{{f, 0}};
        Rational res = 0;
        for (unsigned s = 0; s < steps_ && !out.back().first.summed_value(); ++s) {
            FsStepResult r = fs_step(out.back().first, o_);
            res += r.residual;
            out.push_back({r.next, res});
        }
        return out;
    }

    bool masses_match(const Rational& a, const Rational& ra, const Rational& b, const Rational& rb) const {
        return !(a + ra < b || b + rb < a);
    }

    // clauses 1 and 2 for e against f (or their converse)
    std::optional<ClbVerdict> small(std::size_t i, const ExtTerm& e, const ExtTerm& f, bool conv) const {
        auto fs = iterates(f);
        if (!e.summed_value()) {
            FsStepResult d = fs_step(e, o_);
            for (const auto& [g, rg] : fs)
                if (member(d.next, g, conv, false)) return std::nullopt;
            return fail(i, conv, "step", to_string(e) + " ⇝ " + to_string(d.next) + " has no matching reduct of " + to_string(f));
        }
        return value_clause(i, e.sum, 0, fs.back().first, fs.back().second, f, conv);
    }

    std::optional<ClbVerdict> value_clause(std::size_t i, const FormalSum& z, const Rational& rz, const ExtTerm& y,
                                           const Rational& ry, const ExtTerm& f, bool conv) const {
        if (!y.summed_value()) return fail(i, conv, "no-value", to_string(f) + " reaches no summed value in " + std::to_string(steps_) + " steps");
        if (!masses_match(z.mass(), rz, y.sum.mass(), ry))
            return fail(i, conv, "value-mass", "mass " + to_string(z.mass()) + " against " + to_string(y.sum.mass()));
        for (const auto& [m, n] : args_) {
            // the converse game reads argument pairs the other way round
            const Term& mine = conv ? n : m;
            const Term& theirs = conv ? m : n;
            ExtTerm a = ExtTerm::of_sum(fs_apply(z, mine)), b = ExtTerm::of_sum(fs_apply(y.sum, theirs));
            if (!member(a, b, conv, true)) {
                ClbVerdict v = fail(i, conv, "value-arg", to_string(a) + " against " + to_string(b));
                v.argument = std::make_pair(m, n);
                return v;
            }
        }
        return std::nullopt;
    }

    std::optional<ClbVerdict> big(std::size_t i, const ExtTerm& e, const ExtTerm& f) const {
        FsEvalResult ze = fs_eval(e, steps_, o_), yf = fs_eval(f, steps_, o_);
        if (!ze.reached) return fail(i, false, "no-value", to_string(e) + " reaches no summed value in " + std::to_string(steps_) + " steps");
        if (!yf.reached) return fail(i, true, "no-value", to_string(f) + " reaches no summed value in " + std::to_string(steps_) + " steps");
        ExtTerm z = ExtTerm::of_sum(ze.value), y = ExtTerm::of_sum(yf.value);
        if (auto v = value_clause(i, ze.value, ze.residual, y, yf.residual, f, false)) return v;
        return value_clause(i, yf.value, yf.residual, z, ze.residual, e, true);
    }

    // the extra clauses for pairs of ordinary terms
    bool upto_fs(const Term& e, const Term& f) const {
        auto plain_member = [&](const Term& a, const Term& b, bool closure = false) {
            return member(ExtTerm::term(a), ExtTerm::term(b), false, closure);
        };
        // 1: both split into halves, related pointwise
        if (!e.is_abs() && !f.is_abs()) {
            // D of the ss-reduct of a choice-headed spine
            auto halves = [](const Term& t) -> std::optional<std::pair<Term, Term>> {
                auto [h, args] = spine(t);
                if (!h.is_choice()) return std::nullopt;
                return std::make_pair(Term::app(h.left(), args), Term::app(h.right(), args));
            };
            auto he = halves(e), hf = halves(f);
            if (he && hf && plain_member(he->first, hf->first) && plain_member(he->second, hf->second)) return true;
        }
        // 2: two abstractions, bodies related on every argument pair
        if (e.is_abs() && f.is_abs()) {
            for (const auto& [p, q] : args_)
                if (!plain_member(open(e.body(), p), open(f.body(), q), true)) return false;
            return true;
        }
        // 3: two head β-redexes, contracta related
        auto [he, xe] = spine(e);
        auto [hf, xf] = spine(f);
        if (he.is_abs() && hf.is_abs() && !xe.empty() && !xf.empty()) {
            Term ce = Term::app(open(he.body(), xe[0]), std::vector<Term>(xe.begin() + 1, xe.end()));
            Term cf = Term::app(open(hf.body(), xf[0]), std::vector<Term>(xf.begin() + 1, xf.end()));
            return plain_member(ce, cf);
        }
        return false;
    }

    const CoupledRelation& r_;
    ClbMode mode_;
    unsigned steps_;
    FsOptions o_;
    std::vector<std::pair<Term, Term>> args_;
};

}  // namespace detail

// Plays every pair of E against the clauses of the chosen definition. Fail
// is definitive for this finite relation and argument set; Pass means no
// clause was refuted at these bounds.
inline ClbVerdict check_clb(const CoupledRelation& r, ClbMode mode, unsigned steps = 64, const FsOptions& o = {}) {
    validate(r);
    detail::ClbChecker c(r, mode, steps, o);
    ClbVerdict ok;
    for (std::size_t i = 0; i < r.e.size(); ++i) {
        ++ok.pairs_checked;
        if (auto v = c.check_pair(i)) {
            v->pairs_checked = ok.pairs_checked;
            return *v;
        }
    }
    return ok;
}

// re-runs the failing pair; true iff it fails the same clause again
inline bool replay(const ClbVerdict& v, const CoupledRelation& r, ClbMode mode, unsigned steps = 64,
                   const FsOptions& o = {}) {
    if (v.kind != ClbVerdict::Fail || v.pair >= r.e.size()) return false;
    detail::ClbChecker c(r, mode, steps, o);
    auto again = c.check_pair(v.pair);
    return again && again->clause == v.clause && again->converse == v.converse && again->detail == v.detail;
}

inline std::string to_string(const ClbVerdict& v, const CoupledRelation& r) {
    if (v.kind == ClbVerdict::Pass) return "pass (" + std::to_string(v.pairs_checked) + " pairs)";
    std::string s = "fail on pair " + std::to_string(v.pair + 1) + " (" + to_string(r.e[v.pair].first) + " | " +
                    to_string(r.e[v.pair].second) + ")" + (v.converse ? ", converse" : "") + ", clause " + v.clause +
                    ": " + v.detail;
    if (v.argument) s += "\n  argument: " + print(v.argument->first) + " | " + print(v.argument->second);
    return s;
}

}  // namespace lop
