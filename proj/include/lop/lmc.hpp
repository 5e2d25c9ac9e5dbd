#pragma once

// Finite multisorted labelled Markov chains, relations over their states, and
// decision procedures for probabilistic bisimulation and simulation.

#include "lop/flow.hpp"
#include "lop/rational.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lop {

using Row = std::vector<std::pair<int, Rational>>;  // sorted by target, positive entries

class MLMC {
public:
    MLMC() = default;
    MLMC(std::vector<int> state_sorts, std::vector<int> label_sorts, int sorts = -1)
        : sort_(std::move(state_sorts)), label_sort_(std::move(label_sorts)) {
        num_sorts_ = sorts;
        for (int s : sort_) num_sorts_ = std::max(num_sorts_, s + 1);
        for (int s : label_sort_) num_sorts_ = std::max(num_sorts_, s + 1);
        if (num_sorts_ < 1) num_sorts_ = 1;
        rows_.assign(sort_.size(), std::vector<Row>(label_sort_.size()));
    }

    int states() const { return static_cast<int>(sort_.size()); }
    int labels() const { return static_cast<int>(label_sort_.size()); }
    int sorts() const { return num_sorts_; }
    int sort(int s) const { return sort_.at(s); }
    int label_sort(int l) const { return label_sort_.at(l); }

    // accumulates P(s,l,t) += p
    void add(int s, int l, int t, const Rational& p) {
        if (s < 0 || s >= states() || t < 0 || t >= states()) throw std::out_of_range("transition state out of range");
        if (l < 0 || l >= labels()) throw std::out_of_range("transition label out of range");
        if (sort_[s] != label_sort_[l])
            throw std::invalid_argument("label " + std::to_string(l) + " does not apply to state " + std::to_string(s));
        if (p <= 0) throw std::invalid_argument("transition probabilities must be positive");
        Row& r = rows_[s][l];
        auto it = std::lower_bound(r.begin(), r.end(), t, [](const auto& e, int v) { return e.first < v; });
        if (it != r.end() && it->first == t) it->second += p;
        else r.insert(it, {t, p});
        Rational sum = 0;
        for (const auto& e : r) sum += e.second;
        if (sum > 1)
            throw std::invalid_argument("normalization violated at state " + std::to_string(s) + " label " + std::to_string(l));
    }

    const Row& row(int s, int l) const { return rows_.at(s).at(l); }

    Rational prob(int s, int l, const std::vector<bool>& X) const {
        Rational sum = 0;
        for (const auto& [t, p] : row(s, l))
            if (X[t]) sum += p;
        return sum;
    }
    Rational mass(int s, int l) const {
        Rational sum = 0;
        for (const auto& e : row(s, l)) sum += e.second;
        return sum;
    }

private:
    std::vector<int> sort_, label_sort_;
    int num_sorts_ = 1;
    std::vector<std::vector<Row>> rows_;
};

// ---------------------------------------------------------------- relations

class StateRelation {
public:
    StateRelation() = default;
    explicit StateRelation(int n) : n_(n), m_(static_cast<std::size_t>(n) * n, 0) {}

    static StateRelation identity(int n) {
        StateRelation r(n);
        for (int i = 0; i < n; ++i) r.add(i, i);
        return r;
    }
    // every pair of states with equal sorts
    static StateRelation full(const MLMC& c) {
        StateRelation r(c.states());
        for (int i = 0; i < c.states(); ++i)
            for (int j = 0; j < c.states(); ++j)
                if (c.sort(i) == c.sort(j)) r.add(i, j);
        return r;
    }

    int size() const { return n_; }
    bool contains(int a, int b) const { return m_[idx(a, b)] != 0; }
    void add(int a, int b) { m_[idx(a, b)] = 1; }
    void remove(int a, int b) { m_[idx(a, b)] = 0; }
    std::size_t pair_count() const { return static_cast<std::size_t>(std::count(m_.begin(), m_.end(), 1)); }
    std::vector<std::pair<int, int>> pairs() const {
        std::vector<std::pair<int, int>> v;
        for (int a = 0; a < n_; ++a)
            for (int b = 0; b < n_; ++b)
                if (contains(a, b)) v.push_back({a, b});
        return v;
    }

    bool is_reflexive() const {
        for (int i = 0; i < n_; ++i)
            if (!contains(i, i)) return false;
        return true;
    }
    bool is_symmetric() const {
        for (int a = 0; a < n_; ++a)
            for (int b = 0; b < n_; ++b)
                if (contains(a, b) && !contains(b, a)) return false;
        return true;
    }
    bool is_transitive() const { return transitive_closure() == *this; }
    bool is_preorder() const { return is_reflexive() && is_transitive(); }
    bool is_equivalence() const { return is_preorder() && is_symmetric(); }
    bool sort_respecting(const MLMC& c) const {
        for (int a = 0; a < n_; ++a)
            for (int b = 0; b < n_; ++b)
                if (contains(a, b) && c.sort(a) != c.sort(b)) return false;
        return true;
    }

    StateRelation reflexive_closure() const {
        StateRelation r = *this;
        for (int i = 0; i < n_; ++i) r.add(i, i);
        return r;
    }
    StateRelation symmetric_closure() const {
        StateRelation r = *this;
        for (int a = 0; a < n_; ++a)
            for (int b = 0; b < n_; ++b)
                if (contains(a, b)) r.add(b, a);
        return r;
    }
    StateRelation transitive_closure() const {
        StateRelation r = *this;
        for (int k = 0; k < n_; ++k)
            for (int a = 0; a < n_; ++a)
                if (r.contains(a, k))
                    for (int b = 0; b < n_; ++b)
                        if (r.contains(k, b)) r.add(a, b);
        return r;
    }
    StateRelation inverse() const {
        StateRelation r(n_);
        for (int a = 0; a < n_; ++a)
            for (int b = 0; b < n_; ++b)
                if (contains(a, b)) r.add(b, a);
        return r;
    }
    StateRelation intersect(const StateRelation& o) const {
        StateRelation r(n_);
        for (std::size_t i = 0; i < m_.size(); ++i) r.m_[i] = m_[i] && o.m_[i];
        return r;
    }
    StateRelation unite(const StateRelation& o) const {
        StateRelation r(n_);
        for (std::size_t i = 0; i < m_.size(); ++i) r.m_[i] = m_[i] || o.m_[i];
        return r;
    }

    // R(X) = { y | x R y for some x in X }
    std::vector<bool> image(const std::vector<bool>& X) const {
        std::vector<bool> out(n_, false);
        for (int a = 0; a < n_; ++a)
            if (X[a])
                for (int b = 0; b < n_; ++b)
                    if (contains(a, b)) out[b] = true;
        return out;
    }

    friend bool operator==(const StateRelation& a, const StateRelation& b) { return a.n_ == b.n_ && a.m_ == b.m_; }

private:
    std::size_t idx(int a, int b) const {
        if (a < 0 || b < 0 || a >= n_ || b >= n_) throw std::out_of_range("relation index");
        return static_cast<std::size_t>(a) * n_ + b;
    }
    int n_ = 0;
    std::vector<char> m_;
};

// ---------------------------------------------------------------- partitions

// Blocks are sorted, and ordered by their least state.
struct Partition {
    std::vector<std::vector<int>> blocks;

    std::vector<int> block_of(int n) const {
        std::vector<int> b(n, -1);
        for (std::size_t i = 0; i < blocks.size(); ++i)
            for (int s : blocks[i]) b[s] = static_cast<int>(i);
        return b;
    }
    bool same_block(int a, int b) const {
        for (const auto& bl : blocks) {
            bool ha = std::find(bl.begin(), bl.end(), a) != bl.end();
            bool hb = std::find(bl.begin(), bl.end(), b) != bl.end();
            if (ha || hb) return ha && hb;
        }
        return false;
    }
    StateRelation relation(int n) const {
        StateRelation r(n);
        for (const auto& bl : blocks)
            for (int a : bl)
                for (int b : bl) r.add(a, b);
        return r;
    }
    void normalize() {
        for (auto& b : blocks) std::sort(b.begin(), b.end());
        std::sort(blocks.begin(), blocks.end());
    }
    friend bool operator==(const Partition& a, const Partition& b) { return a.blocks == b.blocks; }
};

inline std::string to_string(const Partition& p) {
    std::string out;
    for (const auto& b : p.blocks) {
        out += "{";
        for (std::size_t i = 0; i < b.size(); ++i) out += (i ? " " : "") + std::to_string(b[i]);
        out += "}\n";
    }
    return out;
}

// Coarsest partition respecting sorts such that states in a block agree on
// P(·,ℓ,B) for all labels ℓ and blocks B. Each round refines every block by
// the vector of masses it sends into the current blocks.
inline Partition bisim_partition(const MLMC& c) {
    const int n = c.states();
    std::vector<int> block(n);
    for (int s = 0; s < n; ++s) block[s] = c.sort(s);
    int count = -1;
    for (;;) {
        using Sig = std::pair<int, std::vector<std::pair<std::pair<int, int>, Rational>>>;
        std::map<Sig, std::vector<int>> groups;
        for (int s = 0; s < n; ++s) {
            std::map<std::pair<int, int>, Rational> acc;
            for (int l = 0; l < c.labels(); ++l)
                for (const auto& [t, p] : c.row(s, l)) acc[{l, block[t]}] += p;
            Sig sig{block[s], {acc.begin(), acc.end()}};
            groups[sig].push_back(s);
        }
        Partition p;
        for (auto& [sig, members] : groups) p.blocks.push_back(members);
        p.normalize();
        int newcount = static_cast<int>(p.blocks.size());
        std::vector<int> nb = p.block_of(n);
        if (newcount == count) return p;
        count = newcount;
        block = nb;
    }
}

// ---------------------------------------------------------------- checks

struct RelationCheck {
    enum Failure { None, NotEquivalence, NotPreorder, SortMismatch, MassMismatch } failure = None;
    int s = -1, t = -1, label = -1;
    std::vector<int> witness;  // the class E (bisimulation) or the set X (simulation)

    bool ok() const { return failure == None; }
    explicit operator bool() const { return ok(); }
};

inline std::string to_string(const RelationCheck& r) {
    auto set = [](const std::vector<int>& v) {
        std::string s = "{";
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
        return s + "}";
    };
    switch (r.failure) {
        case RelationCheck::None: return "ok";
        case RelationCheck::NotEquivalence: return "not an equivalence relation";
        case RelationCheck::NotPreorder: return "not a preorder";
        case RelationCheck::SortMismatch:
            return "relation mixes sorts at (" + std::to_string(r.s) + "," + std::to_string(r.t) + ")";
        case RelationCheck::MassMismatch:
            return "mass mismatch at (" + std::to_string(r.s) + "," + std::to_string(r.t) + "," + std::to_string(r.label) +
                   "," + set(r.witness) + ")";
    }
    return "";
}

inline RelationCheck check_bisimulation(const MLMC& c, const StateRelation& r) {
    RelationCheck out;
    if (!r.sort_respecting(c)) {
        for (auto [a, b] : r.pairs())
            if (c.sort(a) != c.sort(b)) return {RelationCheck::SortMismatch, a, b, -1, {}};
    }
    if (!r.is_equivalence()) return {RelationCheck::NotEquivalence, -1, -1, -1, {}};
    const int n = c.states();
    // equivalence classes, ordered by least member
    std::vector<std::vector<int>> classes;
    std::vector<bool> done(n, false);
    for (int s = 0; s < n; ++s) {
        if (done[s]) continue;
        std::vector<int> cls;
        for (int t = 0; t < n; ++t)
            if (r.contains(s, t)) {
                cls.push_back(t);
                done[t] = true;
            }
        classes.push_back(cls);
    }
    for (auto [s, t] : r.pairs()) {
        if (s >= t) continue;
        for (int l = 0; l < c.labels(); ++l)
            for (const auto& cls : classes) {
                std::vector<bool> X(n, false);
                for (int v : cls) X[v] = true;
                if (c.prob(s, l, X) != c.prob(t, l, X)) return {RelationCheck::MassMismatch, s, t, l, cls};
            }
    }
    return out;
}

namespace detail {
inline std::vector<int> members(const std::vector<bool>& X) {
    std::vector<int> v;
    for (std::size_t i = 0; i < X.size(); ++i)
        if (X[i]) v.push_back(static_cast<int>(i));
    return v;
}
}  // namespace detail

// The definition read literally: P(s,ℓ,X) ≤ P(t,ℓ,R(X)) for every X within a
// sort (mixed-sort X reduce to their per-sort parts).
inline RelationCheck check_simulation_bruteforce(const MLMC& c, const StateRelation& r) {
    const int n = c.states();
    if (n > 20) throw std::invalid_argument("brute-force simulation check limited to 20 states");
    if (!r.sort_respecting(c)) {
        for (auto [a, b] : r.pairs())
            if (c.sort(a) != c.sort(b)) return {RelationCheck::SortMismatch, a, b, -1, {}};
    }
    if (!r.is_preorder()) return {RelationCheck::NotPreorder, -1, -1, -1, {}};
    for (int k = 0; k < c.sorts(); ++k) {
        std::vector<int> of_sort;
        for (int s = 0; s < n; ++s)
            if (c.sort(s) == k) of_sort.push_back(s);
        const unsigned m = static_cast<unsigned>(of_sort.size());
        for (unsigned mask = 1; mask < (1u << m); ++mask) {
            std::vector<bool> X(n, false);
            for (unsigned i = 0; i < m; ++i)
                if (mask >> i & 1u) X[of_sort[i]] = true;
            std::vector<bool> RX = r.image(X);
            for (auto [s, t] : r.pairs()) {
                if (s == t) continue;
                for (int l = 0; l < c.labels(); ++l)
                    if (c.prob(s, l, X) > c.prob(t, l, RX)) return {RelationCheck::MassMismatch, s, t, l, detail::members(X)};
            }
        }
    }
    return {};
}

// Does row rs simulate into row rt under r, allowing t an extra `slack` of
// mass that may land anywhere? Transportation network: source→x with
// capacity rs(x), x→y unbounded for x r y, y→sink with capacity rt(y), and a
// slack node σ (x→σ unbounded, σ→sink with capacity slack). Feasible iff the
// flow saturates the source. On failure `violating` receives a set X with
// rs(X) > rt(r(X)) + slack, read off the minimum cut.
inline bool row_dominated(const Row& rs, const Row& rt, const Rational& slack, const StateRelation& r,
                          std::vector<int>* violating = nullptr) {
    if (rs.empty()) return true;
    FlowNetwork net(2, 0, 1);
    std::vector<int> xs, ys;
    Rational total = 0;
    for (const auto& [x, p] : rs) {
        xs.push_back(net.add_node());
        net.add_edge(0, xs.back(), p);
        total += p;
    }
    for (const auto& [y, q] : rt) {
        ys.push_back(net.add_node());
        net.add_edge(ys.back(), 1, q);
    }
    int sigma = -1;
    if (slack > 0) {
        sigma = net.add_node();
        net.add_edge(sigma, 1, slack);
    }
    for (std::size_t i = 0; i < rs.size(); ++i) {
        for (std::size_t j = 0; j < rt.size(); ++j)
            if (r.contains(rs[i].first, rt[j].first)) net.add_edge(xs[i], ys[j], std::nullopt);
        if (sigma >= 0) net.add_edge(xs[i], sigma, std::nullopt);
    }
    FlowResult f = max_flow(net);
    if (f.value == total) return true;
    if (violating) {
        violating->clear();
        for (std::size_t i = 0; i < rs.size(); ++i)
            if (f.source_side[xs[i]]) violating->push_back(rs[i].first);
    }
    return false;
}

inline RelationCheck check_simulation_flow(const MLMC& c, const StateRelation& r) {
    if (!r.sort_respecting(c)) {
        for (auto [a, b] : r.pairs())
            if (c.sort(a) != c.sort(b)) return {RelationCheck::SortMismatch, a, b, -1, {}};
    }
    if (!r.is_preorder()) return {RelationCheck::NotPreorder, -1, -1, -1, {}};
    for (auto [s, t] : r.pairs()) {
        if (s == t) continue;
        for (int l = 0; l < c.labels(); ++l) {
            std::vector<int> X;
            if (!row_dominated(c.row(s, l), c.row(t, l), 0, r, &X)) return {RelationCheck::MassMismatch, s, t, l, X};
        }
    }
    return {};
}

// Greatest fixed point: start from all sort-respecting pairs and delete
// pairs that fail the per-pair flow condition until nothing changes.
inline StateRelation largest_simulation(const MLMC& c) {
    StateRelation r = StateRelation::full(c);
    for (bool changed = true; changed;) {
        changed = false;
        for (auto [s, t] : r.pairs()) {
            if (s == t) continue;
            for (int l = 0; l < c.labels(); ++l)
                if (!row_dominated(c.row(s, l), c.row(t, l), 0, r)) {
                    r.remove(s, t);
                    changed = true;
                    break;
                }
        }
    }
    return r;
}

// ---------------------------------------------------------------- text format

// header `states N sorts K labels M`; lines `sort s k`, `label l k_src`,
// `trans s l t a/b`; `#` comments. Unlisted sorts default to 0.
inline MLMC parse_lmc(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    int N = -1, K = 0, M = 0;
    std::vector<int> ss, ls;
    std::vector<std::tuple<int, int, int, Rational, int>> trans;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        std::istringstream ls_(line);
        std::string head;
        if (!(ls_ >> head)) continue;
        auto fail = [&](const std::string& m) { throw std::invalid_argument("line " + std::to_string(lineno) + ": " + m); };
        if (head == "states") {
            std::string kw1, kw2;
            if (!(ls_ >> N >> kw1 >> K >> kw2 >> M) || kw1 != "sorts" || kw2 != "labels" || N < 0 || K < 1 || M < 0)
                fail("expected 'states N sorts K labels M'");
            ss.assign(N, 0);
            ls.assign(M, 0);
            continue;
        }
        if (N < 0) fail("header must come first");
        if (head == "sort") {
            int s, k;
            if (!(ls_ >> s >> k) || s < 0 || s >= N || k < 0 || k >= K) fail("bad sort line");
            ss[s] = k;
        } else if (head == "label") {
            int l, k;
            if (!(ls_ >> l >> k) || l < 0 || l >= M || k < 0 || k >= K) fail("bad label line");
            ls[l] = k;
        } else if (head == "trans") {
            int s, l, t;
            std::string q;
            if (!(ls_ >> s >> l >> t >> q) || s < 0 || s >= N || t < 0 || t >= N || l < 0 || l >= M) fail("bad trans line");
            trans.emplace_back(s, l, t, parse_rational(q), lineno);
        } else {
            fail("unknown directive '" + head + "'");
        }
    }
    if (N < 0) throw std::invalid_argument("missing header");
    MLMC c(ss, ls, K);
    for (auto& [s, l, t, p, ln] : trans) {
        try {
            c.add(s, l, t, p);
        } catch (const std::exception& e) {
            throw std::invalid_argument("line " + std::to_string(ln) + ": " + e.what());
        }
    }
    return c;
}

}  // namespace lop
