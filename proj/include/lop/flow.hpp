#pragma once

// Exact-rational maximum flow, and the disentangling of probability
// assignments through the subset flow network.

#include "lop/rational.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lop {

struct FlowEdge {
    int from, to;
    std::optional<Rational> cap;  // nullopt means unbounded
};

class FlowNetwork {
public:
    FlowNetwork() = default;
    explicit FlowNetwork(int nodes, int source = 0, int target = 1) : n_(nodes), source_(source), target_(target) {}

    int add_node() { return n_++; }
    int node_count() const { return n_; }
    int source() const { return source_; }
    int target() const { return target_; }
    const std::vector<FlowEdge>& edges() const { return edges_; }

    // parallel edges are merged by adding capacities
    void add_edge(int u, int v, std::optional<Rational> cap) {
        if (u < 0 || v < 0 || u >= n_ || v >= n_) throw std::out_of_range("flow edge endpoint");
        if (cap && *cap < 0) throw std::invalid_argument("negative capacity");
        auto key = std::make_pair(u, v);
        if (auto it = index_.find(key); it != index_.end()) {
            FlowEdge& e = edges_[it->second];
            if (!cap || !e.cap) e.cap.reset();
            else *e.cap += *cap;
            return;
        }
        index_[key] = edges_.size();
        edges_.push_back({u, v, std::move(cap)});
    }

private:
    int n_ = 0, source_ = 0, target_ = 1;
    std::vector<FlowEdge> edges_;
    std::map<std::pair<int, int>, std::size_t> index_;
};

struct FlowResult {
    Rational value = 0;
    std::vector<Rational> flow;    // per edge, same order as FlowNetwork::edges()
    std::vector<bool> source_side;  // a minimum cut: nodes reachable in the residual graph
    Rational cut_capacity = 0;     // finite capacity crossing the cut; equals value
};

// Shortest augmenting paths (Edmonds-Karp). Unbounded edges get the sum of all
// finite capacities plus one, which no flow can saturate.
inline FlowResult max_flow(const FlowNetwork& net) {
    struct Arc {
        int to;
        Rational cap;
        std::size_t rev;
        int edge;  // index into net.edges() for forward arcs, -1 for reverse
    };
    const int n = net.node_count();
    Rational big = 1;
    for (const auto& e : net.edges())
        if (e.cap) big += *e.cap;
    std::vector<std::vector<Arc>> g(n);
    std::vector<std::pair<int, std::size_t>> where(net.edges().size());
    for (std::size_t i = 0; i < net.edges().size(); ++i) {
        const auto& e = net.edges()[i];
        Rational c = e.cap ? *e.cap : big;
        g[e.from].push_back({e.to, c, g[e.to].size() + (e.from == e.to ? 1 : 0), static_cast<int>(i)});
        g[e.to].push_back({e.from, 0, g[e.from].size() - 1, -1});
        where[i] = {e.from, g[e.from].size() - 1};
    }
    const int s = net.source(), t = net.target();
    FlowResult res;
    if (s != t) {
        for (;;) {
            std::vector<std::pair<int, std::size_t>> prev(n, {-1, 0});
            std::vector<bool> seen(n, false);
            std::deque<int> q{s};
            seen[s] = true;
            while (!q.empty() && !seen[t]) {
                int u = q.front();
                q.pop_front();
                for (std::size_t k = 0; k < g[u].size(); ++k) {
                    const Arc& a = g[u][k];
                    if (a.cap > 0 && !seen[a.to]) {
                        seen[a.to] = true;
                        prev[a.to] = {u, k};
                        q.push_back(a.to);
                    }
                }
            }
            if (!seen[t]) break;
            Rational push = -1;
            for (int v = t; v != s; v = prev[v].first) {
                const Arc& a = g[prev[v].first][prev[v].second];
                if (push < 0 || a.cap < push) push = a.cap;
            }
            for (int v = t; v != s; v = prev[v].first) {
                Arc& a = g[prev[v].first][prev[v].second];
                a.cap -= push;
                g[a.to][a.rev].cap += push;
            }
            res.value += push;
        }
    }
    res.flow.resize(net.edges().size());
    for (std::size_t i = 0; i < net.edges().size(); ++i) {
        const auto& e = net.edges()[i];
        const Arc& a = g[where[i].first][where[i].second];
        Rational c = e.cap ? *e.cap : big;
        res.flow[i] = c - a.cap;
    }
    res.source_side.assign(n, false);
    std::deque<int> q{s};
    res.source_side[s] = true;
    while (!q.empty()) {
        int u = q.front();
        q.pop_front();
        for (const Arc& a : g[u])
            if (a.cap > 0 && !res.source_side[a.to]) {
                res.source_side[a.to] = true;
                q.push_back(a.to);
            }
    }
    for (const auto& e : net.edges())
        if (res.source_side[e.from] && !res.source_side[e.to]) res.cut_capacity += e.cap ? *e.cap : big;
    return res;
}

// ---------------------------------------------------------------- assignments

// Subsets of {1..n} are bitmasks; bit i-1 stands for element i.
struct ProbabilityAssignment {
    unsigned n = 0;
    std::vector<Rational> p;  // p[i-1]
    std::vector<Rational> r;  // r[mask], r[0] unused

    explicit ProbabilityAssignment(unsigned size = 0) : n(size), p(size), r(std::size_t(1) << size) {
        if (size > 20) throw std::invalid_argument("assignment too large");
    }
    unsigned full() const { return (1u << n) - 1; }
};

inline std::string subset_to_string(unsigned mask) {
    std::string s = "{";
    bool first = true;
    for (unsigned i = 0; i < 32; ++i)
        if (mask >> i & 1u) {
            if (!first) s += ",";
            s += std::to_string(i + 1);
            first = false;
        }
    return s + "}";
}

struct AssignmentError : std::invalid_argument {
    unsigned subset;
    AssignmentError(const std::string& msg, unsigned mask)
        : std::invalid_argument(msg + " at I = " + subset_to_string(mask)), subset(mask) {}
};

// the first subset I (in mask order) where the defining inequalities fail
inline std::optional<unsigned> assignment_violation(const ProbabilityAssignment& pa) {
    for (unsigned i = 0; i < pa.n; ++i)
        if (pa.p[i] < 0 || pa.p[i] > 1) return 1u << i;
    for (unsigned m = 1; m <= pa.full(); ++m)
        if (pa.r[m] < 0 || pa.r[m] > 1) return m;
    for (unsigned I = 1; I <= pa.full(); ++I) {
        Rational lhs = 0, rhs = 0;
        for (unsigned i = 0; i < pa.n; ++i)
            if (I >> i & 1u) lhs += pa.p[i];
        for (unsigned J = 1; J <= pa.full(); ++J)
            if (I & J) rhs += pa.r[J];
        if (lhs > rhs || rhs > 1) return I;
    }
    return std::nullopt;
}

struct DisentanglingNetwork {
    FlowNetwork net;
    std::vector<int> node_of;  // mask -> node id (node_of[0] unused)
    std::vector<unsigned> mask_of;  // node id -> mask (0 for source/target)
};

// source 0, target 1, one node per nonempty subset; edges (s,{i}) cap p_i,
// (I, I∪{i}) cap 1, (I,t) cap r_I
inline DisentanglingNetwork build_disentangling_network(const ProbabilityAssignment& pa) {
    if (auto bad = assignment_violation(pa)) throw AssignmentError("not a probability assignment", *bad);
    DisentanglingNetwork d;
    d.net = FlowNetwork(2, 0, 1);
    d.node_of.assign(pa.full() + 1, -1);
    d.mask_of.assign(2, 0);
    for (unsigned m = 1; m <= pa.full(); ++m) {
        d.node_of[m] = d.net.add_node();
        d.mask_of.push_back(m);
    }
    for (unsigned i = 0; i < pa.n; ++i) d.net.add_edge(0, d.node_of[1u << i], pa.p[i]);
    for (unsigned m = 1; m <= pa.full(); ++m)
        for (unsigned i = 0; i < pa.n; ++i)
            if (!(m >> i & 1u)) d.net.add_edge(d.node_of[m], d.node_of[m | 1u << i], Rational(1));
    for (unsigned m = 1; m <= pa.full(); ++m) d.net.add_edge(d.node_of[m], 1, pa.r[m]);
    return d;
}

struct DisentangleResult {
    unsigned n = 0;
    std::map<std::pair<unsigned, unsigned>, Rational> s;  // (k, I) -> s_{k,I}, k is 1-based
    Rational flow_value = 0;

    Rational at(unsigned k, unsigned I) const {
        auto it = s.find({k, I});
        return it == s.end() ? Rational(0) : it->second;
    }
};

// subsets by size, then by mask; every inclusion edge goes forward in this order
inline std::vector<unsigned> subsets_by_size(unsigned n) {
    std::vector<unsigned> v;
    for (unsigned m = 1; m < (1u << n); ++m) v.push_back(m);
    std::stable_sort(v.begin(), v.end(), [](unsigned a, unsigned b) {
        int pa = __builtin_popcount(a), pb = __builtin_popcount(b);
        return pa != pb ? pa < pb : a < b;
    });
    return v;
}

// Max flow, then each node's inflow is tracked per originating element k and
// split across outgoing edges in proportion to their flow; the k-part
// reaching the target through (I,t) is s_{k,I}·r_I.
inline DisentangleResult disentangle(const ProbabilityAssignment& pa) {
    DisentanglingNetwork d = build_disentangling_network(pa);
    FlowResult f = max_flow(d.net);
    Rational total = 0;
    for (const auto& x : pa.p) total += x;
    if (f.value != total)
        throw AssignmentError("assignment invariant violated: max flow " + to_string(f.value) + " < " + to_string(total), pa.full());

    const unsigned N = pa.full() + 1;
    // comp[mask][k]: flow entering node mask that originated at {k}
    std::vector<std::vector<Rational>> comp(N, std::vector<Rational>(pa.n));
    std::vector<std::vector<std::size_t>> out(d.net.node_count());
    for (std::size_t i = 0; i < d.net.edges().size(); ++i) {
        const auto& e = d.net.edges()[i];
        if (e.from == 0) comp[d.mask_of[e.to]][__builtin_ctz(d.mask_of[e.to])] += f.flow[i];
        else out[e.from].push_back(i);
    }
    DisentangleResult res;
    res.n = pa.n;
    res.flow_value = f.value;
    for (unsigned I : subsets_by_size(pa.n)) {
        Rational in = 0;
        for (const auto& c : comp[I]) in += c;
        if (in == 0) continue;
        for (std::size_t i : out[d.node_of[I]]) {
            if (f.flow[i] == 0) continue;
            const auto& e = d.net.edges()[i];
            Rational frac = f.flow[i] / in;
            for (unsigned k = 0; k < pa.n; ++k) {
                if (comp[I][k] == 0) continue;
                Rational part = comp[I][k] * frac;
                if (e.to == 1) {
                    if (pa.r[I] > 0) res.s[{k + 1, I}] += part / pa.r[I];
                } else {
                    comp[d.mask_of[e.to]][k] += part;
                }
            }
        }
    }
    return res;
}

struct DisentangleCheck {
    bool ok = true;
    int condition = 0;  // 1 or 2 when failing
    unsigned where = 0;  // subset for condition 1, element k for condition 2
};

inline DisentangleCheck verify_disentanglement(const ProbabilityAssignment& pa, const DisentangleResult& d) {
    for (const auto& [key, v] : d.s)
        if (v < 0 || !(key.second >> (key.first - 1) & 1u)) return {false, 1, key.second};
    for (unsigned I = 1; I <= pa.full(); ++I) {
        Rational sum = 0;
        for (unsigned k = 1; k <= pa.n; ++k)
            if (I >> (k - 1) & 1u) sum += d.at(k, I);
        if (sum > 1) return {false, 1, I};
    }
    for (unsigned k = 1; k <= pa.n; ++k) {
        Rational sum = 0;
        for (unsigned I = 1; I <= pa.full(); ++I)
            if (I >> (k - 1) & 1u) sum += d.at(k, I) * pa.r[I];
        if (pa.p[k - 1] > sum) return {false, 2, k};
    }
    return {};
}

// ---------------------------------------------------------------- file format

namespace detail {
inline unsigned parse_subset(const std::string& text, unsigned n, int line) {
    auto fail = [&](const std::string& m) { throw std::invalid_argument("line " + std::to_string(line) + ": " + m); };
    if (text.size() < 2 || text.front() != '{' || text.back() != '}') fail("expected a subset like {1,2}");
    unsigned mask = 0;
    std::stringstream in(text.substr(1, text.size() - 2));
    std::string item;
    while (std::getline(in, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos) fail("bad subset element '" + item + "'");
        unsigned i = static_cast<unsigned>(std::stoul(item));
        if (i < 1 || i > n) fail("subset element out of range: " + item);
        mask |= 1u << (i - 1);
    }
    if (!mask) fail("empty subset");
    return mask;
}
}  // namespace detail

// lines `n = k`, `p i a/b`, `r {i,j} a/b`; `#` comments; unspecified values are 0
inline ProbabilityAssignment parse_assignment(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    std::optional<ProbabilityAssignment> pa;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        std::istringstream ls(line);
        std::string head;
        if (!(ls >> head)) continue;
        auto fail = [&](const std::string& m) { throw std::invalid_argument("line " + std::to_string(lineno) + ": " + m); };
        if (head == "n") {
            std::string eq;
            unsigned n;
            if (!(ls >> eq >> n) || eq != "=") fail("expected 'n = k'");
            if (pa) fail("duplicate size line");
            if (n < 1 || n > 12) fail("n must be between 1 and 12");
            pa.emplace(n);
        } else if (head == "p") {
            if (!pa) fail("'n = k' must come first");
            unsigned i;
            std::string q;
            if (!(ls >> i >> q) || i < 1 || i > pa->n) fail("expected 'p i a/b'");
            pa->p[i - 1] = parse_rational(q);
        } else if (head == "r") {
            if (!pa) fail("'n = k' must come first");
            std::string rest;
            std::getline(ls, rest);
            auto close = rest.find('}');
            if (close == std::string::npos) fail("expected 'r {i,..} a/b'");
            std::string set = rest.substr(rest.find('{'), close - rest.find('{') + 1);
            unsigned m = detail::parse_subset(set, pa->n, lineno);
            pa->r[m] = parse_rational(rest.substr(close + 1));
        } else {
            fail("unknown directive '" + head + "'");
        }
    }
    if (!pa) throw std::invalid_argument("missing 'n = k' line");
    return *pa;
}

// lines `s k {I} a/b` for the nonzero entries
inline std::string format_disentanglement(const DisentangleResult& d) {
    std::string out;
    for (unsigned k = 1; k <= d.n; ++k)
        for (unsigned I : subsets_by_size(d.n))
            if (I >> (k - 1) & 1u) {
                Rational v = d.at(k, I);
                if (v != 0) out += "s " + std::to_string(k) + " " + subset_to_string(I) + " " + to_string(v) + "\n";
            }
    return out;
}

}  // namespace lop
