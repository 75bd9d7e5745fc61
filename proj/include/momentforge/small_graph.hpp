#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstdlib>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace mf {

/// Thrown when a graph or motif exceeds the configured maximum order
/// (MOMENTFORGE_MAX_ORDER, default 8).
class CapacityError : public std::runtime_error {
public:
    explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

inline int max_order() {
    static const int v = [] {
        if (const char* s = std::getenv("MOMENTFORGE_MAX_ORDER")) {
            int k = std::atoi(s);
            if (k >= 1 && k <= 8) return k;
        }
        return 8;
    }();
    return v;
}

inline void check_order(int m, const char* who) {
    if (m < 1 || m > max_order())
        throw CapacityError(std::string(who) + ": order " + std::to_string(m) +
                            " outside [1, " + std::to_string(max_order()) + "]");
}

/// Undirected simple graph on up to 8 nodes. Rows of the adjacency matrix are
/// stored as bitmasks, so node subsets are plain uint8_t masks throughout.
struct SmallGraph {
    int m = 0;
    std::array<std::uint8_t, 8> adj{};

    SmallGraph() = default;
    explicit SmallGraph(int order) : m(order) { check_order(order, "SmallGraph"); }
    SmallGraph(int order, std::initializer_list<std::pair<int, int>> edges) : SmallGraph(order) {
        for (auto [i, j] : edges) add_edge(i, j);
    }

    bool edge(int i, int j) const { return (adj[i] >> j) & 1u; }
    void add_edge(int i, int j) {
        if (i == j) throw std::invalid_argument("self-loop");
        adj[i] |= std::uint8_t(1u << j);
        adj[j] |= std::uint8_t(1u << i);
    }
    void remove_edge(int i, int j) {
        adj[i] &= std::uint8_t(~(1u << j));
        adj[j] &= std::uint8_t(~(1u << i));
    }
    int degree(int i) const { return std::popcount(adj[i]); }
    int edge_count() const {
        int s = 0;
        for (int i = 0; i < m; ++i) s += degree(i);
        return s / 2;
    }

    /// Upper-triangle adjacency bits packed row by row; at most 28 bits for m=8.
    std::uint32_t adj_bits() const {
        std::uint32_t bits = 0;
        int k = 0;
        for (int i = 0; i < m; ++i)
            for (int j = i + 1; j < m; ++j, ++k)
                if (edge(i, j)) bits |= (1u << k);
        return bits;
    }
    static SmallGraph from_adj_bits(int m, std::uint32_t bits) {
        SmallGraph g(m);
        int k = 0;
        for (int i = 0; i < m; ++i)
            for (int j = i + 1; j < m; ++j, ++k)
                if ((bits >> k) & 1u) g.add_edge(i, j);
        return g;
    }

    /// Node i of the result is node perm[i] of *this.
    SmallGraph permuted(const std::array<int, 8>& perm) const {
        SmallGraph g(m);
        for (int i = 0; i < m; ++i)
            for (int j = i + 1; j < m; ++j)
                if (edge(perm[i], perm[j])) g.add_edge(i, j);
        return g;
    }

    bool connected() const {
        if (m == 0) return false;
        std::uint8_t seen = 1, frontier = 1;
        while (frontier) {
            std::uint8_t next = 0;
            for (int i = 0; i < m; ++i)
                if ((frontier >> i) & 1u) next |= adj[i];
            frontier = next & std::uint8_t(~seen);
            seen |= next;
        }
        return std::popcount(seen) >= m && (seen & ((1u << m) - 1)) == ((1u << m) - 1);
    }

    /// All-pairs shortest path lengths by BFS; -1 when disconnected.
    std::array<std::array<int, 8>, 8> distances() const {
        std::array<std::array<int, 8>, 8> d{};
        for (int s = 0; s < m; ++s) {
            for (int j = 0; j < m; ++j) d[s][j] = -1;
            d[s][s] = 0;
            std::uint8_t seen = std::uint8_t(1u << s), frontier = seen;
            int depth = 0;
            while (frontier) {
                ++depth;
                std::uint8_t next = 0;
                for (int i = 0; i < m; ++i)
                    if ((frontier >> i) & 1u) next |= adj[i];
                next &= std::uint8_t(~seen);
                for (int j = 0; j < m; ++j)
                    if ((next >> j) & 1u) d[s][j] = depth;
                seen |= next;
                frontier = next;
            }
        }
        return d;
    }

    int diameter() const {
        auto d = distances();
        int best = 0;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) {
                if (d[i][j] < 0) return -1;
                best = std::max(best, d[i][j]);
            }
        return best;
    }

    SmallGraph induced(std::uint8_t nodes) const {
        std::array<int, 8> map{};
        int mm = 0;
        for (int i = 0; i < m; ++i)
            if ((nodes >> i) & 1u) map[mm++] = i;
        SmallGraph g(mm);
        for (int a = 0; a < mm; ++a)
            for (int b = a + 1; b < mm; ++b)
                if (edge(map[a], map[b])) g.add_edge(a, b);
        return g;
    }

    friend bool operator==(const SmallGraph& a, const SmallGraph& b) {
        return a.m == b.m && a.adj == b.adj;
    }
};

inline SmallGraph chain_graph(int m) {
    SmallGraph g(m);
    for (int i = 0; i + 1 < m; ++i) g.add_edge(i, i + 1);
    return g;
}
inline SmallGraph cycle_graph(int m) {
    SmallGraph g = chain_graph(m);
    if (m > 2) g.add_edge(0, m - 1);
    return g;
}
inline SmallGraph complete_graph(int m) {
    SmallGraph g(m);
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j) g.add_edge(i, j);
    return g;
}
/// Star with node 0 as the center.
inline SmallGraph star_graph(int m) {
    SmallGraph g(m);
    for (int i = 1; i < m; ++i) g.add_edge(0, i);
    return g;
}

/// Unlabelled graph class key: order in the top nibble, upper-triangle bits below.
using GraphKey = std::uint64_t;

inline GraphKey graph_key(const SmallGraph& g) {
    return (GraphKey(g.m) << 32) | g.adj_bits();
}
inline SmallGraph graph_from_key(GraphKey k) {
    return SmallGraph::from_adj_bits(int(k >> 32), std::uint32_t(k & 0xffffffffu));
}

struct GraphCanon {
    SmallGraph graph;                // canonical representative
    std::array<int, 8> perm{};       // canonical node i = input node perm[i]
    long automorphisms = 1;
};

/// Canonical form by exhaustive permutation minimization of the packed
/// (adjacency bits, labels) key. Fine for m <= 8; the hierarchy never needs
/// more (paper works with k+1 <= 6).
inline GraphCanon canonical_graph(const SmallGraph& g, const std::vector<int>* labels = nullptr,
                                  std::vector<int>* canon_labels = nullptr) {
    check_order(g.m, "canonical_graph");
    std::array<int, 8> p{};
    std::iota(p.begin(), p.end(), 0);
    const std::uint32_t self_bits = g.adj_bits();

    bool have_best = false;
    std::uint32_t best_bits = 0;
    std::uint64_t best_lab = 0;
    std::array<int, 8> best_perm{};
    long aut = 0;

    do {
        SmallGraph h = g.permuted(p);
        std::uint32_t bits = h.adj_bits();
        std::uint64_t lab = 0;
        if (labels)
            for (int i = 0; i < g.m; ++i) lab = (lab << 8) | std::uint64_t((*labels)[p[i]]);
        if (!have_best || bits < best_bits || (bits == best_bits && lab < best_lab)) {
            have_best = true;
            best_bits = bits;
            best_lab = lab;
            best_perm = p;
        }
        if (bits == self_bits) {
            bool lab_ok = true;
            if (labels)
                for (int i = 0; i < g.m && lab_ok; ++i)
                    lab_ok = (*labels)[p[i]] == (*labels)[i];
            if (lab_ok) ++aut;
        }
    } while (std::next_permutation(p.begin(), p.begin() + g.m));

    GraphCanon out;
    out.graph = SmallGraph::from_adj_bits(g.m, best_bits);
    out.perm = best_perm;
    out.automorphisms = aut;
    if (canon_labels && labels) {
        canon_labels->resize(g.m);
        for (int i = 0; i < g.m; ++i) (*canon_labels)[i] = (*labels)[best_perm[i]];
    }
    return out;
}

/// All non-isomorphic connected graphs of the given order, sorted by canonical
/// key. Built by extending order m-1 classes with one new node.
inline std::vector<SmallGraph> enumerate_connected_graphs(int m) {
    check_order(m, "enumerate_connected_graphs");
    if (m == 1) return {SmallGraph(1)};
    std::set<GraphKey> keys;
    for (const SmallGraph& base : enumerate_connected_graphs(m - 1)) {
        for (std::uint32_t sub = 1; sub < (1u << (m - 1)); ++sub) {
            SmallGraph g(m);
            g.adj = base.adj;
            for (int i = 0; i < m - 1; ++i)
                if ((sub >> i) & 1u) g.add_edge(i, m - 1);
            keys.insert(graph_key(canonical_graph(g).graph));
        }
    }
    std::vector<SmallGraph> out;
    out.reserve(keys.size());
    for (GraphKey k : keys) out.push_back(graph_from_key(k));
    return out;
}

/// Edge (i,j) iff 0 < dist(i,j) <= d.
inline SmallGraph power_graph(const SmallGraph& g, int d) {
    if (d < 0) throw std::invalid_argument("power_graph: d < 0");
    SmallGraph out(g.m);
    auto dist = g.distances();
    for (int i = 0; i < g.m; ++i)
        for (int j = i + 1; j < g.m; ++j)
            if (dist[i][j] > 0 && dist[i][j] <= d) out.add_edge(i, j);
    return out;
}

/// Chordality via maximum cardinality search + perfect elimination check.
inline bool is_chordal(const SmallGraph& g) {
    const int m = g.m;
    if (m <= 3) return true;
    std::vector<int> weight(m, 0), order(m, -1), pos(m, -1);
    std::vector<bool> used(m, false);
    for (int step = m - 1; step >= 0; --step) {
        int v = -1;
        for (int i = 0; i < m; ++i)
            if (!used[i] && (v < 0 || weight[i] > weight[v])) v = i;
        used[v] = true;
        order[step] = v;
        pos[v] = step;
        for (int j = 0; j < m; ++j)
            if (g.edge(v, j) && !used[j]) ++weight[j];
    }
    // order is a perfect elimination ordering iff g is chordal
    for (int idx = 0; idx < m; ++idx) {
        int v = order[idx];
        std::uint8_t later = 0;
        for (int j = 0; j < m; ++j)
            if (g.edge(v, j) && pos[j] > idx) later |= std::uint8_t(1u << j);
        if (!later) continue;
        int u = -1;
        for (int j = 0; j < m; ++j)
            if (((later >> j) & 1u) && (u < 0 || pos[j] < pos[u])) u = j;
        std::uint8_t rest = later & std::uint8_t(~(1u << u));
        if ((rest & g.adj[u]) != rest) return false;
    }
    return true;
}

/// Chordal supergraph with the minimum number of added chords; exhaustive over
/// chord subsets in lexicographic order, so ties resolve deterministically.
inline SmallGraph minimal_triangulation(const SmallGraph& g) {
    check_order(g.m, "minimal_triangulation");
    if (is_chordal(g)) return g;
    std::vector<std::pair<int, int>> missing;
    for (int i = 0; i < g.m; ++i)
        for (int j = i + 1; j < g.m; ++j)
            if (!g.edge(i, j)) missing.push_back({i, j});
    const int n = int(missing.size());
    for (int k = 1; k <= n; ++k) {
        std::vector<int> idx(k);
        std::iota(idx.begin(), idx.end(), 0);
        while (true) {
            SmallGraph h = g;
            for (int t : idx) h.add_edge(missing[t].first, missing[t].second);
            if (is_chordal(h)) return h;
            int pos = k - 1;
            while (pos >= 0 && idx[pos] == n - k + pos) --pos;
            if (pos < 0) break;
            ++idx[pos];
            for (int t = pos + 1; t < k; ++t) idx[t] = idx[t - 1] + 1;
        }
    }
    throw std::logic_error("minimal_triangulation: unreachable (complete graph is chordal)");
}

/// Maximal cliques of power_graph(g,d) as node bitmasks (Bron-Kerbosch),
/// sorted ascending. d=0 yields the singletons.
inline std::vector<std::uint8_t> maximal_d_cliques(const SmallGraph& g, int d) {
    SmallGraph p = power_graph(g, d);
    std::vector<std::uint8_t> out;
    const std::uint8_t all = std::uint8_t((1u << g.m) - 1);
    // iterative Bron-Kerbosch with pivot
    struct Frame { std::uint8_t r, pset, x; };
    std::vector<Frame> stack{{0, all, 0}};
    while (!stack.empty()) {
        auto [r, pset, x] = stack.back();
        stack.pop_back();
        if (!pset && !x) {
            out.push_back(r);
            continue;
        }
        if (!pset) continue;
        int pivot = -1, best = -1;
        for (int v = 0; v < g.m; ++v)
            if ((((pset | x) >> v) & 1u) && std::popcount(std::uint8_t(pset & p.adj[v])) > best) {
                best = std::popcount(std::uint8_t(pset & p.adj[v]));
                pivot = v;
            }
        std::uint8_t cand = pset & std::uint8_t(~p.adj[pivot]);
        for (int v = 0; v < g.m; ++v) {
            if (!((cand >> v) & 1u)) continue;
            stack.push_back({std::uint8_t(r | (1u << v)), std::uint8_t(pset & p.adj[v]),
                             std::uint8_t(x & p.adj[v])});
            pset &= std::uint8_t(~(1u << v));
            x |= std::uint8_t(1u << v);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Cliques plus the surviving links of the junction graph; separators are the
/// pairwise clique intersections on the links.
struct CliqueSet {
    std::vector<std::uint8_t> cliques;
    struct Link {
        int i, j;
        std::uint8_t sep;
    };
    std::vector<Link> links;

    int components() const {
        const int n = int(cliques.size());
        std::vector<int> parent(n);
        std::iota(parent.begin(), parent.end(), 0);
        auto find = [&](int a) {
            while (parent[a] != a) a = parent[a] = parent[parent[a]];
            return a;
        };
        for (const auto& l : links) parent[find(l.i)] = find(l.j);
        int c = 0;
        for (int i = 0; i < n; ++i)
            if (find(i) == i) ++c;
        return c;
    }
    /// Acyclic with one component per... a forest: |links| = |cliques| - #components.
    bool is_forest() const { return int(links.size()) == int(cliques.size()) - components(); }

    /// Running intersection: for every graph node, the cliques containing it
    /// induce a connected subgraph of the junction graph.
    bool junction_property(int m) const {
        for (int v = 0; v < m; ++v) {
            std::vector<int> with;
            for (int c = 0; c < int(cliques.size()); ++c)
                if ((cliques[c] >> v) & 1u) with.push_back(c);
            if (with.size() <= 1) continue;
            std::set<int> seen{with[0]};
            std::vector<int> frontier{with[0]};
            while (!frontier.empty()) {
                int c = frontier.back();
                frontier.pop_back();
                for (const auto& l : links) {
                    int other = l.i == c ? l.j : (l.j == c ? l.i : -1);
                    if (other >= 0 && ((cliques[other] >> v) & 1u) && !seen.count(other)) {
                        seen.insert(other);
                        frontier.push_back(other);
                    }
                }
            }
            for (int c : with)
                if (!seen.count(c)) return false;
        }
        return true;
    }
};

namespace detail {

struct CliqueLinkGraph {
    std::vector<std::uint8_t> cliques;
    std::vector<std::pair<int, int>> candidates;  // all overlapping pairs, lexicographic

    bool redundant(const std::vector<bool>& active, int idx) const {
        auto [a, b] = candidates[idx];
        std::uint8_t sep = cliques[a] & cliques[b];
        // search for an alternative a->b path through cliques containing sep
        std::vector<bool> seen(cliques.size(), false);
        std::vector<int> frontier{a};
        seen[a] = true;
        while (!frontier.empty()) {
            int c = frontier.back();
            frontier.pop_back();
            for (int e = 0; e < int(candidates.size()); ++e) {
                if (!active[e] || e == idx) continue;
                auto [i, j] = candidates[e];
                int other = (i == c) ? j : (j == c ? i : -1);
                if (other < 0 || seen[other]) continue;
                if ((cliques[other] & sep) != sep && other != b) continue;
                if (other == b) return true;
                seen[other] = true;
                frontier.push_back(other);
            }
        }
        return false;
    }

    CliqueSet materialize(const std::vector<bool>& active) const {
        CliqueSet cs;
        cs.cliques = cliques;
        for (int e = 0; e < int(candidates.size()); ++e)
            if (active[e])
                cs.links.push_back({candidates[e].first, candidates[e].second,
                                    std::uint8_t(cliques[candidates[e].first] &
                                                 cliques[candidates[e].second])});
        return cs;
    }
};

inline CliqueLinkGraph clique_link_graph(const SmallGraph& g, int d) {
    CliqueLinkGraph clg;
    clg.cliques = maximal_d_cliques(g, d);
    for (int i = 0; i < int(clg.cliques.size()); ++i)
        for (int j = i + 1; j < int(clg.cliques.size()); ++j)
            if (clg.cliques[i] & clg.cliques[j]) clg.candidates.push_back({i, j});
    return clg;
}

}  // namespace detail

/// One deterministic junction graph: repeatedly drop the lexicographically
/// smallest redundant link until none remain. If the d-power graph is chordal
/// the result is a junction forest (a tree for connected power graphs).
inline CliqueSet junction_graph(const SmallGraph& g, int d) {
    auto clg = detail::clique_link_graph(g, d);
    std::vector<bool> active(clg.candidates.size(), true);
    for (;;) {
        int drop = -1;
        for (int e = 0; e < int(clg.candidates.size()) && drop < 0; ++e)
            if (active[e] && clg.redundant(active, e)) drop = e;
        if (drop < 0) break;
        active[drop] = false;
    }
    CliqueSet cs = clg.materialize(active);
    if (is_chordal(power_graph(g, d)) && !(cs.is_forest() && cs.junction_property(g.m)))
        throw std::logic_error("junction_graph: chordal power graph did not yield a junction forest");
    return cs;
}

/// All distinct junction graphs reachable over redundant-link removal orders.
inline std::vector<CliqueSet> all_junction_graphs(const SmallGraph& g, int d) {
    auto clg = detail::clique_link_graph(g, d);
    const int ne = int(clg.candidates.size());
    std::set<std::uint32_t> done, results;
    std::vector<std::uint32_t> stack{ne ? std::uint32_t((1u << ne) - 1) : 0u};
    while (!stack.empty()) {
        std::uint32_t state = stack.back();
        stack.pop_back();
        if (done.count(state)) continue;
        done.insert(state);
        std::vector<bool> active(ne);
        for (int e = 0; e < ne; ++e) active[e] = (state >> e) & 1u;
        bool any = false;
        for (int e = 0; e < ne; ++e) {
            if (!active[e]) continue;
            if (clg.redundant(active, e)) {
                any = true;
                stack.push_back(state & ~(1u << e));
            }
        }
        if (!any) results.insert(state);
    }
    std::vector<CliqueSet> out;
    for (std::uint32_t state : results) {
        std::vector<bool> active(ne);
        for (int e = 0; e < ne; ++e) active[e] = (state >> e) & 1u;
        out.push_back(clg.materialize(active));
    }
    return out;
}

}  // namespace mf
