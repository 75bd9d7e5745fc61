#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "momentforge/rational.hpp"
#include "momentforge/rng.hpp"
#include "momentforge/small_graph.hpp"

namespace mf {

/// Host network: plain adjacency lists, nodes 0..N-1.
struct Network {
    int n_nodes = 0;
    std::vector<std::vector<int>> adj;

    explicit Network(int n = 0) : n_nodes(n), adj(n) {}

    void add_edge(int u, int v) {
        adj[u].push_back(v);
        adj[v].push_back(u);
    }
    bool has_edge(int u, int v) const {
        return std::find(adj[u].begin(), adj[u].end(), v) != adj[u].end();
    }
    int degree(int u) const { return int(adj[u].size()); }
    long edge_count() const {
        long s = 0;
        for (const auto& a : adj) s += long(a.size());
        return s / 2;
    }
    double mean_degree() const { return n_nodes ? 2.0 * double(edge_count()) / n_nodes : 0.0; }

    /// BFS distances from a source node.
    std::vector<int> distances_from(int s) const {
        std::vector<int> d(n_nodes, -1);
        std::vector<int> q{s};
        d[s] = 0;
        for (std::size_t h = 0; h < q.size(); ++h) {
            int u = q[h];
            for (int v : adj[u])
                if (d[v] < 0) {
                    d[v] = d[u] + 1;
                    q.push_back(v);
                }
        }
        return d;
    }
};

struct NetworkSpec {
    enum class Kind { Lattice, RandomRegular, ErdosRenyi, Explicit };
    Kind kind = Kind::Lattice;
    int dimension = 2;       // lattice
    int side = 4;            // lattice
    bool periodic = true;    // lattice
    int n = 0;               // random kinds
    double kappa = 0.0;      // random kinds
    double phi = 0.0;        // clustering coefficient, analytic census only
    std::vector<std::pair<int, int>> edges;  // explicit
    std::uint64_t seed = 1;

    void validate() const {
        switch (kind) {
            case Kind::Lattice:
                if (side < 2 || (periodic && side < 3))
                    throw std::invalid_argument("lattice side must be >= 3 when periodic");
                if (dimension < 1 || dimension > 6)
                    throw std::invalid_argument("lattice dimension out of range");
                break;
            case Kind::RandomRegular: {
                int k = int(std::lround(kappa));
                if (std::abs(kappa - k) > 1e-9)
                    throw std::invalid_argument("random_regular needs integer kappa");
                if (k <= 0 || k >= n) throw std::invalid_argument("random_regular needs 0 < kappa < N");
                if ((long(n) * k) % 2 != 0)
                    throw std::invalid_argument("random_regular needs N*kappa even");
                break;
            }
            case Kind::ErdosRenyi:
                if (kappa <= 0 || kappa >= n) throw std::invalid_argument("erdos_renyi needs 0 < kappa < N");
                break;
            case Kind::Explicit:
                break;
        }
    }
};

namespace detail {

inline Network make_lattice(int dim, int side, bool periodic) {
    long n = 1;
    for (int i = 0; i < dim; ++i) n *= side;
    Network net{int(n)};
    std::vector<int> coord(dim, 0);
    auto index = [&](const std::vector<int>& c) {
        long idx = 0;
        for (int i = dim - 1; i >= 0; --i) idx = idx * side + c[i];
        return int(idx);
    };
    for (long u = 0; u < n; ++u) {
        for (int axis = 0; axis < dim; ++axis) {
            std::vector<int> c = coord;
            if (c[axis] + 1 < side) {
                ++c[axis];
                net.add_edge(int(u), index(c));
            } else if (periodic && side > 2) {
                c[axis] = 0;
                net.add_edge(int(u), index(c));
            }
        }
        for (int axis = 0; axis < dim; ++axis) {
            if (++coord[axis] < side) break;
            coord[axis] = 0;
        }
    }
    return net;
}

inline Network make_random_regular(int n, int k, std::uint64_t seed) {
    // pairing model with full restart on self-loops / multi-edges
    Xoshiro256 rng = Xoshiro256::stream(seed, 0x7265670ull);
    for (int attempt = 0; attempt < 10000; ++attempt) {
        std::vector<int> stubs;
        stubs.reserve(std::size_t(n) * k);
        for (int v = 0; v < n; ++v)
            for (int s = 0; s < k; ++s) stubs.push_back(v);
        for (std::size_t i = stubs.size(); i > 1; --i)
            std::swap(stubs[i - 1], stubs[rng.below(i)]);
        Network net(n);
        std::set<std::pair<int, int>> used;
        bool ok = true;
        for (std::size_t i = 0; i + 1 < stubs.size() && ok; i += 2) {
            int u = stubs[i], v = stubs[i + 1];
            if (u == v) ok = false;
            auto key = std::minmax(u, v);
            if (ok && !used.insert({key.first, key.second}).second) ok = false;
            if (ok) net.add_edge(u, v);
        }
        if (ok) return net;
    }
    throw std::runtime_error("random_regular: pairing model failed to converge");
}

inline Network make_erdos_renyi(int n, double kappa, std::uint64_t seed) {
    Xoshiro256 rng = Xoshiro256::stream(seed, 0x657244ull);
    Network net(n);
    const double p = kappa / double(n - 1);
    for (int u = 0; u < n; ++u)
        for (int v = u + 1; v < n; ++v)
            if (rng.uniform() < p) net.add_edge(u, v);
    return net;
}

}  // namespace detail

inline Network generate(const NetworkSpec& spec) {
    spec.validate();
    switch (spec.kind) {
        case NetworkSpec::Kind::Lattice:
            return detail::make_lattice(spec.dimension, spec.side, spec.periodic);
        case NetworkSpec::Kind::RandomRegular:
            return detail::make_random_regular(spec.n, int(std::lround(spec.kappa)), spec.seed);
        case NetworkSpec::Kind::ErdosRenyi:
            return detail::make_erdos_renyi(spec.n, spec.kappa, spec.seed);
        case NetworkSpec::Kind::Explicit: {
            int n = 0;
            for (auto [u, v] : spec.edges) n = std::max({n, u + 1, v + 1});
            Network net(n);
            for (auto [u, v] : spec.edges) {
                if (u == v || net.has_edge(u, v)) throw std::invalid_argument("bad explicit edge list");
                net.add_edge(u, v);
            }
            return net;
        }
    }
    throw std::logic_error("unreachable");
}

/// Counts [a] of induced connected subgraphs per unlabelled class, in
/// ordered-tuple semantics (each placement counted |Aut| times).
struct SubgraphCensus {
    std::map<GraphKey, Rational> counts;

    Rational at(GraphKey k) const {
        auto it = counts.find(k);
        return it == counts.end() ? Rational(0) : it->second;
    }
    bool has(GraphKey k) const {
        auto it = counts.find(k);
        return it != counts.end() && !it->second.is_zero();
    }
};

namespace detail {

/// ESU (Wernicke) enumeration of connected induced subgraph node sets; each
/// set is visited exactly once, recorded at every size up to kmax.
template <typename F>
void esu_extend(const Network& net, std::vector<int>& sub, std::set<int>& sub_set,
                std::vector<int> ext, int root, int kmax, F&& record) {
    if (int(sub.size()) == kmax) return;
    while (!ext.empty()) {
        int w = ext.back();
        ext.pop_back();
        std::vector<int> ext2 = ext;
        for (int u : net.adj[w]) {
            if (u <= root || sub_set.count(u)) continue;
            bool excl = true;  // exclusive neighbour: not adjacent to current sub
            for (int s : sub)
                if (net.has_edge(u, s)) {
                    excl = false;
                    break;
                }
            if (excl && std::find(ext2.begin(), ext2.end(), u) == ext2.end()) ext2.push_back(u);
        }
        sub.push_back(w);
        sub_set.insert(w);
        record(sub);
        esu_extend(net, sub, sub_set, ext2, root, kmax, record);
        sub_set.erase(w);
        sub.pop_back();
    }
}

}  // namespace detail

inline SubgraphCensus census_exhaustive(const Network& net, int kmax) {
    check_order(kmax, "census_exhaustive");
    std::map<GraphKey, long> placements;
    auto record = [&](const std::vector<int>& nodes) {
        SmallGraph g(int(nodes.size()));
        for (int a = 0; a < g.m; ++a)
            for (int b = a + 1; b < g.m; ++b)
                if (net.has_edge(nodes[a], nodes[b])) g.add_edge(a, b);
        ++placements[graph_key(canonical_graph(g).graph)];
    };
    for (int v = 0; v < net.n_nodes; ++v) {
        std::vector<int> sub{v};
        std::set<int> sub_set{v};
        record(sub);
        std::vector<int> ext;
        for (int u : net.adj[v])
            if (u > v) ext.push_back(u);
        detail::esu_extend(net, sub, sub_set, ext, v, kmax, record);
    }
    SubgraphCensus census;
    for (auto& [key, cnt] : placements) {
        long aut = canonical_graph(graph_from_key(key)).automorphisms;
        census.counts[key] = Rational(cnt) * Rational(aut);
    }
    return census;
}

namespace detail {
inline Rational rationalize(double x, long max_den = 1000000) {
    // continued-fraction approximation; analytic census parameters are
    // simple fractions in practice
    bool neg = x < 0;
    if (neg) x = -x;
    long p0 = 0, q0 = 1, p1 = 1, q1 = 0;
    double v = x;
    for (int it = 0; it < 64; ++it) {
        long a = long(std::floor(v));
        long p2 = a * p1 + p0, q2 = a * q1 + q0;
        if (q2 > max_den) break;
        p0 = p1; q0 = q1; p1 = p2; q1 = q2;
        double frac = v - double(a);
        if (frac < 1e-12) break;
        v = 1.0 / frac;
    }
    return Rational(neg ? -p1 : p1, q1 == 0 ? 1 : q1);
}
}  // namespace detail

/// Closed-form census for the network families the paper treats analytically:
/// [node]=N, [edge]=kappa N, and at order 3 the chain/triangle split driven by
/// the clustering coefficient (fixed degree) or the large-N ER limit.
inline SubgraphCensus census_analytic(const NetworkSpec& spec, int kmax) {
    if (kmax > 3) throw CapacityError("census_analytic supports kmax <= 3");
    long n_nodes;
    Rational kappa, phi;
    switch (spec.kind) {
        case NetworkSpec::Kind::Lattice: {
            n_nodes = 1;
            for (int i = 0; i < spec.dimension; ++i) n_nodes *= spec.side;
            if (!spec.periodic)
                throw std::invalid_argument("census_analytic: lattice must be periodic");
            kappa = Rational(2 * spec.dimension);
            phi = Rational(0);
            break;
        }
        case NetworkSpec::Kind::RandomRegular:
            n_nodes = spec.n;
            kappa = detail::rationalize(spec.kappa);
            phi = detail::rationalize(spec.phi);
            break;
        case NetworkSpec::Kind::ErdosRenyi:
            n_nodes = spec.n;
            kappa = detail::rationalize(spec.kappa);
            phi = Rational(0);
            break;
        default:
            throw std::invalid_argument("census_analytic: unsupported network kind");
    }
    const Rational N(n_nodes);
    SubgraphCensus census;
    census.counts[graph_key(SmallGraph(1))] = N;
    if (kmax >= 2) census.counts[graph_key(chain_graph(2))] = kappa * N;
    if (kmax >= 3) {
        Rational triples;
        if (spec.kind == NetworkSpec::Kind::ErdosRenyi) {
            triples = kappa * kappa * N;  // Poisson degrees, large N
        } else {
            triples = kappa * (kappa - Rational(1)) * N;
        }
        Rational tri = phi * triples;
        census.counts[graph_key(canonical_graph(chain_graph(3)).graph)] = triples - tri;
        if (!tri.is_zero())
            census.counts[graph_key(canonical_graph(complete_graph(3)).graph)] = tri;
    }
    return census;
}

}  // namespace mf
