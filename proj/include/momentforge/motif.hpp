#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "momentforge/network.hpp"
#include "momentforge/small_graph.hpp"

namespace mf {

constexpr int kMaxSpecies = 15;

/// Connected labelled motif, stored in canonical (class-representative)
/// indexing. Species are small integers 0..n-1.
struct Motif {
    SmallGraph graph;
    std::vector<int> labels;
    long automorphisms = 1;  // label-preserving

    Motif() = default;
    Motif(const SmallGraph& g, std::vector<int> lab, bool require_connected = true) {
        if (int(lab.size()) != g.m) throw std::invalid_argument("Motif: label size mismatch");
        for (int s : lab)
            if (s < 0 || s > kMaxSpecies) throw std::invalid_argument("Motif: species out of range");
        if (require_connected && !g.connected())
            throw std::invalid_argument("Motif: graph must be connected");
        std::vector<int> canon_lab;
        GraphCanon c = canonical_graph(g, &lab, &canon_lab);
        graph = c.graph;
        labels = std::move(canon_lab);
        automorphisms = c.automorphisms;
    }

    int order() const { return graph.m; }

    friend bool operator==(const Motif& a, const Motif& b) {
        return a.graph == b.graph && a.labels == b.labels;
    }
};

/// Packed motif class key: [order:4][adjacency:28][labels: 4 bits/node].
using MotifKey = std::uint64_t;

inline MotifKey motif_key(const Motif& mo) {
    std::uint64_t lab = 0;
    for (int i = 0; i < mo.order(); ++i) lab = (lab << 4) | std::uint64_t(mo.labels[i]);
    return (std::uint64_t(mo.order()) << 60) | (std::uint64_t(mo.graph.adj_bits()) << 32) | lab;
}

inline Motif motif_from_key(MotifKey k) {
    int m = int(k >> 60);
    SmallGraph g = SmallGraph::from_adj_bits(m, std::uint32_t((k >> 32) & 0x0fffffffu));
    std::vector<int> lab(m);
    for (int i = m - 1; i >= 0; --i) {
        lab[i] = int(k & 0xf);
        k >>= 4;
    }
    return Motif(g, lab);
}

inline GraphKey motif_graph_key(MotifKey k) {
    return (GraphKey(k >> 60) << 32) | ((k >> 32) & 0x0fffffffu);
}

/// Human-readable motif name: labels plus a shape tag. Chains are rendered in
/// path order (lexicographically smaller direction), other shapes in
/// canonical index order.
inline std::string motif_name(const Motif& mo, const std::vector<std::string>& species) {
    auto sp = [&](int lab) {
        return (lab < int(species.size())) ? species[lab] : std::to_string(lab);
    };
    const int m = mo.order(), e = mo.graph.edge_count();
    const bool is_path = e == m - 1 && mo.graph.diameter() == m - 1;
    std::string s;
    if (is_path && m >= 3) {
        int end = 0;
        while (mo.graph.degree(end) != 1) ++end;
        std::vector<int> order{end};
        while (int(order.size()) < m) {
            int cur = order.back();
            for (int j = 0; j < m; ++j)
                if (mo.graph.edge(cur, j) && (order.size() < 2 || j != order[order.size() - 2])) {
                    order.push_back(j);
                    break;
                }
        }
        std::string fwd, rev;
        for (int i = 0; i < m; ++i) {
            fwd += sp(mo.labels[order[i]]);
            rev += sp(mo.labels[order[m - 1 - i]]);
        }
        s = std::min(fwd, rev);
    } else {
        for (int lab : mo.labels) s += sp(lab);
    }
    std::string shape;
    if (m <= 2 || is_path) shape = "";
    else if (e == m && m == 3) shape = "-tri";
    else if (e == m - 1 && mo.graph.diameter() == 2) shape = "-star";
    else if (e == m && mo.graph.diameter() == m / 2 && m > 3) shape = "-cyc";
    else shape = "-g" + std::to_string(mo.graph.adj_bits());
    return s + shape;
}

/// One representative per isomorphism class of (connected graph, labelling).
/// Deterministic order: by graph class key, then packed label key.
inline std::vector<Motif> enumerate_motifs(int m, int n_species,
                                           const std::set<GraphKey>* restrict_to = nullptr) {
    check_order(m, "enumerate_motifs");
    if (n_species < 1 || n_species > kMaxSpecies)
        throw std::invalid_argument("enumerate_motifs: bad species count");
    std::vector<Motif> out;
    for (const SmallGraph& g : enumerate_connected_graphs(m)) {
        if (restrict_to && !restrict_to->count(graph_key(g))) continue;
        std::set<MotifKey> seen;
        std::vector<int> lab(m, 0);
        for (long code = 0;; ++code) {
            Motif mo(g, lab);
            MotifKey key = motif_key(mo);
            if (seen.insert(key).second) out.push_back(mo);
            int pos = m - 1;
            while (pos >= 0 && lab[pos] == n_species - 1) lab[pos--] = 0;
            if (pos < 0) break;
            ++lab[pos];
        }
    }
    std::sort(out.begin(), out.end(),
              [](const Motif& a, const Motif& b) { return motif_key(a) < motif_key(b); });
    return out;
}

/// Motif with position p relabelled to species k (canonical class of it).
inline Motif relabel(const Motif& mo, int p, int k) {
    std::vector<int> lab = mo.labels;
    lab.at(p) = k;
    return Motif(mo.graph, lab);
}

/// Relabel and report where position p landed in the canonical indexing of
/// the result (canonicalization may permute the nodes).
inline std::pair<Motif, int> relabel_tracked(const Motif& mo, int p, int k) {
    std::vector<int> lab = mo.labels;
    lab.at(p) = k;
    std::vector<int> canon_lab;
    GraphCanon c = canonical_graph(mo.graph, &lab, &canon_lab);
    Motif out;
    out.graph = c.graph;
    out.labels = std::move(canon_lab);
    out.automorphisms = c.automorphisms;
    int where = -1;
    for (int i = 0; i < mo.order(); ++i)
        if (c.perm[i] == p) where = i;
    return {std::move(out), where};
}

/// Order m-1 motif with position p removed; nullopt when removal disconnects.
inline std::optional<Motif> delete_node(const Motif& mo, int p) {
    if (mo.order() == 1) return std::nullopt;
    std::uint8_t keep = std::uint8_t(((1u << mo.order()) - 1) & ~(1u << p));
    SmallGraph g = mo.graph.induced(keep);
    if (!g.connected()) return std::nullopt;
    std::vector<int> lab;
    for (int i = 0; i < mo.order(); ++i)
        if (i != p) lab.push_back(mo.labels[i]);
    return Motif(g, lab);
}

/// Number of neighbours of position p carrying species c.
inline int c_degree(const Motif& mo, int p, int c) {
    int cnt = 0;
    for (int j = 0; j < mo.order(); ++j)
        if (mo.graph.edge(p, j) && mo.labels[j] == c) ++cnt;
    return cnt;
}

/// All order m+1 classes reached by linking a new c-node to position p,
/// with multiplicity = number of raw link subsets landing on the class.
/// The multiplicities are what the moment equations need (each subset is a
/// distinct summand of Eq. for the neighbourhood split).
inline std::map<MotifKey, int> neighborhood_extension_multiset(const Motif& mo, int p, int c) {
    const int m = mo.order();
    check_order(m + 1, "neighborhood_extensions");
    std::map<MotifKey, int> out;
    std::uint32_t others = ((1u << m) - 1u) & ~(1u << p);
    // iterate subsets of additional links from the new node to positions != p
    std::uint32_t sub = 0;
    while (true) {
        SmallGraph g(m + 1);
        g.adj = mo.graph.adj;
        g.add_edge(p, m);
        for (int i = 0; i < m; ++i)
            if ((sub >> i) & 1u) g.add_edge(i, m);
        std::vector<int> lab = mo.labels;
        lab.push_back(c);
        ++out[motif_key(Motif(g, lab))];
        sub = (sub - others) & others;  // next subset of `others`
        if (sub == 0) break;
    }
    return out;
}

/// Deduplicated neighbourhood extension classes (the set N^c_p).
inline std::vector<Motif> neighborhood_extensions(const Motif& mo, int p, int c) {
    std::vector<Motif> out;
    for (const auto& [key, mult] : neighborhood_extension_multiset(mo, p, c))
        out.push_back(motif_from_key(key));
    return out;
}

/// Exact match count of the motif in the host network with given node states:
/// the number of ordered node tuples whose *induced* adjacency equals the
/// motif graph and whose states match the labels (Eq. tuple semantics).
inline long count_motif(const Network& net, const std::vector<int>& states, const Motif& mo) {
    const int m = mo.order();
    if (net.n_nodes < m) return 0;
    // order positions so each next one touches an assigned one
    std::vector<int> order{0}, anchor(m, -1);
    std::vector<bool> placed(m, false);
    placed[0] = true;
    while (int(order.size()) < m) {
        for (int j = 0; j < m; ++j) {
            if (placed[j]) continue;
            for (int i : order)
                if (mo.graph.edge(i, j)) {
                    anchor[j] = i;
                    break;
                }
            if (anchor[j] >= 0) {
                placed[j] = true;
                order.push_back(j);
                break;
            }
        }
    }
    std::vector<int> assign(m, -1);
    std::vector<bool> used(net.n_nodes, false);
    long count = 0;
    auto rec = [&](auto&& self, int depth) -> void {
        if (depth == m) {
            ++count;
            return;
        }
        int pos = order[depth];
        auto try_node = [&](int v) {
            if (used[v] || states[v] != mo.labels[pos]) return;
            for (int d = 0; d < depth; ++d) {
                int q = order[d];
                if (mo.graph.edge(pos, q) != net.has_edge(v, assign[q])) return;
            }
            assign[pos] = v;
            used[v] = true;
            self(self, depth + 1);
            used[v] = false;
            assign[pos] = -1;
        };
        if (anchor[pos] >= 0) {
            for (int v : net.adj[assign[anchor[pos]]]) try_node(v);
        } else {
            for (int v = 0; v < net.n_nodes; ++v) try_node(v);
        }
    };
    rec(rec, 0);
    return count;
}

/// Unordered placement count (independent of automorphisms); count_motif
/// equals this times |Aut|.
inline long count_motif_placements(const Network& net, const std::vector<int>& states,
                                   const Motif& mo) {
    return count_motif(net, states, mo) / mo.automorphisms;
}

}  // namespace mf
