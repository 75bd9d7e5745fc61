#pragma once

#include <bit>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <vector>

#include "momentforge/derivation.hpp"
#include "momentforge/motif.hpp"
#include "momentforge/small_graph.hpp"

namespace mf {

/// Rational monomial over motif counts approximating the target:
///   [[target]] ~ prod num^e / prod den^e * prod_p [[species_p]]^gamma_p.
/// Every generated formula satisfies the consistency condition: the net
/// exponent of each target position (numerator - denominator + gamma) is 1,
/// so replacing all factors by products of order-1 counts recovers the plain
/// MF1 product.
struct ClosureFormula {
    MotifKey target = 0;
    std::map<MotifKey, int> num;   // canonical classes, exponent > 0
    std::map<MotifKey, int> den;
    std::vector<int> gamma;        // per target position
    std::vector<int> position_net; // diagnostic: net exponent per position (should be all 1)

    bool raw = false;                           // false: normalized counts
    std::map<GraphKey, int> census_exponents;   // raw form: census-class prefactor

    /// Folded (num, den) with gamma merged as order-1 factors and common
    /// factors cancelled; used for symbolic comparisons.
    std::pair<std::map<MotifKey, int>, std::map<MotifKey, int>> canonical_factors() const {
        std::map<MotifKey, int> n = num, d = den;
        Motif t = motif_from_key(target);
        for (int p = 0; p < t.order(); ++p) {
            if (!gamma.empty() && gamma[p] != 0) {
                Motif node(SmallGraph(1), {t.labels[p]});
                MotifKey k = motif_key(node);
                if (gamma[p] > 0) n[k] += gamma[p];
                else d[k] -= gamma[p];
            }
        }
        for (auto it = n.begin(); it != n.end();) {
            auto jt = d.find(it->first);
            if (jt != d.end()) {
                int cancel = std::min(it->second, jt->second);
                it->second -= cancel;
                jt->second -= cancel;
                if (jt->second == 0) d.erase(jt);
            }
            it = it->second == 0 ? n.erase(it) : std::next(it);
        }
        for (auto it = d.begin(); it != d.end();)
            it = it->second == 0 ? d.erase(it) : std::next(it);
        return {n, d};
    }

    friend bool operator==(const ClosureFormula& a, const ClosureFormula& b) {
        return a.target == b.target && a.canonical_factors() == b.canonical_factors();
    }
};

/// gamma_p = 1 - (numerator occurrences of p) + (denominator occurrences).
inline std::vector<int> gamma_exponents(const std::map<std::uint8_t, int>& num_masks,
                                        const std::map<std::uint8_t, int>& den_masks, int order) {
    std::vector<int> gamma(order, 1);
    for (const auto& [mask, e] : num_masks)
        for (int p = 0; p < order; ++p)
            if ((mask >> p) & 1u) gamma[p] -= e;
    for (const auto& [mask, e] : den_masks)
        for (int p = 0; p < order; ++p)
            if ((mask >> p) & 1u) gamma[p] += e;
    return gamma;
}

/// How the order k+1 motif gets decomposed: the distance d, whether its
/// d-power is chordal, and the clique structures for the available routes.
struct DecompositionPlan {
    Motif motif;
    int d = 0;
    bool chordal = false;
    std::vector<CliqueSet> chordal_sets;       // junction forests of the d-power
    std::vector<CliqueSet> triangulated_sets;  // junction trees after minimal triangulation
    std::vector<CliqueSet> adhoc_sets;         // connected (m-1)-subsets (Eq. 20 extension)
};

namespace detail {

inline std::vector<CliqueSet> dedup_cliquesets(std::vector<CliqueSet> sets) {
    // distinct by (cliques, links)
    std::set<std::vector<std::uint32_t>> seen;
    std::vector<CliqueSet> out;
    for (auto& cs : sets) {
        std::vector<std::uint32_t> sig;
        for (auto c : cs.cliques) sig.push_back(c);
        sig.push_back(0xffffffffu);
        std::vector<std::uint32_t> ls;
        for (const auto& l : cs.links) ls.push_back(std::uint32_t(l.i << 16 | l.j));
        std::sort(ls.begin(), ls.end());
        sig.insert(sig.end(), ls.begin(), ls.end());
        if (seen.insert(sig).second) out.push_back(std::move(cs));
    }
    return out;
}

}  // namespace detail

inline DecompositionPlan decomposition_plan(const Motif& motif, std::optional<int> d_opt = {}) {
    if (motif.order() < 2) throw std::invalid_argument("decomposition_plan: order >= 2 required");
    DecompositionPlan plan;
    plan.motif = motif;
    plan.d = d_opt ? *d_opt : motif.graph.diameter() - 1;
    if (plan.d < 0) plan.d = 0;
    SmallGraph power = power_graph(motif.graph, plan.d);
    plan.chordal = is_chordal(power);
    if (plan.chordal) {
        plan.chordal_sets = detail::dedup_cliquesets(all_junction_graphs(motif.graph, plan.d));
    } else {
        // route (i): triangulate the independence map first
        SmallGraph tri = minimal_triangulation(power);
        CliqueSet cs;
        // junction tree of the triangulated map: reuse the d-clique machinery
        // by treating tri as a distance-1 independence map
        cs = junction_graph(tri, 1);
        plan.triangulated_sets.push_back(std::move(cs));
        // route (ii): ad-hoc over connected (m-1)-node subsets
        CliqueSet ah;
        const int m = motif.order();
        for (std::uint8_t mask = 0; mask < (1u << m); ++mask) {
            if (std::popcount(mask) != m - 1) continue;
            if (motif.graph.induced(mask).connected()) ah.cliques.push_back(mask);
        }
        for (int i = 0; i < int(ah.cliques.size()); ++i)
            for (int j = i + 1; j < int(ah.cliques.size()); ++j)
                if (ah.cliques[i] & ah.cliques[j])
                    ah.links.push_back({i, j, std::uint8_t(ah.cliques[i] & ah.cliques[j])});
        plan.adhoc_sets.push_back(std::move(ah));
    }
    return plan;
}

namespace detail {

/// Intermediate product over node subsets of the target motif.
struct SubsetFormula {
    std::map<std::uint8_t, int> factors;  // mask -> exponent (sign = num/den)

    void add(std::uint8_t mask, int e) {
        if (!mask || !e) return;
        auto [it, fresh] = factors.insert({mask, e});
        if (!fresh && (it->second += e) == 0) factors.erase(it);
    }
};

/// Chordal/forest decomposition of the node set covered by the clique set:
/// cliques in the numerator, link separators in the denominator. Factors of
/// diameter above `dmax` (possible after triangulation) are expanded
/// recursively; disconnected subsets factor over their components, which is
/// the population-level reading of an absent separator constraint.
inline void expand_subset(const Motif& host, std::uint8_t mask, int exponent, int dmax,
                          SubsetFormula& out, int depth) {
    if (!mask) return;
    SmallGraph sub = host.graph.induced(mask);
    if (!sub.connected()) {
        // split into connected components
        std::uint8_t rest = mask;
        while (rest) {
            int seed = std::countr_zero(rest);
            std::uint8_t comp = std::uint8_t(1u << seed), frontier = comp;
            while (frontier) {
                std::uint8_t next = 0;
                for (int i = 0; i < host.order(); ++i)
                    if ((frontier >> i) & 1u) next |= host.graph.adj[i];
                next &= std::uint8_t(rest & ~comp);
                comp |= next;
                frontier = next;
            }
            expand_subset(host, comp, exponent, dmax, out, depth);
            rest &= std::uint8_t(~comp);
        }
        return;
    }
    int diam = sub.diameter();
    if (diam <= dmax || std::popcount(mask) <= 2 || depth >= host.order()) {
        out.add(mask, exponent);
        return;
    }
    // recurse: decompose this factor at its own distance diam-1
    int d = diam - 1;
    SmallGraph power = power_graph(sub, d);
    SmallGraph imap = is_chordal(power) ? power : minimal_triangulation(power);
    CliqueSet cs = junction_graph(imap, 1);
    std::array<int, 8> nodes{};
    int mm = 0;
    for (int i = 0; i < host.order(); ++i)
        if ((mask >> i) & 1u) nodes[mm++] = i;
    auto lift = [&](std::uint8_t local) {
        std::uint8_t g = 0;
        for (int b = 0; b < mm; ++b)
            if ((local >> b) & 1u) g |= std::uint8_t(1u << nodes[b]);
        return g;
    };
    for (auto c : cs.cliques) expand_subset(host, lift(c), exponent, dmax, out, depth + 1);
    for (const auto& l : cs.links) expand_subset(host, lift(l.sep), -exponent, dmax, out, depth + 1);
}

inline ClosureFormula finalize(const Motif& target, const SubsetFormula& sf,
                               bool with_gamma) {
    const int m = target.order();
    std::map<std::uint8_t, int> num_masks, den_masks;
    for (const auto& [mask, e] : sf.factors)
        (e > 0 ? num_masks[mask] : den_masks[mask]) = std::abs(e);
    ClosureFormula f;
    f.target = motif_key(target);
    f.gamma = with_gamma ? gamma_exponents(num_masks, den_masks, m) : std::vector<int>(m, 0);
    f.position_net.assign(m, 0);
    for (int p = 0; p < m; ++p) {
        int net = f.gamma[p];
        for (const auto& [mask, e] : sf.factors)
            if ((mask >> p) & 1u) net += e;
        f.position_net[p] = net;
    }
    auto to_class = [&](std::uint8_t mask) {
        SmallGraph g = target.graph.induced(mask);
        std::vector<int> lab;
        for (int i = 0; i < m; ++i)
            if ((mask >> i) & 1u) lab.push_back(target.labels[i]);
        return motif_key(Motif(g, lab));
    };
    for (const auto& [mask, e] : sf.factors) {
        if (e > 0) f.num[to_class(mask)] += e;
        else f.den[to_class(mask)] += -e;
    }
    return f;
}

}  // namespace detail

/// Junction-forest factorisation: cliques over link separators, no gamma.
inline ClosureFormula chordal_closure(const Motif& motif, const CliqueSet& cs, int dmax) {
    if (!cs.is_forest()) throw std::invalid_argument("chordal_closure: clique set is not a forest");
    detail::SubsetFormula sf;
    for (auto c : cs.cliques) detail::expand_subset(motif, c, 1, dmax, sf, 0);
    for (const auto& l : cs.links) detail::expand_subset(motif, l.sep, -1, dmax, sf, 0);
    ClosureFormula f = detail::finalize(motif, sf, false);
    for (int p = 0; p < motif.order(); ++p)
        if (f.position_net[p] != 1)
            throw std::logic_error("chordal_closure: consistency broken");
    return f;
}

/// Ad-hoc factorisation (no chain rule): cliques over all pairwise connected
/// intersections, with per-position gamma exponents restoring consistency
/// with the MF1 product. Disconnected intersections carry no constraint at
/// population level and are dropped.
inline ClosureFormula adhoc_closure(const Motif& motif, const CliqueSet& cs) {
    detail::SubsetFormula sf;
    for (auto c : cs.cliques) sf.add(c, 1);
    for (std::size_t i = 0; i < cs.cliques.size(); ++i)
        for (std::size_t j = i + 1; j < cs.cliques.size(); ++j) {
            std::uint8_t inter = cs.cliques[i] & cs.cliques[j];
            if (inter && motif.graph.induced(inter).connected()) sf.add(inter, -1);
        }
    return detail::finalize(motif, sf, true);
}

enum class ClosureRoute { Auto, Chordal, Adhoc };

/// All alternative closure formulas for one motif under the chosen route;
/// the caller averages their evaluated values.
inline std::vector<ClosureFormula> closure_formulas(const Motif& motif, ClosureRoute route,
                                                    std::optional<int> d_opt = {}) {
    DecompositionPlan plan = decomposition_plan(motif, d_opt);
    std::vector<ClosureFormula> out;
    auto push_unique = [&out](ClosureFormula f) {
        for (const auto& g : out)
            if (g == f) return;
        out.push_back(std::move(f));
    };
    if (plan.chordal) {
        for (const auto& cs : plan.chordal_sets)
            push_unique(chordal_closure(motif, cs, plan.d));
        return out;
    }
    switch (route) {
        case ClosureRoute::Chordal:
            for (const auto& cs : plan.triangulated_sets)
                push_unique(chordal_closure(motif, cs, plan.d));
            break;
        case ClosureRoute::Adhoc:
        case ClosureRoute::Auto:
            for (const auto& cs : plan.adhoc_sets) push_unique(adhoc_closure(motif, cs));
            break;
    }
    return out;
}

/// Rewrite a normalized-count formula over raw counts: the prefactor becomes
/// an explicit ratio of induced-subgraph census counts.
inline ClosureFormula denormalize(const ClosureFormula& f, const SubgraphCensus& census) {
    if (f.raw) return f;
    ClosureFormula out = f;
    out.raw = true;
    auto need = [&](GraphKey g) {
        if (!census.has(g))
            throw std::invalid_argument("denormalize: zero census count for a factor class");
    };
    GraphKey target_class = motif_graph_key(f.target);
    need(target_class);
    out.census_exponents[target_class] += 1;
    for (const auto& [mk, e] : f.num) {
        GraphKey g = motif_graph_key(mk);
        need(g);
        out.census_exponents[g] -= e;
    }
    for (const auto& [mk, e] : f.den) {
        GraphKey g = motif_graph_key(mk);
        need(g);
        out.census_exponents[g] += e;
    }
    Motif t = motif_from_key(f.target);
    GraphKey node_class = graph_key(SmallGraph(1));
    int gsum = 0;
    for (int gp : f.gamma) gsum += gp;
    if (gsum) {
        need(node_class);
        out.census_exponents[node_class] -= gsum;
    }
    for (auto it = out.census_exponents.begin(); it != out.census_exponents.end();)
        it = it->second == 0 ? out.census_exponents.erase(it) : std::next(it);
    return out;
}

/// Numeric prefactor of a raw formula.
inline Rational closure_prefactor(const ClosureFormula& f, const SubgraphCensus& census) {
    Rational v(1);
    for (const auto& [g, e] : f.census_exponents) {
        Rational c = census.at(g);
        for (int i = 0; i < std::abs(e); ++i) v = e > 0 ? v * c : v / c;
    }
    return v;
}

}  // namespace mf
