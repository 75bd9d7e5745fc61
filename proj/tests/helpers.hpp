#pragma once

#include <vector>

#include "momentforge/derivation.hpp"
#include "momentforge/motif.hpp"
#include "momentforge/network.hpp"

namespace mft {

using namespace mf;

constexpr int S = kSpeciesS;
constexpr int I = kSpeciesI;

inline Motif node(int a) { return Motif(SmallGraph(1), {a}); }
inline Motif edge(int a, int b) { return Motif(chain_graph(2), {a, b}); }
inline Motif chain(std::vector<int> labs) { return Motif(chain_graph(int(labs.size())), labs); }
inline Motif tri(int a, int b, int c) { return Motif(complete_graph(3), {a, b, c}); }
/// Star with the first label on the center.
inline Motif star(int center, int a, int b, int c) {
    return Motif(star_graph(4), {center, a, b, c});
}
/// 4-cycle labelled in cycle order.
inline Motif cyc4(int a, int b, int c, int d) {
    return Motif(SmallGraph(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}}), {a, b, c, d});
}
/// Paw: triangle on (t1, t2, attach) with a pendant on attach.
inline Motif paw(int pendant, int attach, int t1, int t2) {
    return Motif(SmallGraph(4, {{0, 1}, {1, 2}, {1, 3}, {2, 3}}), {pendant, attach, t1, t2});
}
/// Diamond: 4-cycle a-b-c-d plus the b-d diagonal.
inline Motif diamond(int a, int b, int c, int d) {
    return Motif(SmallGraph(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {1, 3}}), {a, b, c, d});
}
inline Motif k4(int a, int b, int c, int d) { return Motif(complete_graph(4), {a, b, c, d}); }

inline int sis_beta() { return r1_param(S, I, I); }
inline int sis_gamma() { return r0_param(I, S); }

/// Coefficient expression c_beta*beta + c_gamma*gamma.
inline RateExpr bg(Rational c_beta, Rational c_gamma) {
    RateExpr e;
    if (!c_beta.is_zero()) e.add(sis_beta(), c_beta);
    if (!c_gamma.is_zero()) e.add(sis_gamma(), c_gamma);
    return e;
}

inline SubgraphCensus lattice_census(int side, int kmax) {
    NetworkSpec spec;
    spec.kind = NetworkSpec::Kind::Lattice;
    spec.dimension = 2;
    spec.side = side;
    return census_exhaustive(generate(spec), kmax);
}

inline std::set<GraphKey> census_support(const SubgraphCensus& census) {
    std::set<GraphKey> filter;
    for (const auto& [g, c] : census.counts)
        if (!c.is_zero()) filter.insert(g);
    return filter;
}

inline Network random_connected_network(int n, double p_edge, Xoshiro256& rng) {
    for (;;) {
        Network net(n);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (rng.uniform() < p_edge) net.add_edge(i, j);
        bool connected = true;
        auto d = net.distances_from(0);
        for (int i = 0; i < n; ++i)
            if (d[i] < 0) connected = false;
        if (connected) return net;
    }
}

inline RateModel random_rate_model(Xoshiro256& rng, double scale = 2.0) {
    RateModel m(2);
    m.species = {"S", "I"};
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            if (a != b) m.r0[a][b] = scale * rng.uniform();
            for (int c = 0; c < 2; ++c)
                if (a != b) m.r1[a][b][c] = scale * rng.uniform();
        }
    return m;
}

}  // namespace mft
