#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "momentforge/network.hpp"

using namespace mf;
using namespace mft;

TEST_CASE("lattice generation") {
    NetworkSpec spec;
    spec.kind = NetworkSpec::Kind::Lattice;
    spec.dimension = 2;
    spec.side = 4;
    Network net = generate(spec);
    CHECK(net.n_nodes == 16);
    for (int i = 0; i < net.n_nodes; ++i) CHECK(net.degree(i) == 4);

    spec.dimension = 3;
    spec.side = 3;
    Network cubic = generate(spec);
    CHECK(cubic.n_nodes == 27);
    for (int i = 0; i < cubic.n_nodes; ++i) CHECK(cubic.degree(i) == 6);

    spec.periodic = true;
    spec.side = 2;
    CHECK_THROWS_AS(generate(spec), std::invalid_argument);
}

TEST_CASE("random regular generation") {
    NetworkSpec spec;
    spec.kind = NetworkSpec::Kind::RandomRegular;
    spec.n = 100;
    spec.kappa = 4;
    spec.seed = 5;
    Network net = generate(spec);
    for (int i = 0; i < net.n_nodes; ++i) CHECK(net.degree(i) == 4);
    // deterministic from the seed
    Network net2 = generate(spec);
    for (int i = 0; i < net.n_nodes; ++i) CHECK(net.adj[i] == net2.adj[i]);

    spec.n = 101;
    spec.kappa = 3;  // odd N*kappa
    CHECK_THROWS_AS(generate(spec), std::invalid_argument);
}

TEST_CASE("Erdos-Renyi generation: mean degree within 3 sigma") {
    NetworkSpec spec;
    spec.kind = NetworkSpec::Kind::ErdosRenyi;
    spec.n = 1000;
    spec.kappa = 6;
    spec.seed = 17;
    Network net = generate(spec);
    double mean = net.mean_degree();
    // total edge count ~ Binomial(N(N-1)/2, kappa/(N-1))
    double m_expect = 0.5 * 1000 * 6;
    double sigma = std::sqrt(m_expect * (1 - 6.0 / 999));
    CHECK(std::abs(net.edge_count() - m_expect) < 3 * sigma);
    CHECK(mean > 5.0);
    CHECK(mean < 7.0);
}

TEST_CASE("exhaustive census on the square lattice") {
    SubgraphCensus census = lattice_census(6, 4);
    const long N = 36;
    CHECK(census.at(graph_key(SmallGraph(1))) == Rational(N));
    CHECK(census.at(graph_key(chain_graph(2))) == Rational(4 * N));
    CHECK(census.at(graph_key(canonical_graph(chain_graph(3)).graph)) == Rational(12 * N));
    CHECK(census.at(graph_key(canonical_graph(complete_graph(3)).graph)) == Rational(0));
    CHECK(census.at(graph_key(canonical_graph(chain_graph(4)).graph)) == Rational(28 * N));
    CHECK(census.at(graph_key(canonical_graph(star_graph(4)).graph)) == Rational(24 * N));
    CHECK(census.at(graph_key(canonical_graph(cycle_graph(4)).graph)) == Rational(8 * N));
}

TEST_CASE("4-cycle census on the 3x3 periodic lattice equals brute force") {
    NetworkSpec spec;
    spec.kind = NetworkSpec::Kind::Lattice;
    spec.side = 3;
    Network net = generate(spec);
    SubgraphCensus census = census_exhaustive(net, 4);
    // brute force over ordered 4-tuples
    Motif c4 = cyc4(S, S, S, S);
    std::vector<int> all_s(net.n_nodes, S);
    long brute = count_motif(net, all_s, c4);
    CHECK(census.at(motif_graph_key(motif_key(c4))) == Rational(brute));
}

TEST_CASE("analytic census matches exhaustive on lattices") {
    NetworkSpec spec;
    spec.kind = NetworkSpec::Kind::Lattice;
    spec.dimension = 2;
    spec.side = 6;
    SubgraphCensus analytic = census_analytic(spec, 3);
    SubgraphCensus exhaustive = census_exhaustive(generate(spec), 3);
    for (const auto& [g, c] : analytic.counts) CHECK(exhaustive.at(g) == c);

    spec.dimension = 3;
    spec.side = 4;
    SubgraphCensus a3 = census_analytic(spec, 3);
    SubgraphCensus e3 = census_exhaustive(generate(spec), 3);
    for (const auto& [g, c] : a3.counts) CHECK(e3.at(g) == c);
}

TEST_CASE("analytic census on ER within sampling error") {
    NetworkSpec spec;
    spec.kind = NetworkSpec::Kind::ErdosRenyi;
    spec.n = 10000;
    spec.kappa = 6;
    spec.seed = 23;
    SubgraphCensus analytic = census_analytic(spec, 3);
    SubgraphCensus exhaustive = census_exhaustive(generate(spec), 3);
    GraphKey chain3 = graph_key(canonical_graph(chain_graph(3)).graph);
    double a = analytic.at(chain3).to_double();
    double e = exhaustive.at(chain3).to_double();
    CHECK(std::abs(a - e) / e < 0.05);
    GraphKey tri_k = graph_key(canonical_graph(complete_graph(3)).graph);
    CHECK(exhaustive.at(tri_k).to_double() < 0.01 * e);  // triangles negligible

    // phi = 0 means no triangles in the analytic census
    CHECK_FALSE(analytic.has(tri_k));
}
