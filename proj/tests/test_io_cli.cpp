#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "momentforge/json_io.hpp"

using namespace mf;
using namespace mft;

namespace {

ClosedSystem sample_closed_system() {
    SubgraphCensus census = lattice_census(6, 3);
    auto filter = census_support(census);
    auto sys = prune_irrelevant(build_hierarchy(2, sis_model(), census, filter));
    auto rels = conservation_relations(2, 2, census, true, filter);
    return close_system(eliminate(sys, rels, {motif_key(edge(I, I))}), rels);
}

}  // namespace

TEST_CASE("motif and rate-param ids round-trip") {
    for (const Motif& mo : {node(I), edge(S, I), chain({S, I, I}), tri(S, S, I),
                            star(S, I, I, I), cyc4(S, I, S, I), diamond(S, I, S, S)}) {
        MotifKey k = motif_key(mo);
        CHECK(parse_motif_id(motif_id(k)) == k);
    }
    for (int p : {r0_param(1, 0), r1_param(0, 1, 1), r1_param(1, 0, 0)})
        CHECK(parse_rate_param_id(rate_param_id(p)) == p);
}

TEST_CASE("model JSON round-trip") {
    RateModel m = sis_model(1.5, 0.7);
    m.param_names[sis_beta()] = "beta";
    m.param_names[sis_gamma()] = "gamma";
    RateModel back = load_model(model_json(m));
    CHECK(back.r0 == m.r0);
    CHECK(back.r1 == m.r1);
    CHECK(back.species == m.species);
    CHECK(back.param_names == m.param_names);
}

TEST_CASE("moment system JSON export is stable under re-ingestion") {
    SubgraphCensus census = lattice_census(6, 3);
    auto filter = census_support(census);
    auto sys = prune_irrelevant(build_hierarchy(2, sis_model(), census, filter));
    auto rels = conservation_relations(2, 2, census, true, filter);
    auto red = eliminate(sys, rels, {motif_key(edge(I, I))});
    std::string dump1 = system_json(red).dump(2);
    MomentSystem back = parse_system_json(Json::parse(dump1));
    std::string dump2 = system_json(back).dump(2);
    CHECK(dump1 == dump2);  // byte-stable round trip
    CHECK(back.vars == red.vars);
    for (MotifKey v : red.vars) {
        REQUIRE(back.rows.count(v));
        CHECK(back.rows.at(v) == red.rows.at(v));
    }
}

TEST_CASE("closed system JSON round-trip preserves RHS evaluations") {
    ClosedSystem cs = sample_closed_system();
    std::string dump1 = closed_system_json(cs).dump(2);
    ClosedSystem back = parse_closed_system_json(Json::parse(dump1));
    std::string dump2 = closed_system_json(back).dump(2);
    CHECK(dump1 == dump2);
    RateModel params = sis_model(0.9, 1.2);
    Xoshiro256 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> state{0.05 + 0.9 * rng.uniform(), 0.02 + 0.2 * rng.uniform()};
        auto f1 = rhs(cs, state, params);
        auto f2 = rhs(back, state, params);
        REQUIRE(f1.size() == f2.size());
        for (std::size_t i = 0; i < f1.size(); ++i) CHECK(f1[i] == f2[i]);
    }
}

TEST_CASE("network spec JSON") {
    Json j;
    j["kind"] = "lattice";
    j["side"] = 5;
    NetworkSpec spec = load_network_spec(j);
    CHECK(spec.kind == NetworkSpec::Kind::Lattice);
    CHECK(spec.side == 5);
    CHECK(spec.periodic);

    Json er;
    er["kind"] = "erdos_renyi";
    er["n"] = 100;
    er["kappa"] = 4.0;
    CHECK(load_network_spec(er).kind == NetworkSpec::Kind::ErdosRenyi);

    Json bad;
    bad["kind"] = "random_regular";
    bad["n"] = 9;
    bad["kappa"] = 3.0;  // odd N*kappa
    CHECK_THROWS_AS(load_network_spec(bad), std::invalid_argument);

    Json expl;
    expl["kind"] = "explicit";
    expl["edges"] = Json::array({Json::array({0, 1}), Json::array({1, 2})});
    Network net = generate(load_network_spec(expl));
    CHECK(net.n_nodes == 3);
    CHECK(net.edge_count() == 2);
}
