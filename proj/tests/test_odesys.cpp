#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "momentforge/odesys.hpp"
#include "momentforge/oracle.hpp"

using namespace mf;
using namespace mft;

namespace {

/// MF2 on the square lattice (kappa = 4): pruned, [II] eliminated, closed.
ClosedSystem mf2_lattice(ClosureRoute route = ClosureRoute::Auto) {
    SubgraphCensus census = lattice_census(6, 3);
    auto filter = census_support(census);
    auto sys = prune_irrelevant(build_hierarchy(2, sis_model(), census, filter));
    auto rels = conservation_relations(2, 2, census, true, filter);
    auto red = eliminate(sys, rels, {motif_key(edge(I, I))});
    return close_system(red, rels, route);
}

/// MF1 (k=1) on the square lattice.
ClosedSystem mf1_lattice() {
    SubgraphCensus census = lattice_census(6, 2);
    auto filter = census_support(census);
    auto sys = prune_irrelevant(build_hierarchy(1, sis_model(), census, filter));
    auto rels = conservation_relations(1, 2, census, true, filter);
    return close_system(eliminate(sys, rels), rels);
}

/// MF2 heterogeneous (no stub relations), on an analytic ER census.
ClosedSystem mf2_er(double kappa) {
    NetworkSpec er;
    er.kind = NetworkSpec::Kind::ErdosRenyi;
    er.n = 1000000;
    er.kappa = kappa;
    SubgraphCensus census = census_analytic(er, 3);
    auto filter = census_support(census);
    auto sys = prune_irrelevant(build_hierarchy(2, sis_model(), census, filter));
    auto rels = conservation_relations(2, 2, census, false, filter);
    return close_system(eliminate(sys, rels), rels);
}

RateModel sis_rates(double beta, double gamma) { return sis_model(beta, gamma); }

}  // namespace

TEST_CASE("MF1 rhs equals beta kappa [[I]](1-[[I]]) - gamma [[I]]") {
    ClosedSystem mf1 = mf1_lattice();
    REQUIRE(mf1.dim() == 1);
    for (double u : {0.05, 0.3, 0.9}) {
        auto f = rhs(mf1, {u}, sis_rates(1.3, 0.7));
        CHECK(f[0] == Catch::Approx(1.3 * 4 * u * (1 - u) - 0.7 * u).epsilon(1e-12));
    }
    // absorbing all-susceptible state
    auto f0 = rhs(mf1, {0.0}, sis_rates(1.3, 0.7));
    CHECK(f0[0] == 0.0);
}

TEST_CASE("MF2 normalized system matches the printed matrix by direct substitution") {
    ClosedSystem mf2 = mf2_lattice();
    REQUIRE(mf2.dim() == 2);
    // variables [[I]], [[IS]]; closures [[SSI]] = (1-[[IS]]/(1-[[I]]))[[IS]],
    // [[ISI]] = [[IS]]^2/(1-[[I]])
    double u = 0.5, v = 0.25, beta = 1.0, gamma = 1.0, kappa = 4;
    std::vector<double> state{u, v};
    auto f = rhs(mf2, state, sis_rates(beta, gamma));
    double ssi = (1 - v / (1 - u)) * v;
    double isi = v * v / (1 - u);
    CHECK(f[0] == Catch::Approx(-gamma * u + kappa * beta * v).epsilon(1e-12));
    CHECK(f[1] == Catch::Approx(gamma * u + (-beta - 2 * gamma) * v +
                                beta * (kappa - 1) * ssi - beta * (kappa - 1) * isi)
                      .epsilon(1e-12));
}

TEST_CASE("integrate MF1 to the endemic state") {
    ClosedSystem mf1 = mf1_lattice();
    RateModel params = sis_rates(1.0, 1.0);  // beta/gamma = 1 > 1/4
    Trajectory traj = integrate(mf1, {0.01}, params, 60.0);
    double expect = 1 - 1.0 / 4.0;
    CHECK(std::abs(traj.states.back()[0] - expect) < 1e-6);

    // zero rates: constant trajectory
    RateModel zero(2);
    Trajectory flat = integrate(mf1, {0.37}, zero, 5.0);
    CHECK(flat.states.back()[0] == Catch::Approx(0.37));
}

TEST_CASE("integrate MF2 reaches the Newton fixed point") {
    ClosedSystem mf2 = mf2_lattice();
    RateModel params = sis_rates(1.0, 1.0);
    Trajectory traj = integrate(mf2, {0.2, 0.05}, params, 200.0);
    auto fps = steady_states(mf2, params);
    const FixedPoint* endemic = nullptr;
    for (const auto& fp : fps)
        if (fp.state[0] > 0.1) endemic = &fp;
    REQUIRE(endemic);
    CHECK(std::abs(traj.states.back()[0] - endemic->state[0]) < 1e-6);
    CHECK(std::abs(traj.states.back()[1] - endemic->state[1]) < 1e-6);
}

TEST_CASE("steady states: MF1 and MF2 against closed forms") {
    ClosedSystem mf1 = mf1_lattice();
    auto fps = steady_states(mf1, sis_rates(0.5, 1.0));
    REQUIRE(fps.size() == 2);
    bool trivial_found = false, endemic_found = false;
    for (const auto& fp : fps) {
        if (std::abs(fp.state[0]) < 1e-10) trivial_found = true;
        if (std::abs(fp.state[0] - 0.5) < 1e-9) endemic_found = true;
    }
    CHECK(trivial_found);
    CHECK(endemic_found);

    ClosedSystem mf2 = mf2_lattice();
    auto fps2 = steady_states(mf2, sis_rates(1.0, 1.0));
    double expect = 1 - 3.0 / 11.0;  // 8/11
    bool found = false;
    for (const auto& fp : fps2)
        if (std::abs(fp.state[0] - expect) < 1e-9) found = true;
    CHECK(found);
}

TEST_CASE("below threshold only the trivial state exists and is stable") {
    ClosedSystem mf2 = mf2_lattice();
    auto fps = steady_states(mf2, sis_rates(0.2, 1.0));  // beta/gamma < 1/3
    REQUIRE(!fps.empty());
    for (const auto& fp : fps) {
        bool admissible = true;
        for (double v : fp.state)
            if (v < -1e-9 || v > 1 + 1e-9) admissible = false;
        if (!admissible) continue;
        double norm = 0;
        for (double v : fp.state) norm = std::max(norm, std::abs(v));
        CHECK(norm < 1e-8);
        CHECK(fp.stable);
    }
}

TEST_CASE("analytic references and gamma-correctness") {
    // MF2-hom at kappa=4, beta=gamma=1: [[I]]* = 8/11
    AnalyticReference hom = analytic_mf2_hom(1.0, 1.0, 4);
    CHECK(hom.infected == Catch::Approx(8.0 / 11.0).epsilon(1e-14));
    CHECK(hom.is_links == Catch::Approx(2.0 / 11.0).epsilon(1e-14));
    CHECK(hom.c_si == Catch::Approx(11.0 / 12.0).epsilon(1e-14));
    CHECK(hom.c_ii == Catch::Approx(33.0 / 32.0).epsilon(1e-14));
    CHECK(hom.c_ss == Catch::Approx(11.0 / 9.0).epsilon(1e-14));

    // printed [[IS]]* formula is the gamma = 1 reading
    double beta = 1.0, kappa = 4;
    double printed_is = (beta * (kappa - 1) - 1) / (beta * (beta * kappa * (kappa - 1) - 1));
    CHECK(hom.is_links == Catch::Approx(printed_is).epsilon(1e-14));

    // at the threshold the nontrivial branch vanishes
    AnalyticReference at_thr = analytic_mf2_hom(1.0 / 3.0, 1.0, 4);
    CHECK(std::abs(at_thr.infected) < 1e-14);
}

TEST_CASE("Newton fixed points match the analytic references to 1e-10") {
    for (double r : {0.5, 1.0, 2.0}) {
        ClosedSystem mf2 = mf2_lattice();
        auto fps = steady_states(mf2, sis_rates(r, 1.0));
        AnalyticReference ref = analytic_mf2_hom(r, 1.0, 4);
        if (ref.infected > 1e-9) {
            bool found = false;
            for (const auto& fp : fps)
                if (std::abs(fp.state[0] - ref.infected) < 1e-10 &&
                    std::abs(fp.state[1] - ref.is_links) < 1e-10)
                    found = true;
            CHECK(found);
        }
    }
    // heterogeneous MF2 on ER, kappa = 4
    ClosedSystem het = mf2_er(4);
    REQUIRE(het.dim() == 3);
    auto fps = steady_states(het, sis_rates(1.0, 1.0));
    AnalyticReference ref = analytic_mf2_het(1.0, 1.0, 4);
    CHECK(ref.infected == Catch::Approx((5.0 - std::sqrt(13.0)) / 2.0).epsilon(1e-14));
    bool found = false;
    for (const auto& fp : fps) {
        double u = het.value_of(motif_key(node(I)), fp.state);
        double v = het.value_of(motif_key(edge(I, S)), fp.state);
        double w = het.value_of(motif_key(edge(I, I)), fp.state);
        if (std::abs(u - ref.infected) < 1e-10 && std::abs(v - ref.is_links) < 1e-10 &&
            std::abs(w - ref.ii_links) < 1e-10)
            found = true;
    }
    CHECK(found);
}

TEST_CASE("thresholds recovered by the scan") {
    ClosedSystem mf1 = mf1_lattice();
    BifurcationResult r1 = bifurcation_scan(mf1, 1.0, 0.05, 1.0, 4);
    CHECK(std::abs(r1.threshold - 0.25) < 1e-8);

    ClosedSystem mf2 = mf2_lattice();
    BifurcationResult r2 = bifurcation_scan(mf2, 1.0, 0.05, 1.0, 4);
    CHECK(std::abs(r2.threshold - 1.0 / 3.0) < 1e-8);

    ClosedSystem het = mf2_er(4);
    BifurcationResult r3 = bifurcation_scan(het, 1.0, 0.05, 1.0, 4);
    CHECK(std::abs(r3.threshold - 0.25) < 1e-8);
}

TEST_CASE("correlations") {
    ClosedSystem mf2 = mf2_lattice();
    // independent state: C = 1
    double u = 0.3;
    std::vector<double> indep{u, u * (1 - u)};
    CHECK(correlation(mf2, indep, S, I) == Catch::Approx(1.0).epsilon(1e-12));
    // MF2 endemic state matches the printed steady-state correlations
    AnalyticReference ref = analytic_mf2_hom(1.0, 1.0, 4);
    std::vector<double> endemic{ref.infected, ref.is_links};
    CHECK(correlation(mf2, endemic, I, I) == Catch::Approx(ref.c_ii).epsilon(1e-12));
    CHECK(correlation(mf2, endemic, S, I) == Catch::Approx(ref.c_si).epsilon(1e-12));
    CHECK(correlation(mf2, endemic, S, S) == Catch::Approx(ref.c_ss).epsilon(1e-12));
    CHECK_THROWS_AS(correlation(mf2, {0.0, 0.0}, I, I), std::domain_error);

    // C_II diverges approaching the MF2 threshold from above
    double c_near = analytic_mf2_hom(1.0 / 3.0 + 1e-6, 1.0, 4).c_ii;
    double c_far = analytic_mf2_hom(0.6, 1.0, 4).c_ii;
    CHECK(c_near > 100 * c_far);
}

TEST_CASE("distance correlations") {
    ClosedSystem mf2 = mf2_lattice();
    AnalyticReference ref = analytic_mf2_hom(1.0, 1.0, 4);
    std::vector<double> endemic{ref.infected, ref.is_links};
    CHECK(mf_distance_correlation(mf2, endemic, I, I, 1) ==
          Catch::Approx(correlation(mf2, endemic, I, I)).epsilon(1e-12));
    // independence: 1 at every distance
    std::vector<double> indep{0.3, 0.3 * 0.7};
    for (int d = 1; d <= 4; ++d)
        CHECK(mf_distance_correlation(mf2, indep, I, I, d) == Catch::Approx(1.0).epsilon(1e-10));
    // monotone decay toward 1 on the endemic branch near criticality
    ClosedSystem mf2b = mf2_lattice();
    AnalyticReference near = analytic_mf2_hom(0.5602, 1.0, 4);
    std::vector<double> st{near.infected, near.is_links};
    double prev = 1e18;
    for (int d = 1; d <= 5; ++d) {
        double c = mf_distance_correlation(mf2b, st, I, I, d);
        CHECK(c > 1.0);
        CHECK(c < prev);
        prev = c;
    }
}

TEST_CASE("jacobian: forward and centered estimates agree") {
    ClosedSystem mf2 = mf2_lattice();
    RateModel params = sis_rates(0.9, 1.1);
    Xoshiro256 rng(5);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> x{0.1 + 0.6 * rng.uniform(), 0.05 + 0.1 * rng.uniform()};
        Eigen::MatrixXd fwd = fd_jacobian(mf2, x, params, 1e-7);
        Eigen::MatrixXd ctr(2, 2);
        double h = 1e-5;
        for (int j = 0; j < 2; ++j) {
            auto xp = x, xm = x;
            xp[j] += h;
            xm[j] -= h;
            auto fp = rhs(mf2, xp, params), fm = rhs(mf2, xm, params);
            for (int i = 0; i < 2; ++i) ctr(i, j) = (fp[i] - fm[i]) / (2 * h);
        }
        CHECK((fwd - ctr).cwiseAbs().maxCoeff() < 1e-5);
    }
}

TEST_CASE("transcritical structure: trivial-state eigenvalue changes sign at the threshold") {
    ClosedSystem mf2 = mf2_lattice();
    auto lead = [&](double r) {
        std::vector<double> zero(mf2.dim(), 0.0);
        Eigen::MatrixXd J = fd_jacobian(mf2, zero, sis_rates(r, 1.0));
        Eigen::EigenSolver<Eigen::MatrixXd> es(J);
        double m = -1e300;
        for (int i = 0; i < J.rows(); ++i) m = std::max(m, es.eigenvalues()(i).real());
        return m;
    };
    CHECK(lead(1.0 / 3.0 - 0.01) < 0);
    CHECK(lead(1.0 / 3.0 + 0.01) > 0);
}

TEST_CASE("normalization stays conserved when integrating the unclosed hierarchy") {
    // feed arbitrary boundary values into the raw normalized hierarchy; the
    // class sums must stay exactly conserved (row sums vanish)
    Xoshiro256 rng(77);
    Network net = random_connected_network(6, 0.5, rng);
    SubgraphCensus census = census_exhaustive(net, 3);
    auto sys = build_hierarchy(2, sis_model(1.2, 0.8), census, census_support(census));
    auto rels = conservation_relations(2, 2, census, false, census_support(census));
    ClosedSystem cs = close_system(sys, rels);  // closures unused; we drive boundary by hand
    // normalized RHS with boundary values overridden by an arbitrary signal
    auto rhs_driven = [&](const std::vector<double>& x, double t) {
        std::vector<double> out(cs.dim(), 0.0);
        for (std::size_t i = 0; i < cs.vars.size(); ++i) {
            double v = 0;
            for (const auto& [col, expr] : cs.rows.at(cs.vars[i])) {
                double xv;
                if (int(col >> 60) == 3)
                    xv = 0.25 + 0.2 * std::sin(3 * t + double(col % 7));
                else
                    xv = x[cs.var_index(col)];
                v += expr.eval(cs.model) * xv;
            }
            out[i] = v;
        }
        return out;
    };
    // start from a valid normalized assignment (independence products)
    std::vector<double> x = independence_lift(cs, 0.3);
    // class sums at t = 0
    auto class_sums = [&](const std::vector<double>& xv) {
        std::map<GraphKey, double> sums;
        for (std::size_t i = 0; i < cs.vars.size(); ++i) {
            Motif mo = motif_from_key(cs.vars[i]);
            double mult = 1;  // labellings per class = n^m orbit; count raw labellings
            long labellings = 0;
            std::vector<int> lab(mo.order(), 0);
            while (true) {
                if (motif_key(Motif(mo.graph, lab)) == cs.vars[i]) ++labellings;
                int pos = mo.order() - 1;
                while (pos >= 0 && lab[pos] == 1) lab[pos--] = 0;
                if (pos < 0) break;
                ++lab[pos];
            }
            mult = double(labellings);
            sums[motif_graph_key(cs.vars[i])] += mult * xv[i];
        }
        return sums;
    };
    auto init_sums = class_sums(x);
    for (auto& [g, s] : init_sums) CHECK(s == Catch::Approx(1.0).epsilon(1e-12));
    // RK4 with small steps
    double t = 0, h = 1e-3;
    for (int step = 0; step < 2000; ++step) {
        auto k1 = rhs_driven(x, t);
        std::vector<double> x2(x), x3(x), x4(x);
        for (std::size_t i = 0; i < x.size(); ++i) x2[i] += 0.5 * h * k1[i];
        auto k2 = rhs_driven(x2, t + 0.5 * h);
        for (std::size_t i = 0; i < x.size(); ++i) x3[i] += 0.5 * h * k2[i];
        auto k3 = rhs_driven(x3, t + 0.5 * h);
        for (std::size_t i = 0; i < x.size(); ++i) x4[i] += h * k3[i];
        auto k4 = rhs_driven(x4, t + h);
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
        t += h;
    }
    for (auto& [g, s] : class_sums(x)) CHECK(std::abs(s - 1.0) < 1e-9);
}
