// momentforge: derive, close, solve and simulate moment-closure models of
// nearest-neighbour Markov dynamics on networks.

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "momentforge/json_io.hpp"
#include "momentforge/odesys.hpp"
#include "momentforge/oracle.hpp"
#include "momentforge/sim.hpp"

namespace fs = std::filesystem;
using namespace mf;

namespace {

struct CommonOpts {
    std::string model_path, network_path, out_dir = ".";
    int order = 2;
    std::string route = "auto";
    std::uint64_t seed = 1;
};

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}

ClosureRoute parse_route(const std::string& r) {
    if (r == "auto") return ClosureRoute::Auto;
    if (r == "chordal") return ClosureRoute::Chordal;
    if (r == "adhoc") return ClosureRoute::Adhoc;
    throw CLI::ValidationError("--route must be auto|chordal|adhoc");
}

struct Pipeline {
    RateModel model;
    NetworkSpec spec;
    Network net{0};
    SubgraphCensus census;
    std::set<GraphKey> filter;
    bool homogeneous = false;
    MomentSystem system;  // pruned + eliminated hierarchy
    std::vector<ConservationRelation> relations;
};

Pipeline build_pipeline(const CommonOpts& opt, bool do_prune = true, bool do_eliminate = true) {
    Pipeline p;
    p.model = load_model(read_json_file(opt.model_path));
    p.spec = load_network_spec(read_json_file(opt.network_path));
    p.spec.seed = opt.seed;
    p.net = generate(p.spec);
    p.census = census_exhaustive(p.net, std::min(opt.order + 1, max_order()));
    for (const auto& [g, c] : p.census.counts)
        if (!c.is_zero()) p.filter.insert(g);
    p.homogeneous = true;
    for (int i = 1; i < p.net.n_nodes; ++i)
        if (p.net.degree(i) != p.net.degree(0)) p.homogeneous = false;
    p.relations =
        conservation_relations(opt.order, p.model.n, p.census, p.homogeneous, p.filter);
    MomentSystem sys = build_hierarchy(opt.order, p.model, p.census, p.filter);
    if (do_prune) sys = prune_irrelevant(sys);
    if (do_eliminate) sys = eliminate(sys, p.relations);
    p.system = std::move(sys);
    return p;
}

Json manifest_base(const CommonOpts& opt, const std::string& cmd) {
    Json m;
    m["command"] = cmd;
    m["model"] = opt.model_path;
    m["network"] = opt.network_path;
    m["order"] = opt.order;
    m["route"] = opt.route;
    m["seed"] = opt.seed;
    m["max_order"] = max_order();
    return m;
}

void write_manifest(const CommonOpts& opt, Json manifest) {
    write_file((fs::path(opt.out_dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

void add_common(CLI::App* cmd, CommonOpts& opt, bool network_required = true) {
    cmd->add_option("--model", opt.model_path, "rate model JSON")->required();
    cmd->add_option("--network", opt.network_path, "network spec JSON")->required(network_required);
    cmd->add_option("--order,-k", opt.order, "truncation order k");
    cmd->add_option("--route", opt.route, "closure route: auto|chordal|adhoc");
    cmd->add_option("--seed", opt.seed, "random seed");
    cmd->add_option("--out,-o", opt.out_dir, "output directory");
}

std::vector<int> initial_states(const Network& net, double infected_frac, std::uint64_t seed) {
    Xoshiro256 rng = Xoshiro256::stream(seed, 0x696e69ull);
    std::vector<int> x(net.n_nodes, kSpeciesS);
    long want = std::lround(infected_frac * net.n_nodes);
    std::vector<int> perm(net.n_nodes);
    for (int i = 0; i < net.n_nodes; ++i) perm[i] = i;
    for (int i = net.n_nodes - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    for (long k = 0; k < want; ++k) x[perm[k]] = kSpeciesI;
    return x;
}

int run_derive(const CommonOpts& opt, bool no_prune, bool no_eliminate) {
    Pipeline p = build_pipeline(opt, !no_prune, !no_eliminate);
    fs::create_directories(opt.out_dir);
    write_file((fs::path(opt.out_dir) / "equations.json").string(),
               system_json(p.system).dump(2) + "\n");
    write_file((fs::path(opt.out_dir) / "equations.txt").string(), system_text(p.system));
    Json m = manifest_base(opt, "derive");
    m["variables"] = p.system.vars.size();
    m["boundary"] = p.system.boundary.size();
    m["pruned"] = p.system.pruned.size();
    m["eliminated"] = p.system.eliminated.size();
    m["outputs"] = Json::array({"equations.json", "equations.txt"});
    write_manifest(opt, std::move(m));
    return 0;
}

int run_close(const CommonOpts& opt) {
    Pipeline p = build_pipeline(opt);
    ClosedSystem cs = close_system(p.system, p.relations, parse_route(opt.route));
    fs::create_directories(opt.out_dir);
    write_file((fs::path(opt.out_dir) / "closed.json").string(),
               closed_system_json(cs).dump(2) + "\n");
    Json m = manifest_base(opt, "close");
    m["variables"] = cs.vars.size();
    m["closures"] = cs.boundary.size();
    m["outputs"] = Json::array({"closed.json"});
    write_manifest(opt, std::move(m));
    return 0;
}

int run_export(const std::string& in_path, const std::string& out_dir) {
    Json j = read_json_file(in_path);
    fs::create_directories(out_dir);
    if (j.contains("closures")) {
        ClosedSystem cs = parse_closed_system_json(j);
        write_file((fs::path(out_dir) / "closed.json").string(),
                   closed_system_json(cs).dump(2) + "\n");
    } else {
        MomentSystem sys = parse_system_json(j);
        write_file((fs::path(out_dir) / "equations.json").string(),
                   system_json(sys).dump(2) + "\n");
        write_file((fs::path(out_dir) / "equations.txt").string(), system_text(sys));
    }
    return 0;
}

int run_bifurcate(const CommonOpts& opt, double gamma, double r_lo, double r_hi, int steps) {
    Pipeline p = build_pipeline(opt);
    ClosedSystem cs = close_system(p.system, p.relations, parse_route(opt.route));
    BifurcationResult res = bifurcation_scan(cs, gamma, r_lo, r_hi, steps);
    fs::create_directories(opt.out_dir);
    std::ostringstream csv;
    csv << "beta_over_gamma,branch_id,stable";
    for (MotifKey v : cs.vars) csv << "," << motif_name(motif_from_key(v), cs.model.species);
    csv << ",C_II,C_SI\n";
    for (const auto& bp : res.points) {
        csv << fmt(bp.beta_over_gamma) << "," << bp.branch_id << "," << (bp.stable ? 1 : 0);
        for (double v : bp.state) csv << "," << fmt(v);
        csv << "," << fmt(bp.c_ii) << "," << fmt(bp.c_si) << "\n";
    }
    write_file((fs::path(opt.out_dir) / "branches.csv").string(), csv.str());
    Json m = manifest_base(opt, "bifurcate");
    m["gamma"] = gamma;
    m["range"] = Json::array({r_lo, r_hi});
    m["steps"] = steps;
    m["threshold"] = res.threshold;
    m["outputs"] = Json::array({"branches.csv"});
    write_manifest(opt, std::move(m));
    std::cout << "threshold beta/gamma = " << fmt(res.threshold) << "\n";
    return 0;
}

int run_simulate(const CommonOpts& opt, const std::string& mode, double beta, double gamma,
                 double t_end, double sample_dt, double infected, double window, int dmax) {
    Json model_j = read_json_file(opt.model_path);
    RateModel model = load_model(model_j);
    NetworkSpec spec = load_network_spec(read_json_file(opt.network_path));
    spec.seed = opt.seed;
    Network net = generate(spec);
    fs::create_directories(opt.out_dir);
    Json m = manifest_base(opt, "simulate");
    m["mode"] = mode;
    m["gamma"] = gamma;
    if (mode == "gillespie") {
        if (model.n == 2) {
            model.r0[kSpeciesI][kSpeciesS] = gamma;
            model.r1[kSpeciesS][kSpeciesI][kSpeciesI] = beta;
        }
        std::vector<Motif> obs;
        for (int s = 0; s < model.n; ++s) obs.push_back(Motif(SmallGraph(1), {s}));
        for (int a = 0; a < model.n; ++a)
            for (int b = a; b < model.n; ++b) obs.push_back(Motif(chain_graph(2), {a, b}));
        SimTrajectory traj = gillespie(net, model, initial_states(net, infected, opt.seed), t_end,
                                       sample_dt, opt.seed, obs);
        std::ostringstream csv;
        csv << "t";
        for (const Motif& mo : obs) csv << "," << motif_name(mo, model.species);
        csv << "\n";
        for (std::size_t i = 0; i < traj.times.size(); ++i) {
            csv << fmt(traj.times[i]);
            for (double v : traj.counts[i]) csv << "," << fmt(v);
            csv << "\n";
        }
        write_file((fs::path(opt.out_dir) / "trajectory.csv").string(), csv.str());
        m["beta"] = beta;
        m["absorbed"] = traj.absorbed;
        m["outputs"] = Json::array({"trajectory.csv"});
    } else if (mode == "controlled") {
        long fixed = std::lround(infected * net.n_nodes);
        EffectiveRateEstimate est =
            controlled_sis(net, gamma, fixed, window, opt.seed, -1, 10, dmax > 0 ? 32 : 0);
        Json out;
        out["fixed_infected"] = est.fixed_infected;
        out["normalized_infected"] = double(est.fixed_infected) / net.n_nodes;
        out["mean_IS"] = est.mean_is;
        out["stderr_IS"] = est.stderr_is;
        out["mean_II"] = est.mean_ii;
        out["beta_eff"] = est.beta_eff;
        out["beta_eff_stderr"] = est.beta_eff_stderr;
        out["beta_eff_over_gamma"] = est.beta_eff / gamma;
        out["t_equilibrate"] = est.t_equilibrate;
        out["window"] = est.window;
        out["seed"] = opt.seed;
        if (dmax > 0) {
            Json corr = Json::array();
            for (int d = 1; d <= dmax; ++d) {
                Json row;
                row["D"] = d;
                row["C_II"] =
                    distance_correlation(net, est.snapshots, kSpeciesI, kSpeciesI, d);
                row["C_SI"] =
                    distance_correlation(net, est.snapshots, kSpeciesS, kSpeciesI, d);
                corr.push_back(std::move(row));
            }
            out["distance_correlations"] = std::move(corr);
        }
        write_file((fs::path(opt.out_dir) / "ensemble.json").string(), out.dump(2) + "\n");
        m["outputs"] = Json::array({"ensemble.json"});
        std::cout << "beta_eff/gamma = " << fmt(est.beta_eff / gamma) << " +- "
                  << fmt(est.beta_eff_stderr / gamma) << "\n";
    } else {
        throw CLI::ValidationError("--mode must be gillespie|controlled");
    }
    write_manifest(opt, std::move(m));
    return 0;
}

int run_compare(const CommonOpts& opt, double gamma, double i_lo, double i_hi, int n_points,
                double window) {
    Pipeline p = build_pipeline(opt);
    ClosedSystem cs = close_system(p.system, p.relations, parse_route(opt.route));
    double kappa = p.net.mean_degree();
    fs::create_directories(opt.out_dir);
    std::ostringstream csv;
    csv << "fixed_I,beta_eff_over_gamma,beta_eff_stderr,I_sim,I_mf1,I_mf2,err_mf1,err_mf2\n";
    double max_dev_mf2 = 0;
    for (int i = 0; i < n_points; ++i) {
        double frac = i_lo + (i_hi - i_lo) * double(i) / std::max(1, n_points - 1);
        long fixed = std::lround(frac * p.net.n_nodes);
        if (fixed <= 0 || fixed >= p.net.n_nodes) continue;
        EffectiveRateEstimate est = controlled_sis(p.net, gamma, fixed, window, opt.seed + i);
        double r = est.beta_eff / gamma;
        double i_sim = double(fixed) / p.net.n_nodes;
        double mf1 = std::max(0.0, analytic_mf1(r * gamma, gamma, kappa).infected);
        double mf2 =
            p.homogeneous
                ? std::max(0.0, analytic_mf2_hom(r * gamma, gamma, kappa).infected)
                : std::max(0.0, analytic_mf2_het(r * gamma, gamma, kappa).infected);
        csv << fmt(i_sim) << "," << fmt(r) << "," << fmt(est.beta_eff_stderr / gamma) << ","
            << fmt(i_sim) << "," << fmt(mf1) << "," << fmt(mf2) << "," << fmt(mf1 - i_sim) << ","
            << fmt(mf2 - i_sim) << "\n";
        max_dev_mf2 = std::max(max_dev_mf2, std::abs(mf2 - i_sim));
    }
    write_file((fs::path(opt.out_dir) / "compare.csv").string(), csv.str());
    BifurcationResult res = bifurcation_scan(cs, gamma, 0.05, 2.0, 40);
    std::ostringstream mfcsv;
    mfcsv << "beta_over_gamma,branch_id,stable";
    for (MotifKey v : cs.vars) mfcsv << "," << motif_name(motif_from_key(v), cs.model.species);
    mfcsv << ",C_II,C_SI\n";
    for (const auto& bp : res.points) {
        mfcsv << fmt(bp.beta_over_gamma) << "," << bp.branch_id << "," << (bp.stable ? 1 : 0);
        for (double v : bp.state) mfcsv << "," << fmt(v);
        mfcsv << "," << fmt(bp.c_ii) << "," << fmt(bp.c_si) << "\n";
    }
    write_file((fs::path(opt.out_dir) / "mean_field_branches.csv").string(), mfcsv.str());
    Json m = manifest_base(opt, "compare");
    m["gamma"] = gamma;
    m["window"] = window;
    m["max_abs_deviation_mf2"] = max_dev_mf2;
    m["mf_threshold"] = res.threshold;
    m["outputs"] = Json::array({"compare.csv", "mean_field_branches.csv"});
    write_manifest(opt, std::move(m));
    std::cout << "max |I_mf2 - I_sim| = " << fmt(max_dev_mf2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"moment-closure mean-field models for network dynamics"};
    app.require_subcommand(1);

    CommonOpts opt;
    bool no_prune = false, no_eliminate = false;
    auto* derive = app.add_subcommand("derive", "derive the (eliminated) moment hierarchy");
    add_common(derive, opt);
    derive->add_flag("--no-prune", no_prune, "keep dynamically irrelevant motifs");
    derive->add_flag("--no-eliminate", no_eliminate, "skip conservation-relation elimination");

    CommonOpts opt_close;
    auto* close = app.add_subcommand("close", "derive and close the system");
    add_common(close, opt_close);

    std::string export_in, export_out = ".";
    auto* exportc = app.add_subcommand("export", "re-emit a JSON system (round-trip check)");
    exportc->add_option("--in", export_in, "equations.json or closed.json")->required();
    exportc->add_option("--out,-o", export_out, "output directory");

    CommonOpts opt_bif;
    double gamma = 1.0, r_lo = 0.05, r_hi = 2.0;
    int steps = 40;
    auto* bif = app.add_subcommand("bifurcate", "steady-state branches over beta/gamma");
    add_common(bif, opt_bif);
    bif->add_option("--gamma", gamma, "recovery rate");
    bif->add_option("--r-lo", r_lo, "lower beta/gamma");
    bif->add_option("--r-hi", r_hi, "upper beta/gamma");
    bif->add_option("--steps", steps, "scan points");

    CommonOpts opt_sim;
    std::string mode = "gillespie";
    double beta = 1.0, sim_gamma = 1.0, t_end = 20.0, sample_dt = 0.1, infected = 0.1,
           window = 50.0;
    int dmax = 0;
    auto* sim = app.add_subcommand("simulate", "stochastic simulation");
    add_common(sim, opt_sim);
    sim->add_option("--mode", mode, "gillespie|controlled");
    sim->add_option("--beta", beta, "infection rate (gillespie)");
    sim->add_option("--gamma", sim_gamma, "recovery rate");
    sim->add_option("--t-end", t_end, "simulated time (gillespie)");
    sim->add_option("--sample-dt", sample_dt, "observable grid spacing");
    sim->add_option("--infected", infected, "initial/fixed infected fraction");
    sim->add_option("--window", window, "measurement window T (controlled)");
    sim->add_option("--distance-corr", dmax, "emit C^D up to this distance (controlled)");

    CommonOpts opt_cmp;
    double cmp_gamma = 1.0, i_lo = 0.05, i_hi = 0.8, cmp_window = 50.0;
    int cmp_points = 8;
    auto* cmp = app.add_subcommand("compare", "mean-field branches vs controlled simulation");
    add_common(cmp, opt_cmp);
    cmp->add_option("--gamma", cmp_gamma, "recovery rate");
    cmp->add_option("--i-lo", i_lo, "lowest fixed infected fraction");
    cmp->add_option("--i-hi", i_hi, "highest fixed infected fraction");
    cmp->add_option("--points", cmp_points, "sweep points");
    cmp->add_option("--window", cmp_window, "measurement window T");

    CLI11_PARSE(app, argc, argv);

    try {
        if (derive->parsed()) return run_derive(opt, no_prune, no_eliminate);
        if (close->parsed()) return run_close(opt_close);
        if (exportc->parsed()) return run_export(export_in, export_out);
        if (bif->parsed()) return run_bifurcate(opt_bif, gamma, r_lo, r_hi, steps);
        if (sim->parsed())
            return run_simulate(opt_sim, mode, beta, sim_gamma, t_end, sample_dt, infected,
                                window, dmax);
        if (cmp->parsed())
            return run_compare(opt_cmp, cmp_gamma, i_lo, i_hi, cmp_points, cmp_window);
    } catch (const CapacityError& e) {
        std::cerr << "capacity error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
