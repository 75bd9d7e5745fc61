#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "momentforge/derivation.hpp"
#include "momentforge/motif.hpp"
#include "momentforge/network.hpp"

namespace mf {

/// Full master-equation generator on the n^N state space. Stored column-wise:
/// per source state the list of single-node flips with their rates, diagonal
/// implicit as minus the outflow sum.
struct GeneratorMatrix {
    long dim = 0;
    int n_nodes = 0, n_species = 0;
    std::vector<std::vector<std::pair<long, double>>> outflows;  // [source] -> (target, rate)
    std::vector<double> diag;                                    // -sum(outflows)
    double max_outflow = 0;

    /// out += W * p  (probability flow)
    void apply(const std::vector<double>& p, std::vector<double>& out) const {
        std::fill(out.begin(), out.end(), 0.0);
        for (long s = 0; s < dim; ++s) {
            double ps = p[s];
            if (ps == 0) continue;
            for (const auto& [t, r] : outflows[s]) out[t] += r * ps;
            out[s] += diag[s] * ps;
        }
    }
};

inline long oracle_state_cap() {
    return 1L << 14;
}

/// Decode node states of a packed state index.
inline void decode_state(long idx, int n_species, int n_nodes, std::vector<int>& out) {
    out.resize(n_nodes);
    for (int i = 0; i < n_nodes; ++i) {
        out[i] = int(idx % n_species);
        idx /= n_species;
    }
}
inline long encode_state(const std::vector<int>& states, int n_species) {
    long idx = 0;
    for (int i = int(states.size()) - 1; i >= 0; --i) idx = idx * n_species + states[i];
    return idx;
}

inline GeneratorMatrix build_generator(const Network& net, const RateModel& model) {
    model.validate();
    double dim_f = std::pow(double(model.n), net.n_nodes);
    if (dim_f > double(oracle_state_cap()))
        throw CapacityError("build_generator: state space exceeds cap");
    GeneratorMatrix gen;
    gen.n_nodes = net.n_nodes;
    gen.n_species = model.n;
    gen.dim = long(std::llround(dim_f));
    gen.outflows.resize(gen.dim);
    gen.diag.resize(gen.dim);
    std::vector<int> x;
    std::vector<long> pow_n(net.n_nodes + 1, 1);
    for (int i = 0; i < net.n_nodes; ++i) pow_n[i + 1] = pow_n[i] * model.n;
    for (long s = 0; s < gen.dim; ++s) {
        decode_state(s, model.n, net.n_nodes, x);
        double total = 0;
        for (int i = 0; i < net.n_nodes; ++i) {
            int a = x[i];
            for (int b = 0; b < model.n; ++b) {
                if (b == a) continue;
                double rate = model.r0[a][b];
                for (int j : net.adj[i]) rate += model.r1[a][b][x[j]];
                if (rate <= 0) continue;
                long t = s + (long(b) - a) * pow_n[i];
                gen.outflows[s].push_back({t, rate});
                total += rate;
            }
        }
        gen.diag[s] = -total;
        gen.max_outflow = std::max(gen.max_outflow, total);
    }
    return gen;
}

/// e^{Wt} p by uniformization: W = Lambda (T - I) with T substochastic-free,
/// Poisson-weighted powers of T. Exact to the truncated tail (< 1e-14),
/// probability-conserving by construction.
inline std::vector<double> evolve(const GeneratorMatrix& gen, std::vector<double> p, double t) {
    if (t < 0) throw std::invalid_argument("evolve: negative time");
    if (t == 0 || gen.max_outflow == 0) return p;
    const double lambda = gen.max_outflow;
    // keep lambda*dt moderate so Poisson weights stay well-scaled
    int substeps = std::max(1, int(std::ceil(lambda * t / 40.0)));
    const double dt = t / substeps;
    const double ldt = lambda * dt;
    std::vector<double> acc(gen.dim), term = std::move(p), wterm(gen.dim);
    for (int step = 0; step < substeps; ++step) {
        std::fill(acc.begin(), acc.end(), 0.0);
        double w = std::exp(-ldt), wsum = 0;
        long kmax = long(ldt + 12 * std::sqrt(ldt) + 30);
        for (long k = 0;; ++k) {
            for (long s = 0; s < gen.dim; ++s) acc[s] += w * term[s];
            wsum += w;
            if (k >= kmax || 1.0 - wsum < 1e-15) break;
            // term <- T term = term + W term / lambda
            gen.apply(term, wterm);
            for (long s = 0; s < gen.dim; ++s) term[s] += wterm[s] / lambda;
            w *= ldt / double(k + 1);
        }
        term = acc;
    }
    return acc;
}

/// Per-motif state evaluator: placements are precomputed against the network,
/// so per-state evaluation is a label check.
struct MotifObservable {
    Motif motif;
    std::vector<std::vector<int>> placements;  // ordered node tuples matching the graph

    double eval(const std::vector<int>& x) const {
        long c = 0;
        for (const auto& tup : placements) {
            bool ok = true;
            for (std::size_t p = 0; p < tup.size() && ok; ++p)
                ok = x[tup[p]] == motif.labels[p];
            c += ok;
        }
        return double(c);
    }
};

inline MotifObservable make_observable(const Network& net, const Motif& mo) {
    MotifObservable obs;
    obs.motif = mo;
    // enumerate ordered tuples whose induced adjacency equals the motif graph
    const int m = mo.order();
    std::vector<int> tup(m, -1);
    std::vector<bool> used(net.n_nodes, false);
    auto rec = [&](auto&& self, int depth) -> void {
        if (depth == m) {
            obs.placements.push_back(tup);
            return;
        }
        for (int v = 0; v < net.n_nodes; ++v) {
            if (used[v]) continue;
            bool ok = true;
            for (int q = 0; q < depth && ok; ++q)
                ok = mo.graph.edge(depth, q) == net.has_edge(v, tup[q]);
            if (!ok) continue;
            tup[depth] = v;
            used[v] = true;
            self(self, depth + 1);
            used[v] = false;
        }
    };
    rec(rec, 0);
    return obs;
}

struct OracleTrajectory {
    std::vector<double> times;
    std::vector<MotifKey> motifs;
    std::vector<std::vector<double>> values;  // [time][motif]
};

/// Exact expected motif counts <[x^a]>(t) from the master equation.
inline OracleTrajectory expected_motif_counts(const Network& net, const RateModel& model,
                                              const std::vector<double>& initial,
                                              const std::vector<double>& times,
                                              const std::vector<Motif>& motifs) {
    GeneratorMatrix gen = build_generator(net, model);
    if (long(initial.size()) != gen.dim)
        throw std::invalid_argument("expected_motif_counts: bad initial distribution");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (times[i] < times[i - 1]) throw std::invalid_argument("times must be sorted");
    std::vector<MotifObservable> obs;
    for (const Motif& mo : motifs) obs.push_back(make_observable(net, mo));
    OracleTrajectory traj;
    traj.times = times;
    for (const Motif& mo : motifs) traj.motifs.push_back(motif_key(mo));
    std::vector<double> p = initial;
    double t_now = 0;
    std::vector<int> x;
    for (double t : times) {
        p = evolve(gen, std::move(p), t - t_now);
        t_now = t;
        std::vector<double> row(motifs.size(), 0.0);
        for (long s = 0; s < gen.dim; ++s) {
            if (p[s] == 0) continue;
            decode_state(s, model.n, net.n_nodes, x);
            for (std::size_t k = 0; k < obs.size(); ++k) row[k] += obs[k].eval(x) * p[s];
        }
        traj.values.push_back(std::move(row));
    }
    return traj;
}

inline std::vector<double> point_distribution(long dim, long state_idx) {
    std::vector<double> p(dim, 0.0);
    p.at(state_idx) = 1.0;
    return p;
}

/// Max relative residual between the unclosed right-hand sides evaluated on
/// exact expectations and centered differences of those expectations.
/// The moment equations are exact, so this is a stringent end-to-end check of
/// the derivation.
inline double derivative_check(const MomentSystem& sys, const Network& net, double t0, double t1,
                               int n_points, double dt, const std::vector<double>& initial) {
    std::vector<Motif> motifs;
    std::map<MotifKey, std::size_t> index;
    auto want = [&](MotifKey k) {
        if (index.count(k)) return;
        index[k] = motifs.size();
        motifs.push_back(motif_from_key(k));
    };
    for (MotifKey v : sys.vars) want(v);
    for (MotifKey b : sys.boundary) want(b);
    for (const auto& [v, row] : sys.rows)
        for (const auto& [col, expr] : row) want(col);

    std::vector<double> times;
    for (int i = 0; i < n_points; ++i) {
        double t = t0 + (t1 - t0) * double(i) / std::max(1, n_points - 1);
        times.push_back(t - dt);
        times.push_back(t);
        times.push_back(t + dt);
    }
    std::sort(times.begin(), times.end());
    OracleTrajectory traj = expected_motif_counts(net, sys.model, initial, times, motifs);

    // regroup into triplets per checkpoint
    double worst = 0;
    for (int i = 0; i < n_points; ++i) {
        double t = t0 + (t1 - t0) * double(i) / std::max(1, n_points - 1);
        auto find_row = [&](double tv) -> const std::vector<double>& {
            for (std::size_t j = 0; j < traj.times.size(); ++j)
                if (std::abs(traj.times[j] - tv) < 1e-12) return traj.values[j];
            throw std::logic_error("derivative_check: time lookup failed");
        };
        const auto& minus = find_row(t - dt);
        const auto& mid = find_row(t);
        const auto& plus = find_row(t + dt);
        for (MotifKey v : sys.vars) {
            double rhs = 0;
            for (const auto& [col, expr] : sys.rows.at(v))
                rhs += expr.eval(sys.model) * mid[index.at(col)];
            double fd = (plus[index.at(v)] - minus[index.at(v)]) / (2 * dt);
            double scale = std::max({1.0, std::abs(rhs), std::abs(fd)});
            worst = std::max(worst, std::abs(rhs - fd) / scale);
        }
    }
    return worst;
}

}  // namespace mf
