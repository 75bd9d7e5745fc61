#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "momentforge/derivation.hpp"
#include "momentforge/motif.hpp"
#include "momentforge/network.hpp"
#include "momentforge/rng.hpp"

namespace mf {

namespace detail {

/// Fenwick tree over per-node weights, for O(log N) proportional sampling.
class WeightTree {
public:
    explicit WeightTree(int n = 0) : n_(n), tree_(n + 1, 0.0), w_(n, 0.0) {}

    double total() const { return prefix(n_); }
    double weight(int i) const { return w_[i]; }
    void set(int i, double w) {
        double d = w - w_[i];
        if (d == 0) return;
        w_[i] = w;
        for (int k = i + 1; k <= n_; k += k & -k) tree_[k] += d;
    }
    /// Largest index with prefix sum < u (i.e. sample from the weights).
    int sample(double u) const {
        int pos = 0;
        int mask = 1;
        while ((mask << 1) <= n_) mask <<= 1;
        for (; mask; mask >>= 1) {
            int next = pos + mask;
            if (next <= n_ && tree_[next] < u) {
                pos = next;
                u -= tree_[next];
            }
        }
        return pos;  // 0-based node index
    }
    /// Recompute the tree from the stored weights (drift control).
    void rebuild() {
        std::fill(tree_.begin(), tree_.end(), 0.0);
        for (int i = 0; i < n_; ++i)
            for (int k = i + 1; k <= n_; k += k & -k) tree_[k] += w_[i];
    }

private:
    double prefix(int k) const {
        double s = 0;
        for (; k; k -= k & -k) s += tree_[k];
        return s;
    }
    int n_;
    std::vector<double> tree_;
    std::vector<double> w_;
};

}  // namespace detail

/// Mutable simulation state with incremental bookkeeping: per-node species
/// neighbour counts, per-node total conversion rate, and ordered pair counts
/// per species pair (tuple semantics).
struct SimState {
    const Network* net = nullptr;
    const RateModel* model = nullptr;
    std::vector<int> x;
    std::vector<std::vector<int>> cnt;        // [node][species]
    std::vector<long> species_count;          // [a]
    std::vector<std::vector<long>> pair_count;  // ordered [a][b]
    detail::WeightTree rates;
    double t = 0;

    SimState(const Network& n, const RateModel& m, const std::vector<int>& init)
        : net(&n), model(&m), x(init), rates(n.n_nodes) {
        if (int(init.size()) != n.n_nodes) throw std::invalid_argument("SimState: bad initial");
        cnt.assign(n.n_nodes, std::vector<int>(m.n, 0));
        species_count.assign(m.n, 0);
        pair_count.assign(m.n, std::vector<long>(m.n, 0));
        for (int i = 0; i < n.n_nodes; ++i) {
            ++species_count[x[i]];
            for (int j : n.adj[i]) {
                ++cnt[i][x[j]];
                ++pair_count[x[i]][x[j]];
            }
        }
        for (int i = 0; i < n.n_nodes; ++i) rates.set(i, node_rate(i));
    }

    double node_rate(int i) const {
        double r = 0;
        int a = x[i];
        for (int b = 0; b < model->n; ++b) {
            if (b == a) continue;
            r += model->r0[a][b];
            for (int c = 0; c < model->n; ++c)
                if (model->r1[a][b][c] != 0) r += model->r1[a][b][c] * cnt[i][c];
        }
        return r;
    }

    void flip(int i, int b) {
        int a = x[i];
        if (a == b) return;
        --species_count[a];
        ++species_count[b];
        for (int j : net->adj[i]) {
            int cj = x[j];
            --pair_count[a][cj];
            --pair_count[cj][a];
            ++pair_count[b][cj];
            ++pair_count[cj][b];
            --cnt[j][a];
            ++cnt[j][b];
            rates.set(j, node_rate(j));
        }
        x[i] = b;
        rates.set(i, node_rate(i));
    }

    /// Full recount; used by the debug audit.
    bool audit() const {
        SimState fresh(*net, *model, x);
        if (fresh.species_count != species_count || fresh.pair_count != pair_count) return false;
        for (int i = 0; i < net->n_nodes; ++i)
            if (std::abs(fresh.rates.weight(i) - rates.weight(i)) > 1e-9 * (1 + rates.weight(i)))
                return false;
        return true;
    }
};

struct SimTrajectory {
    std::vector<double> times;
    std::vector<MotifKey> observables;
    std::vector<std::vector<double>> counts;  // [time][observable]
    bool absorbed = false;
    double absorb_time = -1;
    std::uint64_t seed = 0;
};

/// Statistically exact Gillespie sampling of the (R0, R1) dynamics.
/// Observables of order <= 2 are tracked incrementally; larger motifs are
/// recounted at sample times.
inline SimTrajectory gillespie(const Network& net, const RateModel& model,
                               const std::vector<int>& initial, double t_end, double sample_dt,
                               std::uint64_t seed, const std::vector<Motif>& observables,
                               bool debug_audit = false) {
    model.validate();
    Xoshiro256 rng = Xoshiro256::stream(seed, 0x67696cull);
    SimState st(net, model, initial);
    SimTrajectory traj;
    traj.seed = seed;
    for (const Motif& mo : observables) traj.observables.push_back(motif_key(mo));
    auto record = [&](double tv) {
        std::vector<double> row;
        for (const Motif& mo : observables) {
            if (mo.order() == 1) {
                row.push_back(double(st.species_count[mo.labels[0]]));
            } else if (mo.order() == 2) {
                row.push_back(double(st.pair_count[mo.labels[0]][mo.labels[1]]));
            } else {
                row.push_back(double(count_motif(net, st.x, mo)));
            }
        }
        traj.times.push_back(tv);
        traj.counts.push_back(std::move(row));
    };
    double next_sample = 0;
    long events = 0;
    while (true) {
        double total = st.rates.total();
        if (total <= 0) {
            traj.absorbed = true;
            traj.absorb_time = st.t;
            while (next_sample <= t_end + 1e-12) {
                record(next_sample);
                next_sample += sample_dt;
            }
            break;
        }
        double dt = -std::log(rng.uniform_pos()) / total;
        double t_next = st.t + dt;
        while (next_sample <= std::min(t_next, t_end) + 1e-12) {
            record(next_sample);
            next_sample += sample_dt;
        }
        if (t_next > t_end) break;
        st.t = t_next;
        int i = st.rates.sample(rng.uniform() * total);
        // choose the target species proportionally to its conversion rate
        int a = st.x[i];
        double u = rng.uniform() * st.rates.weight(i);
        int target = -1;
        for (int b = 0; b < model.n && target < 0; ++b) {
            if (b == a) continue;
            double r = model.r0[a][b];
            for (int c = 0; c < model.n; ++c)
                if (model.r1[a][b][c] != 0) r += model.r1[a][b][c] * st.cnt[i][c];
            if (u < r) target = b;
            else u -= r;
        }
        if (target < 0) continue;  // numerical edge; redraw
        st.flip(i, target);
        if (++events % (1 << 20) == 0) st.rates.rebuild();
        if (debug_audit && events % 1024 == 0 && !st.audit())
            throw std::logic_error("gillespie: bookkeeping audit failed");
    }
    return traj;
}

struct EffectiveRateEstimate {
    long fixed_infected = 0;
    double mean_is = 0;        // time-averaged [IS] over the window
    double stderr_is = 0;      // batch-means standard error
    double beta_eff = 0;       // gamma [I] / <[IS]>
    double beta_eff_stderr = 0;
    double t_equilibrate = 0;
    double window = 0;
    double mean_ii = 0;
    std::vector<std::vector<int>> snapshots;  // states sampled in the window
};

/// Conserved contact process (infinite-gain feedback): every recovery pairs
/// with an infection chosen proportionally to the infected-neighbour count,
/// so [I] stays exactly constant; time advances by Exp(gamma [I]) per cycle.
inline EffectiveRateEstimate controlled_sis(const Network& net, double gamma, long fixed_infected,
                                            double window_T, std::uint64_t seed,
                                            double t_equilibrate = -1, int n_batches = 10,
                                            int n_snapshots = 0) {
    if (fixed_infected <= 0 || fixed_infected >= net.n_nodes)
        throw std::invalid_argument("controlled_sis: need 0 < [I] < N");
    Xoshiro256 rng = Xoshiro256::stream(seed, 0x636f6eull);
    const int N = net.n_nodes;
    std::vector<int> x(N, kSpeciesS);
    std::vector<int> infected;  // node list
    std::vector<int> pos_in_infected(N, -1);
    std::vector<int> cnt_i(N, 0);  // infected neighbours per node
    detail::WeightTree is_weight(N);  // susceptible nodes weighted by infected neighbours

    // scatter the initial infecteds uniformly
    {
        std::vector<int> perm(N);
        for (int i = 0; i < N; ++i) perm[i] = i;
        for (int i = N - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
        for (long k = 0; k < fixed_infected; ++k) x[perm[k]] = kSpeciesI;
    }
    for (int i = 0; i < N; ++i) {
        if (x[i] == kSpeciesI) {
            pos_in_infected[i] = int(infected.size());
            infected.push_back(i);
        }
        for (int j : net.adj[i]) cnt_i[i] += x[j] == kSpeciesI;
    }
    for (int i = 0; i < N; ++i)
        if (x[i] == kSpeciesS) is_weight.set(i, double(cnt_i[i]));

    auto recover = [&](int i) {  // I -> S
        int p = pos_in_infected[i];
        int last = infected.back();
        infected[p] = last;
        pos_in_infected[last] = p;
        infected.pop_back();
        pos_in_infected[i] = -1;
        x[i] = kSpeciesS;
        for (int j : net.adj[i]) {
            --cnt_i[j];
            if (x[j] == kSpeciesS) is_weight.set(j, double(cnt_i[j]));
        }
        is_weight.set(i, double(cnt_i[i]));
    };
    auto infect = [&](int i) {  // S -> I
        x[i] = kSpeciesI;
        pos_in_infected[i] = int(infected.size());
        infected.push_back(i);
        is_weight.set(i, 0.0);
        for (int j : net.adj[i]) {
            ++cnt_i[j];
            if (x[j] == kSpeciesS) is_weight.set(j, double(cnt_i[j]));
        }
    };

    double t = 0;
    auto cycle = [&]() -> bool {  // one recovery + one infection
        // recover an infected uniformly; if the infection step has no
        // candidate, resample another infected
        for (int attempt = 0; attempt < int(infected.size()); ++attempt) {
            int i = infected[int(rng.below(infected.size()))];
            recover(i);
            double w = is_weight.total();
            if (w > 0) {
                int j = is_weight.sample(rng.uniform() * w);
                infect(j);
                return true;
            }
            infect(i);  // revert and retry with another node
        }
        return false;  // fully segregated: no IS links anywhere
    };

    EffectiveRateEstimate est;
    est.fixed_infected = fixed_infected;
    est.window = window_T;

    // equilibration: windowed mean of [IS] changes by < 1% over window_T/2
    const double half = window_T / 2;
    double win_acc = 0, win_t = 0, prev_mean = -1;
    long guard = 0;
    while (t_equilibrate < 0) {
        double dt = -std::log(rng.uniform_pos()) / (gamma * double(fixed_infected));
        if (!cycle()) throw std::runtime_error("controlled_sis: empty IS-link set");
        win_acc += is_weight.total() * dt;
        win_t += dt;
        t += dt;
        if (win_t >= half) {
            double mean = win_acc / win_t;
            if (prev_mean > 0 && std::abs(mean - prev_mean) < 0.01 * prev_mean) t_equilibrate = t;
            prev_mean = mean;
            win_acc = win_t = 0;
        }
        if (++guard > 200000000L) throw std::runtime_error("controlled_sis: no equilibration");
    }
    est.t_equilibrate = t_equilibrate;
    while (t < t_equilibrate) {
        double dt = -std::log(rng.uniform_pos()) / (gamma * double(fixed_infected));
        if (!cycle()) throw std::runtime_error("controlled_sis: empty IS-link set");
        t += dt;
    }

    // measurement: piecewise-constant time average of [IS] over n batches;
    // [II] and optional state snapshots sampled at batch boundaries
    std::vector<double> batch_mean(n_batches, 0.0);
    const double batch_T = window_T / n_batches;
    double ii_acc = 0;
    for (int batch = 0; batch < n_batches; ++batch) {
        double acc = 0, tb = 0;
        while (tb < batch_T) {
            double dt = -std::log(rng.uniform_pos()) / (gamma * double(fixed_infected));
            dt = std::min(dt, batch_T - tb);
            acc += is_weight.total() * dt;
            if (!cycle()) throw std::runtime_error("controlled_sis: empty IS-link set");
            tb += dt;
        }
        batch_mean[batch] = acc / batch_T;
        double ii = 0;
        for (int i : infected) ii += cnt_i[i];
        ii_acc += ii;
        if (n_snapshots > 0 && int(est.snapshots.size()) * n_batches < n_snapshots * (batch + 1))
            est.snapshots.push_back(x);
        t += batch_T;
    }
    double mean = 0;
    for (double b : batch_mean) mean += b;
    mean /= n_batches;
    double var = 0;
    for (double b : batch_mean) var += (b - mean) * (b - mean);
    var /= (n_batches - 1);
    est.mean_is = mean;
    est.stderr_is = std::sqrt(var / n_batches);
    est.mean_ii = ii_acc / n_batches;
    est.beta_eff = gamma * double(fixed_infected) / mean;
    est.beta_eff_stderr = est.beta_eff * est.stderr_is / mean;
    return est;
}

/// Correlation between species a and b at graph distance D, averaged over an
/// ensemble of node-state vectors.
inline double distance_correlation(const Network& net,
                                   const std::vector<std::vector<int>>& ensemble, int a, int b,
                                   int D) {
    if (D < 1) throw std::invalid_argument("distance_correlation: D >= 1");
    if (ensemble.empty()) throw std::invalid_argument("distance_correlation: empty ensemble");
    std::vector<std::pair<int, int>> pairs;
    for (int s = 0; s < net.n_nodes; ++s) {
        auto d = net.distances_from(s);
        for (int j = 0; j < net.n_nodes; ++j)
            if (d[j] == D) pairs.push_back({s, j});
    }
    if (pairs.empty()) throw std::invalid_argument("distance_correlation: no pairs at distance D");
    const double N = double(net.n_nodes);
    double acc = 0;
    for (const auto& x : ensemble) {
        long na = 0, nb = 0, match = 0;
        for (int v : x) {
            na += v == a;
            nb += v == b;
        }
        if (na == 0 || nb == 0) throw std::domain_error("distance_correlation: zero marginal");
        for (auto [i, j] : pairs) match += (x[i] == a && x[j] == b);
        acc += (N * N / double(pairs.size())) * double(match) / (double(na) * double(nb));
    }
    return acc / double(ensemble.size());
}

}  // namespace mf
