#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "momentforge/closure.hpp"
#include "momentforge/derivation.hpp"

namespace mf {

constexpr double kClosureGuard = 1e-12;

/// Closed mean-field system over normalized motif counts: linear part plus
/// closure formulas for the boundary, with an affine resolver mapping every
/// order <= k motif class back onto the state vector (identity for kept
/// variables, elimination/conservation combinations otherwise).
struct ClosedSystem {
    int order_k = 0;
    RateModel model;
    SubgraphCensus census;
    std::vector<MotifKey> vars;      // normalized state variables
    std::vector<MotifKey> boundary;  // closed motifs
    std::map<MotifKey, SparseRow> rows;          // normalized coefficients
    std::map<MotifKey, RateExpr> constant;       // normalized c-tilde
    std::map<MotifKey, std::vector<ClosureFormula>> closures;  // normalized factors

    struct Affine {
        std::map<MotifKey, double> lin;
        double cst = 0;
    };
    std::map<MotifKey, Affine> resolve;  // normalized motif value from state

    std::size_t dim() const { return vars.size(); }
    std::size_t var_index(MotifKey k) const {
        for (std::size_t i = 0; i < vars.size(); ++i)
            if (vars[i] == k) return i;
        throw std::invalid_argument("ClosedSystem: not a state variable");
    }

    double value_of(MotifKey k, const std::vector<double>& state) const {
        auto it = resolve.find(k);
        if (it == resolve.end()) throw std::invalid_argument("ClosedSystem: unresolvable motif");
        double v = it->second.cst;
        for (const auto& [vk, c] : it->second.lin) v += c * state[var_index(vk)];
        return v;
    }

    /// Evaluate one closure formula; vanishing denominator factors force the
    /// whole product to zero (the matching numerator factors vanish there).
    double eval_closure(const ClosureFormula& f, const std::vector<double>& state) const {
        double val = 1.0;
        Motif t = motif_from_key(f.target);
        for (const auto& [mk, e] : f.num) {
            double x = value_of(mk, state);
            for (int i = 0; i < e; ++i) val *= x;
        }
        for (const auto& [mk, e] : f.den) {
            double x = value_of(mk, state);
            if (std::abs(x) < kClosureGuard) return 0.0;
            for (int i = 0; i < e; ++i) val /= x;
        }
        for (int p = 0; p < t.order(); ++p) {
            int g = f.gamma.empty() ? 0 : f.gamma[p];
            if (!g) continue;
            double x = value_of(motif_key(Motif(SmallGraph(1), {t.labels[p]})), state);
            if (g < 0 && std::abs(x) < kClosureGuard) return 0.0;
            for (int i = 0; i < std::abs(g); ++i) val = g > 0 ? val * x : val / x;
        }
        return val;
    }

    double boundary_value(MotifKey b, const std::vector<double>& state) const {
        const auto& alts = closures.at(b);
        double sum = 0;
        for (const auto& f : alts) sum += eval_closure(f, state);
        return sum / double(alts.size());  // average of the alternative decompositions
    }
};

/// Close an eliminated (or plain) hierarchy: normalize coefficients by census
/// class counts, synthesize closure formulas for every boundary motif, and
/// build the affine resolver from elimination records plus conservation
/// relations.
inline ClosedSystem close_system(const MomentSystem& sys,
                                 const std::vector<ConservationRelation>& relations,
                                 ClosureRoute route = ClosureRoute::Auto) {
    ClosedSystem cs;
    cs.order_k = sys.order_k;
    cs.model = sys.model;
    cs.census = sys.census;
    cs.vars = sys.vars;
    cs.boundary = sys.boundary;
    auto class_count = [&](MotifKey k) {
        Rational c = sys.census.at(motif_graph_key(k));
        if (c.is_zero()) throw std::invalid_argument("close_system: missing census entry");
        return c;
    };
    for (MotifKey v : sys.vars) {
        Rational cv = class_count(v);
        SparseRow row;
        for (const auto& [col, expr] : sys.rows.at(v))
            row[col] = expr.scaled(class_count(col) / cv);
        cs.rows[v] = std::move(row);
        auto it = sys.constant.find(v);
        if (it != sys.constant.end()) cs.constant[v] = it->second.scaled(Rational(1) / cv);
    }
    for (MotifKey b : sys.boundary) {
        if (!sys.census.has(motif_graph_key(b)))
            throw std::invalid_argument("close_system: missing census entry for boundary class");
        cs.closures[b] = closure_formulas(motif_from_key(b), route);
        if (cs.closures[b].empty()) throw std::logic_error("close_system: no closure produced");
    }

    // resolver: state variables identically, eliminated motifs via their
    // records, everything else via conservation relations
    std::map<MotifKey, ClosedSystem::Affine> res;
    for (MotifKey v : sys.vars) res[v] = {{{v, 1.0}}, 0.0};
    for (const auto& [t, aff] : sys.eliminated) {
        ClosedSystem::Affine a;
        double ct = class_count(t).to_double();
        for (const auto& [vk, c] : aff.lin)
            a.lin[vk] += c.to_double() * class_count(vk).to_double() / ct;
        a.cst = aff.cst.eval(sys.census).to_double() / ct;
        res[t] = std::move(a);
    }
    bool progress = true;
    while (progress) {
        progress = false;
        for (const auto& rel : relations) {
            MotifKey unknown = 0;
            int n_unknown = 0;
            for (const auto& [k, c] : rel.lhs)
                if (!res.count(k)) {
                    unknown = k;
                    ++n_unknown;
                }
            if (n_unknown != 1) continue;
            Rational piv = rel.lhs.at(unknown);
            ClosedSystem::Affine a;
            a.cst = (rel.rhs.eval(sys.census) / piv / class_count(unknown)).to_double();
            double cu = class_count(unknown).to_double();
            for (const auto& [k, c] : rel.lhs) {
                if (k == unknown) continue;
                const auto& ak = res.at(k);
                double f = (c / piv).to_double() * class_count(k).to_double() / cu;
                for (const auto& [vk, cc] : ak.lin) a.lin[vk] -= f * cc;
                a.cst -= f * ak.cst;
            }
            res[unknown] = std::move(a);
            progress = true;
        }
    }
    cs.resolve = std::move(res);
    return cs;
}

/// Normalized right-hand side of the closed system.
inline std::vector<double> rhs(const ClosedSystem& cs, const std::vector<double>& state,
                               const RateModel& params) {
    if (state.size() != cs.dim()) throw std::invalid_argument("rhs: state dimension mismatch");
    std::map<MotifKey, double> bval;
    for (MotifKey b : cs.boundary) bval[b] = cs.boundary_value(b, state);
    std::vector<double> out(cs.dim(), 0.0);
    for (std::size_t i = 0; i < cs.vars.size(); ++i) {
        double v = 0;
        for (const auto& [col, expr] : cs.rows.at(cs.vars[i])) {
            auto it = bval.find(col);
            double x = (it != bval.end()) ? it->second : state[cs.var_index(col)];
            v += expr.eval(params) * x;
        }
        auto ct = cs.constant.find(cs.vars[i]);
        if (ct != cs.constant.end()) v += ct->second.eval(params);
        out[i] = v;
    }
    return out;
}

struct Trajectory {
    std::vector<double> times;
    std::vector<std::vector<double>> states;
    bool clipped = false;  // a component was pinned to [0,1] by event detection
};

/// Adaptive Dormand-Prince RK45.
inline Trajectory integrate(const ClosedSystem& cs, std::vector<double> state,
                            const RateModel& params, double t_end, double rel_tol = 1e-8,
                            double abs_tol = 1e-10, double record_dt = 0.0) {
    if (rel_tol <= 0 || abs_tol <= 0) throw std::invalid_argument("integrate: tolerances > 0");
    static const double c[7] = {0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
    static const double a[7][6] = {
        {},
        {1.0 / 5},
        {3.0 / 40, 9.0 / 40},
        {44.0 / 45, -56.0 / 15, 32.0 / 9},
        {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
        {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
        {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
    static const double b5[7] = {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784,
                                 11.0 / 84, 0};
    static const double b4[7] = {5179.0 / 57600, 0,           7571.0 / 16695, 393.0 / 640,
                                 -92097.0 / 339200, 187.0 / 2100, 1.0 / 40};
    Trajectory traj;
    double t = 0, h = std::min(0.01, t_end);
    double next_record = 0;
    auto record = [&](double tv, const std::vector<double>& sv) {
        traj.times.push_back(tv);
        traj.states.push_back(sv);
    };
    record(t, state);
    next_record = record_dt;
    const std::size_t dim = cs.dim();
    std::vector<std::vector<double>> k(7);
    int guard = 0;
    while (t < t_end && ++guard < 2000000) {
        h = std::min(h, t_end - t);
        k[0] = rhs(cs, state, params);
        bool reject = false;
        std::vector<double> y(dim);
        for (int s = 1; s < 7; ++s) {
            for (std::size_t i = 0; i < dim; ++i) {
                double acc = state[i];
                for (int j = 0; j < s; ++j) acc += h * a[s][j] * k[j][i];
                y[i] = acc;
            }
            k[s] = rhs(cs, y, params);
        }
        double err = 0;
        std::vector<double> y5(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            double v5 = state[i], v4 = state[i];
            for (int s = 0; s < 7; ++s) {
                v5 += h * b5[s] * k[s][i];
                v4 += h * b4[s] * k[s][i];
            }
            y5[i] = v5;
            double sc = abs_tol + rel_tol * std::max(std::abs(state[i]), std::abs(v5));
            err = std::max(err, std::abs(v5 - v4) / sc);
        }
        if (err > 1.0) {
            h *= std::max(0.2, 0.9 * std::pow(err, -0.25));
            if (h < 1e-14) throw std::runtime_error("integrate: step size underflow");
            continue;
        }
        // event detection: pin components leaving the admissible box
        for (std::size_t i = 0; i < dim; ++i) {
            if (y5[i] < 0.0) { y5[i] = 0.0; traj.clipped = true; }
            if (y5[i] > 1.0) { y5[i] = 1.0; traj.clipped = true; }
        }
        t += h;
        state = y5;
        while (record_dt > 0 && next_record <= t + 1e-15 && next_record <= t_end) {
            record(next_record, state);  // last-value; steps are small near events
            next_record += record_dt;
        }
        if (err > 1e-12) h *= std::min(5.0, 0.9 * std::pow(err, -0.2));
        else h *= 5.0;
    }
    record(t_end, state);
    return traj;
}

/// Finite-difference Jacobian (forward differences, fixed step).
inline Eigen::MatrixXd fd_jacobian(const ClosedSystem& cs, const std::vector<double>& state,
                                   const RateModel& params, double step = 1e-7) {
    const std::size_t dim = cs.dim();
    Eigen::MatrixXd J(dim, dim);
    std::vector<double> f0 = rhs(cs, state, params);
    for (std::size_t j = 0; j < dim; ++j) {
        std::vector<double> xs = state;
        xs[j] += step;
        std::vector<double> f1 = rhs(cs, xs, params);
        for (std::size_t i = 0; i < dim; ++i) J(i, j) = (f1[i] - f0[i]) / step;
    }
    return J;
}

struct FixedPoint {
    std::vector<double> state;
    bool stable = false;
    double leading_real = 0;
};

inline std::optional<std::vector<double>> newton_solve(const ClosedSystem& cs,
                                                       std::vector<double> x,
                                                       const RateModel& params,
                                                       int max_iter = 80, double tol = 1e-13) {
    const std::size_t dim = cs.dim();
    for (int it = 0; it < max_iter; ++it) {
        std::vector<double> f = rhs(cs, x, params);
        double norm = 0;
        for (double v : f) norm = std::max(norm, std::abs(v));
        if (norm < tol) return x;
        Eigen::MatrixXd J = fd_jacobian(cs, x, params);
        Eigen::VectorXd fv(dim);
        for (std::size_t i = 0; i < dim; ++i) fv(i) = f[i];
        Eigen::VectorXd dx = J.partialPivLu().solve(-fv);
        if (!dx.allFinite()) return std::nullopt;
        double step = 1.0;
        for (std::size_t i = 0; i < dim; ++i) x[i] += step * dx(i);
    }
    return std::nullopt;
}

/// MF1-style independence lift: each motif value is the product of its node
/// marginals at the given infected fraction.
inline std::vector<double> independence_lift(const ClosedSystem& cs, double infected) {
    std::vector<double> marg(cs.model.n, 0.0);
    if (cs.model.n == 2) {
        marg[kSpeciesI] = infected;
        marg[kSpeciesS] = 1 - infected;
    } else {
        for (int s = 0; s < cs.model.n; ++s) marg[s] = 1.0 / cs.model.n;
    }
    std::vector<double> state;
    for (MotifKey v : cs.vars) {
        Motif mo = motif_from_key(v);
        double val = 1;
        for (int lab : mo.labels) val *= marg[lab];
        state.push_back(val);
    }
    return state;
}

/// Newton iteration from a seed grid; fixed points deduplicated within 1e-8,
/// stability from the real parts of the finite-difference Jacobian spectrum.
inline std::vector<FixedPoint> steady_states(const ClosedSystem& cs, const RateModel& params,
                                             std::vector<std::vector<double>> extra_seeds = {}) {
    std::vector<std::vector<double>> seeds = std::move(extra_seeds);
    seeds.push_back(std::vector<double>(cs.dim(), 0.0));
    double kappa = (cs.census.at(graph_key(chain_graph(2))) /
                    cs.census.at(graph_key(SmallGraph(1)))).to_double();
    double beta = 0, gamma = 0;
    if (params.n == 2) {
        beta = params.r1[kSpeciesS][kSpeciesI][kSpeciesI];
        gamma = params.r0[kSpeciesI][kSpeciesS];
        double endemic = 1 - gamma / std::max(1e-300, kappa * beta);
        if (endemic > 0) seeds.push_back(independence_lift(cs, endemic));
        seeds.push_back(independence_lift(cs, 0.5));
    }
    if (cs.dim() <= 10) {
        for (std::uint32_t mask = 0; mask < (1u << cs.dim()); ++mask) {
            std::vector<double> s(cs.dim(), 0.0);
            for (std::size_t i = 0; i < cs.dim(); ++i) s[i] = (mask >> i) & 1u ? 1.0 : 0.0;
            seeds.push_back(std::move(s));
        }
    }
    std::vector<FixedPoint> out;
    for (const auto& seed : seeds) {
        auto sol = newton_solve(cs, seed, params);
        if (!sol) continue;
        bool dup = false;
        for (const auto& fp : out) {
            double d = 0;
            for (std::size_t i = 0; i < cs.dim(); ++i)
                d = std::max(d, std::abs(fp.state[i] - (*sol)[i]));
            if (d < 1e-8) { dup = true; break; }
        }
        if (dup) continue;
        FixedPoint fp;
        fp.state = *sol;
        Eigen::MatrixXd J = fd_jacobian(cs, fp.state, params);
        Eigen::EigenSolver<Eigen::MatrixXd> es(J);
        double lead = -1e300;
        for (int i = 0; i < J.rows(); ++i) lead = std::max(lead, es.eigenvalues()(i).real());
        fp.leading_real = lead;
        fp.stable = lead < 0;
        out.push_back(std::move(fp));
    }
    return out;
}

struct BranchPoint {
    double beta_over_gamma = 0;
    int branch_id = 0;  // 0 trivial, 1 endemic
    bool stable = false;
    std::vector<double> state;
    double c_ii = 0, c_si = 0;
};

struct BifurcationResult {
    std::vector<BranchPoint> points;
    double threshold = 0;  // beta/gamma where the trivial state loses stability
};

/// Uncentered correlation C_ab = [[ab]]/([[a]][[b]]).
inline double correlation(const ClosedSystem& cs, const std::vector<double>& state, int a, int b) {
    double pa = cs.value_of(motif_key(Motif(SmallGraph(1), {a})), state);
    double pb = cs.value_of(motif_key(Motif(SmallGraph(1), {b})), state);
    if (std::abs(pa) < kClosureGuard || std::abs(pb) < kClosureGuard)
        throw std::domain_error("correlation: zero species marginal");
    double pab = cs.value_of(motif_key(Motif(chain_graph(2), {a, b})), state);
    return pab / (pa * pb);
}

/// Distance-D correlation under repeated pair factorization of the
/// length-(D+1) chain numerator.
inline double mf_distance_correlation(const ClosedSystem& cs, const std::vector<double>& state,
                                      int a, int b, int D) {
    if (D < 1) throw std::invalid_argument("mf_distance_correlation: D >= 1");
    double pa = cs.value_of(motif_key(Motif(SmallGraph(1), {a})), state);
    double pb = cs.value_of(motif_key(Motif(SmallGraph(1), {b})), state);
    if (std::abs(pa) < kClosureGuard || std::abs(pb) < kClosureGuard)
        throw std::domain_error("mf_distance_correlation: zero species marginal");
    const int n = cs.model.n;
    auto pair_val = [&](int u, int v) {
        return cs.value_of(motif_key(Motif(chain_graph(2), {u, v})), state);
    };
    auto node_val = [&](int u) {
        return cs.value_of(motif_key(Motif(SmallGraph(1), {u})), state);
    };
    // sum over interior labellings of [[a c1 ... c_{D-1} b]] with chain closure
    double total = 0;
    std::vector<int> c(std::max(0, D - 1), 0);
    while (true) {
        double val = 1;
        int prev = a;
        for (int i = 0; i < D - 1; ++i) {
            val *= pair_val(prev, c[i]);
            val /= std::max(node_val(c[i]), kClosureGuard);
            prev = c[i];
        }
        val *= pair_val(prev, b);
        total += val;
        int pos = D - 2;
        while (pos >= 0 && c[pos] == n - 1) c[pos--] = 0;
        if (pos < 0) break;
        ++c[pos];
    }
    return total / (pa * pb);
}

/// Scan beta/gamma; threshold located by bisecting the sign change of the
/// trivial state's leading eigenvalue (the transcritical exchange point where
/// the nontrivial branch crosses into the admissible range).
inline BifurcationResult bifurcation_scan(const ClosedSystem& cs, double gamma, double r_lo,
                                          double r_hi, int steps) {
    if (r_lo <= 0 || r_hi <= r_lo) throw std::invalid_argument("bifurcation_scan: bad range");
    BifurcationResult out;
    RateModel params = cs.model;
    auto with_rate = [&](double r) {
        RateModel p = params;
        p.r0[kSpeciesI][kSpeciesS] = gamma;
        p.r1[kSpeciesS][kSpeciesI][kSpeciesI] = r * gamma;
        return p;
    };
    auto trivial_lead = [&](double r) {
        RateModel p = with_rate(r);
        std::vector<double> zero(cs.dim(), 0.0);
        Eigen::MatrixXd J = fd_jacobian(cs, zero, p);
        Eigen::EigenSolver<Eigen::MatrixXd> es(J);
        double lead = -1e300;
        for (int i = 0; i < J.rows(); ++i) lead = std::max(lead, es.eigenvalues()(i).real());
        return lead;
    };
    for (int i = 0; i <= steps; ++i) {
        double r = r_lo + (r_hi - r_lo) * double(i) / steps;
        RateModel p = with_rate(r);
        for (const FixedPoint& fp : steady_states(cs, p)) {
            double norm = 0;
            for (double v : fp.state) norm = std::max(norm, std::abs(v));
            bool admissible = true;
            for (double v : fp.state)
                if (v < -1e-9 || v > 1 + 1e-9) admissible = false;
            if (!admissible) continue;
            BranchPoint bp;
            bp.beta_over_gamma = r;
            bp.branch_id = norm < 1e-7 ? 0 : 1;
            bp.stable = fp.stable;
            bp.state = fp.state;
            if (cs.model.n == 2 && norm >= 1e-7) {
                bp.c_ii = correlation(cs, fp.state, kSpeciesI, kSpeciesI);
                bp.c_si = correlation(cs, fp.state, kSpeciesS, kSpeciesI);
            }
            out.points.push_back(std::move(bp));
        }
    }
    double lo = r_lo, hi = r_hi;
    double flo = trivial_lead(lo), fhi = trivial_lead(hi);
    if (flo * fhi < 0) {
        while (hi - lo > 1e-9) {
            double mid = 0.5 * (lo + hi);
            double fm = trivial_lead(mid);
            if (flo * fm <= 0) { hi = mid; fhi = fm; }
            else { lo = mid; flo = fm; }
        }
        out.threshold = 0.5 * (lo + hi);
    }
    return out;
}

// ---- closed-form reference values (MF1, MF2 hom/het) -----------------------

struct AnalyticReference {
    double infected = 0;           // [[I]] endemic
    double is_links = 0;           // [[IS]]
    double ii_links = 0;           // [[II]]
    double c_ii = 0, c_si = 0, c_ss = 0;
    double threshold = 0;
};

/// MF1: [[I]]* = 1 - gamma/(kappa beta), threshold 1/kappa.
inline AnalyticReference analytic_mf1(double beta, double gamma, double kappa) {
    AnalyticReference ref;
    ref.threshold = 1.0 / kappa;
    ref.infected = 1 - gamma / (kappa * beta);
    return ref;
}

/// MF2 on degree-homogeneous networks (printed forms specialise to gamma=1;
/// these are the gamma-correct equivalents, checked against them).
inline AnalyticReference analytic_mf2_hom(double beta, double gamma, double kappa) {
    AnalyticReference ref;
    ref.threshold = 1.0 / (kappa - 1);
    double u = kappa * (beta * (kappa - 1) - gamma) / (beta * kappa * (kappa - 1) - gamma);
    ref.infected = u;
    ref.is_links = gamma * u / (kappa * beta);
    ref.ii_links = u - ref.is_links;  // [[II]] + [[IS]] = [[I]] (stub relation)
    ref.c_ii = (gamma - beta * kappa) * (gamma - beta * (kappa - 1) * kappa) /
               (beta * kappa * kappa * (beta * (kappa - 1) - gamma));
    ref.c_si = 1 - gamma / (beta * kappa * (kappa - 1));
    ref.c_ss = (beta * (kappa - 1) * kappa - gamma) / (beta * (kappa - 1) * (kappa - 1));
    return ref;
}

/// MF2 on degree-heterogeneous (ER) networks.
inline AnalyticReference analytic_mf2_het(double beta, double gamma, double kappa) {
    AnalyticReference ref;
    ref.threshold = 1.0 / kappa;
    double disc = std::sqrt(beta * (kappa - 1) * (kappa - 1) + 4 * gamma);
    double sb = std::sqrt(beta);
    double u = (sb * (kappa + 1) - disc) / (2 * sb);
    ref.infected = u;
    ref.is_links = gamma * (sb * (kappa + 1) - disc) / (2 * kappa * beta * sb);
    ref.ii_links = 1 + gamma * (disc - sb * (kappa + 3)) / (2 * kappa * beta * sb);
    ref.c_ii = (4 * beta * sb * kappa - 2 * sb * gamma * (kappa + 3) + 2 * gamma * disc) /
               (sb * kappa * (disc - sb * (kappa + 1)) * (disc - sb * (kappa + 1)));
    ref.c_si = 2 * gamma /
               (kappa * std::sqrt(beta * beta * (kappa - 1) * (kappa - 1) + 4 * beta * gamma) -
                beta * (kappa - 1) * kappa);
    ref.c_ss = ref.c_si;
    return ref;
}

}  // namespace mf
