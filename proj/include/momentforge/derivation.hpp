#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "momentforge/motif.hpp"
#include "momentforge/network.hpp"
#include "momentforge/rational.hpp"

namespace mf {

/// Two-state process rates: spontaneous conversions a->b (R0, zero diagonal)
/// and per-c-neighbour conversions a->b (R1, zero when a==b).
struct RateModel {
    int n = 0;
    std::vector<std::vector<double>> r0;               // [a][b]
    std::vector<std::vector<std::vector<double>>> r1;  // [a][b][c]
    std::vector<std::string> species;
    std::map<int, std::string> param_names;  // pretty names for nonzero entries

    explicit RateModel(int n_species = 0)
        : n(n_species),
          r0(n_species, std::vector<double>(n_species, 0.0)),
          r1(n_species,
             std::vector<std::vector<double>>(n_species, std::vector<double>(n_species, 0.0))) {
        for (int i = 0; i < n_species; ++i) species.push_back("s" + std::to_string(i));
    }

    void validate() const {
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                if (r0[a][b] < 0) throw std::invalid_argument("negative R0 entry");
                if (a == b && r0[a][b] != 0) throw std::invalid_argument("R0 diagonal must be zero");
                for (int c = 0; c < n; ++c) {
                    if (r1[a][b][c] < 0) throw std::invalid_argument("negative R1 entry");
                    if (a == b && r1[a][b][c] != 0)
                        throw std::invalid_argument("R1 self-conversion must be zero");
                }
            }
    }
};

constexpr int kSpeciesS = 0;
constexpr int kSpeciesI = 1;

/// SIS: I -> S at rate gamma, S -> I at rate beta per infected neighbour.
inline RateModel sis_model(double beta = 1.0, double gamma = 1.0) {
    RateModel m(2);
    m.species = {"S", "I"};
    m.r0[kSpeciesI][kSpeciesS] = gamma;
    m.r1[kSpeciesS][kSpeciesI][kSpeciesI] = beta;
    return m;
}

// ---- symbolic rate coefficients -------------------------------------------

inline int r0_param(int a, int b) { return (1 << 20) | (a << 8) | b; }
inline int r1_param(int a, int b, int c) { return (2 << 20) | (a << 16) | (b << 8) | c; }

inline std::string param_name(int id, const RateModel& model) {
    auto it = model.param_names.find(id);
    if (it != model.param_names.end()) return it->second;
    auto sp = [&](int s) {
        return s < int(model.species.size()) ? model.species[s] : std::to_string(s);
    };
    if (id >> 20 == 1) return "R0[" + sp((id >> 8) & 0xf) + "->" + sp(id & 0xf) + "]";
    return "R1[" + sp((id >> 16) & 0xf) + "->" + sp((id >> 8) & 0xf) + "|" + sp(id & 0xf) + "]";
}

inline double param_value(int id, const RateModel& model) {
    if (id >> 20 == 1) return model.r0[(id >> 8) & 0xf][id & 0xf];
    return model.r1[(id >> 16) & 0xf][(id >> 8) & 0xf][id & 0xf];
}

/// Linear combination of rate parameters with exact rational weights.
struct RateExpr {
    std::map<int, Rational> terms;

    bool is_zero() const {
        for (const auto& [p, c] : terms)
            if (!c.is_zero()) return false;
        return true;
    }
    RateExpr& add(int param, const Rational& coeff) {
        auto [it, fresh] = terms.insert({param, coeff});
        if (!fresh) it->second += coeff;
        if (it->second.is_zero()) terms.erase(it);
        return *this;
    }
    RateExpr& add(const RateExpr& other, const Rational& scale = Rational(1)) {
        for (const auto& [p, c] : other.terms) add(p, c * scale);
        return *this;
    }
    RateExpr scaled(const Rational& s) const {
        RateExpr out;
        if (!s.is_zero())
            for (const auto& [p, c] : terms) out.terms[p] = c * s;
        return out;
    }
    double eval(const RateModel& model) const {
        double v = 0;
        for (const auto& [p, c] : terms) v += c.to_double() * param_value(p, model);
        return v;
    }
    std::string str(const RateModel& model) const {
        if (terms.empty()) return "0";
        std::string s;
        for (const auto& [p, c] : terms) {
            std::string coeff = c.str();
            if (coeff == "1") coeff = "";
            else if (coeff == "-1") coeff = "-";
            if (!s.empty() && coeff.rfind('-', 0) != 0) s += "+";
            s += coeff + param_name(p, model);
        }
        return s;
    }
    friend bool operator==(const RateExpr& a, const RateExpr& b) { return a.terms == b.terms; }
};

/// Sum of census counts with rational weights (right-hand sides of
/// conservation relations, constants after elimination).
struct CensusExpr {
    std::map<GraphKey, Rational> terms;

    bool is_zero() const { return terms.empty(); }
    CensusExpr& add(GraphKey g, const Rational& coeff) {
        auto [it, fresh] = terms.insert({g, coeff});
        if (!fresh) it->second += coeff;
        if (it->second.is_zero()) terms.erase(it);
        return *this;
    }
    CensusExpr& add(const CensusExpr& other, const Rational& scale) {
        for (const auto& [g, c] : other.terms) add(g, c * scale);
        return *this;
    }
    Rational eval(const SubgraphCensus& census) const {
        Rational v(0);
        for (const auto& [g, c] : terms) v += c * census.at(g);
        return v;
    }
    friend bool operator==(const CensusExpr& a, const CensusExpr& b) { return a.terms == b.terms; }
    friend bool operator<(const CensusExpr& a, const CensusExpr& b) { return a.terms < b.terms; }
};

/// Linear identity between motif counts: sum(lhs) = rhs(census).
struct ConservationRelation {
    std::map<MotifKey, Rational> lhs;
    CensusExpr rhs;

    friend bool operator<(const ConservationRelation& a, const ConservationRelation& b) {
        if (a.lhs != b.lhs) return a.lhs < b.lhs;
        return a.rhs < b.rhs;
    }
    friend bool operator==(const ConservationRelation& a, const ConservationRelation& b) {
        return a.lhs == b.lhs && a.rhs == b.rhs;
    }
};

using SparseRow = std::map<MotifKey, RateExpr>;

/// Truncated moment hierarchy: one symbolic equation per dynamic motif class
/// of orders 1..k, coupling orders m and m+1 only (block bidiagonal).
struct MomentSystem {
    int order_k = 0;
    RateModel model;
    std::vector<MotifKey> vars;      // dynamic variables, sorted (order, key)
    std::vector<MotifKey> boundary;  // order k+1 classes on right-hand sides
    std::map<MotifKey, SparseRow> rows;
    SubgraphCensus census;
    std::optional<std::set<GraphKey>> class_filter;

    struct Affine {
        std::map<MotifKey, Rational> lin;  // over surviving variables
        CensusExpr cst;
    };
    std::map<MotifKey, Affine> eliminated;
    std::vector<MotifKey> pruned;
    std::map<MotifKey, RateExpr> constant;  // c-tilde per surviving row

    bool is_var(MotifKey k) const {
        return std::find(vars.begin(), vars.end(), k) != vars.end();
    }
};

/// Right-hand side of the population-level moment equation for one motif:
/// spontaneous in/out, within-motif interactions weighted by c-degrees, and
/// the external-neighbour terms over all order m+1 extensions.
inline SparseRow derive_equation(const Motif& x, const RateModel& model) {
    model.validate();
    const int m = x.order(), n = model.n;
    check_order(m + 1, "derive_equation");
    SparseRow row;
    auto add = [&row](const Motif& mo, int param, const Rational& coeff) {
        row[motif_key(mo)].add(param, coeff);
    };
    const MotifKey self = motif_key(x);
    for (int p = 0; p < m; ++p) {
        const int xp = x.labels[p];
        for (int k = 0; k < n; ++k) {
            if (k == xp) continue;
            // canonicalizing the relabelled motif can move the converted node
            auto [gained, gained_p] = relabel_tracked(x, p, k);
            if (model.r0[k][xp] != 0) add(gained, r0_param(k, xp), Rational(1));
            if (model.r0[xp][k] != 0) row[self].add(r0_param(xp, k), Rational(-1));
            for (int c = 0; c < n; ++c) {
                int kpc = c_degree(x, p, c);
                if (kpc) {
                    if (model.r1[k][xp][c] != 0) add(gained, r1_param(k, xp, c), Rational(kpc));
                    if (model.r1[xp][k][c] != 0) row[self].add(r1_param(xp, k, c), Rational(-kpc));
                }
                if (model.r1[k][xp][c] != 0)
                    for (const auto& [y, mult] : neighborhood_extension_multiset(gained, gained_p, c))
                        row[y].add(r1_param(k, xp, c), Rational(mult));
                if (model.r1[xp][k][c] != 0)
                    for (const auto& [y, mult] : neighborhood_extension_multiset(x, p, c))
                        row[y].add(r1_param(xp, k, c), Rational(-mult));
            }
        }
    }
    for (auto it = row.begin(); it != row.end();)
        it = it->second.is_zero() ? row.erase(it) : std::next(it);
    return row;
}

/// Hierarchy truncated at order k. The class filter drops motifs whose
/// unlabelled class does not occur in the host network (their counts vanish
/// identically), both as variables and inside right-hand sides.
inline MomentSystem build_hierarchy(int k, const RateModel& model, const SubgraphCensus& census,
                                    std::optional<std::set<GraphKey>> class_filter = std::nullopt) {
    if (k < 1) throw std::invalid_argument("build_hierarchy: k >= 1 required");
    check_order(k + 1, "build_hierarchy");
    MomentSystem sys;
    sys.order_k = k;
    sys.model = model;
    sys.census = census;
    sys.class_filter = class_filter;
    auto allowed = [&](MotifKey key) {
        return !class_filter || class_filter->count(motif_graph_key(key)) > 0;
    };
    std::set<MotifKey> boundary;
    for (int m = 1; m <= k; ++m) {
        const std::set<GraphKey>* restrict = class_filter ? &*class_filter : nullptr;
        for (const Motif& mo : enumerate_motifs(m, model.n, restrict)) {
            MotifKey key = motif_key(mo);
            sys.vars.push_back(key);
            SparseRow row = derive_equation(mo, model);
            SparseRow kept;
            for (auto& [col, expr] : row) {
                if (!allowed(col)) continue;
                int col_order = int(col >> 60);
                if (col_order != m && col_order != m + 1)
                    throw std::logic_error("derive_equation broke block structure");
                if (col_order == k + 1) boundary.insert(col);
                kept.emplace(col, std::move(expr));
            }
            sys.rows.emplace(key, std::move(kept));
        }
    }
    sys.boundary.assign(boundary.begin(), boundary.end());
    return sys;
}

/// Conservation relations up to order k: one sum-to-[a] relation per graph
/// class (Eq. type i), plus, on degree-homogeneous networks, one relation per
/// (base motif, anchor-node) class equating species-summed extensions with
/// (kappa - in-motif degree) times the base count. The extension sum runs
/// over every way the new node can attach (all induced patterns); restricting
/// it to the plain stub pattern would be wrong on networks with short cycles.
inline std::vector<ConservationRelation> conservation_relations(
    int k, int n_species, const SubgraphCensus& census, bool degree_homogeneous,
    const std::optional<std::set<GraphKey>>& class_filter = std::nullopt) {
    auto allowed = [&](GraphKey g) { return !class_filter || class_filter->count(g) > 0; };
    std::set<ConservationRelation> dedup;
    for (int m = 1; m <= k; ++m) {
        const std::set<GraphKey>* restrict = class_filter ? &*class_filter : nullptr;
        for (const Motif& mo : enumerate_motifs(m, 1, restrict)) {
            // one representative per graph class via single-species enumeration
            ConservationRelation rel;
            std::vector<int> lab(m, 0);
            while (true) {
                Motif labelled(mo.graph, lab);
                rel.lhs[motif_key(labelled)] += Rational(1);
                int pos = m - 1;
                while (pos >= 0 && lab[pos] == n_species - 1) lab[pos--] = 0;
                if (pos < 0) break;
                ++lab[pos];
            }
            rel.rhs.add(graph_key(mo.graph), Rational(1));
            dedup.insert(std::move(rel));
        }
    }
    if (degree_homogeneous && k >= 2) {
        Rational kappa = census.at(graph_key(chain_graph(2))) / census.at(graph_key(SmallGraph(1)));
        for (int m = 1; m < k; ++m) {
            const std::set<GraphKey>* restrict = class_filter ? &*class_filter : nullptr;
            for (const Motif& base : enumerate_motifs(m, n_species, restrict)) {
                for (int q = 0; q < m; ++q) {
                    ConservationRelation rel;
                    for (int k_new = 0; k_new < n_species; ++k_new)
                        for (const auto& [ext, mult] :
                             neighborhood_extension_multiset(base, q, k_new)) {
                            if (!allowed(motif_graph_key(ext))) continue;
                            rel.lhs[ext] += Rational(mult);
                        }
                    Rational out_links = kappa - Rational(base.graph.degree(q));
                    rel.lhs[motif_key(base)] += -out_links;
                    if (rel.lhs.empty()) continue;
                    dedup.insert(std::move(rel));
                }
            }
        }
    }
    return {dedup.begin(), dedup.end()};
}

namespace detail {

/// Most-infected-first ordering: labels sorted descending, compared
/// lexicographically; ties by motif key for determinism.
inline bool more_infected(MotifKey a, MotifKey b) {
    Motif ma = motif_from_key(a), mb = motif_from_key(b);
    std::vector<int> la = ma.labels, lb = mb.labels;
    std::sort(la.rbegin(), la.rend());
    std::sort(lb.rbegin(), lb.rend());
    if (la != lb) return la > lb;
    return a < b;
}

}  // namespace detail

/// Substitute variables away via conservation relations. Explicit targets are
/// honoured verbatim (chained substitutions resolved by Gaussian elimination);
/// otherwise a greedy pass eliminates, per independent relation, the motif
/// with the most infected-like labels.
inline MomentSystem eliminate(const MomentSystem& sys,
                              const std::vector<ConservationRelation>& relations,
                              const std::vector<MotifKey>& explicit_targets = {}) {
    struct WorkRel {
        std::map<MotifKey, Rational> lhs;
        CensusExpr rhs;
    };
    std::vector<WorkRel> pool;
    for (const auto& r : relations) {
        WorkRel w{r.lhs, r.rhs};
        // restrict to current variables; anything already eliminated/pruned is
        // substituted via the existing records
        std::map<MotifKey, Rational> lhs;
        CensusExpr rhs = w.rhs;
        bool usable = true;
        for (const auto& [key, coeff] : w.lhs) {
            if (sys.is_var(key)) {
                lhs[key] += coeff;
            } else if (auto it = sys.eliminated.find(key); it != sys.eliminated.end()) {
                for (const auto& [k2, c2] : it->second.lin) lhs[k2] += coeff * c2;
                rhs.add(it->second.cst, -coeff);
            } else {
                usable = false;  // references a pruned/unknown motif
                break;
            }
        }
        if (!usable) continue;
        for (auto it = lhs.begin(); it != lhs.end();)
            it = it->second.is_zero() ? lhs.erase(it) : std::next(it);
        if (lhs.empty()) continue;
        pool.push_back({std::move(lhs), std::move(rhs)});
    }

    // Gaussian elimination with pivot columns = targets.
    std::vector<std::pair<MotifKey, WorkRel>> pivots;  // target -> solved relation
    auto reduce = [&](WorkRel& w) {
        for (const auto& [tkey, prel] : pivots) {
            auto it = w.lhs.find(tkey);
            if (it == w.lhs.end()) continue;
            Rational f = it->second;
            w.lhs.erase(it);
            for (const auto& [k2, c2] : prel.lhs) {
                if (k2 == tkey) continue;
                auto [jt, fresh] = w.lhs.insert({k2, Rational(0)});
                jt->second += -f * c2;  // prel solved as tkey = rhs - others
                if (jt->second.is_zero()) w.lhs.erase(jt);
            }
            w.rhs.add(prel.rhs, -f);
        }
    };
    // Stored solved form: target = rhs - sum(lhs over the other variables).
    auto solve_pivot = [&](const WorkRel& w, MotifKey target) {
        Rational piv = w.lhs.at(target);
        WorkRel solved;
        for (const auto& [k2, c2] : w.lhs)
            if (k2 != target) solved.lhs[k2] = c2 / piv;
        solved.rhs.add(w.rhs, Rational(1) / piv);
        pivots.push_back({target, std::move(solved)});
    };

    if (!explicit_targets.empty()) {
        std::vector<WorkRel> avail = pool;
        for (MotifKey target : explicit_targets) {
            if (!sys.is_var(target))
                throw std::invalid_argument("eliminate: target is not a current variable");
            bool found = false;
            for (std::size_t i = 0; i < avail.size() && !found; ++i) {
                WorkRel w = avail[i];
                reduce(w);
                if (auto it = w.lhs.find(target); it != w.lhs.end() && !it->second.is_zero()) {
                    solve_pivot(w, target);
                    avail.erase(avail.begin() + long(i));
                    found = true;
                }
            }
            if (!found)
                throw std::invalid_argument("eliminate: target not solvable from the relations");
        }
    } else {
        for (const WorkRel& r : pool) {
            WorkRel w = r;
            reduce(w);
            if (w.lhs.empty()) continue;  // dependent relation
            MotifKey best = 0;
            bool have = false;
            for (const auto& [key, coeff] : w.lhs)
                if (!coeff.is_zero() && (!have || detail::more_infected(key, best))) {
                    best = key;
                    have = true;
                }
            if (have) solve_pivot(w, best);
        }
    }

    // back-substitute so every pivot is expressed over surviving variables only
    std::set<MotifKey> targets;
    for (auto& [t, rel] : pivots) targets.insert(t);
    for (std::size_t i = pivots.size(); i-- > 0;) {
        auto& [t, rel] = pivots[i];
        bool changed = true;
        while (changed) {
            changed = false;
            for (const auto& [t2, rel2] : pivots) {
                if (t2 == t) continue;
                auto it = rel.lhs.find(t2);
                if (it == rel.lhs.end()) continue;
                Rational f = it->second;
                rel.lhs.erase(it);
                for (const auto& [k2, c2] : rel2.lhs) {
                    auto [jt, fresh] = rel.lhs.insert({k2, Rational(0)});
                    jt->second += -f * c2;
                    if (jt->second.is_zero()) rel.lhs.erase(jt);
                }
                rel.rhs.add(rel2.rhs, -f);
                changed = true;
            }
        }
    }

    MomentSystem out = sys;
    out.vars.clear();
    for (MotifKey v : sys.vars)
        if (!targets.count(v)) out.vars.push_back(v);
    for (auto& [t, rel] : pivots) {
        MomentSystem::Affine aff;
        aff.cst = rel.rhs;
        for (const auto& [k2, c2] : rel.lhs) aff.lin[k2] = -c2;  // t = rhs - sum(lhs)
        out.eliminated[t] = std::move(aff);
        out.rows.erase(t);
    }
    // rewrite surviving rows through the substitution
    std::map<MotifKey, SparseRow> new_rows;
    std::map<MotifKey, RateExpr> constant = sys.constant;
    for (MotifKey v : out.vars) {
        SparseRow row;
        RateExpr cst = constant.count(v) ? constant[v] : RateExpr{};
        for (const auto& [col, expr] : sys.rows.at(v)) {
            auto it = out.eliminated.find(col);
            if (it == out.eliminated.end()) {
                row[col].add(expr);
            } else {
                for (const auto& [k2, c2] : it->second.lin) row[k2].add(expr, c2);
                cst.add(expr.scaled(it->second.cst.eval(sys.census)));
            }
        }
        for (auto it = row.begin(); it != row.end();)
            it = it->second.is_zero() ? row.erase(it) : std::next(it);
        new_rows[v] = std::move(row);
        if (!cst.is_zero()) constant[v] = std::move(cst);
    }
    out.rows = std::move(new_rows);
    out.constant = std::move(constant);
    return out;
}

/// Drop variables that never feed back into the dynamics: keep what is
/// reachable along right-hand-side dependencies from the rows of order-1
/// variables with nonzero dynamics. Dropped counts stay recoverable through
/// the conservation relations.
inline MomentSystem prune_irrelevant(const MomentSystem& sys) {
    std::set<MotifKey> reached;
    std::vector<MotifKey> frontier;
    for (MotifKey v : sys.vars) {
        if ((v >> 60) != 1) continue;
        auto it = sys.rows.find(v);
        if (it == sys.rows.end() || it->second.empty()) continue;
        for (const auto& [col, expr] : it->second)
            if (!expr.is_zero() && reached.insert(col).second) frontier.push_back(col);
    }
    while (!frontier.empty()) {
        MotifKey v = frontier.back();
        frontier.pop_back();
        auto it = sys.rows.find(v);
        if (it == sys.rows.end()) continue;
        for (const auto& [col, expr] : it->second)
            if (!expr.is_zero() && reached.insert(col).second) frontier.push_back(col);
    }
    MomentSystem out = sys;
    out.vars.clear();
    out.rows.clear();
    std::set<MotifKey> boundary;
    for (MotifKey v : sys.vars) {
        if (!reached.count(v)) {
            out.pruned.push_back(v);
            continue;
        }
        out.vars.push_back(v);
        out.rows[v] = sys.rows.at(v);
        for (const auto& [col, expr] : out.rows[v])
            if (int(col >> 60) == sys.order_k + 1) boundary.insert(col);
    }
    out.boundary.assign(boundary.begin(), boundary.end());
    return out;
}

}  // namespace mf
