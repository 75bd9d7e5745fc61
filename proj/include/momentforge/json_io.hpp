#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "momentforge/derivation.hpp"
#include "momentforge/motif.hpp"
#include "momentforge/network.hpp"
#include "momentforge/odesys.hpp"

namespace mf {

using Json = nlohmann::ordered_json;

// ---- stable textual ids -----------------------------------------------------

inline std::string motif_id(MotifKey k) {
    Motif mo = motif_from_key(k);
    std::ostringstream os;
    os << mo.order() << "/" << mo.graph.adj_bits() << "/";
    for (int lab : mo.labels) os << lab;
    return os.str();
}
inline MotifKey parse_motif_id(const std::string& id) {
    std::istringstream is(id);
    int m;
    std::uint32_t bits;
    char slash;
    std::string labs;
    is >> m >> slash >> bits >> slash >> labs;
    SmallGraph g = SmallGraph::from_adj_bits(m, bits);
    std::vector<int> labels;
    for (char c : labs) labels.push_back(c - '0');
    return motif_key(Motif(g, labels));
}

inline std::string graph_id(GraphKey k) {
    SmallGraph g = graph_from_key(k);
    return std::to_string(g.m) + "/" + std::to_string(g.adj_bits());
}
inline GraphKey parse_graph_id(const std::string& id) {
    std::istringstream is(id);
    int m;
    std::uint32_t bits;
    char slash;
    is >> m >> slash >> bits;
    return graph_key(SmallGraph::from_adj_bits(m, bits));
}

inline std::string rate_param_id(int p) {
    if (p >> 20 == 1)
        return "r0:" + std::to_string((p >> 8) & 0xf) + ":" + std::to_string(p & 0xf);
    return "r1:" + std::to_string((p >> 16) & 0xf) + ":" + std::to_string((p >> 8) & 0xf) + ":" +
           std::to_string(p & 0xf);
}
inline int parse_rate_param_id(const std::string& s) {
    std::vector<int> v;
    std::string tok;
    std::istringstream is(s);
    std::getline(is, tok, ':');
    std::string kind = tok;
    while (std::getline(is, tok, ':')) v.push_back(std::stoi(tok));
    if (kind == "r0") return r0_param(v.at(0), v.at(1));
    if (kind == "r1") return r1_param(v.at(0), v.at(1), v.at(2));
    throw std::invalid_argument("bad rate param id: " + s);
}

inline Json rational_json(const Rational& r) {
    Json j;
    j["num"] = r.num();
    j["den"] = r.den();
    return j;
}
inline Rational parse_rational(const Json& j) {
    return Rational(j.at("num").get<std::int64_t>(), j.at("den").get<std::int64_t>());
}

inline Json rate_expr_json(const RateExpr& e) {
    Json arr = Json::array();
    for (const auto& [p, c] : e.terms) {
        Json t;
        t["rate"] = rate_param_id(p);
        t["coeff"] = rational_json(c);
        arr.push_back(std::move(t));
    }
    return arr;
}
inline RateExpr parse_rate_expr(const Json& j) {
    RateExpr e;
    for (const auto& t : j) e.add(parse_rate_param_id(t.at("rate")), parse_rational(t.at("coeff")));
    return e;
}

// ---- model & network specs --------------------------------------------------

inline RateModel load_model(const Json& j) {
    auto species = j.at("species").get<std::vector<std::string>>();
    RateModel m(int(species.size()));
    m.species = species;
    for (int a = 0; a < m.n; ++a)
        for (int b = 0; b < m.n; ++b) m.r0[a][b] = j.at("r0").at(a).at(b).get<double>();
    for (int a = 0; a < m.n; ++a)
        for (int b = 0; b < m.n; ++b)
            for (int c = 0; c < m.n; ++c) m.r1[a][b][c] = j.at("r1").at(a).at(b).at(c).get<double>();
    if (j.contains("param_names"))
        for (auto& [key, val] : j.at("param_names").items())
            m.param_names[parse_rate_param_id(key)] = val.get<std::string>();
    m.validate();
    return m;
}

inline Json model_json(const RateModel& m) {
    Json j;
    j["species"] = m.species;
    j["r0"] = m.r0;
    j["r1"] = m.r1;
    if (!m.param_names.empty()) {
        Json names;
        for (const auto& [p, name] : m.param_names) names[rate_param_id(p)] = name;
        j["param_names"] = std::move(names);
    }
    return j;
}

inline NetworkSpec load_network_spec(const Json& j) {
    NetworkSpec spec;
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "lattice") {
        spec.kind = NetworkSpec::Kind::Lattice;
        spec.dimension = j.value("dimension", 2);
        spec.side = j.at("side").get<int>();
        spec.periodic = j.value("periodic", true);
    } else if (kind == "random_regular") {
        spec.kind = NetworkSpec::Kind::RandomRegular;
        spec.n = j.at("n").get<int>();
        spec.kappa = j.at("kappa").get<double>();
    } else if (kind == "erdos_renyi") {
        spec.kind = NetworkSpec::Kind::ErdosRenyi;
        spec.n = j.at("n").get<int>();
        spec.kappa = j.at("kappa").get<double>();
    } else if (kind == "explicit") {
        spec.kind = NetworkSpec::Kind::Explicit;
        if (j.contains("edges")) {
            spec.edges = j.at("edges").get<std::vector<std::pair<int, int>>>();
        } else {
            std::ifstream in(j.at("path").get<std::string>());
            if (!in) throw std::invalid_argument("cannot open edge list file");
            int u, v;
            while (in >> u >> v) spec.edges.push_back({u, v});
        }
    } else {
        throw std::invalid_argument("unknown network kind: " + kind);
    }
    spec.phi = j.value("phi", 0.0);
    if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
    spec.validate();
    return spec;
}

// ---- moment system ----------------------------------------------------------

inline Json motif_decl_json(MotifKey k, const std::vector<std::string>& species) {
    Motif mo = motif_from_key(k);
    Json j;
    j["id"] = motif_id(k);
    j["order"] = mo.order();
    Json edges = Json::array();
    for (int i = 0; i < mo.order(); ++i)
        for (int jn = i + 1; jn < mo.order(); ++jn)
            if (mo.graph.edge(i, jn)) edges.push_back(Json::array({i, jn}));
    j["edges"] = std::move(edges);
    j["labels"] = mo.labels;
    j["name"] = motif_name(mo, species);
    return j;
}

inline Json system_json(const MomentSystem& sys) {
    Json j;
    j["order_k"] = sys.order_k;
    j["model"] = model_json(sys.model);
    Json vars = Json::array(), bnd = Json::array();
    for (MotifKey v : sys.vars) vars.push_back(motif_decl_json(v, sys.model.species));
    for (MotifKey b : sys.boundary) bnd.push_back(motif_decl_json(b, sys.model.species));
    j["variables"] = std::move(vars);
    j["boundary"] = std::move(bnd);
    Json eqs = Json::array();
    for (MotifKey v : sys.vars) {
        Json eq;
        eq["var"] = motif_id(v);
        Json terms = Json::array();
        for (const auto& [col, expr] : sys.rows.at(v)) {
            Json t;
            t["motif"] = motif_id(col);
            t["coeff"] = rate_expr_json(expr);
            terms.push_back(std::move(t));
        }
        eq["terms"] = std::move(terms);
        auto ct = sys.constant.find(v);
        if (ct != sys.constant.end()) eq["constant"] = rate_expr_json(ct->second);
        eqs.push_back(std::move(eq));
    }
    j["equations"] = std::move(eqs);
    Json elim = Json::array();
    for (const auto& [t, aff] : sys.eliminated) {
        Json e;
        e["motif"] = motif_id(t);
        Json lin = Json::array();
        for (const auto& [k2, c2] : aff.lin) {
            Json term;
            term["var"] = motif_id(k2);
            term["coeff"] = rational_json(c2);
            lin.push_back(std::move(term));
        }
        e["lin"] = std::move(lin);
        Json cst = Json::array();
        for (const auto& [g, c] : aff.cst.terms) {
            Json term;
            term["graph"] = graph_id(g);
            term["coeff"] = rational_json(c);
            cst.push_back(std::move(term));
        }
        e["census_constant"] = std::move(cst);
        elim.push_back(std::move(e));
    }
    j["eliminated"] = std::move(elim);
    Json census = Json::array();
    for (const auto& [g, c] : sys.census.counts) {
        Json t;
        t["graph"] = graph_id(g);
        t["count"] = rational_json(c);
        census.push_back(std::move(t));
    }
    j["census"] = std::move(census);
    return j;
}

inline MomentSystem parse_system_json(const Json& j) {
    MomentSystem sys;
    sys.order_k = j.at("order_k").get<int>();
    sys.model = load_model(j.at("model"));
    for (const auto& v : j.at("variables")) sys.vars.push_back(parse_motif_id(v.at("id")));
    for (const auto& b : j.at("boundary")) sys.boundary.push_back(parse_motif_id(b.at("id")));
    for (const auto& eq : j.at("equations")) {
        MotifKey v = parse_motif_id(eq.at("var"));
        SparseRow row;
        for (const auto& t : eq.at("terms"))
            row[parse_motif_id(t.at("motif"))] = parse_rate_expr(t.at("coeff"));
        sys.rows[v] = std::move(row);
        if (eq.contains("constant")) sys.constant[v] = parse_rate_expr(eq.at("constant"));
    }
    for (const auto& e : j.at("eliminated")) {
        MomentSystem::Affine aff;
        for (const auto& t : e.at("lin"))
            aff.lin[parse_motif_id(t.at("var"))] = parse_rational(t.at("coeff"));
        for (const auto& t : e.at("census_constant"))
            aff.cst.add(parse_graph_id(t.at("graph")), parse_rational(t.at("coeff")));
        sys.eliminated[parse_motif_id(e.at("motif"))] = std::move(aff);
    }
    for (const auto& t : j.at("census"))
        sys.census.counts[parse_graph_id(t.at("graph"))] = parse_rational(t.at("count"));
    return sys;
}

/// Human-readable equation listing.
inline std::string system_text(const MomentSystem& sys) {
    std::ostringstream os;
    auto name = [&](MotifKey k) { return motif_name(motif_from_key(k), sys.model.species); };
    for (MotifKey v : sys.vars) {
        os << "d[" << name(v) << "]/dt =";
        bool first = true;
        for (const auto& [col, expr] : sys.rows.at(v)) {
            os << (first ? " " : " + ") << "(" << expr.str(sys.model) << ")[" << name(col) << "]";
            first = false;
        }
        auto ct = sys.constant.find(v);
        if (ct != sys.constant.end()) os << " + (" << ct->second.str(sys.model) << ")";
        if (first) os << " 0";
        os << "\n";
    }
    return os.str();
}

// ---- closed system ----------------------------------------------------------

inline Json closure_json(const ClosureFormula& f, const std::vector<std::string>& species) {
    Json j;
    j["target"] = motif_id(f.target);
    auto factors = [&](const std::map<MotifKey, int>& fs) {
        Json arr = Json::array();
        for (const auto& [mk, e] : fs) {
            Json t;
            t["motif"] = motif_id(mk);
            t["name"] = motif_name(motif_from_key(mk), species);
            t["exp"] = e;
            arr.push_back(std::move(t));
        }
        return arr;
    };
    j["num"] = factors(f.num);
    j["den"] = factors(f.den);
    j["gamma"] = f.gamma;
    if (f.raw) {
        Json pre = Json::array();
        for (const auto& [g, e] : f.census_exponents) {
            Json t;
            t["graph"] = graph_id(g);
            t["exp"] = e;
            pre.push_back(std::move(t));
        }
        j["census_exponents"] = std::move(pre);
    }
    return j;
}

inline ClosureFormula parse_closure_json(const Json& j) {
    ClosureFormula f;
    f.target = parse_motif_id(j.at("target"));
    for (const auto& t : j.at("num")) f.num[parse_motif_id(t.at("motif"))] = t.at("exp").get<int>();
    for (const auto& t : j.at("den")) f.den[parse_motif_id(t.at("motif"))] = t.at("exp").get<int>();
    f.gamma = j.at("gamma").get<std::vector<int>>();
    if (j.contains("census_exponents")) {
        f.raw = true;
        for (const auto& t : j.at("census_exponents"))
            f.census_exponents[parse_graph_id(t.at("graph"))] = t.at("exp").get<int>();
    }
    Motif tm = motif_from_key(f.target);
    f.position_net.assign(tm.order(), 1);  // not serialized; formulas satisfy it
    return f;
}

inline Json closed_system_json(const ClosedSystem& cs) {
    Json j;
    j["order_k"] = cs.order_k;
    j["model"] = model_json(cs.model);
    Json vars = Json::array(), bnd = Json::array();
    for (MotifKey v : cs.vars) vars.push_back(motif_decl_json(v, cs.model.species));
    for (MotifKey b : cs.boundary) bnd.push_back(motif_decl_json(b, cs.model.species));
    j["variables"] = std::move(vars);
    j["boundary"] = std::move(bnd);
    Json eqs = Json::array();
    for (MotifKey v : cs.vars) {
        Json eq;
        eq["var"] = motif_id(v);
        Json terms = Json::array();
        for (const auto& [col, expr] : cs.rows.at(v)) {
            Json t;
            t["motif"] = motif_id(col);
            t["coeff"] = rate_expr_json(expr);
            terms.push_back(std::move(t));
        }
        eq["terms"] = std::move(terms);
        auto ct = cs.constant.find(v);
        if (ct != cs.constant.end()) eq["constant"] = rate_expr_json(ct->second);
        eqs.push_back(std::move(eq));
    }
    j["equations"] = std::move(eqs);
    Json closures = Json::array();
    for (MotifKey b : cs.boundary) {
        Json c;
        c["target"] = motif_id(b);
        Json alts = Json::array();
        for (const ClosureFormula& f : cs.closures.at(b))
            alts.push_back(closure_json(f, cs.model.species));
        c["alternatives"] = std::move(alts);
        closures.push_back(std::move(c));
    }
    j["closures"] = std::move(closures);
    Json res = Json::array();
    for (const auto& [mk, aff] : cs.resolve) {
        Json r;
        r["motif"] = motif_id(mk);
        Json lin = Json::array();
        for (const auto& [vk, c] : aff.lin) {
            Json t;
            t["var"] = motif_id(vk);
            t["coeff"] = c;
            lin.push_back(std::move(t));
        }
        r["lin"] = std::move(lin);
        r["cst"] = aff.cst;
        res.push_back(std::move(r));
    }
    j["resolve"] = std::move(res);
    Json census = Json::array();
    for (const auto& [g, c] : cs.census.counts) {
        Json t;
        t["graph"] = graph_id(g);
        t["count"] = rational_json(c);
        census.push_back(std::move(t));
    }
    j["census"] = std::move(census);
    return j;
}

inline ClosedSystem parse_closed_system_json(const Json& j) {
    ClosedSystem cs;
    cs.order_k = j.at("order_k").get<int>();
    cs.model = load_model(j.at("model"));
    for (const auto& v : j.at("variables")) cs.vars.push_back(parse_motif_id(v.at("id")));
    for (const auto& b : j.at("boundary")) cs.boundary.push_back(parse_motif_id(b.at("id")));
    for (const auto& eq : j.at("equations")) {
        MotifKey v = parse_motif_id(eq.at("var"));
        SparseRow row;
        for (const auto& t : eq.at("terms"))
            row[parse_motif_id(t.at("motif"))] = parse_rate_expr(t.at("coeff"));
        cs.rows[v] = std::move(row);
        if (eq.contains("constant")) cs.constant[v] = parse_rate_expr(eq.at("constant"));
    }
    for (const auto& c : j.at("closures")) {
        MotifKey b = parse_motif_id(c.at("target"));
        for (const auto& alt : c.at("alternatives"))
            cs.closures[b].push_back(parse_closure_json(alt));
    }
    for (const auto& r : j.at("resolve")) {
        ClosedSystem::Affine aff;
        for (const auto& t : r.at("lin"))
            aff.lin[parse_motif_id(t.at("var"))] = t.at("coeff").get<double>();
        aff.cst = r.at("cst").get<double>();
        cs.resolve[parse_motif_id(r.at("motif"))] = std::move(aff);
    }
    for (const auto& t : j.at("census"))
        cs.census.counts[parse_graph_id(t.at("graph"))] = parse_rational(t.at("count"));
    return cs;
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

inline Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    Json j;
    in >> j;
    return j;
}

}  // namespace mf
