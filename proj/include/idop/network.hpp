#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "idop/cluster.hpp"
#include "idop/digraph.hpp"
#include "idop/errors.hpp"
#include "idop/ingest.hpp"
#include "idop/qdode.hpp"
#include "idop/select.hpp"
#include "idop/util.hpp"

namespace idop {

struct NetworkNode {
    std::string id;
    int module = 0;
    double effect = 0.0;

    bool operator==(const NetworkNode&) const = default;
};

struct NetworkEdge {
    std::string source;
    std::string target;
    double weight = 0.0;
    int sign = 1;

    bool operator==(const NetworkEdge&) const = default;
};

enum class NetworkLayer { Variable, Module };

enum class WeightRule { MeanAbs, FinalAbs, MaxAbs };

/// Signed weighted digraph with node effects. Nodes follow fit order; edges
/// are sorted by (target, source) for deterministic output.
struct IdopNetwork {
    NetworkLayer layer = NetworkLayer::Variable;
    std::vector<NetworkNode> nodes;
    std::vector<NetworkEdge> edges;

    bool operator==(const IdopNetwork&) const = default;

    const NetworkNode& node(const std::string& id) const {
        for (const auto& n : nodes)
            if (n.id == id) return n;
        throw ValidationError("unknown node: " + id);
    }

    bool has_node(const std::string& id) const {
        return std::any_of(nodes.begin(), nodes.end(),
                           [&](const NetworkNode& n) { return n.id == id; });
    }
};

namespace detail {

inline double curve_weight(const std::vector<double>& curve, WeightRule rule) {
    if (curve.empty()) return 0.0;
    switch (rule) {
        case WeightRule::FinalAbs:
            return std::abs(curve.back());
        case WeightRule::MaxAbs: {
            double mx = 0.0;
            for (double v : curve) mx = std::max(mx, std::abs(v));
            return mx;
        }
        case WeightRule::MeanAbs:
        default: {
            double acc = 0.0;
            for (double v : curve) acc += std::abs(v);
            return acc / static_cast<double>(curve.size());
        }
    }
}

inline void sort_edges(std::vector<NetworkEdge>& edges) {
    std::sort(edges.begin(), edges.end(), [](const NetworkEdge& a, const NetworkEdge& b) {
        return std::tie(a.target, a.source) < std::tie(b.target, b.source);
    });
}

}  // namespace detail

/// Aggregate network: node effects are the final value of each independent
/// curve; an edge j'->j exists for every nonzero fitted coefficient, weighted
/// by the mean |dependent curve| over the dense grid (other rules optional).
inline IdopNetwork assemble_network(const std::vector<QdOdeFit>& fits,
                                    const std::vector<int>& assignments,
                                    NetworkLayer layer = NetworkLayer::Variable,
                                    WeightRule rule = WeightRule::MeanAbs) {
    if (!assignments.empty() && assignments.size() != fits.size())
        throw ValidationError("assignments must match the fit count");
    IdopNetwork net;
    net.layer = layer;
    std::set<std::string> seen;
    for (size_t j = 0; j < fits.size(); ++j) {
        if (!seen.insert(fits[j].target).second)
            throw ValidationError("duplicate fit for target " + fits[j].target);
        net.nodes.push_back({fits[j].target,
                             assignments.empty() ? 0 : assignments[j],
                             fits[j].independent_curve.empty() ? 0.0
                                                               : fits[j].independent_curve.back()});
    }
    for (const auto& fit : fits) {
        for (size_t k = 0; k < fit.regulator_coeffs.size(); ++k) {
            const auto& [rid, coef] = fit.regulator_coeffs[k];
            if (coef == 0.0) continue;
            const double weight = detail::curve_weight(fit.dependent_curves[k], rule);
            if (weight <= 0.0) continue;
            net.edges.push_back({rid, fit.target, weight, coef > 0.0 ? 1 : -1});
        }
    }
    detail::sort_edges(net.edges);
    return net;
}

/// Per-sample network: same topology as the aggregate, with node effects and
/// edge weights read off the decomposed curves at the grid point nearest the
/// sample's scaled index (weights may be zero there, e.g. at the minimal
/// index where cumulative effects start).
inline IdopNetwork personalize(const std::vector<QdOdeFit>& fits,
                               const std::vector<int>& assignments, const ScaledIndex& scaled,
                               Eigen::Index sample) {
    if (sample < 0 || sample >= scaled.scaled.size())
        throw ValidationError("sample index out of range");
    const double nu = scaled.scaled[sample];

    IdopNetwork net;
    net.layer = NetworkLayer::Variable;
    std::set<std::string> seen;
    for (size_t j = 0; j < fits.size(); ++j) {
        const auto& fit = fits[j];
        if (!seen.insert(fit.target).second)
            throw ValidationError("duplicate fit for target " + fit.target);
        size_t nearest = 0;
        double best = std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < fit.grid.size(); ++i) {
            const double d = std::abs(fit.grid[i] - nu);
            if (d < best) { best = d; nearest = i; }
        }
        net.nodes.push_back({fit.target, assignments.empty() ? 0 : assignments[j],
                             fit.independent_curve.empty() ? 0.0
                                                           : fit.independent_curve[nearest]});
        for (size_t k = 0; k < fit.regulator_coeffs.size(); ++k) {
            const auto& [rid, coef] = fit.regulator_coeffs[k];
            if (coef == 0.0) continue;
            net.edges.push_back({rid, fit.target, std::abs(fit.dependent_curves[k][nearest]),
                                 coef > 0.0 ? 1 : -1});
        }
    }
    detail::sort_edges(net.edges);
    return net;
}

struct DegreeStrength {
    int in_degree = 0;
    int out_degree = 0;
    double in_strength = 0.0;
    double out_strength = 0.0;
};

/// Degrees count incident edges by direction; strengths sum sign * weight.
inline DegreeStrength degree_strength(const IdopNetwork& net, const std::string& node_id) {
    if (!net.has_node(node_id)) throw ValidationError("unknown node: " + node_id);
    DegreeStrength ds;
    for (const auto& e : net.edges) {
        if (e.target == node_id) {
            ++ds.in_degree;
            ds.in_strength += e.sign * e.weight;
        }
        if (e.source == node_id) {
            ++ds.out_degree;
            ds.out_strength += e.sign * e.weight;
        }
    }
    return ds;
}

inline nlohmann::json network_to_json(const IdopNetwork& net) {
    nlohmann::json j;
    j["layer"] = net.layer == NetworkLayer::Variable ? "variable" : "module";
    j["nodes"] = nlohmann::json::array();
    for (const auto& n : net.nodes)
        j["nodes"].push_back({{"id", n.id}, {"module", n.module}, {"effect", n.effect}});
    j["edges"] = nlohmann::json::array();
    for (const auto& e : net.edges)
        j["edges"].push_back(
            {{"source", e.source}, {"target", e.target}, {"weight", e.weight}, {"sign", e.sign}});
    return j;
}

inline IdopNetwork network_from_json(const nlohmann::json& j) {
    IdopNetwork net;
    const std::string layer = j.at("layer").get<std::string>();
    if (layer == "variable")
        net.layer = NetworkLayer::Variable;
    else if (layer == "module")
        net.layer = NetworkLayer::Module;
    else
        throw ValidationError("unknown network layer: " + layer);
    for (const auto& n : j.at("nodes"))
        net.nodes.push_back({n.at("id").get<std::string>(), n.at("module").get<int>(),
                             n.at("effect").get<double>()});
    for (const auto& e : j.at("edges")) {
        const int sign = e.at("sign").get<int>();
        if (sign != 1 && sign != -1) throw ValidationError("edge sign must be +1 or -1");
        net.edges.push_back({e.at("source").get<std::string>(), e.at("target").get<std::string>(),
                             e.at("weight").get<double>(), sign});
    }
    for (const auto& e : net.edges)
        if (!net.has_node(e.source) || !net.has_node(e.target))
            throw ValidationError("edge endpoint is not a node");
    return net;
}

/// DOT export; promoting edges are red, inhibiting edges blue.
inline std::string network_to_dot(const IdopNetwork& net) {
    std::string out = "digraph idop {\n";
    for (const auto& n : net.nodes)
        out += "  \"" + n.id + "\" [module=" + std::to_string(n.module) +
               ", effect=" + format_double(n.effect) + "];\n";
    for (const auto& e : net.edges)
        out += "  \"" + e.source + "\" -> \"" + e.target + "\" [weight=" +
               format_double(e.weight) + ", sign=" + (e.sign > 0 ? std::string("1") : "-1") +
               ", color=" + (e.sign > 0 ? "red" : "blue") + "];\n";
    out += "}\n";
    return out;
}

inline void export_network(const IdopNetwork& net, const std::string& path, bool dot = false) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write: " + path);
    if (dot)
        out << network_to_dot(net);
    else
        out << network_to_json(net).dump(2) << '\n';
    if (!out) throw ValidationError("write failed: " + path);
}

/// Drops signs and weights for homology; vertices follow node order.
struct NetworkDigraph {
    Digraph graph;
    std::vector<double> weights;       // aligned with graph.arrows()
    std::vector<std::string> labels;   // vertex -> node id
};

inline NetworkDigraph network_to_digraph(const IdopNetwork& net) {
    NetworkDigraph nd;
    std::map<std::string, int> index;
    for (const auto& n : net.nodes) {
        index.emplace(n.id, static_cast<int>(nd.labels.size()));
        nd.labels.push_back(n.id);
    }
    std::vector<std::pair<int, int>> arrows;
    std::vector<double> weights;
    for (const auto& e : net.edges) {
        arrows.emplace_back(index.at(e.source), index.at(e.target));
        weights.push_back(e.weight);
    }
    WeightedDigraph wd = make_weighted_digraph(static_cast<int>(nd.labels.size()), arrows, weights);
    nd.graph = std::move(wd.graph);
    nd.weights = std::move(wd.weights);
    return nd;
}

/// select -> fit -> assemble for every variable of a matrix against a fixed
/// scaled index. Fits run across `jobs` threads; results land in
/// target-indexed slots so the outcome is order-deterministic.
inline std::vector<QdOdeFit> fit_all_targets(const ExpressionMatrix& matrix,
                                             const ScaledIndex& scaled,
                                             const SelectOptions& select_opts,
                                             const QdOdeOptions& fit_opts, int jobs = 1) {
    const Eigen::Index m = matrix.variables();
    std::vector<RegulatorSet> sets(static_cast<size_t>(m));
    for (Eigen::Index j = 0; j < m; ++j)
        sets[static_cast<size_t>(j)] =
            select_regulators(matrix, matrix.variable_ids[static_cast<size_t>(j)], select_opts);

    std::vector<QdOdeFit> fits(static_cast<size_t>(m));
    std::vector<std::string> failures(static_cast<size_t>(m));
    auto run_range = [&](Eigen::Index lo, Eigen::Index hi) {
        for (Eigen::Index j = lo; j < hi; ++j) {
            try {
                fits[static_cast<size_t>(j)] =
                    fit_qdode(matrix, scaled, matrix.variable_ids[static_cast<size_t>(j)],
                              sets[static_cast<size_t>(j)], fit_opts);
            } catch (const std::exception& e) {
                failures[static_cast<size_t>(j)] = e.what();
            }
        }
    };
    jobs = std::max(1, jobs);
    if (jobs == 1 || m < 2) {
        run_range(0, m);
    } else {
        std::vector<std::thread> workers;
        const Eigen::Index chunk = (m + jobs - 1) / jobs;
        for (int w = 0; w < jobs; ++w) {
            const Eigen::Index lo = w * chunk, hi = std::min<Eigen::Index>(m, lo + chunk);
            if (lo < hi) workers.emplace_back(run_range, lo, hi);
        }
        for (auto& t : workers) t.join();
    }
    for (Eigen::Index j = 0; j < m; ++j)
        if (!failures[static_cast<size_t>(j)].empty())
            throw NumericError("fit failed for " +
                               matrix.variable_ids[static_cast<size_t>(j)] + ": " +
                               failures[static_cast<size_t>(j)]);
    return fits;
}

struct MultilayerNetwork {
    IdopNetwork module_layer;
    std::vector<std::pair<std::string, IdopNetwork>> variable_layers;  // by module label
};

/// Module layer from summed module expression (the global index is reused:
/// module sums partition the column totals), plus one variable layer per
/// module restricted to that module's members.
inline MultilayerNetwork build_multilayer(const ExpressionMatrix& matrix,
                                          const std::vector<int>& assignments,
                                          const SelectOptions& select_opts,
                                          const QdOdeOptions& fit_opts, int jobs = 1) {
    MultilayerNetwork multi;
    ExpressionMatrix modules = module_expression(matrix, assignments);
    const ScaledIndex scaled = scale_index(matrix.index);

    if (modules.variables() >= 2) {
        std::vector<int> module_ids(static_cast<size_t>(modules.variables()));
        std::iota(module_ids.begin(), module_ids.end(), 0);
        std::vector<QdOdeFit> fits =
            fit_all_targets(modules, scaled, select_opts, fit_opts, jobs);
        multi.module_layer = assemble_network(fits, module_ids, NetworkLayer::Module);
    } else {
        multi.module_layer.layer = NetworkLayer::Module;
        RegulatorSet none;
        none.target = modules.variable_ids[0];
        QdOdeFit fit = fit_qdode(modules, scaled, none.target, none, fit_opts);
        multi.module_layer.nodes.push_back({none.target, 0, fit.independent_curve.back()});
    }

    const int L = static_cast<int>(modules.variables());
    for (int l = 0; l < L; ++l) {
        std::vector<Eigen::Index> members;
        for (Eigen::Index j = 0; j < matrix.variables(); ++j)
            if (assignments[static_cast<size_t>(j)] == l) members.push_back(j);

        IdopNetwork layer;
        layer.layer = NetworkLayer::Variable;
        if (members.size() >= 2) {
            Eigen::MatrixXd sub(static_cast<Eigen::Index>(members.size()), matrix.samples());
            std::vector<std::string> ids;
            for (size_t r = 0; r < members.size(); ++r) {
                sub.row(static_cast<Eigen::Index>(r)) = matrix.values.row(members[r]);
                ids.push_back(matrix.variable_ids[static_cast<size_t>(members[r])]);
            }
            ExpressionMatrix subm;
            subm.variable_ids = std::move(ids);
            subm.sample_ids = matrix.sample_ids;
            subm.values = std::move(sub);
            subm.index = matrix.index;  // global index reused for every layer
            std::vector<int> labels(members.size(), l);
            std::vector<QdOdeFit> fits =
                fit_all_targets(subm, scaled, select_opts, fit_opts, jobs);
            layer = assemble_network(fits, labels, NetworkLayer::Variable);
        } else if (members.size() == 1) {
            const auto& id = matrix.variable_ids[static_cast<size_t>(members[0])];
            RegulatorSet none;
            none.target = id;
            QdOdeFit fit = fit_qdode(matrix, scaled, id, none, fit_opts);
            layer.nodes.push_back({id, l, fit.independent_curve.back()});
        }
        multi.variable_layers.emplace_back(modules.variable_ids[static_cast<size_t>(l)],
                                           std::move(layer));
    }
    return multi;
}

}  // namespace idop
