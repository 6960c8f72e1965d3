#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "idop/allometry.hpp"
#include "idop/cluster.hpp"
#include "idop/errors.hpp"
#include "idop/glmy.hpp"
#include "idop/ingest.hpp"
#include "idop/network.hpp"
#include "idop/persist.hpp"
#include "idop/qdode.hpp"
#include "idop/select.hpp"
#include "idop/util.hpp"

namespace idop {

enum class HomologyField { Z2, Q };

struct PipelineConfig {
    std::string input;
    std::string output = "idop_out";
    std::uint64_t seed = 1;
    int jobs = 1;

    int cluster_L_max = 3;
    Criterion cluster_criterion = Criterion::BIC;
    int cluster_max_iter = 200;
    double cluster_tol = 1e-6;

    SelectOptions select;
    QdOdeOptions fit;

    int homology_max_dim = 2;
    HomologyField homology_field = HomologyField::Z2;

    FiltrationKind persist_filtration = FiltrationKind::Arrow;
    bool persist_descending = false;
    int persist_path_k_max = 3;

    bool personalize_all = false;
    std::vector<std::string> personalize_samples;
    bool multilayer = false;
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& known,
                                const std::string& where) {
    for (const auto& [key, value] : j.items())
        if (!known.count(key))
            throw ValidationError("unknown config key '" + key + "' in " + where);
}

}  // namespace detail

/// Parses the single-document JSON config; unknown keys are rejected so typos
/// fail loudly instead of silently using defaults.
inline PipelineConfig parse_config(const nlohmann::json& j) {
    PipelineConfig c;
    detail::reject_unknown_keys(j, {"input", "output", "seed", "jobs", "cluster", "select",
                                    "fit", "homology", "persist", "network"},
                                "config root");
    c.input = j.at("input").get<std::string>();
    if (j.contains("output")) c.output = j.at("output").get<std::string>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("jobs")) c.jobs = j.at("jobs").get<int>();
    if (c.jobs < 1) throw ValidationError("jobs must be >= 1");

    if (j.contains("cluster")) {
        const auto& s = j.at("cluster");
        detail::reject_unknown_keys(s, {"L_max", "criterion", "max_iter", "tol"}, "cluster");
        if (s.contains("L_max")) c.cluster_L_max = s.at("L_max").get<int>();
        if (s.contains("criterion")) {
            const std::string crit = s.at("criterion").get<std::string>();
            if (crit == "aic") c.cluster_criterion = Criterion::AIC;
            else if (crit == "bic") c.cluster_criterion = Criterion::BIC;
            else throw ValidationError("criterion must be aic or bic");
        }
        if (s.contains("max_iter")) c.cluster_max_iter = s.at("max_iter").get<int>();
        if (s.contains("tol")) c.cluster_tol = s.at("tol").get<double>();
        if (c.cluster_L_max < 1) throw ValidationError("L_max must be >= 1");
    }
    if (j.contains("select")) {
        const auto& s = j.at("select");
        detail::reject_unknown_keys(
            s, {"folds", "max_regulators", "lambda_count", "lambda_min_ratio"}, "select");
        if (s.contains("folds")) c.select.cv_folds = s.at("folds").get<int>();
        if (s.contains("max_regulators"))
            c.select.max_regulators = s.at("max_regulators").get<int>();
        if (s.contains("lambda_count")) c.select.lambda_count = s.at("lambda_count").get<int>();
        if (s.contains("lambda_min_ratio"))
            c.select.lambda_min_ratio = s.at("lambda_min_ratio").get<double>();
        if (c.select.cv_folds < 2) throw ValidationError("folds must be >= 2");
        if (c.select.max_regulators < 0) throw ValidationError("max_regulators must be >= 0");
    }
    if (j.contains("fit")) {
        const auto& s = j.at("fit");
        detail::reject_unknown_keys(s, {"lop_order", "mode"}, "fit");
        if (s.contains("lop_order")) c.fit.lop_order = s.at("lop_order").get<int>();
        if (s.contains("mode")) {
            const std::string mode = s.at("mode").get<std::string>();
            if (mode == "ls") c.fit.mode = FitMode::LeastSquares;
            else if (mode == "mle") c.fit.mode = FitMode::Gaussian;
            else throw ValidationError("fit mode must be ls or mle");
        }
        if (c.fit.lop_order < 1 || c.fit.lop_order > 8)
            throw ValidationError("lop_order must be in 1..8");
    }
    if (j.contains("homology")) {
        const auto& s = j.at("homology");
        detail::reject_unknown_keys(s, {"max_dim", "field"}, "homology");
        if (s.contains("max_dim")) c.homology_max_dim = s.at("max_dim").get<int>();
        if (s.contains("field")) {
            const std::string field = s.at("field").get<std::string>();
            if (field == "z2") c.homology_field = HomologyField::Z2;
            else if (field == "q") c.homology_field = HomologyField::Q;
            else throw ValidationError("field must be z2 or q");
        }
        if (c.homology_max_dim < 0) throw ValidationError("max_dim must be >= 0");
    }
    if (j.contains("persist")) {
        const auto& s = j.at("persist");
        detail::reject_unknown_keys(s, {"filtration", "descending", "k_max"}, "persist");
        if (s.contains("filtration")) {
            const std::string kind = s.at("filtration").get<std::string>();
            if (kind == "arrow") c.persist_filtration = FiltrationKind::Arrow;
            else if (kind == "path") c.persist_filtration = FiltrationKind::Path;
            else throw ValidationError("filtration must be arrow or path");
        }
        if (s.contains("descending")) c.persist_descending = s.at("descending").get<bool>();
        if (s.contains("k_max")) c.persist_path_k_max = s.at("k_max").get<int>();
    }
    if (j.contains("network")) {
        const auto& s = j.at("network");
        detail::reject_unknown_keys(s, {"personalize", "multilayer"}, "network");
        if (s.contains("personalize")) {
            if (s.at("personalize").is_string() && s.at("personalize").get<std::string>() == "all")
                c.personalize_all = true;
            else
                for (const auto& id : s.at("personalize"))
                    c.personalize_samples.push_back(id.get<std::string>());
        }
        if (s.contains("multilayer")) c.multilayer = s.at("multilayer").get<bool>();
    }
    return c;
}

inline PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(j);
}

struct StageRecord {
    std::string name;
    std::vector<std::string> outputs;
    double duration_ms = 0.0;
};

struct RunManifest {
    std::uint64_t seed = 0;
    std::vector<StageRecord> stages;
    std::map<std::string, std::string> output_hashes;  // path -> fnv1a
    bool ok = false;
    std::string error;
};

namespace detail {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write: " + path);
    out << text;
    if (!out) throw ValidationError("write failed: " + path);
}

}  // namespace detail

inline nlohmann::json manifest_to_json(const RunManifest& m) {
    nlohmann::json j;
    j["seed"] = m.seed;
    j["ok"] = m.ok;
    if (!m.error.empty()) j["error"] = m.error;
    j["stages"] = nlohmann::json::array();
    for (const auto& s : m.stages) {
        nlohmann::json stage;
        stage["name"] = s.name;
        stage["outputs"] = s.outputs;
        stage["duration_ms"] = s.duration_ms;  // timing: excluded from determinism checks
        j["stages"].push_back(stage);
    }
    j["output_hashes"] = m.output_hashes;
    return j;
}

/// Fits per-variable allometric power laws; CSV body is one row per variable.
inline std::string allometry_csv(const ExpressionMatrix& matrix) {
    std::string csv = "variable_id,alpha,beta,r_squared,n_used\n";
    for (Eigen::Index jv = 0; jv < matrix.variables(); ++jv) {
        PowerLawFit fit = fit_power_law(matrix.index, matrix.values.row(jv).transpose());
        csv += matrix.variable_ids[static_cast<size_t>(jv)] + "," + format_double(fit.alpha) +
               "," + format_double(fit.beta) + "," + format_double(fit.r_squared) + "," +
               std::to_string(fit.n_used) + "\n";
    }
    return csv;
}

inline std::string regulators_csv(const std::vector<RegulatorSet>& sets) {
    std::string csv = "target,regulator,coefficient,lambda_used\n";
    for (const auto& set : sets)
        for (const auto& [rid, coef] : set.regulators)
            csv += set.target + "," + rid + "," + format_double(coef) + "," +
                   format_double(set.lambda_used) + "\n";
    return csv;
}

inline nlohmann::json cluster_to_json(const ModuleCountResult& res) {
    nlohmann::json j;
    j["L"] = res.best_L;
    j["scores"] = res.scores;
    j["log_likelihoods"] = res.log_likelihoods;
    j["proportions"] = std::vector<double>(
        res.best_model.proportions.data(),
        res.best_model.proportions.data() + res.best_model.proportions.size());
    j["mean_params"] = nlohmann::json::array();
    for (const auto& [alpha, beta] : res.best_model.mean_params)
        j["mean_params"].push_back({{"alpha", alpha}, {"beta", beta}});
    j["covariance"] = {{"phi", res.best_model.covariance.phi},
                       {"sigma2", res.best_model.covariance.sigma2}};
    j["assignments"] = res.best_model.assignments;
    j["log_likelihood"] = res.best_model.log_likelihood;
    return j;
}

inline nlohmann::json fits_to_json(const std::vector<QdOdeFit>& fits) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& fit : fits) {
        nlohmann::json f;
        f["target"] = fit.target;
        f["self_rate"] = fit.self_rate;
        f["sse"] = fit.sse;
        f["coefficients"] = nlohmann::json::object();
        for (const auto& [rid, coef] : fit.regulator_coeffs) f["coefficients"][rid] = coef;
        f["grid"] = fit.grid;
        f["fitted"] = fit.fitted_trajectory;
        f["independent"] = fit.independent_curve;
        f["dependent"] = nlohmann::json::object();
        for (size_t k = 0; k < fit.regulator_coeffs.size(); ++k)
            f["dependent"][fit.regulator_coeffs[k].first] = fit.dependent_curves[k];
        j.push_back(f);
    }
    return j;
}

inline std::string barcode_csv(const std::vector<Barcode>& codes) {
    std::string csv = "dimension,birth,death,multiplicity\n";
    for (const auto& code : codes)
        for (const auto& iv : code.intervals)
            csv += std::to_string(code.dimension) + "," + format_double(iv.birth) + "," +
                   (iv.infinite() ? std::string("inf") : format_double(iv.death)) + "," +
                   std::to_string(iv.multiplicity) + "\n";
    return csv;
}

/// Runs ingest -> cluster -> select -> fit -> network -> homology ->
/// persistence, writing each stage's outputs under config.output. A stage
/// failure persists the manifest with the error and rethrows.
inline RunManifest run_pipeline(const PipelineConfig& config) {
    namespace fs = std::filesystem;
    RunManifest manifest;
    manifest.seed = config.seed;
    fs::create_directories(config.output);

    auto stage_path = [&](const std::string& name) {
        return (fs::path(config.output) / name).string();
    };
    auto run_stage = [&](const std::string& name, auto&& body) {
        const auto start = std::chrono::steady_clock::now();
        StageRecord rec;
        rec.name = name;
        rec.outputs = body();
        rec.duration_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                .count();
        for (const auto& path : rec.outputs)
            manifest.output_hashes[fs::path(path).filename().string()] =
                fnv1a_hex(detail::read_file(path));
        manifest.stages.push_back(std::move(rec));
    };
    auto persist_manifest = [&] {
        detail::write_text(stage_path("manifest.json"), manifest_to_json(manifest).dump(2) + "\n");
    };

    try {
        // stage 1: ingest
        ExpressionMatrix matrix;
        run_stage("ingest", [&] {
            matrix = load_expression_matrix(config.input);
            if (matrix.samples() < 3)
                throw ValidationError("pipeline needs at least 3 samples");
            save_expression_matrix(matrix, stage_path("ingest.csv"));
            return std::vector<std::string>{stage_path("ingest.csv")};
        });
        const ScaledIndex scaled = scale_index(matrix.index);

        // stage 2: cluster
        ModuleCountResult clustering;
        run_stage("cluster", [&] {
            EmOptions opts;
            opts.max_iter = config.cluster_max_iter;
            opts.tol = config.cluster_tol;
            opts.seed = config.seed;
            clustering = select_module_count(matrix, config.cluster_L_max,
                                             config.cluster_criterion, opts);
            detail::write_text(stage_path("cluster.json"),
                               cluster_to_json(clustering).dump(2) + "\n");
            return std::vector<std::string>{stage_path("cluster.json")};
        });

        // stage 3: select
        std::vector<RegulatorSet> sets;
        run_stage("select", [&] {
            for (Eigen::Index jv = 0; jv < matrix.variables(); ++jv)
                sets.push_back(select_regulators(
                    matrix, matrix.variable_ids[static_cast<size_t>(jv)], config.select));
            detail::write_text(stage_path("regulators.csv"), regulators_csv(sets));
            return std::vector<std::string>{stage_path("regulators.csv")};
        });

        // stage 4: fit
        std::vector<QdOdeFit> fits(static_cast<size_t>(matrix.variables()));
        run_stage("fit", [&] {
            std::vector<std::string> failures(fits.size());
            auto run_range = [&](Eigen::Index lo, Eigen::Index hi) {
                for (Eigen::Index jv = lo; jv < hi; ++jv) {
                    try {
                        fits[static_cast<size_t>(jv)] =
                            fit_qdode(matrix, scaled,
                                      matrix.variable_ids[static_cast<size_t>(jv)],
                                      sets[static_cast<size_t>(jv)], config.fit);
                    } catch (const std::exception& e) {
                        failures[static_cast<size_t>(jv)] = e.what();
                    }
                }
            };
            const Eigen::Index m = matrix.variables();
            if (config.jobs <= 1 || m < 2) {
                run_range(0, m);
            } else {
                std::vector<std::thread> workers;
                const Eigen::Index chunk = (m + config.jobs - 1) / config.jobs;
                for (int w = 0; w < config.jobs; ++w) {
                    const Eigen::Index lo = w * chunk;
                    const Eigen::Index hi = std::min<Eigen::Index>(m, lo + chunk);
                    if (lo < hi) workers.emplace_back(run_range, lo, hi);
                }
                for (auto& t : workers) t.join();
            }
            for (size_t jv = 0; jv < failures.size(); ++jv)
                if (!failures[jv].empty())
                    throw NumericError("fit failed for " + matrix.variable_ids[jv] + ": " +
                                       failures[jv]);
            detail::write_text(stage_path("fits.json"), fits_to_json(fits).dump(2) + "\n");
            return std::vector<std::string>{stage_path("fits.json")};
        });

        // stage 5: network
        IdopNetwork network;
        run_stage("network", [&] {
            std::vector<std::string> outputs;
            network = assemble_network(fits, clustering.best_model.assignments);
            export_network(network, stage_path("network.json"));
            export_network(network, stage_path("network.dot"), /*dot=*/true);
            outputs.push_back(stage_path("network.json"));
            outputs.push_back(stage_path("network.dot"));

            std::vector<std::string> wanted = config.personalize_samples;
            if (config.personalize_all) wanted = matrix.sample_ids;
            for (const auto& sid : wanted) {
                const Eigen::Index pos = matrix.sample_position(sid);
                IdopNetwork personal =
                    personalize(fits, clustering.best_model.assignments, scaled, pos);
                const std::string path = stage_path("network_sample_" + sid + ".json");
                export_network(personal, path);
                outputs.push_back(path);
            }
            if (config.multilayer) {
                MultilayerNetwork multi =
                    build_multilayer(matrix, clustering.best_model.assignments, config.select,
                                     config.fit, config.jobs);
                nlohmann::json mj;
                mj["module_layer"] = network_to_json(multi.module_layer);
                mj["variable_layers"] = nlohmann::json::object();
                for (const auto& [label, layer] : multi.variable_layers)
                    mj["variable_layers"][label] = network_to_json(layer);
                detail::write_text(stage_path("multilayer.json"), mj.dump(2) + "\n");
                outputs.push_back(stage_path("multilayer.json"));
            }
            return outputs;
        });

        const NetworkDigraph nd = network_to_digraph(network);

        // stage 6: homology
        run_stage("homology", [&] {
            std::vector<std::size_t> betti =
                config.homology_field == HomologyField::Z2
                    ? path_homology<Z2>(nd.graph, config.homology_max_dim)
                    : path_homology<Rational>(nd.graph, config.homology_max_dim);
            nlohmann::json j;
            j["field"] = config.homology_field == HomologyField::Z2 ? "z2" : "q";
            j["max_dim"] = config.homology_max_dim;
            j["betti"] = betti;
            detail::write_text(stage_path("betti.json"), j.dump(2) + "\n");
            return std::vector<std::string>{stage_path("betti.json")};
        });

        // stage 7: persistence
        run_stage("persist", [&] {
            Filtration filtration =
                config.persist_filtration == FiltrationKind::Arrow
                    ? arrow_filtration({nd.graph, nd.weights}, config.persist_descending)
                    : path_filtration(nd.graph, config.persist_path_k_max);
            std::vector<Barcode> codes;
            for (int p = 0; p <= config.homology_max_dim; ++p)
                codes.push_back(config.homology_field == HomologyField::Z2
                                    ? barcode<Z2>(filtration, p)
                                    : barcode<Rational>(filtration, p));
            detail::write_text(stage_path("barcode.csv"), barcode_csv(codes));
            return std::vector<std::string>{stage_path("barcode.csv")};
        });

        manifest.ok = true;
        persist_manifest();
    } catch (const std::exception& e) {
        manifest.ok = false;
        manifest.error = e.what();
        persist_manifest();
        throw;
    }
    return manifest;
}

}  // namespace idop
