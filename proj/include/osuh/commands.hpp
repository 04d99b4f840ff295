// Command layer behind the CLI: config parsing with unknown-key rejection,
// reproducible outputs, and one function per subcommand. Each run echoes its
// fully resolved config and the tool version into the output directory.
#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "osuh/counterfactual.hpp"
#include "osuh/estimate.hpp"
#include "osuh/ident_lab.hpp"
#include "osuh/io.hpp"

namespace osuh {

#ifndef OSUH_VERSION
#define OSUH_VERSION "dev"
#endif

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                       const std::string& context) {
    if (!j.is_object()) throw ConfigError(context + ": expected a JSON object");
    for (const auto& [key, value] : j.items())
        if (allowed.find(key) == allowed.end())
            throw ConfigError("unknown config key '" + context + "." + key + "'");
}

template <class T>
T get_or(const nlohmann::json& j, const std::string& key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for writing: " + path.string());
    out << content;
}

inline void write_manifest(const std::filesystem::path& out_dir, const std::string& command,
                           const nlohmann::json& resolved) {
    nlohmann::json m;
    m["command"] = command;
    m["version"] = OSUH_VERSION;
    m["config"] = resolved;
    m["timestamp_utc"] =
        std::chrono::duration_cast<std::chrono::seconds>(
            std::chrono::system_clock::now().time_since_epoch())
            .count();
    write_file(out_dir / "manifest.json", m.dump(2) + "\n");
}

inline SyntheticDgp dgp_from_json(const nlohmann::json& j) {
    check_keys(j, {"tau_alpha", "tau_beta", "cond_alpha", "cond_beta_scale"}, "dgp");
    const double ta = get_or(j, "tau_alpha", 3.0);
    const double tb = get_or(j, "tau_beta", 1.5);
    const double ca = get_or(j, "cond_alpha", 1.5);
    const double cb = get_or(j, "cond_beta_scale", 1.5);
    return SyntheticDgp{BetaParams(ta, tb), [ca](double) { return ca; },
                        [cb](double tau) { return cb * (1.0 + tau); }};
}

inline std::vector<double> pmf_from_json(const nlohmann::json& j, const std::string& context) {
    std::vector<double> pmf = j.get<std::vector<double>>();
    double s = 0.0;
    for (double p : pmf) {
        if (p < 0.0) throw ConfigError(context + ": negative pmf entry");
        s += p;
    }
    if (std::abs(s - 1.0) > 1e-9) throw ConfigError(context + ": pmf must sum to one");
    return pmf;
}

inline int draw_from_pmf(const std::vector<double>& pmf, double u) {
    double acc = 0.0;
    for (std::size_t k = 0; k < pmf.size(); ++k) {
        acc += pmf[k];
        if (u <= acc) return int(k);
    }
    return int(pmf.size()) - 1;
}

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    std::string to_string() const {
        std::ostringstream out;
        for (std::size_t c = 0; c < columns.size(); ++c)
            out << columns[c] << (c + 1 < columns.size() ? ',' : '\n');
        for (const auto& row : rows)
            for (std::size_t c = 0; c < row.size(); ++c)
                out << format_double(row[c]) << (c + 1 < row.size() ? ',' : '\n');
        return out.str();
    }
};

}  // namespace detail

// simulate: draws a dataset from the synthetic DGP and writes it as CSV.
inline void run_simulate(nlohmann::json cfg, const std::string& out_dir) {
    detail::check_keys(cfg, {"mode", "seed", "m", "n", "r", "dgp", "R", "N_pmf"}, "simulate");
    const std::string mode = detail::get_or<std::string>(cfg, "mode", "triples");
    const std::uint64_t seed = detail::get_or<std::uint64_t>(cfg, "seed", 0);
    const auto dgp = detail::dgp_from_json(cfg.contains("dgp") ? cfg.at("dgp") : nlohmann::json::object());
    std::filesystem::create_directories(out_dir);

    if (mode == "triples") {
        const std::size_t m = detail::get_or<std::size_t>(cfg, "m", 1000);
        const int n = detail::get_or<int>(cfg, "n", 4);
        const int r = detail::get_or<int>(cfg, "r", 3);
        if (m == 0) throw ConfigError("simulate.m: need at least one auction");
        const auto data = sample_triples(dgp, m, n, r, seed);
        write_triples_csv((std::filesystem::path(out_dir) / "data.csv").string(), data);
        cfg["mode"] = mode;
        cfg["seed"] = seed;
        cfg["m"] = m;
        cfg["n"] = n;
        cfg["r"] = r;
    } else if (mode == "censored") {
        const std::size_t m = detail::get_or<std::size_t>(cfg, "m", 477);
        const double R = detail::get_or<double>(cfg, "R", 0.7);
        if (m == 0) throw ConfigError("simulate.m: need at least one auction");
        if (!cfg.contains("N_pmf")) throw ConfigError("simulate.N_pmf: required in censored mode");
        const auto pmf = detail::pmf_from_json(cfg.at("N_pmf"), "simulate.N_pmf");
        std::vector<CensoredAuctionObs> data;
        data.reserve(m);
        for (std::size_t i = 0; i < m; ++i) {
            auto eng = make_engine(seed ^ 0x4E5F504D46ULL, i);
            std::uniform_real_distribution<double> unif(0.0, 1.0);
            const int N = detail::draw_from_pmf(pmf, unif(eng));
            data.push_back(sample_censored(dgp, N, R, seed, i));
        }
        write_censored_csv((std::filesystem::path(out_dir) / "data.csv").string(), data);
        cfg["mode"] = mode;
        cfg["seed"] = seed;
        cfg["m"] = m;
        cfg["R"] = R;
    } else {
        throw ConfigError("simulate.mode: expected 'triples' or 'censored'");
    }
    detail::write_manifest(out_dir, "simulate", cfg);
}

namespace detail {

inline FitConfig fit_config_from_json(const nlohmann::json& cfg) {
    FitConfig fc;
    fc.p_m = get_or<int>(cfg, "p_m", 5);
    fc.n_starts = get_or<int>(cfg, "n_starts", 8);
    fc.max_iters = get_or<int>(cfg, "max_iters", 2000);
    fc.grad_tol = get_or<double>(cfg, "grad_tol", 1e-6);
    fc.start_spread = get_or<double>(cfg, "start_spread", 1.0);
    fc.seed = get_or<std::uint64_t>(cfg, "seed", 0);
    fc.threads = get_or<int>(cfg, "threads", 1);
    if (cfg.contains("integration")) {
        const auto& integ = cfg.at("integration");
        check_keys(integ, {"type", "nodes", "draws"}, "integration");
        const std::string type = get_or<std::string>(integ, "type", "quadrature");
        if (type == "quadrature")
            fc.integration.kind = IntegrationSpec::Kind::Quadrature;
        else if (type == "mc")
            fc.integration.kind = IntegrationSpec::Kind::MonteCarlo;
        else
            throw ConfigError("integration.type: expected 'quadrature' or 'mc'");
        fc.integration.nodes = get_or<int>(integ, "nodes", 64);
        fc.integration.mc_draws = get_or<int>(integ, "draws", 200);
    }
    return fc;
}

inline nlohmann::json fit_config_to_json(const FitConfig& fc) {
    nlohmann::json j;
    j["p_m"] = fc.p_m;
    j["n_starts"] = fc.n_starts;
    j["max_iters"] = fc.max_iters;
    j["grad_tol"] = fc.grad_tol;
    j["start_spread"] = fc.start_spread;
    j["seed"] = fc.seed;
    j["threads"] = fc.threads;
    j["integration"] = {
        {"type", fc.integration.kind == IntegrationSpec::Kind::Quadrature ? "quadrature" : "mc"},
        {"nodes", fc.integration.nodes},
        {"draws", fc.integration.mc_draws}};
    return j;
}

inline std::string csv_header_of(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open dataset: " + path);
    std::string line;
    std::getline(in, line);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

// Density evaluation grids written next to every fit.
inline void write_density_grids(const std::filesystem::path& out_dir, const SieveWeights& w,
                                const std::vector<double>& tau_values, int grid_points) {
    CsvTable marg;
    marg.columns = {"grid", "f_T"};
    for (int i = 0; i < grid_points; ++i) {
        const double t = i / double(grid_points - 1);
        marg.rows.push_back({t, marginal_t_pdf(w, t)});
    }
    write_file(out_dir / "marginal_density.csv", marg.to_string());

    CsvTable cond;
    cond.columns = {"grid"};
    for (double tau : tau_values) cond.columns.push_back("f_x_tau" + format_double(tau));
    for (int i = 0; i < grid_points; ++i) {
        const double x = i / double(grid_points - 1);
        std::vector<double> row = {x};
        for (double tau : tau_values) row.push_back(cond_pdf(w, x, tau));
        cond.rows.push_back(row);
    }
    write_file(out_dir / "conditional_density.csv", cond.to_string());
}

}  // namespace detail

// estimate: sieve MLE on a dataset CSV (triples or censored, auto-detected).
inline void run_estimate(nlohmann::json cfg, const std::string& out_dir) {
    detail::check_keys(cfg,
                       {"dataset", "mode", "p_m", "n_starts", "max_iters", "grad_tol",
                        "integration", "start_spread", "seed", "threads", "tau_values",
                        "grid_points", "rescale"},
                       "estimate");
    if (!cfg.contains("dataset")) throw ConfigError("estimate.dataset: required");
    const std::string dataset = cfg.at("dataset").get<std::string>();
    std::string mode = detail::get_or<std::string>(cfg, "mode", "auto");
    if (mode == "auto") {
        const std::string header = detail::csv_header_of(dataset);
        if (header == "auction_id,n,r,x,y,z")
            mode = "triples";
        else if (header == "auction_id,n,N,R,bid_rank,bid")
            mode = "censored";
        else
            throw ConfigError("estimate.dataset: unrecognized CSV header '" + header + "'");
    }
    FitConfig fc = detail::fit_config_from_json(cfg);
    const auto tau_values =
        detail::get_or<std::vector<double>>(cfg, "tau_values", {0.25, 0.5, 0.75});
    const int grid_points = detail::get_or<int>(cfg, "grid_points", 101);
    const bool rescale = detail::get_or<bool>(cfg, "rescale", false);
    std::filesystem::create_directories(out_dir);

    EstimationResult res;
    double scale_max = 1.0;
    if (mode == "triples") {
        auto data = read_triples_csv(dataset);
        if (rescale) {
            for (const auto& t : data) scale_max = std::max(scale_max, t.z);
            for (auto& t : data) {
                t.x /= scale_max;
                t.y /= scale_max;
                t.z /= scale_max;
            }
        }
        res = fit_triples(data, fc);
    } else if (mode == "censored") {
        auto data = read_censored_csv(dataset);
        if (fc.integration.kind == IntegrationSpec::Kind::Quadrature &&
            !(cfg.contains("integration") && cfg.at("integration").contains("type")))
            fc.integration.kind = IntegrationSpec::Kind::MonteCarlo;  // censored default
        if (rescale) {
            for (const auto& a : data)
                for (double b : a.bids) scale_max = std::max(scale_max, b);
            for (auto& a : data) {
                a.R /= scale_max;
                for (auto& b : a.bids) b /= scale_max;
            }
        }
        res = fit_censored(data, fc);
    } else {
        throw ConfigError("estimate.mode: expected 'auto', 'triples' or 'censored'");
    }

    nlohmann::json out = result_to_json(res);
    out["mode"] = mode;
    out["dataset"] = dataset;
    out["scale_max"] = scale_max;
    detail::write_file(std::filesystem::path(out_dir) / "result.json", out.dump(2) + "\n");
    save_model((std::filesystem::path(out_dir) / "model.json").string(), res.params);
    detail::write_density_grids(out_dir, softmax_weights(res.params), tau_values, grid_points);

    nlohmann::json resolved = detail::fit_config_to_json(fc);
    resolved["dataset"] = dataset;
    resolved["mode"] = mode;
    resolved["tau_values"] = tau_values;
    resolved["grid_points"] = grid_points;
    resolved["rescale"] = rescale;
    detail::write_manifest(out_dir, "estimate", resolved);
}

// mc-study: replicated simulate-and-fit, with pointwise quantile envelopes
// of the fitted marginal and conditional densities.
inline void run_mc_study(nlohmann::json cfg, const std::string& out_dir) {
    detail::check_keys(cfg,
                       {"replications", "m", "n", "r", "p_m", "n_starts", "max_iters", "grad_tol",
                        "integration", "start_spread", "seed", "threads", "tau_values",
                        "grid_points", "dgp"},
                       "mc-study");
    const int reps = detail::get_or<int>(cfg, "replications", 100);
    const std::size_t m = detail::get_or<std::size_t>(cfg, "m", 1000);
    const int n = detail::get_or<int>(cfg, "n", 4);
    const int r = detail::get_or<int>(cfg, "r", 3);
    if (reps < 2) throw ConfigError("mc-study.replications: need at least 2");
    FitConfig fc = detail::fit_config_from_json(cfg);
    if (!cfg.contains("n_starts")) fc.n_starts = 2;  // replication-mode default
    const auto tau_values =
        detail::get_or<std::vector<double>>(cfg, "tau_values", {0.25, 0.5, 0.75});
    const int grid_points = detail::get_or<int>(cfg, "grid_points", 101);
    const auto dgp =
        detail::dgp_from_json(cfg.contains("dgp") ? cfg.at("dgp") : nlohmann::json::object());
    std::filesystem::create_directories(out_dir);

    // curves[0] = marginal, curves[1 + t] = conditional at tau_values[t].
    const std::size_t n_curves = 1 + tau_values.size();
    std::vector<std::vector<std::vector<double>>> curves(
        n_curves, std::vector<std::vector<double>>(grid_points));
    detail::CsvTable reps_table;
    reps_table.columns = {"replication", "loglik", "converged"};

    for (int rep = 0; rep < reps; ++rep) {
        const auto data = sample_triples(dgp, m, n, r, fc.seed + std::uint64_t(rep) * 7919u);
        FitConfig fcr = fc;
        fcr.seed = fc.seed + std::uint64_t(rep) * 104729u;
        const auto res = fit_triples(data, fcr);
        const auto w = softmax_weights(res.params);
        for (int i = 0; i < grid_points; ++i) {
            const double g = i / double(grid_points - 1);
            curves[0][i].push_back(marginal_t_pdf(w, g));
            for (std::size_t t = 0; t < tau_values.size(); ++t)
                curves[1 + t][i].push_back(cond_pdf(w, g, tau_values[t]));
        }
        reps_table.rows.push_back(
            {double(rep), res.loglik, res.per_start[res.best_start].converged ? 1.0 : 0.0});
    }
    detail::write_file(std::filesystem::path(out_dir) / "replications.csv",
                       reps_table.to_string());

    auto quantile = [](std::vector<double> v, double q) {
        std::sort(v.begin(), v.end());
        const double pos = q * (v.size() - 1);
        const std::size_t lo = std::size_t(pos);
        const std::size_t hi = std::min(lo + 1, v.size() - 1);
        return v[lo] + (pos - lo) * (v[hi] - v[lo]);
    };
    auto write_envelope = [&](const std::string& name, std::size_t c) {
        detail::CsvTable env;
        env.columns = {"grid", "q05", "mean", "q95"};
        for (int i = 0; i < grid_points; ++i) {
            const double g = i / double(grid_points - 1);
            const auto& vals = curves[c][i];
            const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / vals.size();
            env.rows.push_back({g, quantile(vals, 0.05), mean, quantile(vals, 0.95)});
        }
        detail::write_file(std::filesystem::path(out_dir) / name, env.to_string());
    };
    write_envelope("envelope_marginal.csv", 0);
    for (std::size_t t = 0; t < tau_values.size(); ++t)
        write_envelope("envelope_conditional_tau" + format_double(tau_values[t]) + ".csv", 1 + t);

    nlohmann::json resolved = detail::fit_config_to_json(fc);
    resolved["replications"] = reps;
    resolved["m"] = m;
    resolved["n"] = n;
    resolved["r"] = r;
    resolved["tau_values"] = tau_values;
    resolved["grid_points"] = grid_points;
    detail::write_manifest(out_dir, "mc-study", resolved);
}

namespace detail {

inline DiscreteTauModel lab_model_from_json(const nlohmann::json& j) {
    if (j.is_string() || (j.is_object() && j.contains("preset"))) {
        const std::string preset = j.is_string() ? j.get<std::string>()
                                                 : j.at("preset").get<std::string>();
        if (preset == "demo_k4") return demo_model_k4();
        if (preset == "independent") {
            const int K = j.is_object() ? get_or<int>(j, "K", 3) : 3;
            DiscreteTauModel m;
            for (int k = 0; k < K; ++k) {
                m.tau.push_back((k + 1.0) / (K + 1.0));
                m.mass.push_back(1.0 / K);
                m.cond.emplace_back(2.0, 2.0);
            }
            return m;
        }
        throw ConfigError("identify.model.preset: expected 'demo_k4' or 'independent'");
    }
    check_keys(j, {"taus", "masses", "cond", "K", "preset"}, "identify.model");
    DiscreteTauModel m;
    m.tau = j.at("taus").get<std::vector<double>>();
    m.mass = j.at("masses").get<std::vector<double>>();
    for (const auto& ab : j.at("cond")) {
        if (!ab.is_array() || ab.size() != 2)
            throw ConfigError("identify.model.cond: entries must be [alpha, beta]");
        m.cond.emplace_back(ab[0].get<double>(), ab[1].get<double>());
    }
    m.validate();
    return m;
}

}  // namespace detail

// identify: operator-diagnostics and the full recovery pipeline on a
// discrete latent test model. Returns false when the injectivity
// diagnostics flag a near-violation (CLI exit code 4).
inline bool run_identify(nlohmann::json cfg, const std::string& out_dir) {
    detail::check_keys(cfg,
                       {"model", "partition", "y1", "y2", "r", "n", "grid", "gap_tol",
                        "cond_limit", "seed"},
                       "identify");
    const auto model = detail::lab_model_from_json(
        cfg.contains("model") ? cfg.at("model") : nlohmann::json("demo_k4"));
    const int r = detail::get_or<int>(cfg, "r", 4);
    const int n = detail::get_or<int>(cfg, "n", 6);

    Partition part = [&]() {
        if (cfg.contains("partition") && cfg.at("partition").is_object()) {
            detail::check_keys(cfg.at("partition"), {"c1", "c2"}, "identify.partition");
            return Partition(cfg.at("partition").at("c1").get<double>(),
                             cfg.at("partition").at("c2").get<double>());
        }
        return default_partition(model);
    }();
    int n_low = 321, n_mid = 161, n_high = 321;
    if (cfg.contains("grid")) {
        detail::check_keys(cfg.at("grid"), {"n_low", "n_mid", "n_high"}, "identify.grid");
        n_low = detail::get_or<int>(cfg.at("grid"), "n_low", n_low);
        n_mid = detail::get_or<int>(cfg.at("grid"), "n_mid", n_mid);
        n_high = detail::get_or<int>(cfg.at("grid"), "n_high", n_high);
    }
    const auto grid = OperatorGrid::make(part, n_low, n_mid, n_high);
    const double y1 = detail::get_or<double>(cfg, "y1", part.c1 + (part.c2 - part.c1) / 3.0);
    const double y2 = detail::get_or<double>(cfg, "y2", part.c1 + 2.0 * (part.c2 - part.c1) / 3.0);
    std::filesystem::create_directories(out_dir);

    nlohmann::json report;
    report["partition"] = {{"c1", part.c1}, {"c2", part.c2}};
    report["y1"] = y1;
    report["y2"] = y2;
    report["r"] = r;
    report["n"] = n;
    report["min_ratio_gap"] = distinct_ratio_gap(model, y1, y2);

    const auto ops = build_operators(model, grid, y2, r, n);
    auto diags = injectivity_diagnostics(ops, detail::get_or<double>(cfg, "cond_limit", 1e10));
    bool flagged = false;
    auto jd = nlohmann::json::array();
    for (const auto& d : diags) {
        flagged = flagged || d.flagged;
        jd.push_back({{"matrix", d.name},
                      {"sigma_min", d.sigma_min},
                      {"sigma_max", d.sigma_max},
                      {"cond", d.cond},
                      {"flagged", d.flagged}});
    }
    report["injectivity"] = jd;

    if (flagged) {
        report["status"] = "injectivity-flagged";
        detail::write_file(std::filesystem::path(out_dir) / "report.json",
                           report.dump(2) + "\n");
        detail::write_manifest(out_dir, "identify", cfg);
        return false;
    }

    PipelineOptions opt{y1, y2, r, n, detail::get_or<double>(cfg, "gap_tol", 1e-8),
                        detail::get_or<double>(cfg, "cond_limit", 1e10)};
    const auto res = run_identification(model, grid, opt);
    report["status"] = "ok";
    report["factorization_error"] = res.factorization_error;
    report["max_offdiag_ratio"] = res.max_offdiag_ratio;
    report["cond_J_y2"] = res.cond_J2;
    report["eigenvalues"] = std::vector<double>(
        res.eigenvalues.data(), res.eigenvalues.data() + res.eigenvalues.size());
    report["masses_recovered"] = res.masses;

    // The lab knows the truth: report recovery errors in mean order.
    std::vector<int> model_order(model.K());
    std::iota(model_order.begin(), model_order.end(), 0);
    std::sort(model_order.begin(), model_order.end(), [&](int a, int b) {
        return model.cond[a].alpha / (model.cond[a].alpha + model.cond[a].beta) <
               model.cond[b].alpha / (model.cond[b].alpha + model.cond[b].beta);
    });
    detail::CsvTable curves;
    curves.columns = {"x"};
    std::vector<double> sup_err(model.K(), 0.0), mass_err(model.K(), 0.0);
    for (int k = 0; k < model.K(); ++k) {
        curves.columns.push_back("F_rec_" + std::to_string(k + 1));
        curves.columns.push_back("F_true_" + std::to_string(k + 1));
    }
    const auto& xs = res.conditionals[0].x;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        std::vector<double> row = {xs[i]};
        for (int k = 0; k < model.K(); ++k) {
            const double rec = res.conditionals[k].F[i];
            const double truth = beta_cdf(model.cond[model_order[k]], xs[i]);
            row.push_back(rec);
            row.push_back(truth);
            sup_err[k] = std::max(sup_err[k], std::abs(rec - truth));
        }
        curves.rows.push_back(row);
    }
    for (int k = 0; k < model.K(); ++k)
        mass_err[k] = std::abs(res.masses[k] - model.mass[model_order[k]]);
    report["cdf_sup_error"] = sup_err;
    report["mass_abs_error"] = mass_err;
    detail::write_file(std::filesystem::path(out_dir) / "curves.csv", curves.to_string());
    detail::write_file(std::filesystem::path(out_dir) / "report.json", report.dump(2) + "\n");
    detail::write_manifest(out_dir, "identify", cfg);
    return true;
}

// counterfactual: reserve-price analysis on a fitted or analytic model.
inline void run_counterfactual(nlohmann::json cfg, const std::string& out_dir) {
    detail::check_keys(cfg,
                       {"model", "dgp", "v0", "fixed_reserve", "status_quo", "min_reserve",
                        "N_pmf", "dataset", "tau_nodes", "seed"},
                       "counterfactual");
    ReserveProblem prob;
    if (cfg.contains("model")) {
        const auto& mj = cfg.at("model");
        if (mj.is_string() && mj.get<std::string>() == "uniform") {
            prob.parent = uniform_parent();
        } else if (mj.is_string()) {
            const auto params = load_model(mj.get<std::string>());
            prob.parent = sieve_parent(softmax_weights(params));
        } else {
            throw ConfigError("counterfactual.model: expected a path or 'uniform'");
        }
    } else if (cfg.contains("dgp")) {
        prob.parent = detail::dgp_from_json(cfg.at("dgp")).as_parent();
    } else {
        throw ConfigError("counterfactual: one of 'model' or 'dgp' is required");
    }
    prob.v0 = detail::get_or<double>(cfg, "v0", 0.5);
    prob.fixed_reserve = detail::get_or<double>(cfg, "fixed_reserve", 1.0);
    prob.status_quo = detail::get_or<double>(cfg, "status_quo", 0.7);
    prob.min_reserve = detail::get_or<double>(cfg, "min_reserve", 0.0);
    if (cfg.contains("N_pmf")) {
        prob.N_pmf = detail::pmf_from_json(cfg.at("N_pmf"), "counterfactual.N_pmf");
    } else if (cfg.contains("dataset")) {
        // Empirical distribution of N in a censored dataset.
        const auto data = read_censored_csv(cfg.at("dataset").get<std::string>());
        int maxN = 0;
        for (const auto& a : data) maxN = std::max(maxN, a.N);
        prob.N_pmf.assign(maxN + 1, 0.0);
        for (const auto& a : data) prob.N_pmf[a.N] += 1.0 / double(data.size());
    } else {
        throw ConfigError("counterfactual: one of 'N_pmf' or 'dataset' is required");
    }
    const int tau_nodes = detail::get_or<int>(cfg, "tau_nodes", 64);
    std::filesystem::create_directories(out_dir);

    const auto rep = revenue_compare(prob, tau_nodes);
    detail::CsvTable curve;
    curve.columns = {"tau", "r_star", "profit"};
    for (std::size_t q = 0; q < rep.tau_grid.size(); ++q) {
        double prof = 0.0;
        for (std::size_t N = 0; N < prob.N_pmf.size(); ++N)
            if (prob.N_pmf[N] > 0.0)
                prof += prob.N_pmf[N] *
                        expected_profit(prob.parent, rep.tau_grid[q], rep.r_star[q], int(N),
                                        prob.v0);
        curve.rows.push_back({rep.tau_grid[q], rep.r_star[q], prof});
    }
    detail::write_file(std::filesystem::path(out_dir) / "reserve_curve.csv", curve.to_string());

    nlohmann::json summary;
    summary["gain_optimal"] = rep.gain_optimal;
    summary["gain_fixed"] = rep.gain_fixed;
    summary["gain_status_quo"] = rep.gain_status_quo;
    summary["ratio_fixed_vs_optimal"] = rep.ratio;
    summary["v0"] = prob.v0;
    summary["fixed_reserve"] = prob.fixed_reserve;
    summary["status_quo"] = prob.status_quo;
    summary["any_from_grid"] = rep.any_from_grid;
    summary["any_boundary"] = rep.any_boundary;
    detail::write_file(std::filesystem::path(out_dir) / "summary.json", summary.dump(2) + "\n");
    detail::write_manifest(out_dir, "counterfactual", cfg);
}

}  // namespace osuh
