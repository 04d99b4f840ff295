// File formats: dataset CSVs (triples and censored long form), sieve model
// JSON, and estimation-result JSON. All numeric text uses '.' decimals and
// round-trip (17 significant digit) formatting so reruns are byte-identical.
#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "osuh/errors.hpp"
#include "osuh/estimate.hpp"
#include "osuh/order_stats.hpp"
#include "osuh/sieve.hpp"

namespace osuh {

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_double(const std::string& s, const std::string& context) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("could not parse number '" + s + "' in " + context);
    }
}

}  // namespace detail

// --- triples dataset: auction_id,n,r,x,y,z ---------------------------------

inline void write_triples_csv(const std::string& path, const std::vector<TripleObs>& data) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    out << "auction_id,n,r,x,y,z\n";
    for (std::size_t i = 0; i < data.size(); ++i)
        out << i << ',' << data[i].n << ',' << data[i].r << ',' << format_double(data[i].x) << ','
            << format_double(data[i].y) << ',' << format_double(data[i].z) << '\n';
}

inline std::vector<TripleObs> read_triples_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open dataset: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty dataset: " + path);
    if (detail::split_csv_line(line) != std::vector<std::string>{"auction_id", "n", "r", "x", "y", "z"})
        throw ConfigError("unexpected header in triples CSV: " + path);
    std::vector<TripleObs> data;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != 6) throw ConfigError(path + ": bad field count at row " + std::to_string(row));
        const std::string ctx = path + " row " + std::to_string(row);
        TripleObs t{detail::parse_double(f[3], ctx), detail::parse_double(f[4], ctx),
                    detail::parse_double(f[5], ctx), int(detail::parse_double(f[2], ctx)),
                    int(detail::parse_double(f[1], ctx))};
        t.validate();
        data.push_back(t);
    }
    return data;
}

// --- censored dataset, long form: auction_id,n,N,R,bid_rank,bid ------------
// One row per observed bid; auctions with no bids carry a single row with
// bid_rank 0 and an empty bid field.

inline void write_censored_csv(const std::string& path,
                               const std::vector<CensoredAuctionObs>& data) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    out << "auction_id,n,N,R,bid_rank,bid\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& a = data[i];
        if (a.bids.empty()) {
            out << i << ',' << a.n << ',' << a.N << ',' << format_double(a.R) << ",0,\n";
        } else {
            for (std::size_t j = 0; j < a.bids.size(); ++j)
                out << i << ',' << a.n << ',' << a.N << ',' << format_double(a.R) << ',' << (j + 1)
                    << ',' << format_double(a.bids[j]) << '\n';
        }
    }
}

inline std::vector<CensoredAuctionObs> read_censored_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open dataset: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty dataset: " + path);
    if (detail::split_csv_line(line) !=
        std::vector<std::string>{"auction_id", "n", "N", "R", "bid_rank", "bid"})
        throw ConfigError("unexpected header in censored CSV: " + path);
    std::map<long long, CensoredAuctionObs> by_id;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != 6) throw ConfigError(path + ": bad field count at row " + std::to_string(row));
        const std::string ctx = path + " row " + std::to_string(row);
        const long long id = (long long)detail::parse_double(f[0], ctx);
        auto& a = by_id[id];
        a.n = int(detail::parse_double(f[1], ctx));
        a.N = int(detail::parse_double(f[2], ctx));
        a.R = detail::parse_double(f[3], ctx);
        if (!f[5].empty()) a.bids.push_back(detail::parse_double(f[5], ctx));
    }
    std::vector<CensoredAuctionObs> data;
    for (auto& [id, a] : by_id) {
        std::sort(a.bids.begin(), a.bids.end());
        a.validate();
        data.push_back(std::move(a));
    }
    return data;
}

// --- sieve model JSON: {"p_m": int, "gamma": [[...]]} ----------------------

inline nlohmann::json model_to_json(const SieveParams& params) {
    nlohmann::json j;
    j["p_m"] = params.p_m;
    auto rows = nlohmann::json::array();
    for (int i = 0; i < params.p_m; ++i) {
        auto row = nlohmann::json::array();
        for (int k = 0; k < params.p_m; ++k) row.push_back(params.at(i, k));
        rows.push_back(row);
    }
    j["gamma"] = rows;
    return j;
}

inline SieveParams model_from_json(const nlohmann::json& j) {
    if (!j.contains("p_m") || !j.contains("gamma"))
        throw ConfigError("model JSON must contain p_m and gamma");
    const int p = j.at("p_m").get<int>();
    const auto& rows = j.at("gamma");
    if (!rows.is_array() || int(rows.size()) != p)
        throw ConfigError("model JSON: gamma must be a p_m x p_m matrix");
    std::vector<double> g;
    g.reserve(std::size_t(p) * p);
    for (const auto& row : rows) {
        if (!row.is_array() || int(row.size()) != p)
            throw ConfigError("model JSON: gamma must be a p_m x p_m matrix");
        for (const auto& v : row) g.push_back(v.get<double>());
    }
    if (!g.empty() && g[0] != 0.0)
        throw ConfigError("model JSON: gamma[1][1] must be exactly 0");
    return SieveParams(p, std::move(g));
}

inline void save_model(const std::string& path, const SieveParams& params) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    out << model_to_json(params).dump(2) << '\n';
}

inline SieveParams load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open model: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("model JSON parse failure in " + path + ": " + e.what());
    }
    return model_from_json(j);
}

inline nlohmann::json result_to_json(const EstimationResult& res) {
    nlohmann::json j;
    j["model"] = model_to_json(res.params);
    j["loglik"] = res.loglik;
    j["gradient_norm"] = res.gradient_norm;
    j["best_start"] = res.best_start;
    j["seed"] = res.seed;
    if (res.mc_seed != 0) j["mc_seed"] = res.mc_seed;
    auto starts = nlohmann::json::array();
    for (const auto& s : res.per_start)
        starts.push_back({{"loglik", s.loglik},
                          {"iterations", s.iterations},
                          {"converged", s.converged},
                          {"failed", s.failed}});
    j["per_start"] = starts;
    return j;
}

}  // namespace osuh
