// SPDX-License-Identifier: Apache-2.0
//
// hfdemix: hybrid-field XL-MIMO channel estimation by convex demixing
// Copyright (C) 2026 The hfdemix authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------


#ifndef HFDEMIX_BENCH_HPP
#define HFDEMIX_BENCH_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "demix.hpp"
#include "omp.hpp"
#include "params.hpp"
#include "subspace.hpp"
#include "version.hpp"

namespace hfdemix::bench
{

using json = nlohmann::json;

struct SystemSection
{
    int num_antennas = 64;
    int num_rf_chains = 4;
    int downsample = 1; // M = N / downsample
    double carrier_freq = 30e9;
};

struct ChannelSection
{
    int num_paths = 4;
    double far_fraction = 0.5; // K_f = round(far_fraction * K)
    double snr_db = 10.0;      // used when the sweep axis is num_paths
    SamplingSpec sampling;
};

struct SubspaceSection
{
    int rank = 8;
    int grid_size = 4096;
    double range_min = 10.0;
    std::string cache_dir; // empty: no disk cache
};

struct SolverSection
{
    double tau = 1.0;
    std::string delta_rule = "expected"; // expected | chi_square
    double delta_eps = 0.05;
    double rho = 1.0;
    bool adaptive_rho = true;
    double relaxation = 1.0;
    int anderson_memory = 10;
    double eps_abs = 1e-5;
    double eps_rel = 1e-4;
    int max_iters = 10000;
    double order_tol = 1e-2;
};

struct OmpSection
{
    int far_size = 0;
    int near_angles = 0;
    int num_ranges = 8;
    double range_min = 10.0;
    double range_max = 80.0;
    std::optional<double> gamma; // unset: true K_f / K per trial
};

struct SweepSection
{
    std::string axis = "snr_db"; // snr_db | num_paths
    std::vector<double> values{0.0, 5.0, 10.0, 15.0, 20.0};
    int trials = 20;
    std::uint64_t base_seed = 20260101;
};

struct ExperimentConfig
{
    std::string name = "desk";
    SystemSection system;
    ChannelSection channel;
    SubspaceSection subspace;
    SolverSection solver;
    OmpSection omp;
    SweepSection sweep;
    std::vector<std::string> methods{"anm", "anm_known_k", "omp"};
    bool record_timing = false; // false: wall_ms written as 0 so reruns are bitwise equal

    void validate() const;
    SystemConfig system_config() const
    {
        return SystemConfig::make(system.num_antennas, system.num_rf_chains,
                                  pilot_len_for(system.num_antennas, system.num_rf_chains, system.downsample),
                                  system.carrier_freq);
    }
};

inline const std::vector<std::string> &known_methods()
{
    static const std::vector<std::string> m{"anm", "anm_known_k", "omp"};
    return m;
}

inline void ExperimentConfig::validate() const
{
    system_config().validate();
    if (channel.num_paths < 1)
        throw config_error("channel.num_paths must be >= 1");
    if (!(channel.far_fraction >= 0.0 && channel.far_fraction <= 1.0))
        throw config_error("channel.far_fraction must lie in [0, 1]");
    if (subspace.rank < 1 || subspace.rank > system.num_antennas || subspace.grid_size < subspace.rank)
        throw config_error("subspace.rank must be in [1, N] and not exceed grid_size");
    if (!(subspace.range_min > 0.0))
        throw config_error("subspace.range_min must be positive");
    if (!(solver.tau > 0.0))
        throw config_error("solver.tau must be positive");
    if (solver.delta_rule != "expected" && solver.delta_rule != "chi_square")
        throw config_error("solver.delta_rule must be 'expected' or 'chi_square'");
    if (!(solver.delta_eps > 0.0 && solver.delta_eps < 1.0))
        throw config_error("solver.delta_eps must lie in (0, 1)");
    if (!(solver.rho > 0.0) || solver.max_iters < 1 || solver.anderson_memory < 0)
        throw config_error("solver.rho, max_iters, anderson_memory out of range");
    if (!(solver.relaxation > 0.0 && solver.relaxation < 2.0))
        throw config_error("solver.relaxation must lie in (0, 2)");
    if (omp.gamma && !(*omp.gamma >= 0.0 && *omp.gamma <= 1.0))
        throw config_error("omp.gamma must lie in [0, 1]");
    if (sweep.axis != "snr_db" && sweep.axis != "num_paths")
        throw config_error("sweep.axis must be 'snr_db' or 'num_paths'");
    if (sweep.values.empty())
        throw config_error("sweep.values must not be empty");
    if (sweep.axis == "num_paths")
        for (double v : sweep.values)
            if (v < 1.0 || v != std::floor(v))
                throw config_error("num_paths sweep values must be positive integers");
    if (sweep.trials < 1)
        throw config_error("sweep.trials must be >= 1");
    if (methods.empty())
        throw config_error("methods must not be empty");
    for (const auto &m : methods)
        if (std::find(known_methods().begin(), known_methods().end(), m) == known_methods().end())
            throw config_error("unknown method '" + m + "'");
}

/// Named defaults. desk: N=64, L=8, K=4, 20 trials. paper: N=256, L=10, K=10, 50 trials.
inline ExperimentConfig profile(const std::string &name)
{
    ExperimentConfig c;
    if (name == "desk")
        return c;
    if (name == "paper")
    {
        c.name = "paper";
        c.system.num_antennas = 256;
        c.subspace.rank = 10;
        c.channel.num_paths = 10;
        c.sweep.trials = 50;
        c.solver.max_iters = 50000;
        return c;
    }
    throw config_error("unknown profile '" + name + "' (expected desk or paper)");
}

// ---- JSON ----------------------------------------------------------------

namespace detail
{

inline void check_keys(const json &j, const std::string &where, std::initializer_list<const char *> allowed)
{
    if (!j.is_object())
        throw config_error(where + " must be a JSON object");
    for (const auto &item : j.items())
    {
        bool ok = false;
        for (const char *a : allowed)
            ok = ok || item.key() == a;
        if (!ok)
            throw config_error("unknown key '" + (where.empty() ? "" : where + ".") + item.key() + "'");
    }
}

template <class T> void read(const json &j, const char *key, T &out)
{
    if (j.contains(key))
    {
        try
        {
            out = j.at(key).get<T>();
        }
        catch (const json::exception &e)
        {
            throw config_error(std::string("bad value for '") + key + "': " + e.what());
        }
    }
}

} // namespace detail

inline json to_json(const ExperimentConfig &c)
{
    json j;
    j["name"] = c.name;
    j["system"] = {{"num_antennas", c.system.num_antennas},
                   {"num_rf_chains", c.system.num_rf_chains},
                   {"downsample", c.system.downsample},
                   {"carrier_freq", c.system.carrier_freq}};
    const auto &s = c.channel.sampling;
    j["channel"] = {{"num_paths", c.channel.num_paths},
                    {"far_fraction", c.channel.far_fraction},
                    {"snr_db", c.channel.snr_db},
                    {"theta_min", s.theta_min},
                    {"theta_max", s.theta_max},
                    {"range_min", s.range_min},
                    {"range_max", s.range_max},
                    {"min_separation", s.min_separation}};
    j["subspace"] = {{"rank", c.subspace.rank},
                     {"grid_size", c.subspace.grid_size},
                     {"range_min", c.subspace.range_min},
                     {"cache_dir", c.subspace.cache_dir}};
    j["solver"] = {{"tau", c.solver.tau},
                   {"delta_rule", c.solver.delta_rule},
                   {"delta_eps", c.solver.delta_eps},
                   {"rho", c.solver.rho},
                   {"adaptive_rho", c.solver.adaptive_rho},
                   {"relaxation", c.solver.relaxation},
                   {"anderson_memory", c.solver.anderson_memory},
                   {"eps_abs", c.solver.eps_abs},
                   {"eps_rel", c.solver.eps_rel},
                   {"max_iters", c.solver.max_iters},
                   {"order_tol", c.solver.order_tol}};
    j["omp"] = {{"far_size", c.omp.far_size},
                {"near_angles", c.omp.near_angles},
                {"num_ranges", c.omp.num_ranges},
                {"range_min", c.omp.range_min},
                {"range_max", c.omp.range_max},
                {"gamma", c.omp.gamma ? json(*c.omp.gamma) : json(nullptr)}};
    j["sweep"] = {{"axis", c.sweep.axis},
                  {"values", c.sweep.values},
                  {"trials", c.sweep.trials},
                  {"base_seed", c.sweep.base_seed}};
    j["methods"] = c.methods;
    j["record_timing"] = c.record_timing;
    return j;
}

/// Apply the keys present in `j` on top of `base`. Unknown keys are rejected.
/// A run manifest is accepted as well (its "config" member is used).
inline ExperimentConfig apply_json(ExperimentConfig c, const json &doc)
{
    using detail::read;
    const json *jp = &doc;
    if (doc.is_object() && doc.contains("format"))
    {
        if (doc.at("format") != "hfdemix-manifest-v1")
            throw config_error("unsupported document format");
        jp = &doc.at("config");
    }
    const json &j = *jp;
    detail::check_keys(j, "", {"name", "system", "channel", "subspace", "solver", "omp", "sweep", "methods",
                               "record_timing"});
    read(j, "name", c.name);
    if (j.contains("system"))
    {
        const auto &s = j["system"];
        detail::check_keys(s, "system", {"num_antennas", "num_rf_chains", "downsample", "carrier_freq"});
        read(s, "num_antennas", c.system.num_antennas);
        read(s, "num_rf_chains", c.system.num_rf_chains);
        read(s, "downsample", c.system.downsample);
        read(s, "carrier_freq", c.system.carrier_freq);
    }
    if (j.contains("channel"))
    {
        const auto &s = j["channel"];
        detail::check_keys(s, "channel", {"num_paths", "far_fraction", "snr_db", "theta_min", "theta_max",
                                          "range_min", "range_max", "min_separation"});
        read(s, "num_paths", c.channel.num_paths);
        read(s, "far_fraction", c.channel.far_fraction);
        read(s, "snr_db", c.channel.snr_db);
        read(s, "theta_min", c.channel.sampling.theta_min);
        read(s, "theta_max", c.channel.sampling.theta_max);
        read(s, "range_min", c.channel.sampling.range_min);
        read(s, "range_max", c.channel.sampling.range_max);
        read(s, "min_separation", c.channel.sampling.min_separation);
    }
    if (j.contains("subspace"))
    {
        const auto &s = j["subspace"];
        detail::check_keys(s, "subspace", {"rank", "grid_size", "range_min", "cache_dir"});
        read(s, "rank", c.subspace.rank);
        read(s, "grid_size", c.subspace.grid_size);
        read(s, "range_min", c.subspace.range_min);
        read(s, "cache_dir", c.subspace.cache_dir);
    }
    if (j.contains("solver"))
    {
        const auto &s = j["solver"];
        detail::check_keys(s, "solver", {"tau", "delta_rule", "delta_eps", "rho", "adaptive_rho", "relaxation",
                                         "anderson_memory", "eps_abs", "eps_rel", "max_iters", "order_tol"});
        read(s, "tau", c.solver.tau);
        read(s, "delta_rule", c.solver.delta_rule);
        read(s, "delta_eps", c.solver.delta_eps);
        read(s, "rho", c.solver.rho);
        read(s, "adaptive_rho", c.solver.adaptive_rho);
        read(s, "relaxation", c.solver.relaxation);
        read(s, "anderson_memory", c.solver.anderson_memory);
        read(s, "eps_abs", c.solver.eps_abs);
        read(s, "eps_rel", c.solver.eps_rel);
        read(s, "max_iters", c.solver.max_iters);
        read(s, "order_tol", c.solver.order_tol);
    }
    if (j.contains("omp"))
    {
        const auto &s = j["omp"];
        detail::check_keys(s, "omp", {"far_size", "near_angles", "num_ranges", "range_min", "range_max", "gamma"});
        read(s, "far_size", c.omp.far_size);
        read(s, "near_angles", c.omp.near_angles);
        read(s, "num_ranges", c.omp.num_ranges);
        read(s, "range_min", c.omp.range_min);
        read(s, "range_max", c.omp.range_max);
        if (s.contains("gamma"))
        {
            if (s["gamma"].is_null())
                c.omp.gamma.reset();
            else
                c.omp.gamma = s["gamma"].get<double>();
        }
    }
    if (j.contains("sweep"))
    {
        const auto &s = j["sweep"];
        detail::check_keys(s, "sweep", {"axis", "values", "trials", "base_seed"});
        read(s, "axis", c.sweep.axis);
        read(s, "values", c.sweep.values);
        read(s, "trials", c.sweep.trials);
        read(s, "base_seed", c.sweep.base_seed);
    }
    read(j, "methods", c.methods);
    read(j, "record_timing", c.record_timing);
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path &path, const ExperimentConfig &base = {})
{
    std::ifstream is(path);
    if (!is)
        throw config_error("cannot open config " + path.string());
    json j;
    try
    {
        j = json::parse(is);
    }
    catch (const json::parse_error &e)
    {
        throw config_error(std::string("config parse error: ") + e.what());
    }
    return apply_json(base, j);
}

inline std::uint64_t fnv1a(const void *data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL)
{
    const auto *p = static_cast<const unsigned char *>(data);
    for (std::size_t i = 0; i < len; ++i)
    {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string config_hash(const ExperimentConfig &c)
{
    const std::string s = to_json(c).dump();
    return hex64(fnv1a(s.data(), s.size()));
}

/// Hash of the (h, A, y) triple a method consumes.
inline std::uint64_t input_hash(const cvec &h, const cmat &a, const cvec &y)
{
    std::uint64_t k = fnv1a(h.data(), sizeof(cplx) * static_cast<std::size_t>(h.size()));
    k = fnv1a(a.data(), sizeof(cplx) * static_cast<std::size_t>(a.size()), k);
    return fnv1a(y.data(), sizeof(cplx) * static_cast<std::size_t>(y.size()), k);
}

// ---- trials --------------------------------------------------------------

/// One estimated or true path after matching. NaN marks a missing side.
struct PathRecord
{
    std::string kind_true; // far | near | "" (false alarm)
    std::string kind_est;  // far | near | "" (miss)
    double phi_true = std::nan("");
    double phi_est = std::nan("");
    double theta_true = std::nan("");
    double theta_est = std::nan("");
    double range_true = std::nan("");
    double range_est = std::nan("");
};

struct MethodRecord
{
    std::string method;
    double nmse = std::nan("");
    double angle_rmse_rad = std::nan("");
    double range_rel_err = std::nan("");
    int misses = 0;
    int false_alarms = 0;
    std::string solver_status;
    int iters = 0;
    double wall_ms = 0.0;
    std::uint64_t input_hash = 0;
    std::string error;
    std::vector<PathRecord> paths;
};

struct TrialRecord
{
    std::string config_hash;
    std::string sweep_axis;
    double sweep_value = 0.0;
    int point = 0;
    int trial = 0;
    std::uint64_t seed = 0;
    int num_far = 0;
    int num_near = 0;
    std::vector<MethodRecord> methods;
};

/// Shared read-only state for all trials of one configuration.
struct BenchContext
{
    ExperimentConfig config;
    std::string hash;
    SubspaceBasis subspace;
    PolarDictionary dictionary;

    explicit BenchContext(ExperimentConfig c) : config(std::move(c))
    {
        config.validate();
        hash = config_hash(config);
        const SystemConfig sys = config.system_config();
        const rvec grid = uniform_psi_grid(min_reachable_psi(sys, config.subspace.range_min), config.subspace.grid_size);
        if (config.subspace.cache_dir.empty())
            subspace = build_subspace(build_dictionary(grid, sys.num_antennas), config.subspace.rank, grid);
        else
            subspace = cached_subspace(config.subspace.cache_dir, sys.num_antennas, grid, config.subspace.rank);
        PolarGridSpec gs;
        gs.far_size = config.omp.far_size;
        gs.near_angles = config.omp.near_angles;
        gs.num_ranges = config.omp.num_ranges;
        gs.range_min = config.omp.range_min;
        gs.range_max = config.omp.range_max;
        dictionary = build_polar_dictionary(sys, gs);
    }

    SolverOptions solver_options() const
    {
        SolverOptions o;
        o.rho = config.solver.rho;
        o.adaptive_rho = config.solver.adaptive_rho;
        o.relaxation = config.solver.relaxation;
        o.anderson_memory = config.solver.anderson_memory;
        o.eps_abs = config.solver.eps_abs;
        o.eps_rel = config.solver.eps_rel;
        o.max_iters = config.solver.max_iters;
        return o;
    }

    double sweep_value(int point) const { return config.sweep.values.at(static_cast<std::size_t>(point)); }
    std::uint64_t seed(int point, int trial) const
    {
        return derive_seed(config.sweep.base_seed, static_cast<std::uint64_t>(point), static_cast<std::uint64_t>(trial));
    }
};

namespace detail
{

struct EstPath
{
    PathKind kind;
    double phi;
    std::optional<double> theta;
    double range; // inf for far or invalid
};

// Pool far and near, match by |dphi| gated at 1/N, then score.
inline void score_paths(MethodRecord &rec, const std::vector<EstPath> &est, const HybridChannel &ch,
                        const SystemConfig &cfg)
{
    std::vector<double> est_phi, true_phi;
    for (const auto &e : est)
        est_phi.push_back(e.phi);
    for (const auto &p : ch.paths)
        true_phi.push_back(wrap_phi(p.phi(cfg)));
    const auto m = match_paths(est_phi, true_phi, 1.0 / cfg.num_antennas);
    rec.misses = static_cast<int>(m.misses.size());
    rec.false_alarms = static_cast<int>(m.false_alarms.size());

    double sq = 0.0, rel = 0.0;
    int n_ang = 0, n_rng = 0;
    for (const auto &[ei, ti] : m.pairs)
    {
        const auto &e = est[static_cast<std::size_t>(ei)];
        const auto &t = ch.paths[static_cast<std::size_t>(ti)];
        PathRecord pr;
        pr.kind_true = to_string(t.kind);
        pr.kind_est = to_string(e.kind);
        pr.phi_true = true_phi[static_cast<std::size_t>(ti)];
        pr.phi_est = e.phi;
        pr.theta_true = t.angle;
        pr.range_true = t.kind == PathKind::near ? t.range : std::numeric_limits<double>::infinity();
        pr.range_est = e.range;
        if (e.theta)
        {
            pr.theta_est = *e.theta;
            sq += (*e.theta - t.angle) * (*e.theta - t.angle);
            ++n_ang;
        }
        if (t.kind == PathKind::near && e.kind == PathKind::near && std::isfinite(e.range))
        {
            rel += std::abs(e.range - t.range) / t.range;
            ++n_rng;
        }
        rec.paths.push_back(pr);
    }
    for (int ti : m.misses)
    {
        const auto &t = ch.paths[static_cast<std::size_t>(ti)];
        PathRecord pr;
        pr.kind_true = to_string(t.kind);
        pr.phi_true = true_phi[static_cast<std::size_t>(ti)];
        pr.theta_true = t.angle;
        pr.range_true = t.kind == PathKind::near ? t.range : std::numeric_limits<double>::infinity();
        rec.paths.push_back(pr);
    }
    for (int ei : m.false_alarms)
    {
        const auto &e = est[static_cast<std::size_t>(ei)];
        PathRecord pr;
        pr.kind_est = to_string(e.kind);
        pr.phi_est = e.phi;
        if (e.theta)
            pr.theta_est = *e.theta;
        pr.range_est = e.range;
        rec.paths.push_back(pr);
    }
    rec.angle_rmse_rad = n_ang > 0 ? std::sqrt(sq / n_ang) : std::nan("");
    rec.range_rel_err = n_rng > 0 ? rel / n_rng : std::nan("");
}

inline std::vector<EstPath> to_est_paths(const EstimatedPaths &p)
{
    std::vector<EstPath> out;
    for (const auto &f : p.far)
        out.push_back({PathKind::far, f.phi, f.theta, std::numeric_limits<double>::infinity()});
    for (const auto &n : p.near)
        out.push_back({PathKind::near, n.phi, n.theta,
                       n.range.valid ? n.range.range : std::numeric_limits<double>::infinity()});
    return out;
}

inline double elapsed_ms(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace detail

///
/// Draw a channel and measurements from `seed`, run every configured method on
/// the same (h, A, y) and score it. Method failures are captured in the record.
///
inline TrialRecord run_seeded_trial(const BenchContext &ctx, int point, double value, int trial, std::uint64_t seed)
{
    const auto &cfg = ctx.config;
    TrialRecord rec;
    rec.config_hash = ctx.hash;
    rec.sweep_axis = cfg.sweep.axis;
    rec.sweep_value = value;
    rec.point = point;
    rec.trial = trial;
    rec.seed = seed;

    const bool k_axis = cfg.sweep.axis == "num_paths";
    const int num_paths = k_axis ? static_cast<int>(value) : cfg.channel.num_paths;
    const double snr_db = k_axis ? cfg.channel.snr_db : value;
    rec.num_far = static_cast<int>(std::lround(cfg.channel.far_fraction * num_paths));
    rec.num_near = num_paths - rec.num_far;

    const SystemConfig sys = cfg.system_config();
    HybridChannel ch;
    MeasurementEnsemble ens;
    std::string setup_error;
    try
    {
        Rng rng(seed);
        ch = sample_hybrid_channel(rec.num_far, rec.num_near, sys, rng, cfg.channel.sampling);
        ens = measure(sys, ch.h, snr_db, rng, cfg.solver.delta_eps);
    }
    catch (const std::exception &e)
    {
        setup_error = e.what();
    }

    auto timed = [&](MethodRecord &m, auto t0) { m.wall_ms = cfg.record_timing ? detail::elapsed_ms(t0) : 0.0; };

    std::optional<DemixEstimate> anm;
    double anm_ms = 0.0;
    std::string anm_error;
    for (const auto &name : cfg.methods)
    {
        MethodRecord m;
        m.method = name;
        if (!setup_error.empty())
        {
            m.solver_status = "error";
            m.error = setup_error;
            rec.methods.push_back(std::move(m));
            continue;
        }
        m.input_hash = input_hash(ch.h, ens.combiner, ens.y);
        const auto t0 = std::chrono::steady_clock::now();
        try
        {
            if (name == "anm" || name == "anm_known_k")
            {
                // both variants share one solve; they differ in model-order selection only
                if (!anm && anm_error.empty())
                {
                    try
                    {
                        const double sigma_eff = effective_noise_sigma(ens.combiner, ens.noise_sigma);
                        const double delta = cfg.solver.delta_rule == "expected"
                                                 ? expected_noise_bound(sigma_eff, ens.num_measurements())
                                                 : ens.noise_bound;
                        anm = estimate_channel(ens, ctx.subspace.basis, cfg.solver.tau, delta, ctx.solver_options());
                    }
                    catch (const std::exception &e)
                    {
                        anm_error = e.what();
                    }
                    anm_ms = detail::elapsed_ms(t0);
                }
                if (!anm)
                    throw numerical_error(anm_error);
                m.nmse = nmse(anm->h_hat, ch.h);
                m.solver_status = to_string(anm->solution.status);
                m.iters = anm->solution.iterations;
                ExtractOptions eo;
                eo.vandermonde.order_tol = cfg.solver.order_tol;
                if (name == "anm_known_k")
                {
                    eo.known_far = rec.num_far;
                    eo.known_near = rec.num_near;
                }
                detail::score_paths(m, detail::to_est_paths(extract_paths(anm->solution.blocks, ctx.subspace.basis, sys, eo)),
                                    ch, sys);
                m.wall_ms = cfg.record_timing ? anm_ms + detail::elapsed_ms(t0) : 0.0;
            }
            else if (name == "omp")
            {
                const double gamma = cfg.omp.gamma.value_or(static_cast<double>(rec.num_far) / num_paths);
                const auto r = hybrid_omp(ens.y, ens.combiner, ctx.dictionary, num_paths, gamma);
                m.nmse = nmse(r.h_hat, ch.h);
                m.solver_status = "ok";
                m.iters = static_cast<int>(r.far_support.size() + r.near_support.size());
                std::vector<detail::EstPath> est;
                for (int k : r.far_support)
                {
                    const double phi = ctx.dictionary.far_phis[k];
                    est.push_back({PathKind::far, phi, phi_to_theta(phi, sys), std::numeric_limits<double>::infinity()});
                }
                for (int k : r.near_support)
                {
                    const auto [theta, range] = ctx.dictionary.near_grid[static_cast<std::size_t>(k)];
                    est.push_back({PathKind::near, wrap_phi(phi_of(theta, sys)), theta, range});
                }
                detail::score_paths(m, est, ch, sys);
                timed(m, t0);
            }
        }
        catch (const std::exception &e)
        {
            m.solver_status = "error";
            m.error = e.what();
            m.paths.clear();
            timed(m, t0);
        }
        rec.methods.push_back(std::move(m));
    }
    return rec;
}

inline TrialRecord run_trial(const BenchContext &ctx, int point, int trial)
{
    return run_seeded_trial(ctx, point, ctx.sweep_value(point), trial, ctx.seed(point, trial));
}

/// All (point, trial) cells, in point-major order regardless of `jobs`.
inline std::vector<TrialRecord> run_sweep(const BenchContext &ctx, int jobs = 1,
                                          const std::function<void(const TrialRecord &)> &progress = {})
{
    const int points = static_cast<int>(ctx.config.sweep.values.size());
    const int trials = ctx.config.sweep.trials;
    const std::size_t cells = static_cast<std::size_t>(points) * static_cast<std::size_t>(trials);
    std::vector<TrialRecord> out(cells);
    std::atomic<std::size_t> next{0};
    std::mutex progress_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < cells; i = next++)
        {
            out[i] = run_trial(ctx, static_cast<int>(i) / trials, static_cast<int>(i) % trials);
            if (progress)
            {
                std::lock_guard<std::mutex> lock(progress_mutex);
                progress(out[i]);
            }
        }
    };
    jobs = std::max(1, std::min<int>(jobs, static_cast<int>(cells)));
    if (jobs == 1)
        worker();
    else
    {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j)
            pool.emplace_back(worker);
        for (auto &t : pool)
            t.join();
    }
    return out;
}

// ---- output --------------------------------------------------------------

inline std::string format_number(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline const char *csv_header =
    "config_hash,sweep_axis,sweep_value,trial,seed,method,nmse,angle_rmse_rad,range_rel_err,misses,false_alarms,"
    "solver_status,iters,wall_ms";

inline void write_csv(std::ostream &os, const std::vector<TrialRecord> &records)
{
    os << csv_header << '\n';
    for (const auto &r : records)
        for (const auto &m : r.methods)
            os << r.config_hash << ',' << r.sweep_axis << ',' << format_number(r.sweep_value) << ',' << r.trial << ','
               << r.seed << ',' << m.method << ',' << format_number(m.nmse) << ',' << format_number(m.angle_rmse_rad)
               << ',' << format_number(m.range_rel_err) << ',' << m.misses << ',' << m.false_alarms << ','
               << m.solver_status << ',' << m.iters << ',' << format_number(m.wall_ms) << '\n';
}

inline const char *paths_csv_header =
    "seed,method,kind_true,kind_est,phi_true,phi_est,theta_true,theta_est,range_true,range_est";

/// Per-path estimates against truth, one row per matched pair, miss or false alarm.
inline void write_paths_csv(std::ostream &os, const std::vector<TrialRecord> &records)
{
    os << paths_csv_header << '\n';
    for (const auto &r : records)
        for (const auto &m : r.methods)
            for (const auto &p : m.paths)
                os << r.seed << ',' << m.method << ',' << p.kind_true << ',' << p.kind_est << ','
                   << format_number(p.phi_true) << ',' << format_number(p.phi_est) << ','
                   << format_number(p.theta_true) << ',' << format_number(p.theta_est) << ','
                   << format_number(p.range_true) << ',' << format_number(p.range_est) << '\n';
}

inline json manifest(const BenchContext &ctx)
{
    json j;
    j["format"] = "hfdemix-manifest-v1";
    j["version"] = version_string;
    j["config_hash"] = ctx.hash;
    j["config"] = to_json(ctx.config);
    json points = json::array();
    for (int p = 0; p < static_cast<int>(ctx.config.sweep.values.size()); ++p)
    {
        json seeds = json::array();
        for (int t = 0; t < ctx.config.sweep.trials; ++t)
            seeds.push_back(ctx.seed(p, t));
        points.push_back({{"index", p}, {"sweep_value", ctx.sweep_value(p)}, {"seeds", seeds}});
    }
    j["points"] = points;
    return j;
}

/// Write results.csv and manifest.json into `dir`.
inline void write_outputs(const std::filesystem::path &dir, const BenchContext &ctx,
                          const std::vector<TrialRecord> &records)
{
    std::filesystem::create_directories(dir);
    std::ofstream csv(dir / "results.csv", std::ios::binary);
    write_csv(csv, records);
    std::ofstream man(dir / "manifest.json", std::ios::binary);
    man << manifest(ctx).dump(2) << '\n';
    if (!csv || !man)
        throw std::runtime_error("failed writing outputs to " + dir.string());
}

/// Mean NMSE per (sweep point, method), ignoring failed records.
struct PointSummary
{
    double sweep_value = 0.0;
    std::string method;
    double mean_nmse = 0.0;
    int count = 0;
    int not_converged = 0;
    int failures = 0;
};

inline std::vector<PointSummary> summarize(const std::vector<TrialRecord> &records)
{
    std::vector<PointSummary> out;
    for (const auto &r : records)
        for (const auto &m : r.methods)
        {
            auto it = std::find_if(out.begin(), out.end(), [&](const PointSummary &s) {
                return s.sweep_value == r.sweep_value && s.method == m.method;
            });
            if (it == out.end())
            {
                out.push_back({r.sweep_value, m.method, 0.0, 0, 0, 0});
                it = out.end() - 1;
            }
            if (m.solver_status == "error" || !std::isfinite(m.nmse))
            {
                ++it->failures;
                continue;
            }
            if (m.solver_status == "max_iters" || m.solver_status == "infeasible_suspected")
                ++it->not_converged;
            it->mean_nmse += m.nmse;
            ++it->count;
        }
    for (auto &s : out)
        s.mean_nmse = s.count > 0 ? s.mean_nmse / s.count : std::nan("");
    return out;
}

} // namespace hfdemix::bench

#endif
