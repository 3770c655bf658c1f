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


// Acceptance run. One PASS/FAIL line per criterion on stdout, details after
// the colon. Exit status is the number of failed criteria (capped at 125).
//
//   hfdemix_acceptance [--out DIR] [--only NAME]...
//
// With --out the sweep CSVs and manifests are kept under DIR.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <hfdemix/bench.hpp>
#include <hfdemix/hfdemix.hpp>

#include "../support/oracle_instances.hpp"

using namespace hfdemix;
namespace fs = std::filesystem;

namespace
{

struct Outcome
{
    bool pass = false;
    std::string detail;
};

std::string fmt(const char *f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

fs::path g_out;

cvec rand_cvec(Rng &rng, Eigen::Index n)
{
    cvec v(n);
    for (auto &x : v)
        x = rng.complex_normal();
    return v;
}

cmat rand_orthonormal(Rng &rng, Eigen::Index n, Eigen::Index l)
{
    cmat g(n, l);
    for (auto &x : g.reshaped())
        x = rng.complex_normal();
    Eigen::HouseholderQR<cmat> qr(g);
    return qr.householderQ() * cmat::Identity(n, l);
}

// ---- criteria ------------------------------------------------------------

Outcome model_identities()
{
    Rng rng(101);
    const auto cfg = SystemConfig::make(64, 4, 16, 30e9);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i)
    {
        const double theta = rng.uniform(-1.4, 1.4);
        const double r = rng.uniform(1.0, 200.0);
        const cvec lhs = near_steering_approx(theta, r, cfg);
        const cvec rhs = d_vec(phi_of(theta, cfg), 64).cwiseProduct(g_vec(psi_of(theta, r, cfg), 64));
        worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
    }
    const auto big = SystemConfig::make(256, 4, 64, 30e9);
    const double rd = big.rayleigh_distance();
    const double rd_full = big.rayleigh_distance_full_aperture();
    const bool ok = worst <= 1e-12 && std::abs(rd - 327.68) <= 0.01 * 327.68 &&
                    std::abs(rd_full - 327.68) <= 0.01 * 327.68;
    return {ok, fmt("max |approx - d.*g| = %.2e over 100 cases; Rayleigh N=256 %.2f m ((N-1)d), %.2f m (Nd)", worst,
                    rd, rd_full)};
}

Outcome lifting()
{
    Rng rng(102);
    double atom_err = 0.0, adj_err = 0.0;
    for (int i = 0; i < 100; ++i)
    {
        const int n = 8 + static_cast<int>(rng.next_u64() % 57);
        const int l = 1 + static_cast<int>(rng.next_u64() % std::min(n, 12));
        const cmat b = rand_orthonormal(rng, n, l);
        const cvec z = rand_cvec(rng, l);
        const cvec d = d_vec(rng.uniform(-0.5, 0.5), n);
        const cvec lhs = lift_apply(b, z * d.transpose());
        const cvec rhs = (b * z).cwiseProduct(d);
        atom_err = std::max(atom_err, (lhs - rhs).cwiseAbs().maxCoeff() / std::max(1.0, rhs.cwiseAbs().maxCoeff()));
    }
    for (int i = 0; i < 50; ++i)
    {
        const int n = 8 + static_cast<int>(rng.next_u64() % 57);
        const int l = 1 + static_cast<int>(rng.next_u64() % std::min(n, 12));
        const cmat b = rand_orthonormal(rng, n, l);
        cmat x(l, n);
        for (auto &e : x.reshaped())
            e = rng.complex_normal();
        const cvec v = rand_cvec(rng, n);
        const cplx lhs = v.dot(lift_apply(b, x));
        const cplx rhs = (lift_adjoint(b, v).adjoint() * x).trace();
        adj_err = std::max(adj_err, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
    }
    return {atom_err <= 1e-10 && adj_err <= 1e-10,
            fmt("atom property max rel err %.2e (100 cases); adjoint identity max rel err %.2e (50 pairs)", atom_err,
                adj_err)};
}

Outcome solver_oracle()
{
    SolverOptions tight;
    tight.eps_abs = 1e-9;
    tight.eps_rel = 1e-9;
    double worst = 0.0;
    bool all_converged = true;
    for (int k = 0; k < testing::num_oracle_instances; ++k)
    {
        const auto sol = solve(testing::oracle_instance(k).program(), tight);
        const double ref = testing::oracle_reference_objectives[static_cast<std::size_t>(k)];
        worst = std::max(worst, std::abs(sol.objective_value - ref) / std::abs(ref));
        all_converged = all_converged && sol.status == SolveStatus::converged;
    }
    const int n = 16;
    const cplx c(1.3, -0.7);
    Rng rng(103);
    const auto sol = solve(compile(cmat::Identity(n, n), c * d_vec(0.137, n), rand_orthonormal(rng, n, 3), 1e3, 0.0),
                           tight);
    const double atom_err = std::abs(sol.objective_value - std::abs(c)) / std::abs(c);
    return {all_converged && worst <= 1e-4 && atom_err <= 0.01,
            fmt("5 N=8 instances: max rel objective err %.2e vs reference; single far atom rel err %.2e", worst,
                atom_err)};
}

Outcome exact_recovery()
{
    const int n = 32;
    const auto cfg = SystemConfig::make(n, 4, pilot_len_for(n, 4, 1), 30e9);
    const auto sb = build_default_subspace(cfg, 10.0, 8, 4096);
    SolverOptions o;
    o.eps_abs = o.eps_rel = 1e-8;
    double worst_nmse = 0.0, worst_angle = 0.0;
    bool ok = true;
    for (int inst = 0; inst < 3; ++inst)
    {
        Rng rng(derive_seed(104, 0, static_cast<std::uint64_t>(inst)));
        SamplingSpec spec;
        spec.min_separation = 2.0;
        const auto ch = sample_hybrid_channel(2, 0, cfg, rng, spec);
        MeasurementEnsemble ens;
        ens.combiner = random_combiner(cfg, rng);
        ens.y = ens.combiner * ch.h;
        const auto est = estimate_channel(ens, sb.basis, 10.0, 0.0, o);
        worst_nmse = std::max(worst_nmse, nmse(est.h_hat, ch.h));
        const auto found = extract_paths(est.solution.blocks, sb.basis, cfg);
        std::vector<double> est_phi, true_phi;
        for (const auto &f : found.far)
            est_phi.push_back(f.phi);
        for (const auto &p : ch.paths)
            true_phi.push_back(p.phi(cfg));
        const auto m = match_paths(est_phi, true_phi);
        ok = ok && found.num_far() == 2 && found.num_near() == 0 && m.pairs.size() == 2;
        for (const auto &[e, t] : m.pairs)
        {
            const auto th = found.far[static_cast<std::size_t>(e)].theta;
            worst_angle = th ? std::max(worst_angle, std::abs(*th - ch.paths[static_cast<std::size_t>(t)].angle))
                             : INFINITY;
        }
    }
    ok = ok && worst_nmse < 1e-4 && worst_angle <= 1e-3;
    return {ok, fmt("3 instances, N=32, M=32, K_f=2, tau=10: worst NMSE %.2e, worst angle err %.2e rad", worst_nmse,
                    worst_angle)};
}

Outcome near_field_floor()
{
    // Noiseless single near path, compressive sampling M = N/2.
    const int n = 64;
    const auto cfg = SystemConfig::make(n, 4, pilot_len_for(n, 4, 2), 30e9);
    const auto sb = build_default_subspace(cfg, 10.0, 8, 4096);
    const double theta = 0.3, r = 30.0;
    const cvec h = near_steering_exact(theta, r, cfg);
    const cvec g = g_vec(psi_of(theta, r, cfg), n);
    const cvec model = d_vec(phi_of(theta, cfg), n).cwiseProduct(sb.basis * (sb.basis.adjoint() * g));
    const double floor = (h - model).squaredNorm() / h.squaredNorm();
    const double taylor = (h - near_steering_approx(theta, r, cfg)).squaredNorm() / h.squaredNorm();

    Rng rng(7);
    MeasurementEnsemble ens;
    ens.combiner = random_combiner(cfg, rng);
    ens.y = ens.combiner * h;
    SolverOptions o;
    o.rho = 0.005;
    o.adaptive_rho = false;
    o.eps_abs = o.eps_rel = 1e-7;
    o.max_iters = 5000;
    const auto est = estimate_channel(ens, sb.basis, 0.5 / std::sqrt(double(n)), 0.0, o);
    const double e = nmse(est.h_hat, h);
    ExtractOptions eo;
    eo.known_far = 0;
    eo.known_near = 1;
    const auto found = extract_paths(est.solution.blocks, sb.basis, cfg, eo);
    double rerr = INFINITY;
    if (found.num_near() == 1 && found.near[0].range.valid)
        rerr = std::abs(found.near[0].range.range - r) / r;
    return {e <= 3.0 * floor && rerr <= 0.10,
            fmt("floor %.3e (Taylor part %.3e), NMSE %.3e = %.2fx floor, range %.2f m (rel err %.3f), %d iters",
                floor, taylor, e, e / floor, found.num_near() ? found.near[0].range.range : NAN, rerr,
                est.solution.iterations)};
}

Outcome vandermonde_oracle()
{
    Rng rng(106);
    double fmax = 0.0, pmax = 0.0;
    bool orders = true;
    for (int c = 0; c < 100; ++c)
    {
        const int n = 16 + static_cast<int>(rng.next_u64() % 49);
        const int k = 1 + static_cast<int>(rng.next_u64() % 6);
        std::vector<double> phis;
        while (static_cast<int>(phis.size()) < k)
        {
            const double p = rng.uniform(-0.5, 0.5);
            bool ok = true;
            for (double q : phis)
                ok = ok && wrap_distance(p, q) >= 2.0 / n;
            if (ok)
                phis.push_back(p);
        }
        std::sort(phis.begin(), phis.end());
        std::vector<double> pw(static_cast<std::size_t>(k));
        cvec u = cvec::Zero(n);
        for (int i = 0; i < k; ++i)
        {
            pw[i] = rng.uniform(0.1, 3.0);
            u += pw[i] * d_vec(phis[i], n);
        }
        const auto lines = vandermonde_decompose(u);
        if (static_cast<int>(lines.size()) != k)
        {
            orders = false;
            continue;
        }
        for (int i = 0; i < k; ++i)
        {
            fmax = std::max(fmax, wrap_distance(lines[i].phi, phis[i]));
            pmax = std::max(pmax, std::abs(lines[i].power - pw[i]) / pw[i]);
        }
    }
    return {orders && fmax < 1e-6 && pmax < 1e-6,
            fmt("100 cases: max freq err %.2e, max rel power err %.2e%s", fmax, pmax,
                orders ? "" : ", order mismatch")};
}

using bench::BenchContext;
using bench::ExperimentConfig;

std::vector<bench::PointSummary> sweep(const ExperimentConfig &cfg, const std::string &tag,
                                       std::vector<bench::TrialRecord> *keep = nullptr)
{
    const BenchContext ctx(cfg);
    auto recs = bench::run_sweep(ctx, 1);
    if (!g_out.empty())
        bench::write_outputs(g_out / tag, ctx, recs);
    auto s = bench::summarize(recs);
    if (keep)
        *keep = std::move(recs);
    return s;
}

double mean_of(const std::vector<bench::PointSummary> &s, double value, const std::string &method)
{
    for (const auto &p : s)
        if (p.sweep_value == value && p.method == method)
            return p.mean_nmse;
    return NAN;
}

ExperimentConfig desk_trend_config()
{
    auto c = bench::profile("desk");
    c.methods = {"anm", "omp"};
    c.subspace.cache_dir = "";
    return c;
}

Outcome snr_trend()
{
    bool ok = true;
    std::string detail;
    for (int ds : {1, 2})
    {
        auto c = desk_trend_config();
        c.name = fmt("snr_sweep_ds%d", ds);
        c.system.downsample = ds;
        c.sweep.axis = "snr_db";
        c.sweep.values = {0, 5, 10, 15, 20};
        const auto s = sweep(c, c.name);
        detail += fmt("%sM=N/%d:", detail.empty() ? "" : "; ", ds);
        double prev = INFINITY;
        for (double v : c.sweep.values)
        {
            const double a = mean_of(s, v, "anm"), o = mean_of(s, v, "omp");
            ok = ok && a < o && a <= prev;
            prev = a;
            detail += fmt(" %gdB anm %.3g omp %.3g", v, a, o);
        }
        for (const auto &p : s)
            if (p.failures > 0)
            {
                ok = false;
                detail += fmt(" [%d failures]", p.failures);
            }
    }
    return {ok, detail};
}

std::vector<bench::TrialRecord> g_k_records;

ExperimentConfig k_sweep_config()
{
    auto c = desk_trend_config();
    c.name = "k_sweep";
    c.sweep.axis = "num_paths";
    c.sweep.values = {2, 4, 6};
    c.channel.snr_db = 10.0;
    return c;
}

Outcome path_count_trend()
{
    const auto c = k_sweep_config();
    const auto s = sweep(c, c.name, &g_k_records);
    bool ok = true;
    std::string detail = "SNR 10 dB:";
    double prev = -INFINITY;
    for (double v : c.sweep.values)
    {
        const double a = mean_of(s, v, "anm"), o = mean_of(s, v, "omp");
        ok = ok && a < o && a >= prev;
        prev = a;
        detail += fmt(" K=%g anm %.3g omp %.3g", v, a, o);
    }
    return {ok, detail};
}

Outcome determinism()
{
    // rerun the K sweep from its manifest and compare the CSV bytes
    const auto c = k_sweep_config();
    const BenchContext ctx(c);
    if (g_k_records.empty())
        g_k_records = bench::run_sweep(ctx, 1);
    const fs::path dir = g_out.empty() ? fs::temp_directory_path() / "hfdemix_acceptance_manifest" : g_out / "rerun";
    bench::write_outputs(dir, ctx, g_k_records);

    const BenchContext again(bench::load_config(dir / "manifest.json"));
    std::ostringstream second;
    bench::write_csv(second, bench::run_sweep(again, 2));
    std::ifstream is(dir / "results.csv", std::ios::binary);
    std::stringstream first;
    first << is.rdbuf();
    const bool same = first.str() == second.str() && !first.str().empty();
    const auto bytes = first.str().size();
    if (g_out.empty())
        fs::remove_all(dir);
    return {same, fmt("K sweep rerun from manifest (2 workers): %zu bytes, %s", bytes, same ? "identical" : "differs")};
}

struct Criterion
{
    const char *name;
    Outcome (*run)();
};

} // namespace

int main(int argc, char **argv)
{
    std::vector<std::string> only;
    for (int i = 1; i < argc; ++i)
    {
        if (!std::strcmp(argv[i], "--out") && i + 1 < argc)
            g_out = argv[++i];
        else if (!std::strcmp(argv[i], "--only") && i + 1 < argc)
            only.emplace_back(argv[++i]);
        else
        {
            std::fprintf(stderr, "usage: %s [--out DIR] [--only NAME]...\n", argv[0]);
            return 2;
        }
    }

    const Criterion criteria[] = {
        {"model_identities", model_identities},
        {"lifting_correctness", lifting},
        {"solver_oracle", solver_oracle},
        {"exact_recovery", exact_recovery},
        {"near_field_floor", near_field_floor},
        {"vandermonde_oracle", vandermonde_oracle},
        {"snr_trend", snr_trend},
        {"path_count_trend", path_count_trend},
        {"determinism", determinism},
    };

    int failed = 0;
    for (const auto &c : criteria)
    {
        if (!only.empty() && std::find(only.begin(), only.end(), c.name) == only.end())
            continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome out;
        try
        {
            out = c.run();
        }
        catch (const std::exception &e)
        {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s %s: %s (%.1f s)\n", out.pass ? "PASS" : "FAIL", c.name, out.detail.c_str(), sec);
        std::fflush(stdout);
        failed += out.pass ? 0 : 1;
    }
    return std::min(failed, 125);
}
