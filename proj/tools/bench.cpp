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


// Command-line driver for the Monte-Carlo benchmark.
//
//   bench run --config <path> --out <dir> [--profile desk|paper] [--methods anm,omp] [--jobs N]
//   bench single --seed S [--config <path>] [--profile ...] [--value V] [--paths-out file.csv]

#include <CLI11.hpp>

#include <hfdemix/bench.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace bench = hfdemix::bench;

namespace
{

std::vector<std::string> split_methods(const std::string &s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty())
            out.push_back(item);
    return out;
}

bench::ExperimentConfig resolve(const std::string &profile, const std::string &config_path, const std::string &methods)
{
    auto cfg = bench::profile(profile);
    if (!config_path.empty())
        cfg = bench::load_config(config_path, cfg);
    if (!methods.empty())
        cfg.methods = split_methods(methods);
    cfg.validate();
    return cfg;
}

void print_summary(const std::vector<bench::TrialRecord> &records, std::ostream &os)
{
    os << "sweep_value,method,mean_nmse,count,not_converged,failures\n";
    for (const auto &s : bench::summarize(records))
        os << bench::format_number(s.sweep_value) << ',' << s.method << ',' << bench::format_number(s.mean_nmse) << ','
           << s.count << ',' << s.not_converged << ',' << s.failures << '\n';
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"hfdemix benchmark: hybrid-field channel estimation sweeps"};
    app.require_subcommand(1);

    std::string profile = "desk", config_path, methods, out_dir, paths_out;
    int jobs = 1;
    bool quiet = false;

    auto *run = app.add_subcommand("run", "run a full sweep and write results.csv + manifest.json");
    run->add_option("--config", config_path, "JSON config or run manifest (overrides the profile)");
    run->add_option("--out", out_dir, "output directory")->required();
    run->add_option("--profile", profile, "base profile")->check(CLI::IsMember({"desk", "paper"}));
    run->add_option("--methods", methods, "comma-separated subset of anm,anm_known_k,omp");
    run->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    run->add_flag("--quiet", quiet, "no progress or summary on stderr");

    std::uint64_t seed = 0;
    double value = std::nan("");
    auto *single = app.add_subcommand("single", "run one trial with an explicit seed and print its records");
    single->add_option("--seed", seed, "trial seed")->required();
    single->add_option("--config", config_path, "JSON config or run manifest");
    single->add_option("--profile", profile, "base profile")->check(CLI::IsMember({"desk", "paper"}));
    single->add_option("--methods", methods, "comma-separated subset of anm,anm_known_k,omp");
    single->add_option("--value", value, "sweep value (SNR in dB or K); default: first sweep value");
    single->add_option("--paths-out", paths_out, "write per-path estimates vs truth as CSV");

    CLI11_PARSE(app, argc, argv);

    try
    {
        const auto cfg = resolve(profile, config_path, methods);
        const bench::BenchContext ctx(cfg);
        if (*run)
        {
            const int total = static_cast<int>(cfg.sweep.values.size()) * cfg.sweep.trials;
            int done = 0;
            auto progress = [&](const bench::TrialRecord &r) {
                ++done;
                if (!quiet)
                    std::cerr << "\r[" << done << "/" << total << "] point " << r.point << " trial " << r.trial
                              << std::flush;
            };
            const auto records = bench::run_sweep(ctx, jobs, progress);
            if (!quiet)
                std::cerr << '\n';
            bench::write_outputs(out_dir, ctx, records);
            if (!quiet)
                print_summary(records, std::cerr);
            return 0;
        }
        const double v = std::isnan(value) ? ctx.sweep_value(0) : value;
        const auto rec = bench::run_seeded_trial(ctx, 0, v, 0, seed);
        bench::write_csv(std::cout, {rec});
        for (const auto &m : rec.methods)
            if (!m.error.empty())
                std::cerr << m.method << ": " << m.error << '\n';
        if (!paths_out.empty())
        {
            std::ofstream os(paths_out);
            bench::write_paths_csv(os, {rec});
        }
        return 0;
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
