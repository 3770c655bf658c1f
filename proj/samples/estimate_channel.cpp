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


// Draw one hybrid-field channel, observe it through a random combiner and
// estimate it with the convex demixing program and with hybrid OMP.
//
//   estimate_channel [snr_db] [seed]

#include <cstdio>
#include <cstdlib>

#include <hfdemix/hfdemix.hpp>

using namespace hfdemix;

int main(int argc, char **argv)
{
    const double snr_db = argc > 1 ? std::atof(argv[1]) : 15.0;
    const std::uint64_t seed = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 1;

    const int n = 32, rf = 4;
    const auto cfg = SystemConfig::make(n, rf, pilot_len_for(n, rf, 1), 30e9);
    std::printf("N=%d M=%d lambda=%.4f m Rayleigh=%.2f m\n", n, cfg.num_measurements(), cfg.wavelength(),
                cfg.rayleigh_distance());

    Rng rng(seed);
    SamplingSpec spec;
    spec.range_min = 2.0;
    spec.range_max = 6.0;
    const auto ch = sample_hybrid_channel(2, 1, cfg, rng, spec);
    for (const auto &p : ch.paths)
        std::printf("  true %-4s theta=%+.4f rad%s\n", to_string(p.kind), p.angle,
                    p.kind == PathKind::near ? (" r=" + std::to_string(p.range) + " m").c_str() : "");

    const auto ens = measure(cfg, ch.h, snr_db, rng);
    const auto sb = build_default_subspace(cfg, spec.range_min, 6, 1024);
    std::printf("subspace rank %d keeps %.6f of the dictionary energy\n", sb.rank(), sb.energy_capture());

    const double delta = expected_noise_bound(effective_noise_sigma(ens.combiner, ens.noise_sigma), ens.y.size());
    const auto est = estimate_channel(ens, sb.basis, 1.0, delta);
    std::printf("ANM: status=%s iters=%d NMSE=%.3e\n", to_string(est.solution.status), est.solution.iterations,
                nmse(est.h_hat, ch.h));
    const auto found = extract_paths(est.solution.blocks, sb.basis, cfg);
    for (const auto &f : found.far)
        std::printf("  est  far  theta=%+.4f rad power=%.3f\n", f.theta.value_or(NAN), f.power);
    for (const auto &f : found.near)
        std::printf("  est  near theta=%+.4f rad r=%.3f m power=%.3f\n", f.theta.value_or(NAN), f.range.range, f.power);

    const auto dict = build_polar_dictionary(cfg, {.num_ranges = 8, .range_min = 2.0, .range_max = 6.0});
    const auto omp = hybrid_omp(ens.y, ens.combiner, dict, ch.num_paths(), 2.0 / 3.0);
    std::printf("OMP: NMSE=%.3e\n", nmse(omp.h_hat, ch.h));
    return 0;
}
