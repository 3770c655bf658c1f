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

#ifndef HFDEMIX_OMP_HPP
#define HFDEMIX_OMP_HPP

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/QR>

#include "model.hpp"

namespace hfdemix
{

struct PolarGridSpec
{
    int far_size = 0;     // 0: 2N
    int near_angles = 0;  // 0: N
    int num_ranges = 8;
    double range_min = 10.0;
    double range_max = 80.0;
};

/// Far angular atoms plus near polar-domain atoms, all unit l2 norm.
struct PolarDictionary
{
    cmat far_atoms;
    cmat near_atoms;
    rvec far_phis;
    std::vector<std::pair<double, double>> near_grid; // (theta, r) per near atom

    Eigen::Index size() const { return far_atoms.cols() + near_atoms.cols(); }
};

///
/// Far block: d(phi) / sqrt(N) on phi = -1/2 + k / G_f. Near block: exact
/// spherical steering vectors on a sin(theta)-uniform angle grid times a range
/// ladder uniform in 1/r (psi is linear in 1/r), largest range first.
///
inline PolarDictionary build_polar_dictionary(const SystemConfig &cfg, const PolarGridSpec &spec = {})
{
    const int n = cfg.num_antennas;
    const int gf = spec.far_size > 0 ? spec.far_size : 2 * n;
    const int ga = spec.near_angles > 0 ? spec.near_angles : n;
    if (spec.num_ranges < 1 || !(spec.range_min > 0.0) || !(spec.range_min <= spec.range_max))
        throw config_error("polar grid: need num_ranges >= 1 and 0 < range_min <= range_max");
    const double norm = 1.0 / std::sqrt(static_cast<double>(n));

    PolarDictionary dict;
    dict.far_atoms.resize(n, gf);
    dict.far_phis.resize(gf);
    for (int k = 0; k < gf; ++k)
    {
        dict.far_phis[k] = -0.5 + static_cast<double>(k) / gf;
        dict.far_atoms.col(k) = d_vec(dict.far_phis[k], n) * norm;
    }

    std::vector<double> ranges(spec.num_ranges);
    for (int j = 0; j < spec.num_ranges; ++j)
    {
        const double inv_lo = 1.0 / spec.range_max;
        const double inv_hi = 1.0 / spec.range_min;
        const double f = spec.num_ranges == 1 ? 0.0 : static_cast<double>(j) / (spec.num_ranges - 1);
        ranges[j] = 1.0 / (inv_lo + f * (inv_hi - inv_lo));
    }
    dict.near_atoms.resize(n, static_cast<Eigen::Index>(ga) * spec.num_ranges);
    Eigen::Index col = 0;
    for (int a = 0; a < ga; ++a)
    {
        const double theta = std::asin(-1.0 + (2.0 * a + 1.0) / ga);
        for (double r : ranges)
        {
            dict.near_atoms.col(col++) = near_steering_exact(theta, r, cfg) * norm;
            dict.near_grid.emplace_back(theta, r);
        }
    }
    return dict;
}

struct OmpResult
{
    cvec h_hat;
    std::vector<int> far_support;  // column indices into far_atoms
    std::vector<int> near_support; // column indices into near_atoms
    std::vector<double> residual_norms; // ||r|| after each iteration, first entry ||y||
};

///
/// Two-stage hybrid-field OMP. ceil(gamma K) iterations select far atoms,
/// the remaining ones near atoms; every iteration re-fits all selected atoms
/// by least squares and the estimate is that joint fit.
///
inline OmpResult hybrid_omp(const cvec &y, const cmat &a, const PolarDictionary &dict, int num_paths, double gamma)
{
    detail::require_dims(a.rows() == y.size() && a.cols() == dict.far_atoms.rows(), "hybrid_omp: size mismatch");
    if (!(gamma >= 0.0 && gamma <= 1.0))
        throw config_error("gamma must be in [0, 1]");
    if (num_paths < 0 || num_paths > dict.size() || num_paths > a.rows())
        throw config_error("number of OMP iterations exceeds dictionary size or measurement count");
    const int k_far = std::min(num_paths, static_cast<int>(std::ceil(gamma * num_paths - 1e-9)));
    if (k_far > dict.far_atoms.cols() || num_paths - k_far > dict.near_atoms.cols())
        throw config_error("number of OMP iterations exceeds dictionary size");

    const cmat phi_far = a * dict.far_atoms;
    const cmat phi_near = a * dict.near_atoms;
    const rvec far_norms = phi_far.colwise().norm().transpose();
    const rvec near_norms = phi_near.colwise().norm().transpose();

    OmpResult res;
    cmat sensing(a.rows(), 0);
    cmat atoms(a.cols(), 0);
    cvec coef;
    cvec r = y;
    res.residual_norms.push_back(r.norm());

    auto select = [&](const cmat &phi, const rvec &norms, const std::vector<int> &taken) {
        const rvec score = (phi.adjoint() * r).cwiseAbs().cwiseQuotient(norms.cwiseMax(1e-300));
        int best = -1;
        double best_val = -1.0;
        for (Eigen::Index i = 0; i < score.size(); ++i)
        {
            if (std::find(taken.begin(), taken.end(), static_cast<int>(i)) != taken.end())
                continue;
            if (score[i] > best_val)
            {
                best_val = score[i];
                best = static_cast<int>(i);
            }
        }
        return best;
    };
    auto refit = [&](const cvec &sensing_col, const cvec &atom) {
        sensing.conservativeResize(Eigen::NoChange, sensing.cols() + 1);
        sensing.col(sensing.cols() - 1) = sensing_col;
        atoms.conservativeResize(Eigen::NoChange, atoms.cols() + 1);
        atoms.col(atoms.cols() - 1) = atom;
        coef = sensing.colPivHouseholderQr().solve(y);
        r = y - sensing * coef;
        res.residual_norms.push_back(r.norm());
    };

    for (int it = 0; it < k_far; ++it)
    {
        const int j = select(phi_far, far_norms, res.far_support);
        res.far_support.push_back(j);
        refit(phi_far.col(j), dict.far_atoms.col(j));
    }
    for (int it = k_far; it < num_paths; ++it)
    {
        const int j = select(phi_near, near_norms, res.near_support);
        res.near_support.push_back(j);
        refit(phi_near.col(j), dict.near_atoms.col(j));
    }
    res.h_hat = atoms.cols() > 0 ? cvec(atoms * coef) : cvec(cvec::Zero(a.cols()));
    return res;
}

} // namespace hfdemix

#endif
