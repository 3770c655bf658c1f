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

#ifndef HFDEMIX_PARAMS_HPP
#define HFDEMIX_PARAMS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "solver.hpp"

namespace hfdemix
{

/// One line of a Vandermonde decomposition Toep(u) = sum_k p_k d(phi_k) d(phi_k)^H.
struct SpectralLine
{
    double phi = 0.0;
    double power = 0.0;
};

struct VandermondeOptions
{
    /// Eigenvalues above order_tol * lambda_max count towards the model order.
    double order_tol = 1e-2;
    /// Allowed negative eigenvalue, relative to lambda_max.
    double psd_tol = 1e-6;
    /// Use this model order instead of the eigenvalue rule.
    std::optional<int> known_order;
};

namespace detail
{

// Lawson-Hanson active set for min ||C p - d|| s.t. p >= 0, given the normal
// equations G = C^H C (real) and b = Re(C^H d).
inline rvec nnls_normal(const Eigen::MatrixXd &g, const rvec &b)
{
    const auto k = b.size();
    rvec p = rvec::Zero(k);
    std::vector<bool> passive(k, false);
    const double tol = 1e-12 * std::max(1.0, b.cwiseAbs().maxCoeff());
    for (int outer = 0; outer < 3 * k + 10; ++outer)
    {
        const rvec grad = b - g * p;
        Eigen::Index best = -1;
        double best_val = tol;
        for (Eigen::Index i = 0; i < k; ++i)
            if (!passive[i] && grad[i] > best_val)
            {
                best_val = grad[i];
                best = i;
            }
        if (best < 0)
            break;
        passive[best] = true;
        for (int inner = 0; inner < 3 * k + 10; ++inner)
        {
            std::vector<Eigen::Index> idx;
            for (Eigen::Index i = 0; i < k; ++i)
                if (passive[i])
                    idx.push_back(i);
            const auto np = static_cast<Eigen::Index>(idx.size());
            Eigen::MatrixXd gp(np, np);
            rvec bp(np);
            for (Eigen::Index a = 0; a < np; ++a)
            {
                bp[a] = b[idx[a]];
                for (Eigen::Index c = 0; c < np; ++c)
                    gp(a, c) = g(idx[a], idx[c]);
            }
            const rvec sp = gp.completeOrthogonalDecomposition().solve(bp);
            if ((sp.array() > 0.0).all())
            {
                p.setZero();
                for (Eigen::Index a = 0; a < np; ++a)
                    p[idx[a]] = sp[a];
                break;
            }
            double alpha = 1.0;
            for (Eigen::Index a = 0; a < np; ++a)
                if (sp[a] <= 0.0)
                    alpha = std::min(alpha, p[idx[a]] / (p[idx[a]] - sp[a]));
            for (Eigen::Index a = 0; a < np; ++a)
                p[idx[a]] += alpha * (sp[a] - p[idx[a]]);
            for (Eigen::Index a = 0; a < np; ++a)
                if (p[idx[a]] <= 1e-15)
                {
                    p[idx[a]] = 0.0;
                    passive[idx[a]] = false;
                }
        }
    }
    return p;
}

} // namespace detail

/// Powers p >= 0 minimizing ||Toep(u) - sum p_k d(phi_k) d(phi_k)^H||_F.
inline rvec fit_line_powers(const cmat &toep, const std::vector<double> &phis)
{
    const auto n = static_cast<int>(toep.rows());
    const auto k = static_cast<Eigen::Index>(phis.size());
    cmat d(n, k);
    for (Eigen::Index i = 0; i < k; ++i)
        d.col(i) = d_vec(phis[i], n);
    const cmat gram = d.adjoint() * d;
    const Eigen::MatrixXd g = gram.cwiseAbs2();
    const rvec b = (d.adjoint() * toep * d).diagonal().real();
    return detail::nnls_normal(g, b);
}

///
/// Gridless frequency retrieval from a PSD Hermitian Toeplitz matrix.
///
/// The model order is the number of eigenvalues above order_tol * lambda_max.
/// A full-rank matrix has no noise subspace and therefore no identifiable
/// line spectrum; it yields an empty list. Frequencies come from the matrix
/// pencil of the signal subspace (rows 1..N-1 against rows 0..N-2); powers
/// from a non-negative least-squares fit of Toep(u).
///
inline std::vector<SpectralLine> vandermonde_decompose(const cvec &u, const VandermondeOptions &opts = {})
{
    const auto n = u.size();
    if (n < 2)
        throw domain_error("vandermonde_decompose: need N >= 2");
    const hmat toep = toeplitz(u);
    Eigen::SelfAdjointEigenSolver<hmat> es(toep);
    const rvec &lam = es.eigenvalues();
    const double lmax = lam[n - 1];
    if (!(lmax > 0.0))
    {
        if (lam[0] < -opts.psd_tol * std::max(std::abs(lmax), std::abs(lam[0])))
            throw domain_error("vandermonde_decompose: Toeplitz matrix is not PSD");
        return {};
    }
    if (lam[0] < -opts.psd_tol * lmax)
        throw domain_error("vandermonde_decompose: Toeplitz matrix is not PSD");

    Eigen::Index k = 0;
    if (opts.known_order)
        k = std::clamp<Eigen::Index>(*opts.known_order, 0, n - 1);
    else
    {
        for (Eigen::Index i = 0; i < n; ++i)
            if (lam[i] > opts.order_tol * lmax)
                ++k;
        if (k >= n)
            return {};
    }
    if (k == 0)
        return {};

    const cmat us = es.eigenvectors().rightCols(k);
    const cmat pencil = us.topRows(n - 1).completeOrthogonalDecomposition().solve(us.bottomRows(n - 1));
    Eigen::ComplexEigenSolver<cmat> ces(pencil, false);
    std::vector<double> phis(k);
    for (Eigen::Index i = 0; i < k; ++i)
        phis[i] = wrap_phi(std::arg(ces.eigenvalues()[i]) / two_pi);
    std::sort(phis.begin(), phis.end());

    const rvec powers = fit_line_powers(toep, phis);
    std::vector<SpectralLine> lines(k);
    for (Eigen::Index i = 0; i < k; ++i)
        lines[i] = {phis[i], powers[i]};
    return lines;
}

/// theta = asin(phi lambda / d); nullopt outside the arcsin domain.
inline std::optional<double> phi_to_theta(double phi, const SystemConfig &cfg)
{
    const double s = phi * cfg.wavelength() / cfg.spacing();
    if (!(std::abs(s) <= 1.0))
        return std::nullopt;
    return std::asin(s);
}

///
/// Least-squares Z with X = Z D^T, D = [d(phi_1) ... d(phi_K)]; column k
/// estimates alpha_k z_k. Duplicate or nearly coincident frequencies make D
/// rank deficient and raise domain_error.
///
inline cmat extract_Z(const cmat &x_hat, const std::vector<double> &phis)
{
    const auto n = static_cast<int>(x_hat.cols());
    const auto k = static_cast<Eigen::Index>(phis.size());
    if (k == 0)
        return cmat(x_hat.rows(), 0);
    if (k > n)
        throw domain_error("extract_Z: more frequencies than antennas");
    cmat d(n, k);
    for (Eigen::Index i = 0; i < k; ++i)
        d.col(i) = d_vec(phis[i], n);
    Eigen::JacobiSVD<cmat> svd(d);
    const rvec sv = svd.singularValues();
    if (sv[k - 1] <= 1e-10 * sv[0])
        throw domain_error("extract_Z: frequency matrix is rank deficient");
    // D Z^T = X^T
    const cmat zt = d.colPivHouseholderQr().solve(x_hat.transpose());
    return zt.transpose();
}

struct RangeEstimate
{
    double range = std::numeric_limits<double>::infinity();
    double psi = 0.0;
    bool valid = false;
};

///
/// Range from one column of Z. The waveform g = B z is formed, the ratio of
/// consecutive entries g[n+1] / g[n] = exp(j 2 pi (2n+1) psi) removes any
/// common complex factor, its phase is unwrapped along n and fitted against
/// n0 = [1, 3, ..., 2N-3] by least squares, and psi is mapped to a range.
///
inline RangeEstimate estimate_range(const cvec &z_col, const cmat &basis, double theta_hat, const SystemConfig &cfg)
{
    detail::require_dims(z_col.size() == basis.cols(), "estimate_range: z length must equal subspace rank");
    RangeEstimate est;
    const cvec g = basis * z_col;
    const auto n = g.size();
    const double gmax = g.cwiseAbs().maxCoeff();
    if (!(gmax > 0.0) || !std::isfinite(gmax))
        return est;
    for (Eigen::Index i = 0; i < n; ++i)
        if (std::abs(g[i]) <= 1e-10 * gmax)
            return est;

    double prev = std::arg(g[1] / g[0]);
    double phase = prev;
    double num = phase * 1.0;
    double den = 1.0;
    for (Eigen::Index i = 1; i + 1 < n; ++i)
    {
        const double a = std::arg(g[i + 1] / g[i]);
        double step = a - prev;
        step -= two_pi * std::round(step / two_pi);
        phase += step;
        prev = a;
        const double n0 = static_cast<double>(2 * i + 1);
        num += n0 * phase;
        den += n0 * n0;
    }
    est.psi = num / den / two_pi;
    if (!(est.psi < 0.0) || !std::isfinite(est.psi))
        return est;
    est.range = range_of(theta_hat, est.psi, cfg);
    est.valid = std::isfinite(est.range) && est.range > 0.0;
    return est;
}

struct FarPathEstimate
{
    double phi = 0.0;
    double power = 0.0;
    std::optional<double> theta;
};

struct NearPathEstimate
{
    double phi = 0.0;
    double power = 0.0;
    std::optional<double> theta;
    RangeEstimate range;
};

struct EstimatedPaths
{
    std::vector<FarPathEstimate> far;
    std::vector<NearPathEstimate> near;

    int num_far() const { return static_cast<int>(far.size()); }
    int num_near() const { return static_cast<int>(near.size()); }
};

struct ExtractOptions
{
    VandermondeOptions vandermonde;
    std::optional<int> known_far;
    std::optional<int> known_near;
};

/// Angles and ranges from the solved blocks.
inline EstimatedPaths extract_paths(const SdpBlocks &blocks, const cmat &basis, const SystemConfig &cfg,
                                    const ExtractOptions &opts = {})
{
    EstimatedPaths out;
    auto vf = opts.vandermonde;
    vf.known_order = opts.known_far;
    for (const auto &line : vandermonde_decompose(blocks.u_far, vf))
        out.far.push_back({line.phi, line.power, phi_to_theta(line.phi, cfg)});

    auto vn = opts.vandermonde;
    vn.known_order = opts.known_near;
    const auto lines = vandermonde_decompose(blocks.u_near, vn);
    std::vector<double> phis;
    for (const auto &line : lines)
        phis.push_back(line.phi);
    cmat z;
    try
    {
        z = extract_Z(blocks.X, phis);
    }
    catch (const domain_error &)
    {
        z = cmat(blocks.X.rows(), 0);
    }
    for (std::size_t i = 0; i < lines.size(); ++i)
    {
        NearPathEstimate e{lines[i].phi, lines[i].power, phi_to_theta(lines[i].phi, cfg), {}};
        if (e.theta && static_cast<Eigen::Index>(i) < z.cols())
            e.range = estimate_range(z.col(static_cast<Eigen::Index>(i)), basis, *e.theta, cfg);
        out.near.push_back(e);
    }
    return out;
}

struct PathMatching
{
    std::vector<std::pair<int, int>> pairs; // (estimate index, truth index)
    std::vector<double> phi_errors;         // wrap-around |dphi| per pair
    std::vector<int> misses;                // unmatched truth indices
    std::vector<int> false_alarms;          // unmatched estimate indices
};

/// Greedy assignment by smallest wrap-around |dphi|, optionally gated.
inline PathMatching match_paths(const std::vector<double> &estimated, const std::vector<double> &truth,
                                double gate = std::numeric_limits<double>::infinity())
{
    struct Cand
    {
        double dist;
        int e, t;
    };
    std::vector<Cand> cands;
    for (int e = 0; e < static_cast<int>(estimated.size()); ++e)
        for (int t = 0; t < static_cast<int>(truth.size()); ++t)
            cands.push_back({wrap_distance(estimated[e], truth[t]), e, t});
    std::stable_sort(cands.begin(), cands.end(), [](const Cand &a, const Cand &b) { return a.dist < b.dist; });

    std::vector<bool> used_e(estimated.size(), false), used_t(truth.size(), false);
    PathMatching m;
    for (const auto &c : cands)
    {
        if (c.dist > gate)
            break;
        if (used_e[c.e] || used_t[c.t])
            continue;
        used_e[c.e] = used_t[c.t] = true;
        m.pairs.emplace_back(c.e, c.t);
        m.phi_errors.push_back(c.dist);
    }
    for (int t = 0; t < static_cast<int>(truth.size()); ++t)
        if (!used_t[t])
            m.misses.push_back(t);
    for (int e = 0; e < static_cast<int>(estimated.size()); ++e)
        if (!used_e[e])
            m.false_alarms.push_back(e);
    return m;
}

} // namespace hfdemix

#endif
