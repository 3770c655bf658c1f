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

#ifndef HFDEMIX_MEASUREMENT_HPP
#define HFDEMIX_MEASUREMENT_HPP

#include <cmath>
#include <limits>

#include "model.hpp"

namespace hfdemix
{

/// Combiner, observation and noise budget for one user.
struct MeasurementEnsemble
{
    cmat combiner;            // M x N, stacked per-slot blocks A_p
    cvec y;                   // length M
    double noise_sigma = 0.0; // per-antenna noise std before combining
    double noise_bound = 0.0; // l2 budget delta
    int num_rf_chains = 1;

    Eigen::Index num_measurements() const { return combiner.rows(); }
    Eigen::Index num_antennas() const { return combiner.cols(); }
};

/// Pilot length giving M = N / factor measurements (factor 1: full sampling).
inline int pilot_len_for(int num_antennas, int num_rf_chains, int downsample)
{
    if (downsample < 1 || num_antennas % (downsample * num_rf_chains) != 0)
        throw config_error("N must be divisible by downsample * N_RF");
    return num_antennas / (downsample * num_rf_chains);
}

/// Constant-modulus analog combiner; entries exp(j w) / sqrt(N), w ~ U[0, 2 pi).
inline cmat random_combiner(const SystemConfig &cfg, Rng &rng)
{
    cfg.validate();
    const int n = cfg.num_antennas;
    const int m = cfg.num_measurements();
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    cmat a(m, n);
    for (int row = 0; row < m; ++row)
        for (int col = 0; col < n; ++col)
            a(row, col) = std::polar(scale, two_pi * rng.uniform());
    return a;
}

/// delta = sigma_eff * sqrt(M + 2 sqrt(M log(1/eps))).
inline double chi_square_noise_bound(double sigma_eff, Eigen::Index m, double eps = 0.05)
{
    const auto md = static_cast<double>(m);
    return sigma_eff * std::sqrt(md + 2.0 * std::sqrt(md * std::log(1.0 / eps)));
}

/// Per-entry std of the stacked effective noise A_p n_p: sigma * ||A||_F / sqrt(M).
inline double effective_noise_sigma(const cmat &a, double sigma)
{
    return sigma * std::sqrt(a.squaredNorm() / static_cast<double>(a.rows()));
}

/// delta = sigma_eff * sqrt(M), roughly the expected noise norm.
inline double expected_noise_bound(double sigma_eff, Eigen::Index m)
{
    return sigma_eff * std::sqrt(static_cast<double>(m));
}

struct Observation
{
    cvec y;
    double sigma = 0.0;
    double delta = 0.0;
};

///
/// y = A h + n_eff with n_eff = [A_1 n_1; ...; A_P n_P], n_p ~ CN(0, sigma^2 I_N).
/// sigma is chosen so that ||A h||^2 / E||n_eff||^2 equals the requested SNR
/// (SNR is measured after combining). An infinite SNR gives y = A h, delta = 0.
///
inline Observation observe(const cmat &a, const cvec &h, double snr_db, Rng &rng, int num_rf_chains,
                           double eps = 0.05)
{
    detail::require_dims(a.cols() == h.size(), "observe: combiner columns must match channel length");
    detail::require_dims(num_rf_chains >= 1 && a.rows() % num_rf_chains == 0,
                         "observe: combiner rows must be a multiple of num_rf_chains");
    Observation obs;
    obs.y = a * h;
    if (std::isinf(snr_db) && snr_db > 0)
        return obs;
    if (std::isnan(snr_db))
        throw config_error("snr_db is NaN");
    const double signal = obs.y.squaredNorm();
    if (!(signal > 0.0))
        throw degenerate_input_error("cannot set a finite SNR for a zero received signal");
    const double frob = a.squaredNorm();
    obs.sigma = std::sqrt(signal / (frob * std::pow(10.0, snr_db / 10.0)));

    const auto n = a.cols();
    const auto slots = a.rows() / num_rf_chains;
    cvec noise(n);
    for (Eigen::Index p = 0; p < slots; ++p)
    {
        for (Eigen::Index i = 0; i < n; ++i)
            noise[i] = rng.complex_normal(obs.sigma * obs.sigma);
        obs.y.segment(p * num_rf_chains, num_rf_chains) += a.middleRows(p * num_rf_chains, num_rf_chains) * noise;
    }
    const double sigma_eff = effective_noise_sigma(a, obs.sigma);
    obs.delta = chi_square_noise_bound(sigma_eff, a.rows(), eps);
    return obs;
}

inline MeasurementEnsemble measure(const SystemConfig &cfg, const cvec &h, double snr_db, Rng &rng,
                                   double eps = 0.05)
{
    MeasurementEnsemble ens;
    ens.combiner = random_combiner(cfg, rng);
    auto obs = observe(ens.combiner, h, snr_db, rng, cfg.num_rf_chains, eps);
    ens.y = std::move(obs.y);
    ens.noise_sigma = obs.sigma;
    ens.noise_bound = obs.delta;
    ens.num_rf_chains = cfg.num_rf_chains;
    return ens;
}

// Lifting operator. A near-field atom is the L x N matrix z d(phi)^T and
// lifts to (B z) .* d(phi); in general [lift(X)]_n = sum_l B(n,l) X(l,n).

/// lift(X)_n = sum_l B(n, l) X(l, n).
inline cvec lift_apply(const cmat &basis, const cmat &x)
{
    detail::require_dims(x.rows() == basis.cols() && x.cols() == basis.rows(),
                         "lift_apply: X must be L x N for an N x L basis");
    return basis.cwiseProduct(x.transpose()).rowwise().sum();
}

/// Adjoint under <a,b> = b^H a and <X,Y> = tr(Y^H X): out(l, n) = conj(B(n, l)) v_n.
inline cmat lift_adjoint(const cmat &basis, const cvec &v)
{
    detail::require_dims(v.size() == basis.rows(), "lift_adjoint: v must have length N");
    return basis.adjoint() * v.asDiagonal();
}

/// Diagonal of lift o lift^*: squared row norms of B.
inline rvec lift_gram_diagonal(const cmat &basis) { return basis.rowwise().squaredNorm(); }

} // namespace hfdemix

#endif
