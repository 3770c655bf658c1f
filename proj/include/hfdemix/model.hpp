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

#ifndef HFDEMIX_MODEL_HPP
#define HFDEMIX_MODEL_HPP

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "errors.hpp"
#include "random.hpp"

namespace hfdemix
{

using cplx = std::complex<double>;
using cvec = Eigen::VectorXcd;
using cmat = Eigen::MatrixXcd;
using rvec = Eigen::VectorXd;

inline constexpr double speed_of_light = 299792458.0;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

///
/// Uniform linear array with a hybrid analog/digital receiver.
///
/// Antennas sit on the y-axis at (0, n d), n = 0..N-1, with d = lambda/2.
/// The pilot sequence has `pilot_len` slots and every slot yields
/// `num_rf_chains` combined samples, so one user contributes
/// M = num_rf_chains * pilot_len measurements.
///
struct SystemConfig
{
    int num_antennas = 64;
    int num_rf_chains = 4;
    int pilot_len = 16;
    double carrier_freq = 30e9;

    static SystemConfig make(int num_antennas, int num_rf_chains, int pilot_len, double carrier_freq)
    {
        SystemConfig c{num_antennas, num_rf_chains, pilot_len, carrier_freq};
        c.validate();
        return c;
    }

    void validate() const
    {
        if (num_antennas < 2)
            throw config_error("num_antennas must be >= 2");
        if (num_rf_chains < 1)
            throw config_error("num_rf_chains must be >= 1");
        if (pilot_len < 1)
            throw config_error("pilot_len must be >= 1");
        if (!(carrier_freq > 0.0) || !std::isfinite(carrier_freq))
            throw config_error("carrier_freq must be positive");
    }

    double wavelength() const { return speed_of_light / carrier_freq; }
    double spacing() const { return 0.5 * wavelength(); }
    int num_measurements() const { return num_rf_chains * pilot_len; }

    /// 2 D^2 / lambda with the physical aperture D = (N-1) d.
    double rayleigh_distance() const
    {
        const double aperture = (num_antennas - 1) * spacing();
        return 2.0 * aperture * aperture / wavelength();
    }

    /// Same with D = N d; this is the convention behind the commonly quoted
    /// 327.68 m for a 256-element array at 30 GHz.
    double rayleigh_distance_full_aperture() const
    {
        const double aperture = num_antennas * spacing();
        return 2.0 * aperture * aperture / wavelength();
    }
};

enum class PathKind
{
    far,
    near
};

inline const char *to_string(PathKind k) { return k == PathKind::far ? "far" : "near"; }

/// Spatial frequency phi = (d / lambda) sin(theta), in cycles per antenna.
inline double phi_of(double theta, const SystemConfig &cfg)
{
    return cfg.spacing() / cfg.wavelength() * std::sin(theta);
}

/// Curvature psi = -d^2 cos^2(theta) / (2 lambda r), in cycles per antenna^2.
inline double psi_of(double theta, double range, const SystemConfig &cfg)
{
    if (!(range > 0.0))
        throw domain_error("range must be positive");
    const double d = cfg.spacing();
    const double c = std::cos(theta);
    return -d * d * c * c / (2.0 * cfg.wavelength() * range);
}

/// Inverse of psi_of for a known angle.
inline double range_of(double theta, double psi, const SystemConfig &cfg)
{
    if (!(psi < 0.0))
        throw domain_error("psi must be negative for a finite range");
    const double d = cfg.spacing();
    const double c = std::cos(theta);
    return -d * d * c * c / (2.0 * cfg.wavelength() * psi);
}

/// One propagation path. `range` is meaningful for near paths only.
struct PathParams
{
    PathKind kind = PathKind::far;
    cplx gain{1.0, 0.0};
    double angle = 0.0;
    double range = 0.0;

    double phi(const SystemConfig &cfg) const { return phi_of(angle, cfg); }
    double psi(const SystemConfig &cfg) const { return kind == PathKind::near ? psi_of(angle, range, cfg) : 0.0; }
};

namespace detail
{
inline void check_angle(double theta)
{
    if (!(std::abs(theta) < 0.5 * std::numbers::pi))
        throw domain_error("angle must lie in (-pi/2, pi/2)");
}

inline void check_range(double r)
{
    if (!(r > 0.0) || !std::isfinite(r))
        throw domain_error("range must be positive and finite");
}
} // namespace detail

/// d(phi): entry n = exp(+j 2 pi n phi).
inline cvec d_vec(double phi, int n)
{
    cvec v(n);
    for (int i = 0; i < n; ++i)
        v[i] = std::polar(1.0, two_pi * phi * i);
    return v;
}

/// g(psi): entry n = exp(+j 2 pi n^2 psi).
inline cvec g_vec(double psi, int n)
{
    cvec v(n);
    for (int i = 0; i < n; ++i)
        v[i] = std::polar(1.0, two_pi * psi * static_cast<double>(i) * i);
    return v;
}

/// Far-field steering vector a(theta). Identical to d_vec(phi_of(theta)).
inline cvec far_steering(double theta, const SystemConfig &cfg)
{
    detail::check_angle(theta);
    const double k = two_pi / cfg.wavelength() * cfg.spacing() * std::sin(theta);
    cvec v(cfg.num_antennas);
    for (int n = 0; n < cfg.num_antennas; ++n)
        v[n] = std::polar(1.0, k * n);
    return v;
}

/// Distance from a scatterer at polar position (r, theta) to antenna n (0-based).
inline double element_range(double theta, double r, int n, const SystemConfig &cfg)
{
    detail::check_range(r);
    const double y = n * cfg.spacing();
    const double sq = r * r + y * y - 2.0 * r * y * std::sin(theta);
    return std::sqrt(std::max(sq, 0.0));
}

/// Exact spherical-wave steering vector b(theta, r).
inline cvec near_steering_exact(double theta, double r, const SystemConfig &cfg)
{
    detail::check_angle(theta);
    detail::check_range(r);
    const double k = two_pi / cfg.wavelength();
    cvec v(cfg.num_antennas);
    v[0] = cplx(1.0, 0.0);
    for (int n = 1; n < cfg.num_antennas; ++n)
        v[n] = std::polar(1.0, -k * (element_range(theta, r, n, cfg) - r));
    return v;
}

/// Second-order (Fresnel) approximation of b(theta, r).
inline cvec near_steering_approx(double theta, double r, const SystemConfig &cfg)
{
    detail::check_angle(theta);
    detail::check_range(r);
    const double k = two_pi / cfg.wavelength();
    const double d = cfg.spacing();
    const double s = std::sin(theta);
    const double c2 = std::cos(theta) * std::cos(theta);
    cvec v(cfg.num_antennas);
    for (int n = 0; n < cfg.num_antennas; ++n)
    {
        const double nd = n * d;
        v[n] = std::polar(1.0, k * (nd * s - nd * nd * c2 / (2.0 * r)));
    }
    return v;
}

/// Steering vector of one path under the exact model.
inline cvec path_steering(const PathParams &p, const SystemConfig &cfg)
{
    return p.kind == PathKind::far ? far_steering(p.angle, cfg) : near_steering_exact(p.angle, p.range, cfg);
}

/// Wrap-around distance between two spatial frequencies on the unit circle.
inline double wrap_distance(double a, double b)
{
    double t = std::fmod(std::abs(a - b), 1.0);
    return std::min(t, 1.0 - t);
}

/// Map a frequency into [-1/2, 1/2).
inline double wrap_phi(double phi)
{
    double w = phi - std::floor(phi + 0.5);
    if (w >= 0.5)
        w -= 1.0;
    return w;
}

/// Hybrid channel: length-N vector plus the ground truth it was built from.
struct HybridChannel
{
    cvec h;
    std::vector<PathParams> paths;
    int num_far = 0;
    int num_near = 0;

    int num_paths() const { return num_far + num_near; }
};

/// h = sqrt(N/K) sum_k alpha_k steer_k using exact near-field steering vectors.
inline HybridChannel assemble_channel(std::vector<PathParams> paths, const SystemConfig &cfg)
{
    if (paths.empty())
        throw config_error("channel needs at least one path");
    HybridChannel ch;
    ch.h = cvec::Zero(cfg.num_antennas);
    for (const auto &p : paths)
    {
        ch.h += p.gain * path_steering(p, cfg);
        (p.kind == PathKind::far ? ch.num_far : ch.num_near)++;
    }
    ch.h *= std::sqrt(static_cast<double>(cfg.num_antennas) / static_cast<double>(paths.size()));
    ch.paths = std::move(paths);
    return ch;
}

/// How random channels are drawn. Angles in radians, ranges in meters.
struct SamplingSpec
{
    double theta_min = -std::numbers::pi / 3.0;
    double theta_max = std::numbers::pi / 3.0;
    double range_min = 10.0;
    double range_max = 80.0;
    /// Minimum wrap-around phi separation, in units of 1/N.
    double min_separation = 1.0;
    int max_attempts = 10000;

    void validate() const
    {
        if (!(theta_min < theta_max) || theta_min <= -0.5 * std::numbers::pi || theta_max >= 0.5 * std::numbers::pi)
            throw config_error("angle interval must be a nonempty subset of (-pi/2, pi/2)");
        if (!(range_min > 0.0) || !(range_min <= range_max))
            throw config_error("range interval must satisfy 0 < range_min <= range_max");
        if (min_separation < 0.0)
            throw config_error("min_separation must be non-negative");
    }
};

///
/// Draw a random hybrid channel with `num_far` far paths and `num_near` near
/// paths. Gains are CN(0,1), angles uniform on the configured interval, near
/// ranges uniform on [range_min, range_max]. All paths (far and near) keep a
/// wrap-around phi separation of at least min_separation / N.
///
inline HybridChannel sample_hybrid_channel(int num_far, int num_near, const SystemConfig &cfg, Rng &rng,
                                           const SamplingSpec &spec = {})
{
    spec.validate();
    if (num_far < 0 || num_near < 0 || num_far + num_near < 1)
        throw config_error("need K_f, K_n >= 0 and K_f + K_n >= 1");
    const int k = num_far + num_near;
    const double sep = spec.min_separation / cfg.num_antennas;
    const double span = phi_of(spec.theta_max, cfg) - phi_of(spec.theta_min, cfg);
    if (sep > 0.0)
    {
        // Greedy packing bound on an interval that may wrap around the circle.
        const double usable = std::min(span + sep, 1.0);
        if (static_cast<double>(k) * sep > usable + 1e-12)
            throw config_error("cannot place " + std::to_string(k) + " paths with the requested separation");
    }

    std::vector<PathParams> paths;
    paths.reserve(k);
    std::vector<double> phis;
    for (int i = 0; i < k; ++i)
    {
        PathParams p;
        p.kind = i < num_far ? PathKind::far : PathKind::near;
        bool placed = false;
        for (int attempt = 0; attempt < spec.max_attempts && !placed; ++attempt)
        {
            const double theta = rng.uniform(spec.theta_min, spec.theta_max);
            const double phi = phi_of(theta, cfg);
            placed = true;
            for (double q : phis)
                if (wrap_distance(phi, q) < sep)
                {
                    placed = false;
                    break;
                }
            if (placed)
            {
                p.angle = theta;
                phis.push_back(phi);
            }
        }
        if (!placed)
            throw config_error("rejection sampling failed to separate paths; lower min_separation or K");
        p.gain = rng.complex_normal(1.0);
        if (p.kind == PathKind::near)
            p.range = rng.uniform(spec.range_min, spec.range_max);
        paths.push_back(p);
    }
    return assemble_channel(std::move(paths), cfg);
}

} // namespace hfdemix

#endif
