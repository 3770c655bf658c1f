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

#ifndef HFDEMIX_SUBSPACE_HPP
#define HFDEMIX_SUBSPACE_HPP

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <Eigen/SVD>
#include <nlohmann/json.hpp>

#include "model.hpp"

namespace hfdemix
{

///
/// Orthonormal N x L basis for the near-field modulation waveforms g(psi),
/// obtained as the leading left singular vectors of a dictionary of g(psi)
/// columns sampled on `psi_grid`.
///
struct SubspaceBasis
{
    cmat basis;
    rvec psi_grid;
    rvec singular_values;

    int num_antennas() const { return static_cast<int>(basis.rows()); }
    int rank() const { return static_cast<int>(basis.cols()); }

    /// Fraction of dictionary energy captured by the retained rank.
    double energy_capture() const
    {
        const double total = singular_values.squaredNorm();
        return total > 0.0 ? singular_values.head(rank()).squaredNorm() / total : 1.0;
    }
};

/// Most negative curvature reachable by a path at range >= range_min (cos^2 <= 1).
inline double min_reachable_psi(const SystemConfig &cfg, double range_min)
{
    const double d = cfg.spacing();
    return -d * d / (2.0 * cfg.wavelength() * range_min);
}

/// `count` uniformly spaced points on [psi_min, 0], endpoints included.
inline rvec uniform_psi_grid(double psi_min, int count)
{
    if (count < 1)
        throw config_error("psi grid needs at least one point");
    if (psi_min > 0.0)
        throw config_error("psi grid must lie in psi <= 0");
    if (count == 1)
        return rvec::Constant(1, 0.0);
    return rvec::LinSpaced(count, psi_min, 0.0);
}

/// Dictionary with column m = g(psi_grid[m]).
inline cmat build_dictionary(const rvec &psi_grid, int num_antennas)
{
    if (psi_grid.size() == 0)
        throw config_error("empty psi grid");
    if (num_antennas < 1)
        throw config_error("num_antennas must be positive");
    if ((psi_grid.array() > 0.0).any())
        throw config_error("psi grid values must be <= 0");
    cmat dict(num_antennas, psi_grid.size());
    for (Eigen::Index m = 0; m < psi_grid.size(); ++m)
        dict.col(m) = g_vec(psi_grid[m], num_antennas);
    return dict;
}

///
/// Rank-L basis from the SVD of `dictionary`. Each singular pair is rotated
/// so the first non-negligible entry of the right singular vector is real and
/// positive, which makes the basis reproducible.
///
inline SubspaceBasis build_subspace(const cmat &dictionary, int rank, rvec psi_grid = {})
{
    const auto kmax = std::min(dictionary.rows(), dictionary.cols());
    if (rank < 1 || rank > kmax)
        throw config_error("subspace rank must be in [1, min(N, M)]");
    Eigen::BDCSVD<cmat> svd(dictionary, Eigen::ComputeThinU | Eigen::ComputeThinV);
    cmat u = svd.matrixU().leftCols(rank);
    const cmat &v = svd.matrixV();
    for (int i = 0; i < rank; ++i)
    {
        const double vmax = v.col(i).cwiseAbs().maxCoeff();
        for (Eigen::Index k = 0; k < v.rows(); ++k)
        {
            const cplx e = v(k, i);
            if (std::abs(e) > 1e-8 * vmax)
            {
                u.col(i) *= std::conj(e) / std::abs(e);
                break;
            }
        }
    }
    return SubspaceBasis{std::move(u), std::move(psi_grid), svd.singularValues()};
}

/// Convenience: grid on [psi_min(range_min), 0] with `grid_size` points, rank L.
inline SubspaceBasis build_default_subspace(const SystemConfig &cfg, double range_min, int rank,
                                            int grid_size = 4096)
{
    rvec grid = uniform_psi_grid(min_reachable_psi(cfg, range_min), grid_size);
    const cmat dict = build_dictionary(grid, cfg.num_antennas);
    return build_subspace(dict, rank, std::move(grid));
}

/// ||v - B B^H v|| for an arbitrary vector.
inline double projection_residual(const cmat &basis, const cvec &v)
{
    return (v - basis * (basis.adjoint() * v)).norm();
}

/// ||g(psi) - B B^H g(psi)||_2 / sqrt(N).
inline double subspace_residual(const cmat &basis, double psi)
{
    const auto n = static_cast<int>(basis.rows());
    return projection_residual(basis, g_vec(psi, n)) / std::sqrt(static_cast<double>(n));
}

inline double subspace_residual(const SubspaceBasis &b, double psi) { return subspace_residual(b.basis, psi); }

// ---------------------------------------------------------------------------
// On-disk cache.
//
// <key>.bin  little-endian float64 stream:
//              basis      N*L complex values, column-major, (re, im) pairs
//              psi_grid   M values
//              singular   min(N, M) values
// <key>.json sidecar with format tag, dimensions and grid hash.
// ---------------------------------------------------------------------------

inline std::uint64_t grid_hash(const rvec &grid)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (Eigen::Index i = 0; i < grid.size(); ++i)
    {
        auto bits = std::bit_cast<std::uint64_t>(grid[i]);
        for (int b = 0; b < 8; ++b)
        {
            h ^= (bits >> (8 * b)) & 0xffU;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

inline std::string subspace_cache_key(int num_antennas, const rvec &grid, int rank)
{
    char buf[96];
    std::snprintf(buf, sizeof(buf), "subspace_N%d_L%d_%016llx", num_antennas, rank,
                  static_cast<unsigned long long>(grid_hash(grid)));
    return buf;
}

namespace detail
{
inline void write_le(std::ostream &os, double x)
{
    auto bits = std::bit_cast<std::uint64_t>(x);
    char bytes[8];
    for (int b = 0; b < 8; ++b)
        bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xffU);
    os.write(bytes, 8);
}

inline double read_le(std::istream &is)
{
    unsigned char bytes[8];
    is.read(reinterpret_cast<char *>(bytes), 8);
    if (!is)
        throw std::runtime_error("truncated subspace cache file");
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b)
        bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    return std::bit_cast<double>(bits);
}
} // namespace detail

inline void save_subspace(const SubspaceBasis &sb, const std::filesystem::path &dir)
{
    std::filesystem::create_directories(dir);
    const auto key = subspace_cache_key(sb.num_antennas(), sb.psi_grid, sb.rank());
    {
        std::ofstream os(dir / (key + ".bin"), std::ios::binary);
        for (Eigen::Index j = 0; j < sb.basis.cols(); ++j)
            for (Eigen::Index i = 0; i < sb.basis.rows(); ++i)
            {
                detail::write_le(os, sb.basis(i, j).real());
                detail::write_le(os, sb.basis(i, j).imag());
            }
        for (Eigen::Index i = 0; i < sb.psi_grid.size(); ++i)
            detail::write_le(os, sb.psi_grid[i]);
        for (Eigen::Index i = 0; i < sb.singular_values.size(); ++i)
            detail::write_le(os, sb.singular_values[i]);
        if (!os)
            throw std::runtime_error("failed to write subspace cache");
    }
    nlohmann::json meta = {
        {"format", "hfdemix-subspace-v1"},
        {"num_antennas", sb.num_antennas()},
        {"rank", sb.rank()},
        {"grid_size", sb.psi_grid.size()},
        {"num_singular_values", sb.singular_values.size()},
        {"grid_hash", key.substr(key.size() - 16)},
        {"layout", "float64 little-endian; basis column-major (re,im); psi_grid; singular_values"},
    };
    std::ofstream(dir / (key + ".json")) << meta.dump(2) << '\n';
}

/// Load a cached basis; returns nullopt when no matching entry exists.
inline std::optional<SubspaceBasis> load_subspace(const std::filesystem::path &dir, int num_antennas,
                                                  const rvec &grid, int rank)
{
    const auto key = subspace_cache_key(num_antennas, grid, rank);
    const auto bin = dir / (key + ".bin");
    const auto side = dir / (key + ".json");
    if (!std::filesystem::exists(bin) || !std::filesystem::exists(side))
        return std::nullopt;
    nlohmann::json meta;
    std::ifstream(side) >> meta;
    if (meta.at("format") != "hfdemix-subspace-v1" || meta.at("num_antennas") != num_antennas ||
        meta.at("rank") != rank || meta.at("grid_size") != grid.size())
        return std::nullopt;
    const auto nsv = meta.at("num_singular_values").get<Eigen::Index>();

    std::ifstream is(bin, std::ios::binary);
    SubspaceBasis sb;
    sb.basis.resize(num_antennas, rank);
    for (int j = 0; j < rank; ++j)
        for (int i = 0; i < num_antennas; ++i)
        {
            const double re = detail::read_le(is);
            const double im = detail::read_le(is);
            sb.basis(i, j) = {re, im};
        }
    sb.psi_grid.resize(grid.size());
    for (Eigen::Index i = 0; i < grid.size(); ++i)
        sb.psi_grid[i] = detail::read_le(is);
    sb.singular_values.resize(nsv);
    for (Eigen::Index i = 0; i < nsv; ++i)
        sb.singular_values[i] = detail::read_le(is);
    if (grid_hash(sb.psi_grid) != grid_hash(grid))
        return std::nullopt;
    return sb;
}

/// Load from `dir` if cached, otherwise build and store.
inline SubspaceBasis cached_subspace(const std::filesystem::path &dir, int num_antennas, const rvec &grid,
                                     int rank)
{
    if (auto hit = load_subspace(dir, num_antennas, grid, rank))
        return *std::move(hit);
    const cmat dict = build_dictionary(grid, num_antennas);
    auto sb = build_subspace(dict, rank, grid);
    save_subspace(sb, dir);
    return sb;
}

} // namespace hfdemix

#endif
