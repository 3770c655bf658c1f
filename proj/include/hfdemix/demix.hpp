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

#ifndef HFDEMIX_DEMIX_HPP
#define HFDEMIX_DEMIX_HPP

#include <cmath>
#include <optional>

#include "measurement.hpp"
#include "solver.hpp"

namespace hfdemix
{

/// Channel estimate h_hat = x_hat + lift(X_hat) with the solver diagnostics.
struct DemixEstimate
{
    cvec h_hat;
    cvec x_hat;
    cmat X_hat;
    SdpSolution solution;
    double tau = 1.0;
    double delta = 0.0;

    bool converged() const { return solution.status == SolveStatus::converged; }
};

///
/// Solve the demixing program for one measurement ensemble. delta defaults to
/// the ensemble's noise bound. A non-converged solve still returns the best
/// iterate; check converged() before trusting it.
///
inline DemixEstimate estimate_channel(const MeasurementEnsemble &ens, const cmat &basis, double tau,
                                      std::optional<double> delta_override = std::nullopt,
                                      const SolverOptions &opts = {}, const SolverState *warm = nullptr)
{
    const double delta = delta_override.value_or(ens.noise_bound);
    const auto prog = compile(ens.combiner, ens.y, basis, tau, delta);
    DemixEstimate est;
    est.solution = solve(prog, opts, warm);
    est.x_hat = est.solution.blocks.x;
    est.X_hat = est.solution.blocks.X;
    est.h_hat = est.x_hat + lift_apply(basis, est.X_hat);
    est.tau = tau;
    est.delta = delta;
    return est;
}

/// ||h_hat - h||^2 / ||h||^2
inline double nmse(const cvec &h_hat, const cvec &h_true)
{
    detail::require_dims(h_hat.size() == h_true.size(), "nmse: length mismatch");
    const double den = h_true.squaredNorm();
    if (!(den > 0.0))
        throw domain_error("nmse: zero reference channel");
    return (h_hat - h_true).squaredNorm() / den;
}

} // namespace hfdemix

#endif
