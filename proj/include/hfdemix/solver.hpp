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

#ifndef HFDEMIX_SOLVER_HPP
#define HFDEMIX_SOLVER_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "measurement.hpp"

namespace hfdemix
{

using hmat = Eigen::MatrixXcd; // Hermitian by convention

/// N x N Hermitian Toeplitz matrix with first column u (u[0] taken as real).
inline hmat toeplitz(const cvec &u)
{
    const auto n = u.size();
    hmat t(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i)
            t(i, j) = i >= j ? u[i - j] : std::conj(u[j - i]);
    for (Eigen::Index i = 0; i < n; ++i)
        t(i, i) = u[0].real();
    return t;
}

/// Orthogonal projection of a square matrix onto Hermitian Toeplitz matrices,
/// returned as the first column (diagonal averaging).
inline cvec toeplitz_project(const Eigen::Ref<const cmat> &h)
{
    const auto n = h.rows();
    cvec u(n);
    for (Eigen::Index k = 0; k < n; ++k)
    {
        cplx acc = 0.0;
        for (Eigen::Index i = k; i < n; ++i)
            acc += h(i, i - k) + std::conj(h(i - k, i));
        u[k] = acc / (2.0 * static_cast<double>(n - k));
    }
    u[0] = u[0].real();
    return u;
}

inline hmat hermitian_part(const cmat &h) { return 0.5 * (h + h.adjoint()); }

/// Nearest PSD matrix in Frobenius norm: negative eigenvalues clipped to 0.
inline hmat psd_project(const cmat &h_in)
{
    if (!h_in.allFinite())
        throw numerical_error("psd_project: non-finite entries");
    const hmat h = hermitian_part(h_in);
    Eigen::SelfAdjointEigenSolver<hmat> es(h);
    const rvec &lam = es.eigenvalues();
    // eigenvalues are ascending; keep the non-negative tail
    Eigen::Index first = 0;
    while (first < lam.size() && lam[first] <= 0.0)
        ++first;
    const auto k = lam.size() - first;
    if (k == 0)
        return hmat::Zero(h.rows(), h.cols());
    if (k == lam.size())
        return h;
    const auto v = es.eigenvectors().rightCols(k);
    return v * lam.tail(k).asDiagonal() * v.adjoint();
}

/// Real embedding [Re -Im; Im Re] of a complex matrix.
inline Eigen::MatrixXd real_embedding(const cmat &h)
{
    const auto n = h.rows();
    const auto m = h.cols();
    Eigen::MatrixXd r(2 * n, 2 * m);
    r.topLeftCorner(n, m) = h.real();
    r.topRightCorner(n, m) = -h.imag();
    r.bottomLeftCorner(n, m) = h.imag();
    r.bottomRightCorner(n, m) = h.real();
    return r;
}

/// Projection onto the ball ||v - center|| <= radius.
inline cvec soc_project(const cvec &v, const cvec &center, double radius)
{
    const cvec diff = v - center;
    const double nrm = diff.norm();
    if (nrm <= radius)
        return v;
    return center + (radius / nrm) * diff;
}

inline double min_eigenvalue(const cmat &h)
{
    Eigen::SelfAdjointEigenSolver<hmat> es(hermitian_part(h), Eigen::EigenvaluesOnly);
    return es.eigenvalues()[0];
}

/// Optimization variables of the demixing SDP.
struct SdpBlocks
{
    cvec x;       // far component, N
    cmat X;       // lifted near component, L x N
    cvec u_far;   // first column of Toep(u_far), u_far[0] real
    cvec u_near;  // first column of Toep(u_near)
    double t = 0; // far corner
    cmat T;       // L x L Hermitian

    static SdpBlocks zeros(Eigen::Index n, Eigen::Index l)
    {
        return {cvec::Zero(n), cmat::Zero(l, n), cvec::Zero(n), cvec::Zero(n), 0.0, cmat::Zero(l, l)};
    }
};

/// [[Toep(u_far), x], [x^H, t]]
inline hmat far_block(const SdpBlocks &b)
{
    const auto n = b.x.size();
    hmat z(n + 1, n + 1);
    z.topLeftCorner(n, n) = toeplitz(b.u_far);
    z.topRightCorner(n, 1) = b.x;
    z.bottomLeftCorner(1, n) = b.x.adjoint();
    z(n, n) = b.t;
    return z;
}

/// [[Toep(u_near), X^T], [conj(X), T]]. Equivalent, by entrywise conjugation,
/// to the [[Toep, X^H], [X, T]] form for atoms z d(phi)^H; with atoms
/// z d(phi)^T it keeps the Toeplitz frequencies equal to the path frequencies.
inline hmat near_block(const SdpBlocks &b)
{
    const auto n = b.X.cols();
    const auto l = b.X.rows();
    hmat z(n + l, n + l);
    z.topLeftCorner(n, n) = toeplitz(b.u_near);
    z.topRightCorner(n, l) = b.X.transpose();
    z.bottomLeftCorner(l, n) = b.X.conjugate();
    z.bottomRightCorner(l, l) = b.T;
    return z;
}

///
/// Compiled demixing program
///
///   minimize   (1/2N) tr Toep(u_far) + t/2 + (tau/2N) tr Toep(u_near) + (tau/2) tr T
///   subject to ||y - A (x + lift(X))|| <= delta,
///              far_block >= 0,  near_block >= 0.
///
struct ConicProgram
{
    cmat A;
    cvec y;
    cmat basis;
    double tau = 1.0;
    double delta = 0.0;

    Eigen::Index num_antennas() const { return A.cols(); }
    Eigen::Index rank() const { return basis.cols(); }
    Eigen::Index num_measurements() const { return A.rows(); }

    /// A (x + lift(X))
    cvec forward(const SdpBlocks &b) const { return A * (b.x + lift_apply(basis, b.X)); }

    double objective(const SdpBlocks &b) const
    {
        return 0.5 * b.u_far[0].real() + 0.5 * b.t + 0.5 * tau * b.u_near[0].real() +
               0.5 * tau * b.T.trace().real();
    }
};

inline ConicProgram compile(const cmat &a, const cvec &y, const cmat &basis, double tau, double delta)
{
    detail::require_dims(a.rows() == y.size(), "compile: A rows must match y length");
    detail::require_dims(basis.rows() == a.cols(), "compile: basis rows must match A columns");
    detail::require_dims(basis.cols() >= 1, "compile: basis must have at least one column");
    if (!(tau > 0.0) || !std::isfinite(tau))
        throw config_error("tau must be positive");
    if (!(delta >= 0.0) || !std::isfinite(delta))
        throw config_error("delta must be non-negative");
    return ConicProgram{a, y, basis, tau, delta};
}

enum class SolveStatus
{
    converged,
    max_iters,
    infeasible_suspected
};

inline const char *to_string(SolveStatus s)
{
    switch (s)
    {
    case SolveStatus::converged:
        return "converged";
    case SolveStatus::max_iters:
        return "max_iters";
    case SolveStatus::infeasible_suspected:
        return "infeasible_suspected";
    }
    return "unknown";
}

/// ADMM iterate in scaled form; reused for warm starts.
struct SolverState
{
    hmat s_far, s_near;   // PSD copies
    cvec w;               // ball copy of A (x + lift(X))
    hmat u_far, u_near;   // scaled duals
    cvec mu;
    double rho = 1.0;
    double scale = 1.0;   // normalization applied to y and delta
};

struct SolverOptions
{
    double rho = 1.0;
    bool adaptive_rho = true;
    double rho_ratio = 10.0;
    double rho_factor = 2.0;
    int rho_interval = 50;
    /// Over-relaxation factor in (0, 2); 1 is plain ADMM.
    double relaxation = 1.0;
    double eps_abs = 1e-5;
    double eps_rel = 1e-4;
    int max_iters = 50000;
    /// CSV trace "iter,primal_res,dual_res,objective" every `trace_every` iterations.
    std::ostream *trace = nullptr;
    int trace_every = 1;
    /// Anderson acceleration memory; 0 disables it.
    int anderson_memory = 10;
    /// Reject an extrapolated point whose fixed-point residual grows by more than this.
    double anderson_safeguard = 1.0;
    /// Make the returned point exactly feasible (see solve()).
    bool repair = true;
};

struct SdpSolution
{
    SdpBlocks blocks;
    SolveStatus status = SolveStatus::max_iters;
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double objective_value = 0.0;
    /// ||y - A (x + lift(X))|| at the returned point.
    double residual_norm = 0.0;
    SolverState state;
};

namespace detail
{

// v-update: argmin ||v - c||^2 + 1/2 ||G v - q||^2 with G(x, X) = A (x + lift(X)).
// Woodbury: (I + G^H G / 2)^{-1} = I - G^H (2 I + G G^H)^{-1} G, and
// G G^H = A diag(1 + ||row_n(B)||^2) A^H is a small M x M matrix.
class LeastSquaresStep
{
  public:
    LeastSquaresStep(const cmat &a, const cmat &basis) : a_(a), basis_(basis)
    {
        const rvec w = (1.0 + lift_gram_diagonal(basis).array()).matrix();
        cmat k = a * w.asDiagonal() * a.adjoint();
        k.diagonal().array() += 2.0;
        llt_.compute(k);
    }

    void apply(cvec &x, cmat &lifted, const cvec &q) const
    {
        const cvec aq = a_.adjoint() * q;
        x += 0.5 * aq;
        lifted += 0.5 * lift_adjoint(basis_, aq);
        const cvec gr = a_ * (x + lift_apply(basis_, lifted));
        const cvec corr = a_.adjoint() * llt_.solve(gr);
        x -= corr;
        lifted -= lift_adjoint(basis_, corr);
    }

  private:
    const cmat &a_;
    const cmat &basis_;
    Eigen::LLT<cmat> llt_;
};

inline double ls_residual(const cmat &a, const cvec &y)
{
    if (a.rows() <= a.cols())
    {
        Eigen::LDLT<cmat> ldlt(a * a.adjoint());
        const cvec lam = ldlt.solve(y);
        const cvec fit = a * (a.adjoint() * lam);
        return (y - fit).norm();
    }
    return (y - a * a.colPivHouseholderQr().solve(y)).norm();
}

// Norm of F^*(D_far, D_near, d_w), F the consensus map v -> (far_block(v),
// near_block(v), A (x + lift(X))). Used for the dual residual.
inline double consensus_adjoint_norm(const hmat &df, const hmat &dn, const cvec &dw, const cmat &a,
                                     const cmat &basis)
{
    const auto n = a.cols();
    const auto l = basis.cols();
    double acc = 0.0;
    auto toeplitz_adjoint = [&](const Eigen::Ref<const cmat> &d) {
        double s = 0.0;
        for (Eigen::Index k = 0; k < n; ++k)
        {
            cplx sum = 0.0;
            for (Eigen::Index i = k; i < n; ++i)
                sum += d(i, i - k) + (k == 0 ? cplx(0.0) : std::conj(d(i - k, i)));
            s += k == 0 ? sum.real() * sum.real() : std::norm(sum);
        }
        return s;
    };
    acc += toeplitz_adjoint(df.topLeftCorner(n, n));
    acc += toeplitz_adjoint(dn.topLeftCorner(n, n));
    acc += std::norm(df(n, n).real());
    acc += hermitian_part(dn.bottomRightCorner(l, l)).squaredNorm();
    const cvec aw = a.adjoint() * dw;
    const cvec gx = df.topRightCorner(n, 1) + df.bottomLeftCorner(1, n).adjoint() + aw;
    const cmat gX = dn.topRightCorner(n, l).transpose() + dn.bottomLeftCorner(l, n).conjugate() + lift_adjoint(basis, aw);
    acc += gx.squaredNorm() + gX.squaredNorm();
    return std::sqrt(acc);
}

// Shift the blocks onto the feasible set: first move x (min-norm) so the
// residual lies on the delta-ball, then add the smallest multiple of the
// identity that makes each LMI block PSD (shifting u[0] together with the
// corner block).
inline void repair_feasibility(const ConicProgram &p, SdpBlocks &b)
{
    const cvec r = p.y - p.forward(b);
    const double rn = r.norm();
    if (rn > p.delta && p.A.rows() <= p.A.cols())
    {
        const cvec target = r - (p.delta / rn) * r;
        Eigen::LDLT<cmat> ldlt(p.A * p.A.adjoint());
        b.x += p.A.adjoint() * ldlt.solve(target);
    }
    const auto n = b.x.size();
    const double lf = min_eigenvalue(far_block(b));
    if (lf < 0.0)
    {
        const double shift = -lf * (1.0 + 1e-12) + 1e-300;
        b.u_far[0] += shift;
        b.t += shift;
    }
    const double ln = min_eigenvalue(near_block(b));
    if (ln < 0.0)
    {
        const double shift = -ln * (1.0 + 1e-12) + 1e-300;
        b.u_near[0] += shift;
        b.T.diagonal().array() += shift;
    }
    (void)n;
}


// Flat real view of the iterate (PSD copies, ball copy, duals) for Anderson
// acceleration.
inline void pack_state(const SolverState &st, Eigen::VectorXd &out)
{
    const Eigen::Index nf = st.s_far.size(), nn = st.s_near.size(), m = st.w.size();
    out.resize(2 * (2 * nf + 2 * nn + 2 * m));
    Eigen::Index k = 0;
    auto put = [&](const cplx *p, Eigen::Index cnt) {
        for (Eigen::Index i = 0; i < cnt; ++i)
        {
            out[k++] = p[i].real();
            out[k++] = p[i].imag();
        }
    };
    put(st.s_far.data(), nf);
    put(st.s_near.data(), nn);
    put(st.w.data(), m);
    put(st.u_far.data(), nf);
    put(st.u_near.data(), nn);
    put(st.mu.data(), m);
}

inline void unpack_state(const Eigen::VectorXd &in, SolverState &st)
{
    Eigen::Index k = 0;
    auto get = [&](cplx *p, Eigen::Index cnt) {
        for (Eigen::Index i = 0; i < cnt; ++i, k += 2)
            p[i] = cplx(in[k], in[k + 1]);
    };
    get(st.s_far.data(), st.s_far.size());
    get(st.s_near.data(), st.s_near.size());
    get(st.w.data(), st.w.size());
    get(st.u_far.data(), st.u_far.size());
    get(st.u_near.data(), st.u_near.size());
    get(st.mu.data(), st.mu.size());
}

// Type-II Anderson acceleration of a fixed-point map g, with a
// Tikhonov-regularized least-squares fit over the last `memory` differences.
class Anderson
{
  public:
    explicit Anderson(int memory) : memory_(memory) {}

    void reset()
    {
        count_ = 0;
        head_ = 0;
        has_prev_ = false;
    }

    int size() const { return count_; }

    Eigen::VectorXd extrapolate(const Eigen::VectorXd &x, const Eigen::VectorXd &g)
    {
        const Eigen::VectorXd f = g - x;
        if (has_prev_)
        {
            if (df_.rows() != f.size())
            {
                df_.resize(f.size(), memory_);
                dg_.resize(f.size(), memory_);
            }
            df_.col(head_) = f - f_prev_;
            dg_.col(head_) = g - g_prev_;
            head_ = (head_ + 1) % memory_;
            count_ = std::min(count_ + 1, memory_);
        }
        f_prev_ = f;
        g_prev_ = g;
        has_prev_ = true;
        if (count_ == 0)
            return g;
        const auto dF = df_.leftCols(count_);
        Eigen::MatrixXd gram = dF.transpose() * dF;
        const double reg = 1e-10 * gram.trace() + 1e-300;
        gram.diagonal().array() += reg;
        const Eigen::VectorXd gamma = gram.ldlt().solve(dF.transpose() * f);
        if (!gamma.allFinite())
        {
            reset();
            return g;
        }
        return g - dg_.leftCols(count_) * gamma;
    }

  private:
    int memory_;
    int count_ = 0;
    int head_ = 0;
    bool has_prev_ = false;
    Eigen::MatrixXd df_, dg_;
    Eigen::VectorXd f_prev_, g_prev_;
};

} // namespace detail

///
/// Solve the compiled program by ADMM over the splitting
///
///   v = (x, X, u_far, u_near, t, T)   (structured variables, quadratic step)
///   S_far, S_near in PSD, w in {||w - y|| <= delta}   (projection steps)
///
/// with consensus S_far = far_block(v), S_near = near_block(v),
/// w = A (x + lift(X)). The Toeplitz structure enters through the diagonal
/// averaging in the v-step. Data are normalized by ||y|| internally.
///
/// The returned blocks are the structured iterate; with `repair` set they are
/// moved onto the feasible set (an O(residual) change), so the reported
/// objective is an upper bound on the optimal value.
///
inline SdpSolution solve(const ConicProgram &prog, const SolverOptions &opts = {},
                         const SolverState *warm = nullptr)
{
    const auto n = prog.num_antennas();
    const auto l = prog.rank();
    const auto m = prog.num_measurements();
    const double tau = prog.tau;

    SdpSolution sol;
    const double ynorm = prog.y.norm();
    const double scale = ynorm > 0.0 ? ynorm : 1.0;
    const cvec y = prog.y / scale;
    const double delta = prog.delta / scale;

    // delta >= ||y||: the origin is feasible and optimal (objective >= 0).
    if (ynorm <= prog.delta)
    {
        sol.blocks = SdpBlocks::zeros(n, l);
        sol.status = SolveStatus::converged;
        sol.residual_norm = ynorm;
        sol.state.scale = scale;
        return sol;
    }

    detail::LeastSquaresStep ls(prog.A, prog.basis);

    SolverState st;
    if (warm != nullptr && warm->s_far.rows() == n + 1 && warm->s_near.rows() == n + l && warm->w.size() == m)
    {
        st = *warm;
        const double f = warm->scale / scale;
        st.s_far *= f;
        st.s_near *= f;
        st.w *= f;
        st.u_far *= f;
        st.u_near *= f;
        st.mu *= f;
    }
    else
    {
        st.s_far = hmat::Zero(n + 1, n + 1);
        st.s_near = hmat::Zero(n + l, n + l);
        st.w = y;
        st.u_far = hmat::Zero(n + 1, n + 1);
        st.u_near = hmat::Zero(n + l, n + l);
        st.mu = cvec::Zero(m);
        st.rho = opts.rho;
    }
    st.scale = scale;
    double rho = st.rho;

    SdpBlocks v = SdpBlocks::zeros(n, l);
    SdpBlocks best = v;
    double best_score = std::numeric_limits<double>::infinity();
    double best_r = 0.0, best_s = 0.0;

    const double sqrt_dim = std::sqrt(static_cast<double>((n + 1) * (n + 1) + (n + l) * (n + l) + m));
    int last_rho_change = 0;
    int it = 0;
    double r_norm = 0.0, s_norm = 0.0;
    bool converged = false;

    // One ADMM pass from `st` (updated in place). Returns the residual norms
    // and their tolerances through the out-parameters.
    auto admm_step = [&](SolverState &cur, double &r_out, double &s_out, double &eps_pri, double &eps_dual) {
        // structured step
        const hmat pf = cur.s_far - cur.u_far;
        const hmat pn = cur.s_near - cur.u_near;
        const cvec q = cur.w - cur.mu;

        v.u_far = toeplitz_project(pf.topLeftCorner(n, n));
        v.u_far[0] -= 1.0 / (2.0 * rho * static_cast<double>(n));
        v.t = pf(n, n).real() - 1.0 / (2.0 * rho);
        v.u_near = toeplitz_project(pn.topLeftCorner(n, n));
        v.u_near[0] -= tau / (2.0 * rho * static_cast<double>(n));
        v.T = hermitian_part(pn.bottomRightCorner(l, l));
        v.T.diagonal().array() -= tau / (2.0 * rho);

        v.x = 0.5 * (pf.topRightCorner(n, 1) + pf.bottomLeftCorner(1, n).adjoint());
        v.X = 0.5 * (pn.topRightCorner(n, l).transpose() + pn.bottomLeftCorner(l, n).conjugate());
        ls.apply(v.x, v.X, q);

        // projection step
        const hmat zf = far_block(v);
        const hmat zn = near_block(v);
        const cvec gv = prog.A * (v.x + lift_apply(prog.basis, v.X));

        const hmat sf_old = cur.s_far;
        const hmat sn_old = cur.s_near;
        const cvec w_old = cur.w;
        const double alpha = opts.relaxation;
        const hmat zf_r = alpha * zf + (1.0 - alpha) * sf_old;
        const hmat zn_r = alpha * zn + (1.0 - alpha) * sn_old;
        const cvec gv_r = alpha * gv + (1.0 - alpha) * w_old;
        cur.s_far = psd_project(zf_r + cur.u_far);
        cur.s_near = psd_project(zn_r + cur.u_near);
        cur.w = soc_project(gv_r + cur.mu, y, delta);

        // dual step
        cur.u_far += zf_r - cur.s_far;
        cur.u_near += zn_r - cur.s_near;
        cur.mu += gv_r - cur.w;

        const double rf = (zf - cur.s_far).squaredNorm();
        const double rn = (zn - cur.s_near).squaredNorm();
        const double rw = (gv - cur.w).squaredNorm();
        r_out = std::sqrt(rf + rn + rw);
        s_out = rho * detail::consensus_adjoint_norm(cur.s_far - sf_old, cur.s_near - sn_old, cur.w - w_old,
                                                     prog.A, prog.basis);
        if (!std::isfinite(r_out) || !std::isfinite(s_out))
            throw numerical_error("ADMM iterate became non-finite");
        eps_pri = opts.eps_abs * sqrt_dim +
                  opts.eps_rel * std::max(std::sqrt(zf.squaredNorm() + zn.squaredNorm() + gv.squaredNorm()),
                                          std::sqrt(cur.s_far.squaredNorm() + cur.s_near.squaredNorm() +
                                                    cur.w.squaredNorm()));
        eps_dual = opts.eps_abs * sqrt_dim +
                   opts.eps_rel * rho *
                       detail::consensus_adjoint_norm(cur.u_far, cur.u_near, cur.mu, prog.A, prog.basis);
    };

    detail::Anderson aa(opts.anderson_memory);
    Eigen::VectorXd z_vec, g_vec, g_ref;
    double f_ref = 0.0;
    bool pending = false;
    if (opts.anderson_memory > 0)
        detail::pack_state(st, z_vec);

    for (it = 1; it <= opts.max_iters; ++it)
    {
        double eps_pri = 0.0, eps_dual = 0.0;
        admm_step(st, r_norm, s_norm, eps_pri, eps_dual);

        if (opts.anderson_memory > 0)
        {
            detail::pack_state(st, g_vec);
            const double f_norm = (g_vec - z_vec).norm();
            if (pending && f_norm > opts.anderson_safeguard * f_ref)
            {
                // extrapolated point made things worse: fall back to the plain iterate
                z_vec = g_ref;
                detail::unpack_state(z_vec, st);
                aa.reset();
                pending = false;
                continue;
            }
            f_ref = f_norm;
        }

        const double score = std::max(r_norm / eps_pri, s_norm / eps_dual);
        if (score < best_score)
        {
            best_score = score;
            best = v;
            best_r = r_norm;
            best_s = s_norm;
        }

        if (opts.trace != nullptr && opts.trace_every > 0 && it % opts.trace_every == 0)
            *opts.trace << it << ',' << r_norm * scale << ',' << s_norm * scale << ','
                        << prog.objective(v) * scale << '\n';

        if (r_norm <= eps_pri && s_norm <= eps_dual)
        {
            converged = true;
            break;
        }

        bool rho_changed = false;
        if (opts.adaptive_rho && it - last_rho_change >= opts.rho_interval)
        {
            double f = 1.0;
            if (r_norm > opts.rho_ratio * s_norm)
                f = opts.rho_factor;
            else if (s_norm > opts.rho_ratio * r_norm)
                f = 1.0 / opts.rho_factor;
            if (f != 1.0)
            {
                rho *= f;
                st.u_far /= f;
                st.u_near /= f;
                st.mu /= f;
                last_rho_change = it;
                rho_changed = true;
            }
        }

        if (opts.anderson_memory > 0)
        {
            if (rho_changed)
            {
                aa.reset();
                detail::pack_state(st, z_vec);
                pending = false;
                continue;
            }
            g_ref = g_vec;
            z_vec = aa.extrapolate(z_vec, g_vec);
            pending = aa.size() > 0;
            if (pending)
                detail::unpack_state(z_vec, st);
            else
                z_vec = g_vec;
        }
    }
    st.rho = rho;

    if (converged)
    {
        sol.status = SolveStatus::converged;
        sol.iterations = it;
        sol.primal_residual = r_norm * scale;
        sol.dual_residual = s_norm * scale;
    }
    else
    {
        v = best;
        sol.iterations = opts.max_iters;
        sol.primal_residual = best_r * scale;
        sol.dual_residual = best_s * scale;
        sol.status = detail::ls_residual(prog.A, prog.y) > prog.delta * (1.0 + 1e-9) + 1e-12 * scale
                         ? SolveStatus::infeasible_suspected
                         : SolveStatus::max_iters;
    }

    v.x *= scale;
    v.X *= scale;
    v.u_far *= scale;
    v.u_near *= scale;
    v.t *= scale;
    v.T *= scale;
    if (opts.repair)
        detail::repair_feasibility(prog, v);

    sol.residual_norm = (prog.y - prog.forward(v)).norm();
    sol.objective_value = prog.objective(v);
    sol.blocks = std::move(v);
    sol.state = std::move(st);
    return sol;
}

} // namespace hfdemix

#endif
