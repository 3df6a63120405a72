"""Hot numeric kernels shared by the solvers.

The ratio objective is maximized millions of times inside Monte Carlo sweeps
(every grid point / swarm particle runs a full power-allocation solve), so
the inner loop lives here in a numba-friendly scalar form.  Everything is
written against the cascade reduction: with the QoS constraints of the K-1
weakest users tight, every tail sum is affine in the strongest user's power,

    theta_k(pK) = c[k] + d[k] * pK,

which turns the power allocation into a one-dimensional concave problem over
pK in [ (A_K - 1)/H_K , u ].

``closedform`` re-implements the same solve in plain, readable Python using
the documented finite-difference recipe; the two paths are pinned against
each other in the test suite.  If numba is unavailable the kernels run as
ordinary Python functions with identical semantics.
"""

from __future__ import annotations

import math

import numpy as np

try:  # pragma: no cover - exercised implicitly
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def deco(f):
            return f

        return deco


LN2 = math.log(2.0)
BRACKET_WIDTH = 1e-10   # bisection stops below this absolute pK width
FEAS_SLACK = 1e-12


@njit(cache=True)
def cascade_coeffs(h_user, a):
    """Affine tail-sum coefficients (c, d) with theta_k = c[k] + d[k]*pK.

    Built by making theta_k = A_k theta_{k+1} + (A_k-1)/H_k tight for the
    K-1 weakest users, with theta_{K-1} = pK and theta_K = 0 (0-based).
    """
    k = h_user.shape[0]
    c = np.zeros(k + 1)
    d = np.zeros(k + 1)
    d[k - 1] = 1.0
    for i in range(k - 2, -1, -1):
        c[i] = a[i] * c[i + 1] + (a[i] - 1.0) / h_user[i]
        d[i] = a[i] * d[i + 1]
    return c, d


@njit(cache=True)
def ssr_cascade(h_user, h_eav, c, d, pk):
    """Secrecy sum-rate along the cascade at strongest-user power pk.

    Per-user secrecy terms clamp at zero; a user only contributes when its
    composite gain exceeds the eavesdropper's, independently of pk.
    """
    k = h_user.shape[0]
    total = 0.0
    for i in range(k):
        hi = h_user[i]
        if hi <= h_eav:
            continue
        t1 = c[i] + d[i] * pk
        t2 = c[i + 1] + d[i + 1] * pk
        term = 0.5 * (math.log1p(hi * t1) - math.log1p(hi * t2)
                      - math.log1p(h_eav * t1) + math.log1p(h_eav * t2)) / LN2
        if term > 0.0:
            total += term
    return total


@njit(cache=True)
def psi_derivative(h_user, h_eav, c, d, alpha, pk):
    """Analytic d/dpK of [ssr_cascade - alpha*(theta_1 + Pc)]."""
    k = h_user.shape[0]
    acc = 0.0
    for i in range(k):
        hi = h_user[i]
        if hi <= h_eav:
            continue
        t1 = c[i] + d[i] * pk
        t2 = c[i + 1] + d[i + 1] * pk
        acc += (hi * d[i] / (1.0 + hi * t1)
                - hi * d[i + 1] / (1.0 + hi * t2)
                - h_eav * d[i] / (1.0 + h_eav * t1)
                + h_eav * d[i + 1] / (1.0 + h_eav * t2))
    return acc / (2.0 * LN2) - alpha * d[0]


@njit(cache=True)
def pk_bracket(h_user, a, c, d, p_max):
    """Feasible range of the strongest user's power: QoS floor and budget cap."""
    lo = (a[-1] - 1.0) / h_user[-1]
    hi = (p_max - c[0]) / d[0]
    return lo, hi


@njit(cache=True)
def solve_pk(h_user, h_eav, c, d, alpha, lo, hi):
    """Maximize the concave reduced objective over [lo, hi] by bisecting the
    sign of its derivative (single crossing)."""
    if psi_derivative(h_user, h_eav, c, d, alpha, lo) <= 0.0:
        return lo
    if psi_derivative(h_user, h_eav, c, d, alpha, hi) >= 0.0:
        return hi
    a_, b_ = lo, hi
    while b_ - a_ > BRACKET_WIDTH:
        m = 0.5 * (a_ + b_)
        if psi_derivative(h_user, h_eav, c, d, alpha, m) > 0.0:
            a_ = m
        else:
            b_ = m
    return 0.5 * (a_ + b_)


@njit(cache=True)
def power_from_pk(c, d, pk):
    """Expand pK to the full allocation via the affine tail sums."""
    k = c.shape[0] - 1
    p = np.empty(k)
    for i in range(k):
        t1 = c[i] + d[i] * pk
        t2 = c[i + 1] + d[i + 1] * pk
        p[i] = t1 - t2
    return p


@njit(cache=True)
def ratio_power_solve(h_user, h_eav, a, p_max, p_c, tol, max_iter, alpha0):
    """Maximize ssr / (theta_1 + Pc) over the cascade by the parametric
    fixed-point iteration alpha <- ssr/(theta_1 + Pc).

    Returns (p, zeta, alpha_star, iterations, converged, feasible).
    """
    k = h_user.shape[0]
    c, d = cascade_coeffs(h_user, a)
    lo, hi = pk_bracket(h_user, a, c, d, p_max)
    if hi < lo - FEAS_SLACK * max(1.0, lo):
        return np.zeros(k), 0.0, 0.0, 0, False, False
    if hi < lo:
        hi = lo
    alpha = alpha0
    pk = lo
    zeta = 0.0
    converged = False
    it = 0
    for t in range(max_iter):
        it = t + 1
        pk = solve_pk(h_user, h_eav, c, d, alpha, lo, hi)
        ssr = ssr_cascade(h_user, h_eav, c, d, pk)
        denom = c[0] + d[0] * pk + p_c
        f = ssr - alpha * denom
        zeta = ssr / denom
        if abs(f) <= tol:
            converged = True
            break
        alpha = zeta
    p = power_from_pk(c, d, pk)
    return p, zeta, zeta, it, converged, True


@njit(cache=True)
def tradeoff_power_solve(h_user, h_eav, a, p_max, p_c, alpha):
    """Single cascade solve at a fixed trade-off weight.

    Returns (p, ssr, psi, feasible).
    """
    k = h_user.shape[0]
    c, d = cascade_coeffs(h_user, a)
    lo, hi = pk_bracket(h_user, a, c, d, p_max)
    if hi < lo - FEAS_SLACK * max(1.0, lo):
        return np.zeros(k), 0.0, 0.0, False
    if hi < lo:
        hi = lo
    pk = solve_pk(h_user, h_eav, c, d, alpha, lo, hi)
    ssr = ssr_cascade(h_user, h_eav, c, d, pk)
    psi = ssr - alpha * (c[0] + d[0] * pk + p_c)
    return power_from_pk(c, d, pk), ssr, psi, True


@njit(cache=True)
def ratio_solve_batch(h_user, h_eav, a, p_max, p_c, tol, max_iter, alpha0):
    """Vectorized candidate evaluation for grid / swarm searches.

    h_user is (n, K) in SIC order, h_eav is (n,).  Candidates whose composite
    gains break the SIC order (decoding constraint cannot hold) or whose QoS
    floor exceeds the budget score -inf.

    Returns (zeta, p, alpha_star, feasible).
    """
    n, k = h_user.shape
    zeta = np.full(n, -np.inf)
    p_out = np.zeros((n, k))
    alpha_out = np.zeros(n)
    feas = np.zeros(n, dtype=np.bool_)
    for j in range(n):
        ordered = True
        for i in range(k - 1):
            if h_user[j, i + 1] < h_user[j, i]:
                ordered = False
                break
        if not ordered:
            continue
        p, z, a_star, _, _, ok = ratio_power_solve(
            h_user[j], h_eav[j], a, p_max, p_c, tol, max_iter, alpha0[j])
        if not ok:
            continue
        zeta[j] = z
        p_out[j] = p
        alpha_out[j] = a_star
        feas[j] = True
    return zeta, p_out, alpha_out, feas


@njit(cache=True)
def eval_rho_batch(rho, h, h_e, comp_u, comp_e, sig_sq, sig_sq_e, a, p_max,
                   p_c, tol, max_iter, alpha0, ratio_mode, alpha):
    """Candidate evaluation with the effective gains computed in-loop from
    the channel pieces (rho is (n, m); comp_u[m, k] = g_m * g_mk, comp_e[m] =
    g_m * g_me), avoiding Python-level gain broadcasting on hot paths.

    ratio_mode True: fitness = max_p ssr/(theta_1 + Pc) via the parametric
    iteration.  False: fitness = max_p ssr - alpha*(theta_1 + Pc).
    Candidates breaking the SIC order or the QoS budget score -inf.
    Returns (fitness, zeta, p, feasible).
    """
    n, m = rho.shape
    k = h.shape[0]
    fit = np.full(n, -np.inf)
    zeta = np.zeros(n)
    p_out = np.zeros((n, k))
    feas = np.zeros(n, dtype=np.bool_)
    hu = np.empty(k)
    sq = np.empty(m)
    for j in range(n):
        for t in range(m):
            sq[t] = math.sqrt(rho[j, t])
        ordered = True
        for i in range(k):
            amp = h[i]
            for t in range(m):
                amp += sq[t] * comp_u[t, i]
            hu[i] = amp * amp / sig_sq[i]
            if i > 0 and hu[i] < hu[i - 1]:
                ordered = False
        if not ordered:
            continue
        amp_e = h_e
        for t in range(m):
            amp_e += sq[t] * comp_e[t]
        he = amp_e * amp_e / sig_sq_e
        if ratio_mode:
            p, z, a_star, _, _, ok = ratio_power_solve(
                hu, he, a, p_max, p_c, tol, max_iter, alpha0[j])
            if not ok:
                continue
            fit[j] = z
            zeta[j] = z
        else:
            p, ssr, ps, ok = tradeoff_power_solve(hu, he, a, p_max, p_c, alpha)
            if not ok:
                continue
            total = 0.0
            for i in range(k):
                total += p[i]
            fit[j] = ps
            zeta[j] = ssr / (total + p_c)
        p_out[j] = p
        feas[j] = True
    return fit, zeta, p_out, feas


@njit(cache=True)
def tradeoff_solve_batch(h_user, h_eav, a, p_max, p_c, alpha):
    """Batch variant of tradeoff_power_solve; fitness is psi."""
    n, k = h_user.shape
    psi = np.full(n, -np.inf)
    zeta = np.zeros(n)
    p_out = np.zeros((n, k))
    feas = np.zeros(n, dtype=np.bool_)
    for j in range(n):
        ordered = True
        for i in range(k - 1):
            if h_user[j, i + 1] < h_user[j, i]:
                ordered = False
                break
        if not ordered:
            continue
        p, ssr, ps, ok = tradeoff_power_solve(h_user[j], h_eav[j], a, p_max,
                                              p_c, alpha)
        if not ok:
            continue
        psi[j] = ps
        denom = 0.0
        for i in range(k):
            denom += p[i]
        zeta[j] = ssr / (denom + p_c)
        p_out[j] = p
        feas[j] = True
    return psi, zeta, p_out, feas
