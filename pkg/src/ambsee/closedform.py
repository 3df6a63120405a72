"""Exact solvers: binary reflection rule for one device, cascade power
allocation, parametric ratio maximization, and the two-device case analysis.

The power allocation exploits the problem structure: at the optimum the QoS
constraints of the K-1 weakest users are tight, so each tail sum is affine in
the strongest user's power pK and the objective becomes a concave function of
pK alone.  The critical point is found by bisecting the sign of the
derivative, evaluated here by central finite differences on the reduced
objective (the solver never needs the expanded derivative expression);
concavity guarantees a single crossing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _fastpath as fp
from .core import (InfeasibleError, NormalizedGains, ObjectiveValue,
                   effective_gains, composite_amplitudes, objectives, p_min,
                   rates_and_secrecy, theta_tails, validate_rho)
from .scenario import Scenario

DERIV_BRACKET = 1e-10     # bisection stops below this pK bracket width
FD_STEP_REL = 1e-6        # central-difference step, scaled by max(1, pK)
DINKELBACH_TOL = 1e-8
DINKELBACH_MAX_ITER = 100


class NonConcaveError(RuntimeError):
    """Derivative sign pattern shows more than one crossing; the reduced
    objective is not concave for these inputs (should not happen for valid
    orderings)."""


class ConvergenceError(RuntimeError):
    def __init__(self, msg: str, last=None):
        super().__init__(msg)
        self.last = last


# --------------------------------------------------------------------------
# reflection rules
# --------------------------------------------------------------------------

def optimal_rho_single(s: Scenario, perm: np.ndarray | None = None) -> float:
    """Binary reflection rule for a single device.

    Full reflection is optimal exactly when the device->user composite
    amplitudes (noise-normalized) increase along the SIC order, in which case
    reflecting helps every stronger receiver more than every weaker one;
    otherwise the device stays silent.  The rule reads only channel
    coefficients, never the power allocation.
    """
    if s.m != 1:
        raise ValueError("single-device rule needs exactly one BD")
    _, _, comp_u, _ = composite_amplitudes(s)
    seq = comp_u[0] if perm is None else comp_u[0, perm]
    return 1.0 if bool(np.all(np.diff(seq) > 0.0)) else 0.0


@dataclass
class TwoBdGeometry:
    """Amplitude-level channel terms for the K=2, M=2 closed form.

    g1/g2/ge are the direct normalized amplitudes (users in SIC order, then
    the eavesdropper); gmk are the device-m -> receiver-k composites."""

    g1: float
    g2: float
    ge: float
    g11: float
    g12: float
    g1e: float
    g21: float
    g22: float
    g2e: float

    @classmethod
    def from_scenario(cls, s: Scenario) -> "TwoBdGeometry":
        if s.k != 2 or s.m != 2:
            raise ValueError("two-device geometry needs K=2, M=2")
        gu, ge, comp_u, comp_e = composite_amplitudes(s)
        return cls(g1=float(gu[0]), g2=float(gu[1]), ge=ge,
                   g11=float(comp_u[0, 0]), g12=float(comp_u[0, 1]),
                   g1e=float(comp_e[0]),
                   g21=float(comp_u[1, 0]), g22=float(comp_u[1, 1]),
                   g2e=float(comp_e[1]))


@dataclass
class BoundaryPoints:
    """Extremes of the decodability frontier
    sqrt(rho1)(G11-G12) + sqrt(rho2)(G21-G22) = G2-G1 inside the unit square.

    rho1_inf / rho2_inf are the intercepts at rho2 = 0 / rho1 = 0; the sup
    values are the intercepts with the opposite coefficient at full
    reflection.  Entries are NaN when the defining denominator vanishes; they
    may exceed 1 or be used before clamping."""

    rho1_inf: float
    rho1_sup: float
    rho2_inf: float
    rho2_sup: float


def boundary_points(geom: TwoBdGeometry) -> BoundaryPoints:
    du = geom.g2 - geom.g1
    d1 = geom.g11 - geom.g12
    d2 = geom.g21 - geom.g22
    if d1 != 0.0:
        r1i = (du / d1) ** 2
        r1s = ((du - d2) / d1) ** 2
    else:
        r1i = r1s = float("nan")
    if d2 != 0.0:
        r2i = (du / d2) ** 2
        r2s = ((du - d1) / d2) ** 2
    else:
        r2i = r2s = float("nan")
    return BoundaryPoints(rho1_inf=r1i, rho1_sup=r1s, rho2_inf=r2i, rho2_sup=r2s)


@dataclass
class TwoBdSolution:
    rho: np.ndarray
    case: str
    applicable: bool  # False -> caller should fall back to a search


def optimal_rho_two_bd(geom: TwoBdGeometry, eav_rank: int = 2,
                       rel_tol: float = 1e-9) -> TwoBdSolution:
    """Case analysis for the two-device reflection pair (K = 2).

    When the composite-to-eavesdropper amplitude ratios straddle the direct
    ratio (G12/G1e > G2/Ge > G22/G2e, or the mirrored ordering), the secrecy
    sum-rate at any fixed power split is monotone increasing in one
    coefficient and decreasing in the other, so the maximizer sits on the
    decodability frontier

        sqrt(rho1)(G11-G12) + sqrt(rho2)(G21-G22) = G2 - G1

    or at a corner of the unit square: the favored device reflects fully (or
    up to the frontier intercept rho_inf when its coefficient difference is
    positive) and the other stays silent.  Case tags H1..H4 follow the sign
    pattern of (G11-G12, G21-G22); the -sym variants are the mirrored case.

    Applicability is deliberately strict: the derivation presumes exactly one
    user below the eavesdropper (eav_rank == 2) and strict ratio orderings.
    Geometries outside that scope - including ones where reflecting both
    devices is jointly better once the power allocation re-optimizes - are
    flagged applicable=False so callers fall back to a search.
    """
    r1 = geom.g12 / geom.g1e
    r2 = geom.g22 / geom.g2e
    r0 = geom.g2 / geom.ge
    scale = max(abs(r1), abs(r2), abs(r0))
    tol = rel_tol * max(1.0, scale)
    if abs(r1 - r2) <= tol or abs(r1 - r0) <= tol or abs(r2 - r0) <= tol:
        return TwoBdSolution(rho=np.zeros(2), case="degenerate", applicable=False)
    if eav_rank != 2:
        return TwoBdSolution(rho=np.zeros(2), case=f"eav-rank-{eav_rank}",
                             applicable=False)

    bp = boundary_points(geom)
    d1 = geom.g11 - geom.g12
    d2 = geom.g21 - geom.g22
    if r1 > r0 > r2:
        if d1 <= 0.0 and d2 <= 0.0:
            rho, case = (1.0, 0.0), "H1"
        elif d1 > 0.0 and d2 <= 0.0:
            rho, case = (min(1.0, bp.rho1_inf), 0.0), "H2"
        elif d1 <= 0.0 and d2 > 0.0:
            rho, case = (1.0, 0.0), "H3"
        else:
            rho, case = (min(1.0, bp.rho1_inf), 0.0), "H4"
    elif r2 > r0 > r1:
        if d2 <= 0.0 and d1 <= 0.0:
            rho, case = (0.0, 1.0), "H1-sym"
        elif d2 > 0.0 and d1 <= 0.0:
            rho, case = (0.0, min(1.0, bp.rho2_inf)), "H2-sym"
        elif d2 <= 0.0 and d1 > 0.0:
            rho, case = (0.0, 1.0), "H3-sym"
        else:
            rho, case = (0.0, min(1.0, bp.rho2_inf)), "H4-sym"
    else:
        return TwoBdSolution(rho=np.zeros(2), case="outside-monotone",
                             applicable=False)
    return TwoBdSolution(rho=np.array(rho), case=case, applicable=True)


# --------------------------------------------------------------------------
# power allocation (reference path)
# --------------------------------------------------------------------------

def _cascade(h_user: np.ndarray, a: np.ndarray):
    """Affine tail-sum coefficients: theta_k = c[k] + d[k] * pK (QoS tight
    for the K-1 weakest users)."""
    k = h_user.shape[0]
    c = np.zeros(k + 1)
    d = np.zeros(k + 1)
    d[k - 1] = 1.0
    for i in range(k - 2, -1, -1):
        c[i] = a[i] * c[i + 1] + (a[i] - 1.0) / h_user[i]
        d[i] = a[i] * d[i + 1]
    return c, d


def _ssr_reduced(h_user, h_eav, c, d, pk) -> float:
    theta = c + d * pk
    t1, t2 = theta[:-1], theta[1:]
    diff = 0.5 * (np.log1p(h_user * t1) - np.log1p(h_user * t2)
                  - np.log1p(h_eav * t1) + np.log1p(h_eav * t2)) / fp.LN2
    return float(np.sum(np.maximum(0.0, diff)))


@dataclass
class PowerResult:
    """Cascade power allocation at one trade-off weight.

    clamp records which condition pinned the strongest user's power:
    'interior' (stationary point), 'qos_floor' (its own QoS bound), or
    'budget_cap' (total power budget).  p_hat is the interior stationary
    point when one exists inside the bracket."""

    p: np.ndarray
    pk: float
    p_hat: float | None
    lo: float
    u: float
    p_min: float
    clamp: str


def optimal_power(gains: NormalizedGains, a: np.ndarray, alpha: float,
                  p_max: float, validate: bool = True) -> PowerResult:
    """Trade-off-optimal power allocation for fixed gains in SIC order.

    Maximizes ssr - alpha*(theta_1 + const) over the one-dimensional cascade
    family via derivative-sign bisection; the derivative comes from central
    finite differences with step FD_STEP_REL * max(1, pK).  Raises
    InfeasibleError when the budget cannot cover the QoS floor and
    NonConcaveError if (with validate=True) the derivative changes direction
    more than once on the bracket.
    """
    h_user = np.asarray(gains.h_user, dtype=float)
    h_eav = float(gains.h_eav)
    a = np.asarray(a, dtype=float)
    c, d = _cascade(h_user, a)
    lo = (a[-1] - 1.0) / h_user[-1]
    u = (p_max - c[0]) / d[0]
    pmin = c[0] + d[0] * lo
    if u < lo - 1e-12 * max(1.0, lo):
        raise InfeasibleError(
            f"QoS floor needs {pmin:.6g} W but the budget is {p_max:.6g} W")
    u = max(u, lo)

    # Step scale: anchored to the feasible bracket rather than to 1 W, else
    # instances with very strong channels (optimal pK in the microwatt range)
    # get their curvature smeared away by the difference stencil.
    pk_scale = max(lo, 1e-3 * (u - lo), 1e-12)

    def deriv(pk: float) -> float:
        h = FD_STEP_REL * max(pk, pk_scale)
        x_hi = pk + h
        x_lo = max(0.0, pk - h)  # tail sums stay nonnegative only for pK >= 0
        psi_hi = _ssr_reduced(h_user, h_eav, c, d, x_hi) - alpha * (c[0] + d[0] * x_hi)
        psi_lo = _ssr_reduced(h_user, h_eav, c, d, x_lo) - alpha * (c[0] + d[0] * x_lo)
        return (psi_hi - psi_lo) / (x_hi - x_lo)

    if validate and u > lo:
        signs = np.sign([deriv(x) for x in np.linspace(lo, u, 33)])
        crossings = np.count_nonzero(np.diff(np.sign(signs[signs != 0])) != 0)
        ascents = any(s2 > s1 for s1, s2 in zip(signs, signs[1:]))
        if crossings > 1 or ascents:
            raise NonConcaveError("derivative of the reduced objective is not "
                                  "single-crossing on the feasible bracket")

    p_hat = None
    if deriv(lo) <= 0.0:
        pk, clamp = lo, "qos_floor"
    elif deriv(u) >= 0.0:
        pk, clamp = u, "budget_cap"
    else:
        a_, b_ = lo, u
        while b_ - a_ > DERIV_BRACKET:
            mid = 0.5 * (a_ + b_)
            if deriv(mid) > 0.0:
                a_ = mid
            else:
                b_ = mid
        pk = 0.5 * (a_ + b_)
        p_hat = pk
        clamp = "interior"

    theta = c + d * pk
    return PowerResult(p=theta[:-1] - theta[1:], pk=pk, p_hat=p_hat, lo=lo,
                       u=u, p_min=pmin, clamp=clamp)


@dataclass
class DinkelbachResult:
    p: np.ndarray
    zeta: float
    alpha_star: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)


def dinkelbach_ratio_gains(gains: NormalizedGains, a: np.ndarray, p_max: float,
                           p_circuit: float, alpha0: float = 0.0,
                           tol: float = DINKELBACH_TOL,
                           max_iter: int = DINKELBACH_MAX_ITER,
                           validate: bool = False) -> DinkelbachResult:
    """Maximize ssr/(theta_1 + Pc) for fixed gains via the parametric
    iteration alpha <- ssr(p*(alpha)) / (theta_1(p*(alpha)) + Pc), starting
    from alpha0, stopping once the parametric residual is within tol."""
    alpha = alpha0
    history = []
    for t in range(1, max_iter + 1):
        pr = optimal_power(gains, a, alpha, p_max, validate=validate and t == 1)
        theta1 = float(np.sum(pr.p))
        _, _, r_s = rates_and_secrecy(gains, pr.p)
        ssr = float(np.sum(r_s))
        denom = theta1 + p_circuit
        f = ssr - alpha * denom
        zeta = ssr / denom
        history.append((alpha, f))
        if abs(f) <= tol:
            return DinkelbachResult(p=pr.p, zeta=zeta, alpha_star=zeta,
                                    iterations=t, converged=True,
                                    history=history)
        alpha = zeta
    last = DinkelbachResult(p=pr.p, zeta=zeta, alpha_star=zeta, iterations=max_iter,
                            converged=False, history=history)
    raise ConvergenceError(
        f"parametric iteration did not reach |F| <= {tol} in {max_iter} steps",
        last=last)


def dinkelbach_ratio(s: Scenario, rho, cfg, alpha0: float = 0.0,
                     tol: float = DINKELBACH_TOL,
                     max_iter: int = DINKELBACH_MAX_ITER) -> DinkelbachResult:
    """Scenario-level wrapper: orders users, applies ``rho`` and maximizes the
    ratio objective.  ``cfg`` supplies QoS targets, budget and circuit power."""
    from .scenario import order_users

    rho = validate_rho(rho, s.m) if s.m else np.zeros(0)
    perm, _ = order_users(s)
    s_ord = s.reorder_users(perm)
    a = cfg.qos_factors()[perm]
    gains = effective_gains(s_ord, rho) if s.m else _direct(s_ord)
    return dinkelbach_ratio_gains(gains, a, cfg.p_max_w, cfg.p_circuit_w,
                                  alpha0=alpha0, tol=tol, max_iter=max_iter)


def _direct(s: Scenario) -> NormalizedGains:
    h0, h0e = s.direct_gains()
    return NormalizedGains(h_user=h0, h_eav=h0e, m=0)
