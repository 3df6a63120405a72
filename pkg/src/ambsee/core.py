"""Effective channel gains, SINR, rates, secrecy rates, objectives and
constraint checks for the superposition-coded downlink.

Conventions
-----------
* Users are assumed indexed in SIC order (ascending direct gain); index 0 is
  the weakest user, index K-1 the strongest.  ``scenario.order_users``
  produces the permutation.
* ``p`` is the per-user power vector in watts; ``theta_k = sum_{i>=k} p_i``
  are tail sums with ``theta_{K} = 0`` (0-based: theta[k] covers users k..K-1).
* Rates use (1/2) log2(1 + SINR); secrecy rates are clamped at zero.
* A reflection vector ``rho`` has one entry in [0, 1] per backscatter device.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import Scenario

LN2 = float(np.log(2.0))

# Relative slack applied to every inequality check; the model itself is exact
# but solver outputs carry roundoff.
CONSTRAINT_RTOL = 1e-9


class InfeasibleError(ValueError):
    """Raised when no power allocation can satisfy the QoS constraints."""


def validate_rho(rho, m: int | None = None) -> np.ndarray:
    """Check the box constraint 0 <= rho <= 1 and return rho as an array."""
    arr = np.atleast_1d(np.asarray(rho, dtype=float))
    if m is not None and arr.shape[-1] != m:
        raise ValueError(f"expected {m} reflection coefficients, got {arr.shape[-1]}")
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("reflection coefficients must lie in [0, 1]")
    return arr


@dataclass
class NormalizedGains:
    """Noise-normalized effective power gains at each receiver.

    h_user[..., k] and h_eav[...] broadcast over leading axes when a batch of
    reflection vectors is evaluated at once.  ``m`` records how many devices
    contributed (m = 0 is the no-backscatter baseline).
    """

    h_user: np.ndarray
    h_eav: np.ndarray | float
    m: int

    @property
    def k(self) -> int:
        return self.h_user.shape[-1]


def effective_gains(s: Scenario, rho) -> NormalizedGains:
    """Composite gains with the devices reflecting at ``rho``.

    Every receiver (eavesdropper included — it overhears both the direct and
    the backscattered paths) sees the amplitude

        a = h_node + sum_m sqrt(rho_m) * g_m * g_{m,node}

    and the normalized power gain a**2 / sigma_node**2.  With rho = 0 this
    reduces exactly to the direct gains.  ``rho`` may be shaped (m,) or
    (..., m) for batch evaluation.
    """
    rho = np.asarray(rho, dtype=float)
    if rho.ndim == 0:
        rho = rho[None]
    if rho.shape[-1] != s.m:
        raise ValueError(f"expected {s.m} reflection coefficients, got {rho.shape[-1]}")
    sq = np.sqrt(rho)
    amp_u = s.h + sq @ (s.g[:, None] * s.g_u)          # (..., k)
    amp_e = s.h_e + sq @ (s.g * s.g_e)                 # (...)
    h_user = amp_u ** 2 / s.sigma_sq
    h_eav = amp_e ** 2 / s.sigma_sq_e
    if h_user.ndim == 1:
        h_eav = float(h_eav)
    return NormalizedGains(h_user=h_user, h_eav=h_eav, m=s.m)


def direct_gain_view(s: Scenario) -> NormalizedGains:
    h0, h0e = s.direct_gains()
    return NormalizedGains(h_user=h0, h_eav=h0e, m=0)


def composite_amplitudes(s: Scenario):
    """Amplitude-level normalized channel terms used by the closed-form
    two-device solver:

        G_k  = h_k / sigma_k          (users and eavesdropper)
        G_mk = g_m g_{mk} / sigma_k   (per device, per receiver)

    Returns (g_user[k], g_eav, g_comp_user[m, k], g_comp_eav[m]).
    """
    sig_u = np.sqrt(s.sigma_sq)
    sig_e = np.sqrt(s.sigma_sq_e)
    return (
        s.h / sig_u,
        float(s.h_e / sig_e),
        (s.g[:, None] * s.g_u) / sig_u,
        (s.g * s.g_e) / sig_e,
    )


def theta_tails(p: np.ndarray) -> np.ndarray:
    """Tail sums theta[k] = sum_{i>=k} p_i, length K+1 with theta[K] = 0."""
    p = np.asarray(p, dtype=float)
    out = np.zeros(p.shape[0] + 1)
    out[:-1] = np.cumsum(p[::-1])[::-1]
    return out


def sinr(gain_i: float, p: np.ndarray, k: int) -> float:
    """SINR when receiver i (normalized gain ``gain_i``) decodes the message
    of user k under SIC: users above k act as interference, users below were
    already cancelled."""
    p = np.asarray(p, dtype=float)
    theta = theta_tails(p)
    return gain_i * p[k] / (gain_i * theta[k + 1] + 1.0)


def rates_and_secrecy(gains: NormalizedGains, p: np.ndarray):
    """Per-user achievable rate, eavesdropper rate for the same message, and
    the clamped secrecy rate.

    Uses the identity 1 + H p_k / (H theta_{k+1} + 1) =
    (1 + H theta_k) / (1 + H theta_{k+1}) for numerical stability.
    """
    p = np.asarray(p, dtype=float)
    theta = theta_tails(p)
    hu = gains.h_user
    he = gains.h_eav
    r = 0.5 * (np.log1p(hu * theta[:-1]) - np.log1p(hu * theta[1:])) / LN2
    r_e = 0.5 * (np.log1p(he * theta[:-1]) - np.log1p(he * theta[1:])) / LN2
    r_s = np.maximum(0.0, r - r_e)
    return r, r_e, r_s


@dataclass
class ObjectiveValue:
    """Secrecy sum-rate and both efficiency objectives at one operating point.

    psi  = ssr - alpha * (total power + circuit power)   [trade-off form]
    zeta = ssr / (total power + circuit power)           [ratio form]
    """

    ssr: float
    psi: float
    zeta: float
    alpha: float

    def to_dict(self) -> dict:
        return {"ssr": self.ssr, "psi": self.psi, "zeta": self.zeta,
                "alpha": self.alpha}


def objectives(gains: NormalizedGains, p: np.ndarray, alpha: float,
               p_circuit: float) -> ObjectiveValue:
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    if p_circuit <= 0:
        raise ValueError("circuit power must be positive")
    _, _, r_s = rates_and_secrecy(gains, p)
    ssr = float(np.sum(r_s))
    total = float(np.sum(p)) + p_circuit
    return ObjectiveValue(ssr=ssr, psi=ssr - alpha * total, zeta=ssr / total,
                          alpha=alpha)


@dataclass
class ConstraintReport:
    """Diagnostic outcome of the feasibility checks.

    c1: total power within budget;  c2: every user's QoS rate met;
    c3: SIC decodability at every stronger receiver;  c4: reflection box.
    Margins are signed (negative = violated beyond tolerance).
    """

    c1: bool
    c2: bool
    c3: bool
    c4: bool
    c1_margin: float
    c2_margin: float
    c3_margin: float

    @property
    def ok(self) -> bool:
        return self.c1 and self.c2 and self.c3 and self.c4


def _tol(scale: float) -> float:
    return CONSTRAINT_RTOL * max(1.0, abs(scale))


def check_constraints(gains: NormalizedGains, p: np.ndarray, a: np.ndarray,
                      p_max: float, rho=None) -> ConstraintReport:
    """Evaluate C1..C4 at (rho, p) for users in SIC order.

    C2 is checked in the tail-sum form theta_k >= A_k theta_{k+1} +
    (A_k - 1)/H_k, equivalent to the per-user rate floor.  C3 compares the
    decoding SINR of every message at every stronger receiver directly
    against the intended receiver's SINR.
    """
    p = np.asarray(p, dtype=float)
    a = np.asarray(a, dtype=float)
    hu = np.asarray(gains.h_user, dtype=float)
    k = p.shape[0]
    theta = theta_tails(p)

    c1_margin = p_max - theta[0]
    c1 = bool(c1_margin >= -_tol(p_max))

    with np.errstate(divide="ignore", invalid="ignore"):
        qos_term = np.where(a > 1.0, (a - 1.0) / hu, 0.0)
    rhs = a * theta[1:] + qos_term
    c2_margins = theta[:-1] - rhs
    c2_margin = float(np.min(c2_margins)) if k else 0.0
    c2 = bool(np.all(c2_margins >= -_tol(float(np.max(np.abs(rhs)) if k else 1.0))))

    c3_margin = np.inf
    c3 = True
    for kk in range(k - 1):
        own = sinr(float(hu[kk]), p, kk)
        for i in range(kk + 1, k):
            other = sinr(float(hu[i]), p, kk)
            margin = other - own
            c3_margin = min(c3_margin, margin)
            if margin < -_tol(own):
                c3 = False
    if k < 2:
        c3_margin = np.inf

    c4 = True
    if rho is not None:
        arr = np.atleast_1d(np.asarray(rho, dtype=float))
        c4 = bool(np.all(arr >= -CONSTRAINT_RTOL) and np.all(arr <= 1.0 + CONSTRAINT_RTOL))

    return ConstraintReport(c1=c1, c2=c2, c3=c3, c4=c4,
                            c1_margin=float(c1_margin), c2_margin=c2_margin,
                            c3_margin=float(c3_margin))


def p_min(h_user: np.ndarray, a: np.ndarray) -> float:
    """Least total power satisfying every QoS constraint simultaneously:

        P_min = sum_k (A_k - 1)/H_k * prod_{j<k} A_j

    Infinite if any required user gain vanishes.
    """
    h_user = np.asarray(h_user, dtype=float)
    a = np.asarray(a, dtype=float)
    need = a > 1.0
    if np.any(h_user[need] <= 0.0):
        return np.inf
    prefix = np.concatenate([[1.0], np.cumprod(a[:-1])])
    terms = np.where(need, (a - 1.0) / np.where(h_user > 0, h_user, 1.0), 0.0)
    return float(np.sum(terms * prefix))


def is_feasible(h_user: np.ndarray, a: np.ndarray, p_max: float) -> bool:
    return p_min(h_user, a) <= p_max * (1.0 + CONSTRAINT_RTOL)


def sic_order_holds(h_user: np.ndarray, axis: int = -1) -> np.ndarray | bool:
    """True where the composite gains are nondecreasing along the SIC order
    (ties allowed), which is equivalent to C3 for any positive power split."""
    d = np.diff(np.asarray(h_user, dtype=float), axis=axis)
    return np.all(d >= 0.0, axis=axis)


@dataclass
class SolveResult:
    """Outcome of one (reflection, power) optimization.

    ``rho`` and ``p`` are in device order / SIC user order; ``perm`` maps SIC
    positions back to the scenario's original user indices.  ``alpha_star``
    is the converged parametric weight in ratio mode (equal to the achieved
    zeta).  ``eval_count`` counts objective evaluations (grid points or swarm
    fitness calls; 1 for the closed-form path)."""

    method: str
    feasible: bool
    rho: np.ndarray
    p: np.ndarray
    objective: ObjectiveValue
    alpha_star: float | None = None
    eval_count: int = 1
    iterations: int = 0
    case_tag: str | None = None
    clamp: str | None = None
    perm: np.ndarray | None = None
    eav_rank: int | None = None
    detail: dict | None = None

    @property
    def zeta(self) -> float:
        return self.objective.zeta

    @property
    def ssr(self) -> float:
        return self.objective.ssr

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "feasible": bool(self.feasible),
            "rho": [float(x) for x in np.atleast_1d(self.rho)],
            "p": [float(x) for x in np.atleast_1d(self.p)],
            "ssr": float(self.objective.ssr),
            "psi": float(self.objective.psi),
            "zeta": float(self.objective.zeta),
            "alpha": float(self.objective.alpha),
            "alpha_star": None if self.alpha_star is None else float(self.alpha_star),
            "eval_count": int(self.eval_count),
            "iterations": int(self.iterations),
            "case_tag": self.case_tag,
            "clamp": self.clamp,
            "perm": None if self.perm is None else [int(i) for i in self.perm],
            "eav_rank": None if self.eav_rank is None else int(self.eav_rank),
            "detail": self.detail,
        }
