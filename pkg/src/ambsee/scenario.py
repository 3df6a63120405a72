"""Random network drops and deterministic path-loss channels.

One drop places K users and one eavesdropper uniformly in a disk of radius
``user_radius`` around the transmitter (at the origin) and M backscatter
devices in a smaller disk of radius ``bd_radius``.  Every link carries an
amplitude coefficient d**(-gamma/2), so squared amplitudes follow the
d**(-gamma) power law.  Channels are deterministic given (seed, trial_index):
per-trial RNG streams make parallel Monte Carlo reproducible regardless of
scheduling.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np


@dataclass(frozen=True)
class NetworkConfig:
    """System parameters for one simulation setup.

    Powers are in watts (use units.dbm_to_watts at the boundary), rates in
    bits/s/Hz, distances in meters.
    """

    k: int = 2                      # legitimate users
    m: int = 1                      # backscatter devices
    user_radius: float = 50.0
    bd_radius: float = 5.0
    pathloss_exponent: float = 3.0
    noise_user_w: float = 1e-6      # sigma_k^2, -30 dBm
    noise_eav_w: float = 1e-6       # sigma_e^2
    r_min: float | Sequence[float] = 1.0
    p_max_w: float = 100.0          # 50 dBm
    p_circuit_w: float = 1.0        # 30 dBm
    seed: int = 0
    min_distance_m: float = 0.1     # resample floor, avoids path-loss blowup
    eav_pos: tuple[float, float] | None = None  # fixed placement if set

    def validate(self) -> None:
        if self.k < 1:
            raise ValueError("need at least one user")
        if self.m < 0:
            raise ValueError("negative BD count")
        for name in ("user_radius", "bd_radius", "pathloss_exponent",
                     "noise_user_w", "noise_eav_w", "p_max_w", "p_circuit_w",
                     "min_distance_m"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if np.any(self.r_min_vector() < 0):
            raise ValueError("r_min must be nonnegative")

    def r_min_vector(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.r_min, dtype=float), (self.k,)).copy()

    def qos_factors(self) -> np.ndarray:
        """A_k = 2**(2 r_min_k); equals 1 exactly when r_min_k = 0."""
        return 2.0 ** (2.0 * self.r_min_vector())

    def with_overrides(self, **kwargs) -> "NetworkConfig":
        return replace(self, **kwargs)


@dataclass
class Scenario:
    """Raw channel state for one drop.  Amplitude coefficients:

    h[k]     transmitter -> user k
    h_e      transmitter -> eavesdropper
    g[m]     transmitter -> BD m
    g_u[m,k] BD m -> user k
    g_e[m]   BD m -> eavesdropper

    sigma_sq[k] / sigma_sq_e are noise powers in watts.  Users are stored in
    generation order; solvers reindex via order_users().
    """

    user_pos: np.ndarray
    bd_pos: np.ndarray
    eav_pos: np.ndarray
    h: np.ndarray
    h_e: float
    g: np.ndarray
    g_u: np.ndarray
    g_e: np.ndarray
    sigma_sq: np.ndarray
    sigma_sq_e: float
    trial_index: int = 0
    attempt: int = 0

    @property
    def k(self) -> int:
        return self.h.shape[0]

    @property
    def m(self) -> int:
        return self.g.shape[0]

    def direct_gains(self) -> tuple[np.ndarray, float]:
        """Normalized direct power gains H^(0) = h^2/sigma^2 per user, and the
        eavesdropper's."""
        return self.h ** 2 / self.sigma_sq, self.h_e ** 2 / self.sigma_sq_e

    def reorder_users(self, perm: np.ndarray) -> "Scenario":
        """Scenario with user-indexed arrays permuted (BDs untouched)."""
        return Scenario(
            user_pos=self.user_pos[perm],
            bd_pos=self.bd_pos,
            eav_pos=self.eav_pos,
            h=self.h[perm],
            h_e=self.h_e,
            g=self.g,
            g_u=self.g_u[:, perm],
            g_e=self.g_e,
            sigma_sq=self.sigma_sq[perm],
            sigma_sq_e=self.sigma_sq_e,
            trial_index=self.trial_index,
            attempt=self.attempt,
        )

    def with_eav(self, pos: np.ndarray, gamma: float) -> "Scenario":
        """Scenario with the eavesdropper moved to ``pos``; channel
        coefficients involving it are recomputed from distance."""
        pos = np.asarray(pos, dtype=float)
        d_te = float(np.hypot(*pos))
        d_be = np.hypot(self.bd_pos[:, 0] - pos[0], self.bd_pos[:, 1] - pos[1])
        return replace(
            self,
            eav_pos=pos,
            h_e=_amplitude(d_te, gamma),
            g_e=_amplitude(d_be, gamma),
        )

    def with_h_e(self, h_e: float) -> "Scenario":
        """Override the transmitter->eavesdropper coefficient.  A signed
        amplitude is allowed here: estimation-error studies add a Gaussian
        perturbation to the real amplitude, and gains square the composite
        sum."""
        return replace(self, h_e=float(h_e))

    def dump_csv(self, path: str) -> None:
        """Node table: node_id, x, y, role (tx / user / bd / eav)."""
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["node_id", "x", "y", "role"])
            w.writerow(["tx", 0.0, 0.0, "tx"])
            for i, (x, y) in enumerate(self.user_pos):
                w.writerow([f"user_{i + 1}", repr(float(x)), repr(float(y)), "user"])
            for i, (x, y) in enumerate(self.bd_pos):
                w.writerow([f"bd_{i + 1}", repr(float(x)), repr(float(y)), "bd"])
            w.writerow(["eav", repr(float(self.eav_pos[0])),
                        repr(float(self.eav_pos[1])), "eav"])


class UserOrdering(NamedTuple):
    perm: np.ndarray  # indices sorting users by ascending direct gain
    eav_rank: int     # 1-based: exactly eav_rank-1 users sit at or below H_e


def _amplitude(d, gamma: float):
    """Link amplitude at distance d for power-law exponent gamma."""
    return d ** (-gamma / 2.0)


def _uniform_disk(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    r = radius * np.sqrt(rng.random(n))
    phi = 2.0 * np.pi * rng.random(n)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi)])


def _min_pairwise_distance(points: np.ndarray) -> float:
    n = points.shape[0]
    if n < 2:
        return np.inf
    diff = points[:, None, :] - points[None, :, :]
    d = np.hypot(diff[..., 0], diff[..., 1])
    d[np.arange(n), np.arange(n)] = np.inf
    return float(d.min())


def generate_scenario(cfg: NetworkConfig, trial_index: int, attempt: int = 0) -> Scenario:
    """Draw one random drop.  Deterministic for a given (seed, trial_index,
    attempt); ``attempt`` lets callers resample drops that fail feasibility
    screens without disturbing other trials' streams.

    Geometries where any pairwise node distance (transmitter included) falls
    below cfg.min_distance_m are redrawn internally.
    """
    cfg.validate()
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=cfg.seed, spawn_key=(trial_index, attempt))
    )
    gamma = cfg.pathloss_exponent
    for _ in range(10_000):
        user_pos = _uniform_disk(rng, cfg.k, cfg.user_radius)
        bd_pos = _uniform_disk(rng, cfg.m, cfg.bd_radius)
        if cfg.eav_pos is not None:
            eav_pos = np.asarray(cfg.eav_pos, dtype=float)
        else:
            eav_pos = _uniform_disk(rng, 1, cfg.user_radius)[0]
        nodes = np.vstack([np.zeros((1, 2)), user_pos, bd_pos, eav_pos[None, :]])
        if _min_pairwise_distance(nodes) >= cfg.min_distance_m:
            break
    else:  # pragma: no cover - astronomically unlikely with sane radii
        raise RuntimeError("could not draw a geometry above the distance floor")

    d_tu = np.hypot(user_pos[:, 0], user_pos[:, 1])
    d_te = float(np.hypot(*eav_pos))
    d_tb = np.hypot(bd_pos[:, 0], bd_pos[:, 1])
    d_bu = np.hypot(bd_pos[:, None, 0] - user_pos[None, :, 0],
                    bd_pos[:, None, 1] - user_pos[None, :, 1])
    d_be = np.hypot(bd_pos[:, 0] - eav_pos[0], bd_pos[:, 1] - eav_pos[1])

    return Scenario(
        user_pos=user_pos,
        bd_pos=bd_pos,
        eav_pos=eav_pos,
        h=_amplitude(d_tu, gamma),
        h_e=float(_amplitude(d_te, gamma)),
        g=_amplitude(d_tb, gamma),
        g_u=_amplitude(d_bu, gamma),
        g_e=_amplitude(d_be, gamma),
        sigma_sq=np.full(cfg.k, cfg.noise_user_w, dtype=float),
        sigma_sq_e=float(cfg.noise_eav_w),
        trial_index=trial_index,
        attempt=attempt,
    )


def order_users(s: Scenario) -> UserOrdering:
    """Sort users by ascending direct normalized gain and locate the
    eavesdropper in that ordering.

    Ties between users break by original index (stable sort).  A user whose
    gain exactly equals the eavesdropper's counts as below it: the
    conservative reading, since such a user gets zero secrecy either way.
    eav_rank is 1-based; eav_rank == k+1 means the eavesdropper dominates
    everyone and no user can achieve a positive secrecy rate.
    """
    h0, h0_e = s.direct_gains()
    perm = np.argsort(h0, kind="stable")
    eav_rank = int(np.count_nonzero(h0 <= h0_e)) + 1
    return UserOrdering(perm=perm, eav_rank=eav_rank)
