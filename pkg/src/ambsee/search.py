"""Heuristic reflection-vector optimizers for arbitrary device counts:
a two-stage (coarse then refined) grid search and a particle swarm.

Both treat the exact cascade power allocation as the inner solver, so a
candidate's fitness is the best achievable objective at that reflection
vector.  Candidates that break the SIC decoding order or whose QoS floor
exceeds the power budget score -inf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _fastpath as fp
from .core import ObjectiveValue, SolveResult
from .scenario import Scenario, order_users

RATIO_TOL = 1e-8
RATIO_MAX_ITER = 100


@dataclass(frozen=True)
class GridConfig:
    coarse_step: float = 0.1
    fine_step: float = 0.01
    fine_halfwidth: float = 0.1

    def validate(self) -> None:
        if not (0.0 < self.fine_step < self.coarse_step <= 1.0):
            raise ValueError("need 0 < fine_step < coarse_step <= 1")
        if self.fine_halfwidth <= 0.0:
            raise ValueError("fine_halfwidth must be positive")


@dataclass(frozen=True)
class PsoConfig:
    n_particles: int = 30
    max_iter: int = 100
    c1: float = 1.5
    c2: float = 1.5
    w_min: float = 0.4
    w_max: float = 0.9
    v_max: float = math.pi / 8.0
    seed: int | None = None

    def validate(self) -> None:
        if self.n_particles < 1:
            raise ValueError("need at least one particle")
        if not (0.0 <= self.w_min <= self.w_max):
            raise ValueError("need 0 <= w_min <= w_max")
        if self.v_max <= 0.0:
            raise ValueError("v_max must be positive")
        if self.max_iter < 0:
            raise ValueError("max_iter must be nonnegative")


class _Fitness:
    """Batched fitness of reflection candidates for one ordered scenario."""

    def __init__(self, s_ord: Scenario, a: np.ndarray, p_max: float,
                 p_circuit: float, objective: str, alpha: float):
        if objective not in ("ratio", "tradeoff"):
            raise ValueError(f"unknown objective {objective!r}")
        self.h = np.ascontiguousarray(s_ord.h)
        self.h_e = float(s_ord.h_e)
        self.comp_u = np.ascontiguousarray(s_ord.g[:, None] * s_ord.g_u)
        self.comp_e = np.ascontiguousarray(s_ord.g * s_ord.g_e)
        self.sigma_sq = np.ascontiguousarray(s_ord.sigma_sq)
        self.sigma_sq_e = float(s_ord.sigma_sq_e)
        self.a = np.ascontiguousarray(np.asarray(a, dtype=float))
        self.p_max = p_max
        self.p_circuit = p_circuit
        self.objective = objective
        self.alpha = alpha
        self.evals = 0

    def __call__(self, rho: np.ndarray, alpha0: np.ndarray | None = None):
        """Returns (fitness, zeta, p, feasible) arrays for candidates (n, m)."""
        rho = np.ascontiguousarray(np.atleast_2d(rho))
        n = rho.shape[0]
        self.evals += n
        if alpha0 is None:
            alpha0 = np.zeros(n)
        return fp.eval_rho_batch(
            rho, self.h, self.h_e, self.comp_u, self.comp_e, self.sigma_sq,
            self.sigma_sq_e, self.a, self.p_max, self.p_circuit, RATIO_TOL,
            RATIO_MAX_ITER, np.ascontiguousarray(alpha0),
            self.objective == "ratio", self.alpha)


def _result(method: str, fitness: _Fitness, rho, p, zeta, feasible: bool,
            eval_count: int, iterations: int, perm, eav_rank) -> SolveResult:
    total = float(np.sum(p)) + fitness.p_circuit
    ssr = zeta * total
    obj = ObjectiveValue(ssr=ssr, psi=ssr - fitness.alpha * total, zeta=zeta,
                         alpha=fitness.alpha)
    return SolveResult(method=method, feasible=feasible, rho=np.asarray(rho),
                       p=np.asarray(p), objective=obj,
                       alpha_star=zeta if feasible else None,
                       eval_count=eval_count, iterations=iterations,
                       perm=perm, eav_rank=eav_rank)


def _prepare(s: Scenario, cfg):
    perm, eav_rank = order_users(s)
    s_ord = s.reorder_users(perm)
    a = cfg.qos_factors()[perm]
    return s_ord, a, perm, eav_rank


def _fine_axis(center: float, step: float, halfwidth: float) -> np.ndarray:
    lo = max(0.0, center - halfwidth)
    hi = min(1.0, center + halfwidth)
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    vals = lo + step * np.arange(n)
    return np.minimum(vals, 1.0)


def grid_search(s: Scenario, cfg, grid: GridConfig | None = None,
                objective: str = "ratio", alpha: float = 0.1,
                trace=None) -> SolveResult:
    """Two-stage exhaustive search over reflection vectors.

    Stage 1 sweeps every combination of the coarse axis {0, dc, ..., 1};
    stage 2 re-sweeps a +-fine_halfwidth window (clamped to [0, 1]) around
    the coarse best at the fine step.  First-found maxima win ties, with
    candidates enumerated lexicographically (first device slowest).
    eval_count totals both stages, infeasible candidates included.
    """
    grid = grid or GridConfig()
    grid.validate()
    if s.m < 1:
        raise ValueError("grid search needs at least one device")
    s_ord, a, perm, eav_rank = _prepare(s, cfg)
    fitness = _Fitness(s_ord, a, cfg.p_max_w, cfg.p_circuit_w, objective, alpha)

    n_axis = int(round(1.0 / grid.coarse_step))
    axis = np.linspace(0.0, 1.0, n_axis + 1)
    coarse = _combinations(axis, s.m)
    fit, zeta, p, feas = fitness(coarse)
    best = int(np.argmax(fit))
    coarse_evals = coarse.shape[0]
    if trace is not None:
        trace({"stage": "coarse", "evals": coarse_evals,
               "best_fitness": float(fit[best]),
               "rho": [float(x) for x in coarse[best]]})

    if not feas[best]:
        obj = ObjectiveValue(ssr=0.0, psi=0.0, zeta=0.0, alpha=alpha)
        return SolveResult(method="grid", feasible=False, rho=coarse[best],
                           p=np.zeros(s.k), objective=obj,
                           eval_count=fitness.evals, iterations=2, perm=perm,
                           eav_rank=eav_rank,
                           detail={"coarse_evals": coarse_evals, "fine_evals": 0})

    axes = [_fine_axis(float(coarse[best, i]), grid.fine_step,
                       grid.fine_halfwidth) for i in range(s.m)]
    fine = _combinations_mixed(axes)
    ffit, fzeta, fps, ffeas = fitness(fine)
    fbest = int(np.argmax(ffit))
    if trace is not None:
        trace({"stage": "fine", "evals": fine.shape[0],
               "best_fitness": float(ffit[fbest]),
               "rho": [float(x) for x in fine[fbest]]})

    if ffit[fbest] > fit[best]:
        rho_star, p_star, z_star = fine[fbest], fps[fbest], float(fzeta[fbest])
        ok = bool(ffeas[fbest])
    else:
        rho_star, p_star, z_star = coarse[best], p[best], float(zeta[best])
        ok = bool(feas[best])
    res = _result("grid", fitness, rho_star, p_star, z_star, ok,
                  fitness.evals, 2, perm, eav_rank)
    res.detail = {"coarse_evals": coarse_evals, "fine_evals": int(fine.shape[0])}
    return res


def _combinations(axis: np.ndarray, m: int) -> np.ndarray:
    grids = np.meshgrid(*([axis] * m), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def _combinations_mixed(axes: list[np.ndarray]) -> np.ndarray:
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def pso(s: Scenario, cfg, pso_cfg: PsoConfig | None = None,
        objective: str = "ratio", alpha: float = 0.1, trace=None,
        rng: np.random.Generator | None = None, inspect=None) -> SolveResult:
    """Particle swarm over the reflection box [0, 1]^m.

    Positions start uniform in the box, velocities uniform in +-v_max.  Each
    iteration applies the quadratically decaying inertia
    w(t) = w_max - (w_max - w_min) (t/T)^2, the usual cognitive/social pulls
    with fresh per-component U[0,1] draws, then clamps velocities to +-v_max
    and positions to the box.  Fitness is the exact inner power solve;
    infeasible positions score -inf.  eval_count is n_particles*(max_iter+1).
    """
    pso_cfg = pso_cfg or PsoConfig()
    pso_cfg.validate()
    if s.m < 1:
        raise ValueError("swarm search needs at least one device")
    s_ord, a, perm, eav_rank = _prepare(s, cfg)
    fitness = _Fitness(s_ord, a, cfg.p_max_w, cfg.p_circuit_w, objective, alpha)
    if rng is None:
        rng = np.random.default_rng(pso_cfg.seed)

    n, m = pso_cfg.n_particles, s.m
    x = rng.random((n, m))
    v = rng.uniform(-pso_cfg.v_max, pso_cfg.v_max, size=(n, m))
    warm = np.zeros(n)
    fit, zeta, p, feas = fitness(x, alpha0=warm)
    warm = np.where(feas, zeta, 0.0)

    pbest = x.copy()
    pbest_fit = fit.copy()
    g = int(np.argmax(fit))
    gbest = x[g].copy()
    gbest_fit = float(fit[g])
    gbest_p = p[g].copy()
    gbest_zeta = float(zeta[g])
    gbest_ok = bool(feas[g])
    if trace is not None:
        trace({"iteration": 0, "best_fitness": gbest_fit,
               "best_zeta": gbest_zeta if gbest_ok else None})

    for t in range(1, pso_cfg.max_iter + 1):
        w = pso_cfg.w_max - (pso_cfg.w_max - pso_cfg.w_min) * (t / pso_cfg.max_iter) ** 2
        r1 = rng.random((n, m))
        r2 = rng.random((n, m))
        v = w * v + pso_cfg.c1 * r1 * (pbest - x) + pso_cfg.c2 * r2 * (gbest - x)
        np.clip(v, -pso_cfg.v_max, pso_cfg.v_max, out=v)
        x = x + v
        np.clip(x, 0.0, 1.0, out=x)

        if inspect is not None:
            inspect(t, x, v)
        fit, zeta, p, feas = fitness(x, alpha0=warm)
        warm = np.where(feas, zeta, warm)
        better = fit > pbest_fit
        pbest[better] = x[better]
        pbest_fit[better] = fit[better]
        g = int(np.argmax(fit))
        if fit[g] > gbest_fit:
            gbest = x[g].copy()
            gbest_fit = float(fit[g])
            gbest_p = p[g].copy()
            gbest_zeta = float(zeta[g])
            gbest_ok = bool(feas[g])
        if trace is not None:
            trace({"iteration": t, "best_fitness": gbest_fit,
                   "best_zeta": gbest_zeta if gbest_ok else None})

    detail = {"particles": n, "iterations": pso_cfg.max_iter,
              "evals_per_iteration": n}
    if not gbest_ok:
        obj = ObjectiveValue(ssr=0.0, psi=0.0, zeta=0.0, alpha=alpha)
        return SolveResult(method="pso", feasible=False, rho=gbest,
                           p=np.zeros(s.k), objective=obj,
                           eval_count=fitness.evals,
                           iterations=pso_cfg.max_iter, perm=perm,
                           eav_rank=eav_rank, detail=detail)
    res = _result("pso", fitness, gbest, gbest_p, gbest_zeta, True,
                  fitness.evals, pso_cfg.max_iter, perm, eav_rank)
    res.detail = detail
    return res
