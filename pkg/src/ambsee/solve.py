"""Single-scenario solver front end: picks the reflection policy for the
configured device count, runs the requested power optimization, and bundles
everything into a SolveResult."""

from __future__ import annotations

import numpy as np

from . import closedform as cf
from . import search
from .core import (InfeasibleError, NormalizedGains, ObjectiveValue,
                   SolveResult, effective_gains, objectives)
from .scenario import NetworkConfig, Scenario, order_users

METHODS = ("closed", "grid", "pso")
OBJECTIVES = ("ratio", "tradeoff")
DEFAULT_ALPHA = 0.1


def solve_scenario(s: Scenario, cfg: NetworkConfig, method: str = "closed",
                   objective: str = "ratio", alpha: float = DEFAULT_ALPHA,
                   grid: search.GridConfig | None = None,
                   pso_cfg: search.PsoConfig | None = None,
                   rng: np.random.Generator | None = None,
                   trace=None) -> SolveResult:
    """Solve one drop.

    method 'closed' uses the exact reflection rules (device counts 0..2; the
    two-device rule falls back to the grid search outside its applicability
    conditions, recorded in case_tag).  'grid' and 'pso' handle any m >= 1.
    objective 'ratio' maximizes ssr/(total power + Pc); 'tradeoff' maximizes
    ssr - alpha*(total power + Pc) at the given alpha.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}")

    if method == "grid":
        return search.grid_search(s, cfg, grid=grid, objective=objective,
                                  alpha=alpha, trace=trace)
    if method == "pso":
        return search.pso(s, cfg, pso_cfg=pso_cfg, objective=objective,
                          alpha=alpha, trace=trace, rng=rng)

    perm, eav_rank = order_users(s)
    s_ord = s.reorder_users(perm)
    a = cfg.qos_factors()[perm]

    if s.m == 0:
        rho = np.zeros(0)
        gains = _gains_at(s_ord, rho)
        return solve_power(gains, a, cfg, objective, alpha, rho=rho,
                           perm=perm, eav_rank=eav_rank)
    if s.m == 1:
        return _solve_single_bd(s, s_ord, a, cfg, objective, alpha, grid,
                                trace, perm, eav_rank)
    if s.m == 2:
        return _solve_two_bd(s, s_ord, a, cfg, objective, alpha, grid, trace,
                             perm, eav_rank)
    raise ValueError("closed-form reflection rules cover at most two "
                     "devices; use method='grid' or 'pso'")


def _fitness_of(res: SolveResult, objective: str) -> float:
    if not res.feasible:
        return -np.inf
    return res.objective.zeta if objective == "ratio" else res.objective.psi


def _solve_single_bd(s, s_ord, a, cfg, objective, alpha, grid, trace, perm,
                     eav_rank) -> SolveResult:
    """Single-device closed path: evaluate the binary reflection rule, then
    certify it against the two-stage grid plus a golden-section polish of
    the reflection coefficient.

    The binary rule maximizes the secrecy sum-rate at a fixed power split
    under its ordering conditions; once the power allocation re-optimizes
    per candidate, the joint optimum can sit elsewhere (including interior
    points), so the rule's answer is only returned when nothing beats it.
    """
    rho_rule = np.array([cf.optimal_rho_single(s_ord)])
    res_rule = solve_power(_gains_at(s_ord, rho_rule), a, cfg, objective,
                           alpha, rho=rho_rule, perm=perm, eav_rank=eav_rank,
                           case_tag="rule-binary")
    res_grid = search.grid_search(s, cfg, grid=grid, objective=objective,
                                  alpha=alpha, trace=trace)
    evals = 1 + res_grid.eval_count

    candidates = [res_rule, res_grid]
    base = max(candidates, key=lambda r: _fitness_of(r, objective))
    if base.feasible:
        step = (grid or search.GridConfig()).fine_step
        center = float(np.atleast_1d(base.rho)[0])
        rho_ref, n_evals = _golden_rho(s_ord, a, cfg, objective, alpha,
                                       max(0.0, center - step),
                                       min(1.0, center + step))
        evals += n_evals
        res_ref = solve_power(_gains_at(s_ord, np.array([rho_ref])), a, cfg,
                              objective, alpha, rho=np.array([rho_ref]),
                              perm=perm, eav_rank=eav_rank,
                              case_tag="polish")
        candidates.append(res_ref)

    best = max(candidates, key=lambda r: _fitness_of(r, objective))
    if _fitness_of(res_rule, objective) >= _fitness_of(best, objective) - 1e-9:
        best = res_rule
        best.case_tag = "rule-binary"
    elif best is res_grid:
        best.case_tag = "fallback-grid:rule-gap"
    else:
        best.case_tag = "fallback-polish:rule-gap"
    best.method = "closed"
    best.eval_count = evals
    return best


def _golden_rho(s_ord, a, cfg, objective, alpha, lo, hi,
                tol: float = 1e-9) -> tuple[float, int]:
    """Golden-section refinement of a scalar reflection coefficient against
    the exact inner power solve.  Returns (argmax, evaluation count)."""
    import math

    from . import _fastpath as fp

    count = 0

    def f(r: float) -> float:
        nonlocal count
        count += 1
        gains = _gains_at(s_ord, np.array([r]))
        hu = np.ascontiguousarray(np.atleast_2d(gains.h_user))
        he = np.atleast_1d(np.asarray(gains.h_eav, dtype=float))
        if objective == "ratio":
            z, _, _, ok = fp.ratio_solve_batch(hu, he, a, cfg.p_max_w,
                                               cfg.p_circuit_w, 1e-8, 100,
                                               np.zeros(1))
            return float(z[0])
        psi, _, _, ok = fp.tradeoff_solve_batch(hu, he, a, cfg.p_max_w,
                                                cfg.p_circuit_w, alpha)
        return float(psi[0])

    inv = (math.sqrt(5.0) - 1.0) / 2.0
    a_, b_ = lo, hi
    x1 = b_ - inv * (b_ - a_)
    x2 = a_ + inv * (b_ - a_)
    f1, f2 = f(x1), f(x2)
    while b_ - a_ > tol:
        if f1 < f2:
            a_, x1, f1 = x1, x2, f2
            x2 = a_ + inv * (b_ - a_)
            f2 = f(x2)
        else:
            b_, x2, f2 = x2, x1, f1
            x1 = b_ - inv * (b_ - a_)
            f1 = f(x1)
    return 0.5 * (a_ + b_), count


def _solve_two_bd(s, s_ord, a, cfg, objective, alpha, grid, trace, perm,
                  eav_rank) -> SolveResult:
    """Two-device closed path: take the case-analysis candidate when its
    conditions hold, then certify it against the two-stage grid (the case
    analysis fixes the power split; re-optimizing power can move the joint
    optimum elsewhere, e.g. to both devices reflecting).  The better point
    wins; case_tag records which."""
    res_grid = search.grid_search(s, cfg, grid=grid, objective=objective,
                                  alpha=alpha, trace=trace)
    res_grid.method = "closed"
    if s.k != 2:
        # the two-device case analysis is only stated for two users
        res_grid.case_tag = "fallback-grid:k-not-2"
        return res_grid
    sol = cf.optimal_rho_two_bd(cf.TwoBdGeometry.from_scenario(s_ord),
                                eav_rank=eav_rank)
    if not sol.applicable:
        res_grid.case_tag = f"fallback-grid:{sol.case}"
        return res_grid
    res_thm = solve_power(_gains_at(s_ord, sol.rho), a, cfg, objective, alpha,
                          rho=sol.rho, perm=perm, eav_rank=eav_rank,
                          case_tag=sol.case)
    res_thm.eval_count += res_grid.eval_count
    fit_thm = res_thm.objective.zeta if objective == "ratio" else res_thm.objective.psi
    fit_grid = res_grid.objective.zeta if objective == "ratio" else res_grid.objective.psi
    if res_thm.feasible and (not res_grid.feasible
                             or fit_thm >= fit_grid - 1e-9):
        return res_thm
    res_grid.case_tag = f"fallback-grid:joint-gap:{sol.case}"
    return res_grid


def solve_power(gains: NormalizedGains, a: np.ndarray, cfg: NetworkConfig,
                objective: str = "ratio", alpha: float = DEFAULT_ALPHA,
                rho: np.ndarray | None = None, perm=None, eav_rank=None,
                case_tag=None, method: str = "closed") -> SolveResult:
    """Power-only solve at fixed gains (SIC order), wrapped in a SolveResult."""
    rho = np.zeros(0) if rho is None else np.asarray(rho, dtype=float)
    k = np.asarray(gains.h_user).shape[-1]
    try:
        if objective == "ratio":
            din = cf.dinkelbach_ratio_gains(gains, a, cfg.p_max_w,
                                            cfg.p_circuit_w)
            obj = objectives(gains, din.p, alpha, cfg.p_circuit_w)
            return SolveResult(method=method, feasible=True, rho=rho, p=din.p,
                               objective=obj, alpha_star=din.alpha_star,
                               eval_count=1, iterations=din.iterations,
                               case_tag=case_tag, perm=perm,
                               eav_rank=eav_rank)
        pr = cf.optimal_power(gains, a, alpha, cfg.p_max_w)
        obj = objectives(gains, pr.p, alpha, cfg.p_circuit_w)
        return SolveResult(method=method, feasible=True, rho=rho, p=pr.p,
                           objective=obj, alpha_star=None, eval_count=1,
                           iterations=1, case_tag=case_tag, clamp=pr.clamp,
                           perm=perm, eav_rank=eav_rank)
    except InfeasibleError:
        obj = ObjectiveValue(ssr=0.0, psi=0.0, zeta=0.0, alpha=alpha)
        return SolveResult(method=method, feasible=False, rho=rho,
                           p=np.zeros(k), objective=obj, case_tag=case_tag,
                           perm=perm, eav_rank=eav_rank)


def _gains_at(s_ord: Scenario, rho: np.ndarray) -> NormalizedGains:
    if rho.shape[0] == 0:
        h0, h0e = s_ord.direct_gains()
        return NormalizedGains(h_user=h0, h_eav=h0e, m=0)
    return effective_gains(s_ord, rho)
