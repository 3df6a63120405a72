"""Monte Carlo harness: scheme sweeps with common random numbers, the
time-division baseline, the imperfect-eavesdropper-CSI study, and dataset
export/verification for learned surrogates.

Pairing discipline: trial t draws one geometry from the stream
(seed, t, attempt) and every (scheme, sweep value) combination sees that same
geometry (schemes with fewer devices use a prefix of the device set), so
curves are directly comparable.  Trials are resampled until every compared
combination is feasible; the resample count is reported.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import closedform as cf
from .core import (NormalizedGains, ObjectiveValue, SolveResult,
                   effective_gains, p_min, rates_and_secrecy, theta_tails)
from .scenario import NetworkConfig, Scenario, generate_scenario, order_users
from .search import GridConfig, PsoConfig, grid_search, pso
from .solve import solve_power, solve_scenario

LN2 = math.log(2.0)
VARIABLES = ("p_max", "r_min", "noise_power", "eav_position", "csi_error_var")
MAX_RESAMPLE = 100_000

# Denominator convention for the time-division baseline: with K equal slots
# the energy drawn per unit time is the slot average, not the slot sum.
OMA_POWER_METRIC = "average"


def parse_scheme(name: str) -> tuple[str, int]:
    """'noma' / 'noma+3bd' / 'oma+2bd' -> (kind, device count)."""
    t = name.strip().lower().replace("-", "+").replace("_", "+")
    t = t.replace(" ", "")
    if t in ("noma", "noma+pure", "noma+0bd"):
        return "noma", 0
    for kind in ("noma", "oma"):
        prefix = kind + "+"
        if t.startswith(prefix) and t.endswith("bd"):
            return kind, int(t[len(prefix):-2])
    raise ValueError(f"unrecognized scheme {name!r}")


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple
    schemes: tuple[str, ...]
    trials: int = 1000
    seed: int = 0
    method_override: str | None = None   # force grid/pso for every NOMA scheme
    pso: PsoConfig = field(default_factory=PsoConfig)
    grid: GridConfig = field(default_factory=GridConfig)

    def validate(self) -> None:
        if self.variable not in VARIABLES:
            raise ValueError(f"variable must be one of {VARIABLES}")
        if not self.values:
            raise ValueError("values must be nonempty")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        for s in self.schemes:
            parse_scheme(s)

    @classmethod
    def from_json(cls, path: str) -> "SweepSpec":
        with open(path) as f:
            raw = json.load(f)
        pso_cfg = PsoConfig(**raw.pop("pso", {}))
        grid_cfg = GridConfig(**raw.pop("grid", {}))
        values = raw.pop("values")
        if raw.get("variable") == "eav_position":
            values = tuple(tuple(v) for v in values)
        else:
            values = tuple(values)
        return cls(values=values, schemes=tuple(raw.pop("schemes")),
                   pso=pso_cfg, grid=grid_cfg, **raw)


@dataclass
class SweepRow:
    scheme: str
    sweep_value: object
    mean_zeta: float
    stderr: float
    rel_gain: float
    n_feasible: int
    n_resampled: int


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list[SweepRow]
    samples: dict  # (scheme, value_key) -> per-trial zeta array
    n_resampled: int

    def row(self, scheme: str, value) -> SweepRow:
        key = _value_key(value)
        for r in self.rows:
            if r.scheme == scheme and _value_key(r.sweep_value) == key:
                return r
        raise KeyError((scheme, value))

    def zetas(self, scheme: str, value) -> np.ndarray:
        return self.samples[(scheme, _value_key(value))]

    def write_csv(self, path: str) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["scheme", "sweep_value", "mean_zeta", "stderr",
                        "rel_gain", "n_feasible", "n_resampled"])
            for r in self.rows:
                w.writerow([r.scheme, _value_str(r.sweep_value),
                            repr(r.mean_zeta), repr(r.stderr),
                            repr(r.rel_gain), r.n_feasible, r.n_resampled])


def _value_key(v):
    return tuple(v) if isinstance(v, (tuple, list, np.ndarray)) else v


def _value_str(v):
    if isinstance(v, (tuple, list, np.ndarray)):
        return ":".join(repr(float(x)) for x in v)
    return repr(float(v))


def _apply_value(cfg: NetworkConfig, variable: str, value) -> NetworkConfig:
    if variable == "p_max":
        return replace(cfg, p_max_w=float(value))
    if variable == "r_min":
        return replace(cfg, r_min=float(value))
    if variable == "noise_power":
        return replace(cfg, noise_user_w=float(value), noise_eav_w=float(value))
    if variable == "eav_position":
        return replace(cfg, eav_pos=(float(value[0]), float(value[1])))
    return cfg  # csi_error_var: handled at evaluation time


def _scenario_at(s: Scenario, cfg: NetworkConfig, variable: str, value,
                 m: int) -> Scenario:
    """View of the drawn geometry for one scheme and sweep value."""
    out = _take_bds(s, m)
    if variable == "noise_power":
        out = replace(out, sigma_sq=np.full(out.k, float(value)),
                      sigma_sq_e=float(value))
    elif variable == "eav_position":
        out = out.with_eav(np.asarray(value, dtype=float),
                           cfg.pathloss_exponent)
    return out


def _take_bds(s: Scenario, m: int) -> Scenario:
    if m == s.m:
        return s
    return replace(s, bd_pos=s.bd_pos[:m], g=s.g[:m], g_u=s.g_u[:m],
                   g_e=s.g_e[:m])


def _noma_feasible(s: Scenario, cfg: NetworkConfig) -> bool:
    """Pure-superposition feasibility (reflection off).  Gains only grow with
    reflection, so this also certifies every backscatter-assisted variant."""
    perm, _ = order_users(s)
    h0, _ = s.direct_gains()
    return p_min(h0[perm], cfg.qos_factors()[perm]) <= cfg.p_max_w


def _oma_feasible(s: Scenario, cfg: NetworkConfig) -> bool:
    gains = effective_gains(s, np.ones(s.m)) if s.m else _direct(s)
    a = 2.0 ** (2.0 * cfg.r_min_vector())
    floors = (a - 1.0) / gains.h_user
    return bool(np.all(floors <= cfg.p_max_w))


def _direct(s: Scenario) -> NormalizedGains:
    h0, h0e = s.direct_gains()
    return NormalizedGains(h_user=h0, h_eav=h0e, m=0)


def _golden_max(f, lo: float, hi: float, tol: float = 1e-11) -> float:
    """Golden-section maximizer for a unimodal f on [lo, hi]."""
    if hi <= lo:
        return lo
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - inv * (b - a)
    x2 = a + inv * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol * max(1.0, abs(a), abs(b)):
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + inv * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - inv * (b - a)
            f1 = f(x1)
    return 0.5 * (a + b)


def oma_baseline(s: Scenario, cfg: NetworkConfig,
                 tol: float = 1e-8, max_iter: int = 100) -> SolveResult:
    """Time-division baseline: K equal slots, every device at full
    reflection, no inter-user interference.

    Reported rates carry the 1/K time share; the QoS floor applies to the
    rate a user sees while being served (p_k >= (2**(2 r_min) - 1)/H_k), and
    each slot's transmit power is capped at p_max.  The ratio objective is
    maximized by the parametric iteration with a per-slot golden-section
    inner step (the slot objectives are concave and decoupled).  The
    consumed-power metric follows OMA_POWER_METRIC ('average': slot average
    plus circuit power, the energy actually drawn per unit time).
    """
    k = s.k
    rho = np.ones(s.m)
    gains = effective_gains(s, rho) if s.m else _direct(s)
    hu = np.asarray(gains.h_user, dtype=float)
    he = float(gains.h_eav)
    a_oma = 2.0 ** (2.0 * cfg.r_min_vector())
    floors = (a_oma - 1.0) / hu
    w = 1.0 / k if OMA_POWER_METRIC == "average" else 1.0

    if np.any(floors > cfg.p_max_w):
        obj = ObjectiveValue(ssr=0.0, psi=0.0, zeta=0.0, alpha=0.0)
        return SolveResult(method="oma", feasible=False, rho=rho,
                           p=np.zeros(k), objective=obj)

    def secrecy(i: int, p: float) -> float:
        if hu[i] <= he:
            return 0.0
        return (math.log1p(hu[i] * p) - math.log1p(he * p)) / (2.0 * k * LN2)

    alpha = 0.0
    p = floors.copy()
    zeta = 0.0
    iters = 0
    for t in range(max_iter):
        iters = t + 1
        for i in range(k):
            if hu[i] <= he:
                p[i] = floors[i]
            elif alpha == 0.0:
                p[i] = cfg.p_max_w  # secrecy strictly increases with power
            else:
                p[i] = _golden_max(
                    lambda x, i=i: secrecy(i, x) - alpha * w * x,
                    floors[i], cfg.p_max_w)
        ssr = sum(secrecy(i, p[i]) for i in range(k))
        denom = w * float(np.sum(p)) + cfg.p_circuit_w
        f_val = ssr - alpha * denom
        zeta = ssr / denom
        if abs(f_val) <= tol:
            break
        alpha = zeta
    obj = ObjectiveValue(ssr=ssr, psi=ssr - zeta * denom, zeta=zeta, alpha=zeta)
    return SolveResult(method="oma", feasible=True, rho=rho, p=p,
                       objective=obj, alpha_star=zeta, iterations=iters)


def solve_scheme(s: Scenario, cfg: NetworkConfig, scheme: str,
                 spec: SweepSpec | None = None,
                 pso_rng: np.random.Generator | None = None) -> SolveResult:
    """Dispatch one scheme on one drop: exact rules up to two devices, swarm
    beyond (or the spec's method_override), time-division for 'oma'."""
    kind, m = parse_scheme(scheme)
    view = _take_bds(s, m)
    if kind == "oma":
        return oma_baseline(view, cfg)
    method = None if spec is None else spec.method_override
    if method is None:
        method = "closed" if m <= 2 else "pso"
    grid_cfg = spec.grid if spec is not None else None
    pso_cfg = spec.pso if spec is not None else None
    res = solve_scenario(view, cfg, method=method, grid=grid_cfg,
                         pso_cfg=pso_cfg, rng=pso_rng)
    if not res.feasible and m >= 1:
        # A swarm can in principle land every particle in the decoding-order
        # exclusion region even when reflection-off is feasible; fall back to
        # the no-reflection solution so paired trials stay comparable.
        base = solve_scenario(_take_bds(s, 0), cfg, method="closed")
        if base.feasible:
            base.rho = np.zeros(m)
            base.case_tag = f"fallback-rho0:{method}"
            return base
    return res


def _realized_zeta(s_true: Scenario, cfg: NetworkConfig, res: SolveResult) -> float:
    """Evaluate a designed (rho, p) under the true channels.  The decoder
    order and powers stay as designed; only the achieved secrecy changes."""
    if not res.feasible:
        return 0.0
    view = _take_bds(s_true, res.rho.shape[0])
    if res.perm is not None:
        view = view.reorder_users(res.perm)
    gains = effective_gains(view, res.rho) if view.m else _direct(view)
    if res.method == "oma":
        hu = np.asarray(gains.h_user, dtype=float)
        he = float(gains.h_eav)
        k = view.k
        ssr = 0.0
        for i in range(k):
            if hu[i] > he:
                ssr += (math.log1p(hu[i] * res.p[i])
                        - math.log1p(he * res.p[i])) / (2.0 * k * LN2)
        w = 1.0 / k if OMA_POWER_METRIC == "average" else 1.0
        return ssr / (w * float(np.sum(res.p)) + cfg.p_circuit_w)
    _, _, r_s = rates_and_secrecy(gains, res.p)
    return float(np.sum(r_s)) / (float(np.sum(res.p)) + cfg.p_circuit_w)


def _sweep_trial(spec: SweepSpec, base_cfg: NetworkConfig, t: int):
    """All (scheme, value) solves for one trial; independent of every other
    trial, so execution order and worker count cannot change the result."""
    schemes = [(_name, *parse_scheme(_name)) for _name in spec.schemes]
    csi_mode = spec.variable == "csi_error_var"
    s, resamples = _draw_feasible(base_cfg, spec, schemes, t)
    rng_csi = np.random.default_rng(
        np.random.SeedSequence(entropy=spec.seed, spawn_key=(t, 1 << 20)))
    z_noise = float(rng_csi.standard_normal())

    out = {}
    for name, kind, m in schemes:
        if csi_mode:
            pso_rng = np.random.default_rng(np.random.SeedSequence(
                entropy=spec.seed, spawn_key=(t, (1 << 21) + m)))
            res = solve_scheme(s, base_cfg, name, spec, pso_rng)
            for v in spec.values:
                # The estimation error perturbs a real (signed) amplitude;
                # the received power squares the composite sum, so the
                # eavesdropper's expected gain grows with the error variance.
                sigma_eps = math.sqrt(float(v))
                s_true = s.with_h_e(s.h_e + sigma_eps * z_noise)
                out[(name, _value_key(v))] = _realized_zeta(s_true, base_cfg, res)
        else:
            for vi, v in enumerate(spec.values):
                pso_rng = np.random.default_rng(np.random.SeedSequence(
                    entropy=spec.seed, spawn_key=(t, (1 << 21) + m, vi)))
                cfg_v = _apply_value(base_cfg, spec.variable, v)
                s_v = _scenario_at(s, cfg_v, spec.variable, v, m)
                res = solve_scheme(s_v, cfg_v, name, spec, pso_rng)
                out[(name, _value_key(v))] = res.zeta if res.feasible else 0.0
    return resamples, out


def run_sweep(spec: SweepSpec, cfg: NetworkConfig, progress=None,
              jobs: int = 1) -> SweepResult:
    """Execute one sweep.  Returns per-(scheme, value) means, standard
    errors, and relative gains against the pure-superposition scheme when it
    is part of the sweep.  ``jobs`` > 1 distributes trials over processes;
    results are identical for any worker count."""
    spec.validate()
    schemes = [(_name, *parse_scheme(_name)) for _name in spec.schemes]
    m_max = max(m for _, _, m in schemes)
    base_cfg = replace(cfg, m=m_max, seed=spec.seed)

    keys = [(name, _value_key(v)) for name, _, _ in schemes for v in spec.values]
    samples = {key: np.zeros(spec.trials) for key in keys}
    n_resampled = 0

    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        from functools import partial
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(partial(_sweep_trial, spec, base_cfg),
                                  range(spec.trials), chunksize=16))
    else:
        results = []
        for t in range(spec.trials):
            results.append(_sweep_trial(spec, base_cfg, t))
            if progress is not None:
                progress(t)

    for t, (resamples, row) in enumerate(results):
        n_resampled += resamples
        for key, z in row.items():
            samples[key][t] = z

    noma_name = next((n for n, kind, m in schemes if kind == "noma" and m == 0),
                     None)
    rows = []
    for name, kind, m in schemes:
        for v in spec.values:
            z = samples[(name, _value_key(v))]
            mean = float(np.mean(z))
            stderr = float(np.std(z, ddof=1) / math.sqrt(len(z))) if len(z) > 1 else 0.0
            if noma_name is not None:
                # mean of the per-trial gains over trials where the
                # reference achieves a positive objective
                ref = samples[(noma_name, _value_key(v))]
                pos = ref > 0.0
                rel = (float(np.mean((z[pos] - ref[pos]) / ref[pos]))
                       if np.any(pos) else float("nan"))
            else:
                rel = float("nan")
            rows.append(SweepRow(scheme=name, sweep_value=v, mean_zeta=mean,
                                 stderr=stderr, rel_gain=rel,
                                 n_feasible=spec.trials,
                                 n_resampled=n_resampled))
    return SweepResult(spec=spec, rows=rows, samples=samples,
                       n_resampled=n_resampled)


def _draw_feasible(base_cfg: NetworkConfig, spec: SweepSpec, schemes,
                   t: int) -> tuple[Scenario, int]:
    """Redraw trial t until every (scheme, value) combination is feasible."""
    for attempt in range(MAX_RESAMPLE):
        s = generate_scenario(base_cfg, t, attempt)
        ok = True
        for name, kind, m in schemes:
            for v in spec.values:
                cfg_v = _apply_value(base_cfg, spec.variable, v)
                s_v = _scenario_at(s, cfg_v, spec.variable, v, m)
                feasible = (_oma_feasible(s_v, cfg_v) if kind == "oma"
                            else _noma_feasible(s_v, cfg_v))
                if not feasible:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return s, attempt
    raise RuntimeError(f"trial {t}: no feasible drop in {MAX_RESAMPLE} attempts")


def imperfect_csi_experiment(cfg: NetworkConfig, sigma_eps_sq_list: Sequence[float],
                             k_list: Sequence[int], trials: int = 1000,
                             scheme: str = "noma+1bd",
                             seed: int | None = None) -> dict:
    """Design on the estimated eavesdropper channel, score on the true one.

    For each user count, trial t draws a drop (the drawn coefficient is the
    estimate), solves the scheme once, then evaluates the realized ratio at
    h_e_true = max(0, h_e + eps) with eps ~ Normal(0, sigma^2) shared across
    the sigma grid (common random numbers).  Returns
    {(k, sigma_eps_sq): mean zeta} plus per-trial samples under ['samples'].
    """
    out = {"mean": {}, "samples": {}}
    base_seed = cfg.seed if seed is None else seed
    for k in k_list:
        spec = SweepSpec(variable="csi_error_var",
                         values=tuple(float(x) for x in sigma_eps_sq_list),
                         schemes=(scheme,), trials=trials, seed=base_seed + k)
        res = run_sweep(spec, replace(cfg, k=k))
        for v in sigma_eps_sq_list:
            out["mean"][(k, float(v))] = res.row(scheme, float(v)).mean_zeta
            out["samples"][(k, float(v))] = res.zetas(scheme, float(v))
    return out


# --------------------------------------------------------------------------
# dataset export / verification
# --------------------------------------------------------------------------

def dataset_columns(k: int, m: int) -> tuple[list[str], list[str]]:
    feats = [f"h_{i + 1}" for i in range(k)] + ["h_e"]
    feats += [f"g_{j + 1}" for j in range(m)]
    feats += [f"g_{j + 1}{i + 1}" for j in range(m) for i in range(k)]
    feats += [f"g_{j + 1}e" for j in range(m)]
    labels = [f"p_{i + 1}" for i in range(k)] + [f"rho_{j + 1}" for j in range(m)]
    return feats, labels


def export_dataset(cfg: NetworkConfig, n_samples: int, solver: str = "closed",
                   path: str = "dataset.csv", progress=None) -> dict:
    """Solve ``n_samples`` feasible drops and write one CSV row per drop:
    channel coefficients (users in SIC order), the optimal powers and
    reflection coefficients, and the achieved ratio objective.  A sidecar
    ``<path>.meta.json`` records the configuration needed to re-evaluate the
    rows.  Deterministic given cfg.seed."""
    if solver not in ("closed", "grid", "pso"):
        raise ValueError("solver must be closed, grid or pso")
    feats, labels = dataset_columns(cfg.k, cfg.m)
    header = feats + labels + ["zeta"]
    n_written = 0
    n_infeasible = 0
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for i in range(n_samples):
            for attempt in range(MAX_RESAMPLE):
                s = generate_scenario(cfg, i, attempt)
                rng = np.random.default_rng(np.random.SeedSequence(
                    entropy=cfg.seed, spawn_key=(i, attempt, 7)))
                res = solve_scenario(s, cfg, method=solver, rng=rng)
                if res.feasible:
                    break
                n_infeasible += 1
            else:
                raise RuntimeError("could not draw a feasible sample")
            s_ord = s.reorder_users(res.perm)
            row = list(s_ord.h) + [s_ord.h_e] + list(s_ord.g)
            row += [s_ord.g_u[j, i2] for j in range(cfg.m) for i2 in range(cfg.k)]
            row += list(s_ord.g_e)
            row += list(res.p) + list(res.rho) + [res.zeta]
            w.writerow([repr(float(x)) for x in row])
            n_written += 1
            if progress is not None and (i + 1) % 1000 == 0:
                progress(i + 1)
    meta = {
        "schema_version": 1,
        "kind": "ambsee-dataset",
        "k": cfg.k, "m": cfg.m, "n": n_written, "solver": solver,
        "seed": cfg.seed, "n_infeasible_resampled": n_infeasible,
        "noise_user_w": cfg.noise_user_w, "noise_eav_w": cfg.noise_eav_w,
        "r_min": list(np.atleast_1d(np.asarray(cfg.r_min, dtype=float))),
        "p_max_w": cfg.p_max_w, "p_circuit_w": cfg.p_circuit_w,
        "features": feats, "labels": labels,
        "note": "users sorted by ascending direct normalized gain; row zeta "
                "is ssr/(sum(p)+p_circuit) at the stored labels",
    }
    with open(path + ".meta.json", "w") as f:
        json.dump(meta, f, indent=1, sort_keys=True)
    return meta


def load_dataset(path: str) -> tuple[dict, np.ndarray, list[str]]:
    with open(path + ".meta.json") as f:
        meta = json.load(f)
    with open(path, newline="") as f:
        r = csv.reader(f)
        header = next(r)
        data = np.array([[float(x) for x in row] for row in r])
    return meta, data, header


def _gains_from_features(meta: dict, feats: np.ndarray, rho: np.ndarray):
    k, m = meta["k"], meta["m"]
    h = feats[:k]
    h_e = feats[k]
    g = feats[k + 1:k + 1 + m]
    g_u = feats[k + 1 + m:k + 1 + m + m * k].reshape(m, k)
    g_e = feats[k + 1 + m + m * k:k + 1 + 2 * m + m * k]
    sq = np.sqrt(np.asarray(rho, dtype=float))
    amp_u = h + sq @ (g[:, None] * g_u) if m else h
    amp_e = h_e + float(sq @ (g * g_e)) if m else h_e
    hu = amp_u ** 2 / np.asarray(meta["noise_user_w"])
    he = float(amp_e ** 2 / meta["noise_eav_w"])
    return NormalizedGains(h_user=hu, h_eav=he, m=m)


def verify_dataset(path: str) -> float:
    """Round-trip check: recompute zeta from each row's features and labels;
    returns the maximum absolute deviation from the stored value."""
    meta, data, header = load_dataset(path)
    k, m = meta["k"], meta["m"]
    nf = len(meta["features"])
    worst = 0.0
    for row in data:
        feats = row[:nf]
        p = row[nf:nf + k]
        rho = row[nf + k:nf + k + m]
        gains = _gains_from_features(meta, feats, rho)
        _, _, r_s = rates_and_secrecy(gains, p)
        zeta = float(np.sum(r_s)) / (float(np.sum(p)) + meta["p_circuit_w"])
        worst = max(worst, abs(zeta - row[-1]))
    return worst


def eval_predictions(dataset_path: str, predictions_path: str,
                     out_path: str, project: bool = True) -> dict:
    """Score predicted (rho, p) rows against a dataset's true channels.

    The predictions CSV must carry the dataset's label columns (p_*, rho_*)
    aligned row-by-row.  With project=True predictions are first made
    feasible: rho clamped to [0, 1], p clamped nonnegative and rescaled onto
    the power budget, and, if any QoS constraint still fails, p replaced by
    the QoS-tight cascade at the predicted strongest-user power.  Rows whose
    reflection vector breaks the SIC decoding order are scored zero.

    Writes out_path with per-row zeta_pred / zeta_label / feasible and
    returns summary statistics.
    """
    meta, data, _ = load_dataset(dataset_path)
    k, m = meta["k"], meta["m"]
    nf = len(meta["features"])
    a = 2.0 ** (2.0 * np.broadcast_to(np.asarray(meta["r_min"], dtype=float), (k,)))
    p_max = meta["p_max_w"]
    with open(predictions_path, newline="") as f:
        r = csv.reader(f)
        pred_header = next(r)
        pred = np.array([[float(x) for x in row] for row in r])
    idx = {name: i for i, name in enumerate(pred_header)}
    missing = [c for c in meta["labels"] if c not in idx]
    if missing:
        raise ValueError(f"prediction file lacks columns {missing}")
    if pred.shape[0] != data.shape[0]:
        raise ValueError("prediction row count does not match the dataset")

    rows_out = []
    ratios = []
    n_ok = 0
    for i in range(data.shape[0]):
        feats = data[i, :nf]
        zeta_label = float(data[i, -1])
        p_hat = np.array([pred[i, idx[f"p_{j + 1}"]] for j in range(k)])
        rho_hat = np.array([pred[i, idx[f"rho_{j + 1}"]] for j in range(m)])
        if project:
            rho_hat = np.clip(rho_hat, 0.0, 1.0)
            p_hat = np.maximum(p_hat, 0.0)
        gains = _gains_from_features(meta, feats, rho_hat)
        hu = np.asarray(gains.h_user, dtype=float)
        feasible = bool(np.all(np.diff(hu) >= 0.0))
        zeta_pred = 0.0
        if feasible:
            if project:
                p_hat = _project_power(p_hat, hu, a, p_max)
                feasible = p_hat is not None
            if feasible:
                _, _, r_s = rates_and_secrecy(gains, p_hat)
                zeta_pred = float(np.sum(r_s)) / (float(np.sum(p_hat))
                                                  + meta["p_circuit_w"])
        rows_out.append((i, int(feasible), zeta_pred, zeta_label))
        if zeta_label > 0.0:
            ratios.append(zeta_pred / zeta_label)
        n_ok += int(feasible)

    with open(out_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["row", "feasible", "zeta_pred", "zeta_label"])
        for row in rows_out:
            w.writerow([row[0], row[1], repr(row[2]), repr(row[3])])
    labels = data[:, -1]
    return {
        "n": int(data.shape[0]),
        "n_feasible": n_ok,
        "n_scored": len(ratios),
        "relative_see_accuracy": float(np.mean(ratios)) if ratios else float("nan"),
        "sum_ratio": float(np.sum([r[2] for r in rows_out]) / np.sum(labels))
        if float(np.sum(labels)) > 0 else float("nan"),
    }


def _project_power(p_hat: np.ndarray, hu: np.ndarray, a: np.ndarray,
                   p_max: float) -> np.ndarray | None:
    """Feasibility projection: budget rescale, then QoS-tight cascade fix."""
    total = float(np.sum(p_hat))
    if total > p_max and total > 0:
        p_hat = p_hat * (p_max / total)
    theta = theta_tails(p_hat)
    qos_ok = np.all(theta[:-1] >= a * theta[1:] + (a - 1.0) / hu - 1e-12)
    if qos_ok:
        return p_hat
    from ._fastpath import cascade_coeffs, power_from_pk, pk_bracket
    c, d = cascade_coeffs(hu, a)
    lo, hi = pk_bracket(hu, a, c, d, p_max)
    if hi < lo:
        return None
    pk = min(max(float(p_hat[-1]), lo), hi)
    return power_from_pk(c, d, pk)
