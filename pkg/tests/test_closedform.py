import numpy as np
import pytest

from ambsee.closedform import (TwoBdGeometry, boundary_points,
                               dinkelbach_ratio_gains, optimal_power,
                               optimal_rho_single, optimal_rho_two_bd,
                               _cascade, _ssr_reduced)
from ambsee.core import (InfeasibleError, NormalizedGains, check_constraints,
                         effective_gains, p_min, rates_and_secrecy)
from ambsee.scenario import NetworkConfig, generate_scenario, order_users
from ambsee.solve import solve_scenario

from conftest import make_scenario


def _random_gains(rng, k, spread=(-1, 6)):
    hu = np.sort(10.0 ** rng.uniform(*spread, size=k))
    he = 10.0 ** rng.uniform(*spread)
    return NormalizedGains(h_user=hu, h_eav=he, m=0)


def _feasible_instance(rng, k, p_max=100.0):
    while True:
        g = _random_gains(rng, k)
        a = 2.0 ** (2.0 * rng.uniform(0.0, 1.5, size=k))
        if p_min(g.h_user, a) <= 0.5 * p_max:
            return g, a


# --------------------------------------------------------------------------
# single-device reflection rule
# --------------------------------------------------------------------------

def test_rho_rule_full_reflection_branch():
    # device->user composites increase along the SIC order -> reflect fully
    s = make_scenario(h=[1.0, 2.0], h_e=0.5, g=[1.0], g_u=[[0.3, 0.9]],
                      g_e=[0.1])
    assert optimal_rho_single(s) == 1.0


def test_rho_rule_off_branch():
    s = make_scenario(h=[1.0, 2.0], h_e=0.5, g=[1.0], g_u=[[0.9, 0.3]],
                      g_e=[0.1])
    assert optimal_rho_single(s) == 0.0


def test_rho_rule_uses_noise_normalization():
    # equal raw links but the stronger user has lower noise -> increasing
    s = make_scenario(h=[1.0, 2.0], h_e=0.5, g=[1.0], g_u=[[0.5, 0.5]],
                      g_e=[0.1], sigma_sq=[1.0, 0.25])
    assert optimal_rho_single(s) == 1.0


def test_rho_rule_requires_single_device():
    s = make_scenario(h=[1.0, 2.0], h_e=0.5, g=[1.0, 1.0],
                      g_u=[[0.3, 0.9], [0.1, 0.2]], g_e=[0.1, 0.1])
    with pytest.raises(ValueError):
        optimal_rho_single(s)


def test_returned_solution_dominates_fixed_power_grid():
    # the solver's (rho*, p*) must attain the maximum of the ratio objective
    # over a dense reflection grid when the power split is frozen at p*;
    # grid points outside the constraint set (broken decoding order or QoS)
    # are not candidates
    cfg = NetworkConfig(k=2, m=1, seed=77)
    a = cfg.qos_factors()
    checked = 0
    t = 0
    while checked < 100:
        s = generate_scenario(cfg, t)
        t += 1
        res = solve_scenario(s, cfg, method="closed")
        if not res.feasible:
            continue
        s_ord = s.reorder_users(res.perm)
        best = -np.inf
        for rv in np.linspace(0.0, 1.0, 1001):
            g1 = effective_gains(s_ord, [rv])
            if not check_constraints(g1, res.p, a[res.perm], cfg.p_max_w,
                                     rho=[rv]).ok:
                continue
            _, _, r_s = rates_and_secrecy(g1, res.p)
            best = max(best, float(np.sum(r_s)) / (res.p.sum() + cfg.p_circuit_w))
        assert res.zeta >= best - 1e-9 * max(1.0, abs(best))
        checked += 1


# --------------------------------------------------------------------------
# cascade power allocation
# --------------------------------------------------------------------------

def test_cascade_matches_expanded_formula(rng):
    # p_k = (A_k - 1)(1/H_k + p_K prod A + sum (A_i-1)/H_i prod A) for k<K
    for _ in range(50):
        k = int(rng.integers(2, 6))
        g, a = _feasible_instance(rng, k)
        pr = optimal_power(g, a, alpha=0.05, p_max=100.0)
        hu = g.h_user
        for kk in range(k - 1):
            prod_tail = np.prod(a[kk + 1:k - 1]) if kk + 1 <= k - 1 else 1.0
            acc = 1.0 / hu[kk] + pr.pk * prod_tail
            for i in range(kk + 1, k - 1):
                acc += (a[i] - 1.0) / hu[i] * np.prod(a[kk + 1:i])
            expected = (a[kk] - 1.0) * acc
            assert pr.p[kk] == pytest.approx(expected, rel=1e-10, abs=1e-14)


def test_infeasible_raises():
    g = NormalizedGains(h_user=np.array([0.01, 0.02]), h_eav=0.001, m=0)
    a = np.array([16.0, 16.0])
    assert p_min(g.h_user, a) > 10.0
    with pytest.raises(InfeasibleError):
        optimal_power(g, a, alpha=0.1, p_max=10.0)


def test_alpha_large_pins_every_qos_constraint(rng):
    for _ in range(20):
        g, a = _feasible_instance(rng, 3)
        pr = optimal_power(g, a, alpha=1e9, p_max=100.0)
        assert pr.clamp == "qos_floor"
        theta = np.append(np.cumsum(pr.p[::-1])[::-1], 0.0)
        for kk in range(3):
            target = a[kk] * theta[kk + 1] + (a[kk] - 1.0) / g.h_user[kk]
            assert theta[kk] == pytest.approx(target, rel=1e-9, abs=1e-12)


def test_alpha_zero_exhausts_budget(rng):
    # with no power penalty and positive secrecy, spend everything
    found = 0
    while found < 20:
        g, a = _feasible_instance(rng, 3)
        if g.h_eav >= g.h_user[-1]:
            continue  # needs at least one user with positive secrecy
        pr = optimal_power(g, a, alpha=0.0, p_max=100.0)
        assert pr.clamp == "budget_cap"
        assert float(np.sum(pr.p)) == pytest.approx(100.0, rel=1e-10)
        found += 1


def test_clamp_trichotomy(rng):
    # exactly one of: interior stationary point, QoS floor, budget cap
    counts = {"interior": 0, "qos_floor": 0, "budget_cap": 0}
    for _ in range(300):
        k = int(rng.integers(2, 5))
        g, a = _feasible_instance(rng, k)
        alpha = 10.0 ** rng.uniform(-4, 1)
        pr = optimal_power(g, a, alpha=alpha, p_max=100.0)
        counts[pr.clamp] += 1
        c, d = _cascade(g.h_user, a)

        def psi(pk):
            return (_ssr_reduced(g.h_user, g.h_eav, c, d, pk)
                    - alpha * (c[0] + d[0] * pk))

        if pr.clamp == "interior":
            assert pr.lo < pr.pk < pr.u
            assert pr.p_hat == pr.pk
        else:
            assert pr.p_hat is None
            ref = pr.lo if pr.clamp == "qos_floor" else pr.u
            assert pr.pk == ref
        # no feasible perturbation may improve the reduced objective
        for eps in (-1e-5, 1e-5):
            x = pr.pk + eps
            if pr.lo <= x <= pr.u:
                assert psi(x) <= psi(pr.pk) + 1e-9
    assert all(v > 0 for v in counts.values())


def test_power_against_dense_pk_sweep(rng):
    # 1e-4-resolution sweep of the strongest user's power along the cascade
    for _ in range(20):
        k = int(rng.integers(2, 4))
        g, a = _feasible_instance(rng, k)
        alpha = 10.0 ** rng.uniform(-3, 0)
        pr = optimal_power(g, a, alpha=alpha, p_max=100.0)
        c, d = _cascade(g.h_user, a)
        pks = pr.lo + (pr.u - pr.lo) * np.linspace(0.0, 1.0, 10001)
        best = -np.inf
        for pk in pks:
            val = (_ssr_reduced(g.h_user, g.h_eav, c, d, pk)
                   - alpha * (c[0] + d[0] * pk))
            best = max(best, val)
        mine = (_ssr_reduced(g.h_user, g.h_eav, c, d, pr.pk)
                - alpha * (c[0] + d[0] * pr.pk))
        assert mine >= best - 1e-6 * max(1.0, abs(best))


def test_cascade_optimal_vs_full_power_grid(rng):
    # beyond the reduced sweep: a 2-D grid over (p_1, p_2) never beats the
    # cascade solution for two users
    for _ in range(8):
        g, a = _feasible_instance(rng, 2)
        alpha = 0.05
        pr = optimal_power(g, a, alpha=alpha, p_max=100.0)
        psi_star = _psi_value(g, pr.p, alpha)
        best = -np.inf
        for p2 in np.linspace(1e-9, 100.0 / a[0], 160):
            p1_lo = (a[0] - 1.0) * (p2 + 1.0 / g.h_user[0])
            if p2 < (a[1] - 1.0) / g.h_user[1]:
                continue
            for p1 in np.linspace(p1_lo, min(100.0 - p2, p1_lo + 50.0), 160):
                best = max(best, _psi_value(g, np.array([p1, p2]), alpha))
        assert psi_star >= best - 2e-3 * max(1.0, abs(best))


def _psi_value(g, p, alpha):
    _, _, r_s = rates_and_secrecy(g, p)
    return float(np.sum(r_s)) - alpha * (float(np.sum(p)) + 1.0)


# --------------------------------------------------------------------------
# parametric ratio maximization
# --------------------------------------------------------------------------

def test_dinkelbach_residual_nonnegative_at_zero(rng):
    for _ in range(30):
        g, a = _feasible_instance(rng, 3)
        pr = optimal_power(g, a, alpha=0.0, p_max=100.0)
        _, _, r_s = rates_and_secrecy(g, pr.p)
        assert float(np.sum(r_s)) >= 0.0


def test_dinkelbach_fixed_point_identity(rng):
    for _ in range(50):
        g, a = _feasible_instance(rng, int(rng.integers(2, 5)))
        din = dinkelbach_ratio_gains(g, a, 100.0, 1.0)
        assert din.converged
        assert din.alpha_star == din.zeta
        # re-solve at the returned weight: the residual must be within tol
        pr = optimal_power(g, a, alpha=din.alpha_star, p_max=100.0)
        _, _, r_s = rates_and_secrecy(g, pr.p)
        f = float(np.sum(r_s)) - din.alpha_star * (float(np.sum(pr.p)) + 1.0)
        assert abs(f) <= 1e-8


def test_dinkelbach_residual_decreasing_in_alpha(rng):
    for _ in range(20):
        g, a = _feasible_instance(rng, 3)
        vals = []
        for alpha in (0.0, 0.1, 0.5, 2.0):
            pr = optimal_power(g, a, alpha=alpha, p_max=100.0)
            _, _, r_s = rates_and_secrecy(g, pr.p)
            vals.append(float(np.sum(r_s)) - alpha * (float(np.sum(pr.p)) + 1.0))
        assert all(v1 >= v2 - 1e-12 for v1, v2 in zip(vals, vals[1:]))


def test_dinkelbach_against_direct_ratio_grid(rng):
    # grid over the strongest user's power, ratio evaluated directly
    for _ in range(20):
        g, a = _feasible_instance(rng, 2)
        din = dinkelbach_ratio_gains(g, a, 100.0, 1.0)
        c, d = _cascade(g.h_user, a)
        lo = (a[-1] - 1.0) / g.h_user[-1]
        u = (100.0 - c[0]) / d[0]
        best = 0.0
        for pk in lo + (u - lo) * np.linspace(0.0, 1.0, 20001):
            ssr = _ssr_reduced(g.h_user, g.h_eav, c, d, pk)
            best = max(best, ssr / (c[0] + d[0] * pk + 1.0))
        assert din.zeta >= best - 1e-5 * max(1.0, best)


# --------------------------------------------------------------------------
# two-device case analysis
# --------------------------------------------------------------------------

def _geom(**kw):
    base = dict(g1=1.0, g2=2.0, ge=1.0, g11=0.5, g12=4.0, g1e=1.0,
                g21=0.5, g22=1.0, g2e=1.0)
    base.update(kw)
    return TwoBdGeometry(**base)


def test_boundary_points_zero_gap():
    bp = boundary_points(_geom(g2=1.0))  # G2 - G1 = 0
    assert bp.rho1_inf == 0.0
    assert bp.rho2_inf == 0.0


def test_boundary_points_values():
    # rho1_inf = ((G2-G1)/(G11-G12))^2 = (2/1)^2 = 4
    bp = boundary_points(_geom(g2=3.0, g11=5.0, g12=4.0))
    assert bp.rho1_inf == pytest.approx(4.0, rel=1e-15)
    # rho1_sup = ((G2-G1-(G21-G22))/(G11-G12))^2 = ((2+0.5)/1)^2
    assert bp.rho1_sup == pytest.approx(6.25, rel=1e-12)


def test_boundary_points_satisfy_frontier_identity(rng):
    for _ in range(50):
        g = _geom(g2=float(1.0 + rng.random() * 3), g11=float(2 + rng.random()),
                  g12=float(rng.random()), g21=float(2 + rng.random()),
                  g22=float(rng.random()))
        bp = boundary_points(g)
        du = g.g2 - g.g1
        d1, d2 = g.g11 - g.g12, g.g21 - g.g22
        assert np.sqrt(bp.rho1_inf) * d1 == pytest.approx(du, rel=1e-12)
        assert np.sqrt(bp.rho2_inf) * d2 == pytest.approx(du, rel=1e-12)
        # sup points satisfy the frontier with the other coefficient at 1
        assert np.sqrt(bp.rho1_sup) * abs(d1) == pytest.approx(abs(du - d2), rel=1e-12, abs=1e-12)


def test_boundary_points_degenerate_denominator():
    bp = boundary_points(_geom(g11=1.0, g12=1.0))
    assert np.isnan(bp.rho1_inf) and np.isnan(bp.rho1_sup)
    assert np.isfinite(bp.rho2_inf)


def test_two_bd_case_h1_full_reflection():
    # ratios: r1 = 4 > r0 = 2 > r2 = 1, both differences <= 0
    sol = optimal_rho_two_bd(_geom(), eav_rank=2)
    assert sol.applicable and sol.case == "H1"
    np.testing.assert_array_equal(sol.rho, [1.0, 0.0])


def test_two_bd_case_h2_frontier_intercept():
    # G2-G1 = 1, G11-G12 = 2 -> rho1_inf = 0.25 < 1
    g = _geom(g11=6.0, g12=4.0)
    sol = optimal_rho_two_bd(g, eav_rank=2)
    assert sol.case == "H2"
    np.testing.assert_allclose(sol.rho, [0.25, 0.0], rtol=1e-14)


def test_two_bd_case_h2_clamped_to_one():
    # G2-G1 = 2 with G11-G12 = 1 -> intercept 4, clamped to 1
    g = _geom(g2=3.0, g11=5.0, g12=4.0, g22=1.5)
    sol = optimal_rho_two_bd(g, eav_rank=2)
    assert sol.case in ("H2", "H4")
    np.testing.assert_array_equal(sol.rho, [1.0, 0.0])


def test_two_bd_case_h4():
    g = _geom(g11=6.0, g12=4.0, g21=1.4, g22=1.0)
    sol = optimal_rho_two_bd(g, eav_rank=2)
    assert sol.case == "H4"
    np.testing.assert_allclose(sol.rho, [0.25, 0.0], rtol=1e-14)


def test_two_bd_symmetric_case():
    # swap the device roles: r2 = 4 > r0 = 2 > r1 = 1
    g = _geom(g12=1.0, g1e=1.0, g22=4.0, g2e=1.0, g11=0.5, g21=0.5)
    sol = optimal_rho_two_bd(g, eav_rank=2)
    assert sol.case == "H1-sym"
    np.testing.assert_array_equal(sol.rho, [0.0, 1.0])


def test_two_bd_degenerate_ratios_flagged():
    g = _geom(g12=1.0, g1e=1.0, g22=1.0, g2e=1.0)  # r1 == r2
    sol = optimal_rho_two_bd(g, eav_rank=2)
    assert not sol.applicable and sol.case == "degenerate"


def test_two_bd_outside_monotone_flagged():
    # both composite ratios above the direct ratio: not covered by the cases
    g = _geom(g12=4.0, g1e=1.0, g22=3.0, g2e=1.0)
    sol = optimal_rho_two_bd(g, eav_rank=2)
    assert not sol.applicable and sol.case == "outside-monotone"


def test_two_bd_rank_gating():
    sol = optimal_rho_two_bd(_geom(), eav_rank=1)
    assert not sol.applicable and sol.case == "eav-rank-1"


def test_two_bd_solver_certified_against_dense_grid(rng):
    from ambsee.search import _Fitness, _combinations
    cfg = NetworkConfig(k=2, m=2, seed=2024)
    checked = 0
    t = 0
    while checked < 30:
        s = generate_scenario(cfg, t)
        t += 1
        res = solve_scenario(s, cfg, method="closed")
        if not res.feasible:
            continue
        perm, _ = order_users(s)
        s_ord = s.reorder_users(perm)
        fit = _Fitness(s_ord, cfg.qos_factors()[perm], cfg.p_max_w,
                       cfg.p_circuit_w, "ratio", 0.1)
        f, _, _, _ = fit(_combinations(np.linspace(0, 1, 101), 2))
        assert res.zeta >= float(np.max(f)) - 1e-6
        checked += 1


def test_solver_result_passes_constraint_check(rng):
    for m in (0, 1, 2):
        cfg = NetworkConfig(k=3 if m < 2 else 2, m=m, seed=31 + m)
        done = 0
        t = 0
        while done < 15:
            s = generate_scenario(cfg, t)
            t += 1
            res = solve_scenario(s, cfg, method="closed")
            if not res.feasible:
                continue
            s_ord = s.reorder_users(res.perm)
            gains = (effective_gains(s_ord, res.rho) if m else
                     NormalizedGains(*s_ord.direct_gains(), m=0))
            rep = check_constraints(gains, res.p, cfg.qos_factors()[res.perm],
                                    cfg.p_max_w, rho=res.rho)
            assert rep.ok, (m, t, rep)
            done += 1
