import numpy as np
import pytest

from ambsee.scenario import NetworkConfig, generate_scenario
from ambsee.search import (GridConfig, PsoConfig, _fine_axis, grid_search,
                           pso)
from ambsee.solve import solve_scenario


def test_grid_config_validation():
    GridConfig().validate()
    with pytest.raises(ValueError):
        GridConfig(coarse_step=0.01, fine_step=0.1).validate()
    with pytest.raises(ValueError):
        GridConfig(coarse_step=1.5).validate()


def test_pso_config_validation():
    PsoConfig().validate()
    with pytest.raises(ValueError):
        PsoConfig(n_particles=0).validate()
    with pytest.raises(ValueError):
        PsoConfig(w_min=0.9, w_max=0.4).validate()
    with pytest.raises(ValueError):
        PsoConfig(v_max=0.0).validate()


def test_fine_axis_counts():
    # interior window: 21 points at the default steps; boundary: 11
    assert len(_fine_axis(0.5, 0.01, 0.1)) == 21
    assert len(_fine_axis(0.0, 0.01, 0.1)) == 11
    assert len(_fine_axis(1.0, 0.01, 0.1)) == 11
    axis = _fine_axis(0.5, 0.01, 0.1)
    assert axis[0] == pytest.approx(0.4) and axis[-1] == pytest.approx(0.6)


def test_grid_coarse_count_two_devices():
    cfg = NetworkConfig(k=2, m=2, seed=1)
    s = generate_scenario(cfg, 0)
    res = grid_search(s, cfg)
    assert res.detail["coarse_evals"] == 121  # 11**2
    assert res.eval_count == res.detail["coarse_evals"] + res.detail["fine_evals"]


def test_grid_counts_single_device():
    cfg = NetworkConfig(k=2, m=1, seed=1)
    for t in range(8):
        s = generate_scenario(cfg, t)
        res = grid_search(s, cfg)
        assert res.detail["coarse_evals"] == 11
        best_coarse_interior = 0.0 < res.rho[0] < 1.0
        if best_coarse_interior:
            assert res.detail["fine_evals"] in (11, 21)
        else:
            assert res.detail["fine_evals"] == 11


def test_grid_interior_fine_window_has_21_points():
    # when the coarse best lands strictly inside, the fine window is full
    cfg = NetworkConfig(k=2, m=1, seed=1)
    found = False
    for t in range(300):
        s = generate_scenario(cfg, t)
        res = grid_search(s, cfg)
        fine_lo = res.detail["coarse_evals"]
        if 0.1 <= res.rho[0] <= 0.9 and res.detail["fine_evals"] == 21:
            found = True
            break
    assert found


def test_grid_matches_closed_form_when_rule_holds():
    cfg = NetworkConfig(k=2, m=1, seed=5)
    checked = 0
    t = 0
    while checked < 10:
        s = generate_scenario(cfg, t)
        t += 1
        res_c = solve_scenario(s, cfg, method="closed")
        if not (res_c.feasible and res_c.case_tag == "rule-binary"
                and res_c.rho[0] == 1.0 and res_c.zeta > 1e-9):
            continue
        res_g = grid_search(s, cfg)
        assert abs(res_g.rho[0] - 1.0) <= 0.01 + 1e-12
        assert res_g.zeta == pytest.approx(res_c.zeta, rel=1e-6, abs=1e-9)
        checked += 1


def test_grid_deterministic():
    cfg = NetworkConfig(k=2, m=2, seed=9)
    s = generate_scenario(cfg, 0)
    a = grid_search(s, cfg)
    b = grid_search(s, cfg)
    np.testing.assert_array_equal(a.rho, b.rho)
    assert a.zeta == b.zeta


def test_grid_trace(tmp_path):
    cfg = NetworkConfig(k=2, m=1, seed=9)
    s = generate_scenario(cfg, 0)
    recs = []
    grid_search(s, cfg, trace=recs.append)
    assert [r["stage"] for r in recs] == ["coarse", "fine"]
    assert recs[0]["evals"] == 11


def test_pso_inertia_schedule_endpoints():
    c = PsoConfig()
    w = lambda t: c.w_max - (c.w_max - c.w_min) * (t / c.max_iter) ** 2
    assert w(0) == c.w_max
    assert w(c.max_iter) == pytest.approx(c.w_min, rel=1e-15)


def test_pso_eval_count_and_determinism():
    cfg = NetworkConfig(k=2, m=3, seed=4)
    s = generate_scenario(cfg, 0)
    pc = PsoConfig(n_particles=12, max_iter=25, seed=7)
    a = pso(s, cfg, pc)
    b = pso(s, cfg, pc)
    assert a.eval_count == 12 * 26
    np.testing.assert_array_equal(a.rho, b.rho)
    assert a.zeta == b.zeta
    np.testing.assert_array_equal(a.p, b.p)


def test_pso_bounds_hold_after_every_update():
    cfg = NetworkConfig(k=2, m=4, seed=13)
    s = generate_scenario(cfg, 0)
    pc = PsoConfig(n_particles=10, max_iter=40, seed=3)

    def inspect(t, x, v):
        assert np.all(x >= 0.0) and np.all(x <= 1.0)
        assert np.all(np.abs(v) <= pc.v_max + 1e-15)

    pso(s, cfg, pc, inspect=inspect)


def test_pso_global_best_monotone():
    cfg = NetworkConfig(k=2, m=3, seed=2)
    s = generate_scenario(cfg, 0)
    recs = []
    pso(s, cfg, PsoConfig(seed=11, max_iter=50), trace=recs.append)
    fits = [r["best_fitness"] for r in recs]
    assert len(fits) == 51
    assert all(b >= a for a, b in zip(fits, fits[1:]))


def test_pso_frozen_dynamics_keep_initial_fitness():
    # no cognitive/social pull and a negligible velocity cap: the swarm
    # cannot move, so the best fitness equals the initial best
    cfg = NetworkConfig(k=2, m=2, seed=6)
    s = generate_scenario(cfg, 0)
    pc = PsoConfig(n_particles=5, max_iter=30, c1=0.0, c2=0.0, v_max=1e-12,
                   seed=21)
    recs = []
    res = pso(s, cfg, pc, trace=recs.append)
    assert res.zeta == pytest.approx(recs[0]["best_zeta"], rel=1e-12)


def test_pso_close_to_grid_two_devices():
    cfg = NetworkConfig(k=2, m=2, seed=17)
    wins = 0
    n = 25
    for t in range(n):
        s = generate_scenario(cfg, t)
        rg = grid_search(s, cfg)
        rp = pso(s, cfg, PsoConfig(seed=1000 + t))
        if not rg.feasible:
            wins += 1
            continue
        if rp.zeta >= rg.zeta - 1e-4:
            wins += 1
    assert wins >= int(0.9 * n)


def test_search_rejects_zero_devices():
    cfg = NetworkConfig(k=2, m=0, seed=1)
    s = generate_scenario(cfg, 0)
    with pytest.raises(ValueError):
        grid_search(s, cfg)
    with pytest.raises(ValueError):
        pso(s, cfg)
