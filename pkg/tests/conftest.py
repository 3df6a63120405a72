import numpy as np
import pytest

from ambsee.scenario import Scenario


def make_scenario(h, h_e, g=(), g_u=None, g_e=(), sigma_sq=1.0,
                  sigma_sq_e=None) -> Scenario:
    """Scenario with hand-picked channel coefficients and dummy geometry."""
    h = np.atleast_1d(np.asarray(h, dtype=float))
    g = np.atleast_1d(np.asarray(g, dtype=float))
    k, m = h.shape[0], g.shape[0]
    g_u = np.zeros((m, k)) if g_u is None else np.asarray(g_u, dtype=float).reshape(m, k)
    g_e = np.atleast_1d(np.asarray(g_e, dtype=float)) if m else np.zeros(0)
    sig = np.broadcast_to(np.asarray(sigma_sq, dtype=float), (k,)).copy()
    if sigma_sq_e is None:
        sigma_sq_e = float(np.asarray(sigma_sq, dtype=float).flat[0])
    return Scenario(
        user_pos=np.zeros((k, 2)),
        bd_pos=np.zeros((m, 2)),
        eav_pos=np.zeros(2),
        h=h,
        h_e=float(h_e),
        g=g,
        g_u=g_u,
        g_e=g_e,
        sigma_sq=sig,
        sigma_sq_e=float(sigma_sq_e),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240911)
