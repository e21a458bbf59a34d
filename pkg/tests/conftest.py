import numpy as np
import pytest


def fd_gradient(fn, params, step=None):
    """Central finite differences of a scalar function of a param dict.

    Default step follows 1e-5 * (|theta| + 1) per coordinate.
    """
    grads = {}
    for name, value in params.items():
        value = np.asarray(value, dtype=float)
        g = np.zeros_like(value)
        it = np.nditer(value, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            h = 1e-5 * (abs(value[idx]) + 1.0) if step is None else step
            up = {k: np.array(v, dtype=float) for k, v in params.items()}
            dn = {k: np.array(v, dtype=float) for k, v in params.items()}
            up[name][idx] += h
            dn[name][idx] -= h
            g[idx] = (fn(up) - fn(dn)) / (2 * h)
            it.iternext()
        grads[name] = g
    return grads


def max_rel_dev(g_ad, g_fd, floor=1e-6):
    """Largest relative deviation between gradient dicts."""
    worst = 0.0
    for name in g_fd:
        a = np.asarray(g_ad[name], dtype=float)
        b = np.asarray(g_fd[name], dtype=float)
        dev = np.abs(a - b) / (np.abs(b) + floor)
        worst = max(worst, float(np.max(dev)) if dev.size else 0.0)
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(42)
