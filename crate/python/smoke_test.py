"""Smoke test for the kinetic_selfsim_py extension module.

Build and install with `pip install --no-build-isolation -e crates/python`, then run this file.
"""

import math
import sys

import numpy as np

import kinetic_selfsim_py as ks


def main():
    n, extent = 16, 6.0
    f = np.array(ks.maxwellian(n, extent))
    h = 2.0 * extent / n
    assert f.shape == (n**3,)
    assert abs(f.sum() * h**3 - 1.0) < 1e-6

    q = np.array(ks.q_landau(f.tolist(), n, extent, -2.5))
    assert abs(q.sum()) <= 1e-12 * np.abs(q).sum()

    d = ks.entropy_dissipation(f.tolist(), n, extent, -2.5)
    assert math.isfinite(d)

    ok, why = ks.check_theta(0.2, -2.5, "landau-inhom")
    assert ok and not why
    ok, why = ks.check_theta(0.6, -2.5, "landau-inhom")
    assert not ok and why

    vp, vsp, _ = ks.collide([1.0, 0.0, 0.0], [-1.0, 0.5, 0.0], [0.0, 1.0, 0.0])
    assert np.allclose(np.add(vp, vsp), [0.0, 0.5, 0.0])

    v = ks.refute_landau(0.2, -2.5, "zero", 16, 6.0)
    assert v["verdict"] == "consistent"

    drift, mass = ks.evolve_maxwellian(16, 6.0, -2.5, 5)
    assert mass <= 1e-12 and drift < 1e-1

    t = np.linspace(0.0, 0.95, 40)
    theta, gamma = 0.3, -2.5
    rate = lambda q: 1.0 + theta * (3.0 + gamma) - (0.0 if q == math.inf else 3.0 * theta / q)
    s = 1.0 - t
    fit, big_t, r2 = ks.fit_blowup(t.tolist(), (s ** -rate(math.inf)).tolist(), (s ** -rate(2.0)).tolist(), (s ** -rate(3.0)).tolist(), gamma)
    assert abs(fit - theta) <= 0.02 and abs(big_t - 1.0) <= 0.1 and r2 > 0.99

    try:
        ks.maxwellian(7, 1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("odd grid size accepted")

    print("python smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
