import os
import subprocess
import sys

import numpy as np
import pytest

from edapnc import _backend, kernels
from edapnc.eda import stream_costs
from edapnc.linalg import gram_inverse, wf_capacity

from conftest import uplink_pair

needs_numba = pytest.mark.skipif(not _backend.HAVE_NUMBA, reason="numba not installed")


def _costs(seed, n=200):
    h_ar, h_br = uplink_pair(seed)
    ga, gb = gram_inverse(h_ar), gram_inverse(h_br)
    r = np.random.default_rng(seed)
    return kernels.pair_costs(ga, gb, r.uniform(0, np.pi, n), r.uniform(0, np.pi, n))


def test_pair_costs_match_stream_costs(rng):
    h_ar, h_br = uplink_pair(3)
    ga, gb = gram_inverse(h_ar), gram_inverse(h_br)
    for t1, t2 in rng.uniform(0, np.pi, (20, 2)):
        kinv = np.array([[np.cos(t1), np.sin(t1)], [np.cos(t2), np.sin(t2)]])
        a, b = stream_costs(h_ar, h_br, np.linalg.inv(kinv))
        a1, b1, a2, b2 = kernels.pair_costs(ga, gb, t1, t2)[0]
        assert np.allclose([a1, a2], a, rtol=1e-10)
        assert np.allclose([b1, b2], b, rtol=1e-10)


def test_pair_costs_degenerate_rotation():
    c = kernels.pair_costs(np.eye(2), np.eye(2), 0.3, 0.3)
    assert np.all(np.isinf(c))
    out = kernels.rotation_values(c, 10.0, 0.5, 8)
    assert out[0, 0] == -1.0


@pytest.mark.parametrize("golden", [0, 6])
@pytest.mark.parametrize("alpha", [0.0, 0.3, 0.5, 1.0])
def test_numpy_backend_matches_scalar_reference(alpha, golden):
    costs = _costs(1)
    ref = kernels.scalar_rotation_values(costs, 50.0, alpha, 8, golden)
    got = kernels.rotation_values(costs, 50.0, alpha, 8, golden, backend="numpy")
    assert np.allclose(got, ref, rtol=1e-12, atol=1e-12)


@needs_numba
@pytest.mark.parametrize("golden", [0, 6])
def test_numba_backend_matches_numpy(golden):
    costs = _costs(2)
    a = kernels.rotation_values(costs, 20.0, 0.4, 8, golden, backend="numba")
    b = kernels.rotation_values(costs, 20.0, 0.4, 8, golden, backend="numpy")
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


def test_rotation_value_is_a_feasible_rate():
    # the reported value is reproduced by the reported splits
    costs = _costs(4, 30)
    budget, alpha = 30.0, 0.7
    out = kernels.rotation_values(costs, budget, alpha, 8, 6)
    for (a1, b1, a2, b2), (v, u, s1, s2) in zip(costs, out):
        pa = np.array([s1 * u * budget / a1, s2 * (1 - u) * budget / a2])
        pb = np.array([(1 - s1) * u * budget / b1, (1 - s2) * (1 - u) * budget / b2])
        tot = pa + pb

        def rate(pm):
            x = np.where(tot > 0, pm / np.where(tot > 0, tot, 1), 0) + pm
            return np.sum(np.where(x > 1, 0.5 * np.log2(np.maximum(x, 1)), 0))

        assert alpha * rate(pa) + (1 - alpha) * rate(pb) == pytest.approx(v, abs=1e-10)


@pytest.mark.parametrize("backend", _backend.BACKENDS if _backend.HAVE_NUMBA else ("numpy",))
def test_pga_matches_waterfilling(backend, rng):
    h = rng.standard_normal((3, 3))
    q, f, it, conv, hist = kernels.pga_logdet(h[None], np.array([1.0]), 7.0, np.eye(3), backend=backend)
    ref = float(wf_capacity(np.linalg.svd(h, compute_uv=False) ** 2, 7.0))
    assert conv
    assert f == pytest.approx(ref, abs=1e-8)
    assert np.trace(q) == pytest.approx(7.0, rel=1e-9)
    assert np.all(np.diff(hist) >= 0)
    assert hist.size == it + 1


@needs_numba
def test_pga_backends_agree(rng):
    hs = rng.standard_normal((2, 4, 4))
    w = np.array([0.2, 0.8])
    a = kernels.pga_logdet(hs, w, 12.0, np.eye(4), backend="numba")
    b = kernels.pga_logdet(hs, w, 12.0, np.eye(4), backend="numpy")
    assert a[1] == pytest.approx(b[1], abs=1e-10)
    assert np.allclose(a[0], b[0], atol=1e-6)


def test_pga_iteration_cap_flags_nonconvergence(rng):
    hs = rng.standard_normal((2, 4, 4))
    q, f, it, conv, hist = kernels.pga_logdet(hs, np.array([0.5, 0.5]), 100.0, np.eye(4), max_iter=2,
                                              ftol=0.0, gtol=0.0)
    assert it == 2 and not conv
    assert np.isfinite(f)


def test_unknown_backend():
    with pytest.raises(ValueError):
        _backend.resolve("fortran")


def test_env_flag_selects_numpy():
    code = "from edapnc import _backend; print(_backend.default_backend())"
    env = dict(os.environ, EDAPNC_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
