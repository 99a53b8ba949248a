import numpy as np
import pytest

from edapnc.channel import generate_channel, trial_seed


def channel(seed, n_t=2, n_r=2, field="real", reciprocal=False):
    return generate_channel(n_t, n_r, field, reciprocal, trial_seed(9090, seed))


def uplink_pair(seed, n_t=2, n_r=2):
    cs = channel(seed, n_t, n_r)
    return cs.h_ar, cs.h_br


def random_psd(rng, n, trace=None):
    a = rng.standard_normal((n, n))
    q = a @ a.T
    if trace is not None:
        q *= trace / np.trace(q)
    return q


def orthonormal_rows(rng, n_r, n_t):
    q, _ = np.linalg.qr(rng.standard_normal((n_t, n_r)))
    return q.T


def rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance report: one PASS/FAIL line per criterion, shown even when output is captured

ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    def _report(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
