"""Small dense linear-algebra helpers shared across modules."""

from dataclasses import dataclass

import numpy as np

LN2 = np.log(2.0)


class SingularityError(np.linalg.LinAlgError):
    """Raised when a matrix that must be invertible is (numerically) not."""


def sym(a):
    return 0.5 * (a + a.T)


def check_invertible(a, name="matrix", tol=1e-12):
    s = np.linalg.svd(a, compute_uv=False)
    if s.size == 0 or s[-1] <= tol * max(s[0], 1e-300):
        raise SingularityError(f"{name} is singular (cond > {1 / tol:.0e})")


def gram_inverse(h):
    """``(H H^T)^{-1}`` for a full-row-rank real ``h``."""
    check_invertible(h @ h.T, "H H^T")
    return sym(np.linalg.inv(h @ h.T))


def eigh_sorted(a):
    """Eigen-decomposition with ascending eigenvalues and a fixed sign rule.

    Each eigenvector is flipped so its largest-magnitude entry is positive;
    ties in magnitude resolve to the lowest index. Ties between eigenvalues
    keep LAPACK's order.
    """
    lam, u = np.linalg.eigh(sym(a))
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return lam, u * signs


@dataclass
class WaterFill:
    powers: np.ndarray
    level: float
    feasible: bool


def waterfill(weights, costs, offsets, budget):
    """Exact weighted water-filling.

    Solves ``max sum_j w_j log(o_j + p_j)`` subject to ``sum_j c_j p_j <= budget``
    and ``p >= 0``. The optimum is ``p_j = (w_j * mu / c_j - o_j)^+`` with the
    level ``mu`` chosen so the budget is met with equality; it is computed in
    closed form over the sorted activation thresholds ``o_j c_j / w_j``.
    Modes with zero weight or infinite offset never receive power. When no
    mode can be active the zero allocation is returned with ``feasible=False``.
    """
    w = np.asarray(weights, dtype=float).ravel()
    c = np.asarray(costs, dtype=float).ravel()
    o = np.asarray(offsets, dtype=float).ravel()
    p = np.zeros_like(w)
    usable = (w > 0) & np.isfinite(o)
    if budget <= 0 or not usable.any():
        return WaterFill(p, np.nan if not usable.any() else 0.0, bool(usable.any()))
    if np.any(c[usable] <= 0):
        raise ValueError("costs must be positive")
    ids = np.flatnonzero(usable)
    thr = o[ids] * c[ids] / w[ids]
    order = ids[np.argsort(thr, kind="stable")]
    thr = np.sort(thr, kind="stable")
    sw = np.cumsum(w[order])
    sco = np.cumsum(c[order] * o[order])
    mu = (budget + sco) / sw
    # first k with mu_k <= next threshold
    nxt = np.append(thr[1:], np.inf)
    k = int(np.argmax(mu <= nxt))
    act = order[: k + 1]
    level = float(mu[k])
    p[act] = np.maximum(w[act] * level / c[act] - o[act], 0.0)
    return WaterFill(p, level, True)


def wf_capacity(gains, power):
    """Single-user water-filling rate ``0.5 * sum log2(1 + g_j p_j)``.

    ``gains`` are squared singular values; ``power`` may be an array.
    """
    g = np.sort(np.asarray(gains, dtype=float))[::-1]
    g = g[g > 0]
    power = np.asarray(power, dtype=float)
    if g.size == 0:
        return np.zeros_like(power)
    inv = 1.0 / g
    k = np.arange(1, g.size + 1)
    # power needed before mode k+1 switches on
    brk = k * np.append(inv[1:], np.inf) - np.cumsum(inv)
    kk = np.searchsorted(brk, power, side="left")  # active count - 1
    kk = np.minimum(kk, g.size - 1)
    level = (power + np.cumsum(inv)[kk]) / (kk + 1)
    clog = np.cumsum(np.log2(g))
    out = 0.5 * ((kk + 1) * np.log2(np.maximum(level, 1e-300)) + clog[kk])
    return np.where(power > 0, np.maximum(out, 0.0), 0.0)


def wf_power_for_rate(gains, rate):
    """Inverse of :func:`wf_capacity`: least power achieving ``rate``."""
    if rate <= 0:
        return 0.0
    g = np.sort(np.asarray(gains, dtype=float))[::-1]
    g = g[g > 0]
    if g.size == 0:
        return np.inf
    inv = 1.0 / g
    lg = np.log2(g)
    for k in range(1, g.size + 1):
        log_mu = (2.0 * rate - lg[:k].sum()) / k
        mu = 2.0**log_mu
        upper = inv[k] if k < g.size else np.inf
        if mu <= upper:
            return float(k * mu - inv[:k].sum())
    return np.inf  # pragma: no cover


def project_capped_simplex(lam, cap):
    """Euclidean projection of ``lam`` onto ``{x >= 0, sum x <= cap}``."""
    x = np.maximum(lam, 0.0)
    if x.sum() <= cap:
        return x
    s = np.sort(lam)[::-1]
    css = np.cumsum(s)
    k = np.arange(1, s.size + 1)
    ok = s - (css - cap) / k > 0
    r = k[ok][-1]
    tau = (css[r - 1] - cap) / r
    return np.maximum(lam - tau, 0.0)


def project_psd_trace(q, cap):
    """Projection onto PSD matrices with trace at most ``cap``."""
    lam, u = np.linalg.eigh(sym(q))
    lam = project_capped_simplex(lam, cap)
    return sym((u * lam) @ u.T)


def trace_bounds(m, n):
    """Bounds on ``tr(M N)`` for symmetric ``M``, ``N`` from their spectra alone.

    Pairing the eigenvalues in opposite order gives the lower bound, pairing
    them in the same order the upper bound.
    """
    lm = np.linalg.eigvalsh(sym(m))
    ln = np.linalg.eigvalsh(sym(n))
    return float(np.dot(lm, ln[::-1])), float(np.dot(lm, ln))
