"""Weighted sum-rate (WSR) optimization of the aligned precoders.

Three searches over ``(K, Psi_A, Psi_B)``, each maximizing
``alpha * R_A + (1 - alpha) * R_B`` of the uplink computation rates under the
shared power budget ``sum_i a_i Psi_A,i^2 + b_i Psi_B,i^2 <= P_T``:

* :func:`approx_solution_1` ties ``Psi_B = gamma Psi_A``. For fixed ``gamma``
  the power becomes ``tr(K^T G K Sigma^2)`` with ``G = G_A + gamma^2 G_B``;
  the unitary eigenbasis of ``G`` is the best rotation and ``Sigma`` is a
  water-fill over its eigenvalues. ``gamma`` is swept over a fixed grid.
* :func:`approx_solution_2` keeps that rotation and frees the two amplitude
  vectors, alternating a weighted water-fill with a fixed-point update of the
  per-stream power share ``theta``.
* :func:`exhaustive_search_2d` scans all unit-row rotations for two streams,
  coarse to fine.

``G_A = (H_AR H_AR^T)^{-1}`` and ``G_B = (H_BR H_BR^T)^{-1}``.
"""

from dataclasses import dataclass, field, replace
from itertools import product

import numpy as np

from . import kernels
from .channel import DimensionError, RatePair
from .eda import PrecoderConfig, stream_costs, transmit_power, uplink_rates
from .linalg import eigh_sorted, gram_inverse, waterfill

GAMMA_STEP = 0.02
AS2_TOL = 1e-6
AS2_ROUNDS = 100
POWER_RTOL = 1e-8


@dataclass
class WsrSolution:
    """A precoder configuration together with its uplink rates."""

    cfg: PrecoderConfig
    rates: RatePair
    alpha: float
    method: str
    power: float
    gamma: float = np.nan
    meta: dict = field(default_factory=dict)

    @property
    def wsr(self):
        return self.rates.weighted(self.alpha)

    @property
    def total(self):
        return self.rates.total


@dataclass
class GammaDecomposition:
    """Eigen-decomposition of ``G(gamma)`` with ascending eigenvalues."""

    gamma: float
    eigvals: np.ndarray
    k: np.ndarray


@dataclass
class SigmaSolution:
    sigma: np.ndarray
    level: float
    feasible: bool


def _check_alpha(alpha):
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")


def gamma_grid(step=GAMMA_STEP):
    """``{step, 2 step, ..., 1} U {1/(1 - step), 1/(1 - 2 step), ...}``, ascending."""
    if not 0.0 < step < 1.0:
        raise ValueError("gamma step must lie in (0, 1)")
    n = int(np.floor(1.0 / step + 1e-9))
    low = step * np.arange(1, n + 1)
    ks = np.arange(1, n + 1)
    high = 1.0 / (1.0 - step * ks[1.0 - step * ks > 1e-9])
    return np.unique(np.concatenate([low, [1.0], high]))


def build_g(ga, gb, gamma):
    return ga + gamma**2 * gb


def k_opt_unitary(ga, gb, gamma):
    """Orthonormal eigenbasis of ``G(gamma)`` (ascending, sign-normalized)."""
    lam, u = eigh_sorted(build_g(ga, gb, gamma))
    return GammaDecomposition(float(gamma), lam, u)


def waterfill_sigma(eigvals, gamma, alpha, p_t, s_a=None, s_b=None):
    """Amplitudes ``Sigma`` for ``Psi_A = Sigma``, ``Psi_B = gamma Sigma``.

    Streams in both active sets get weight 1, streams only in ``s_a`` weight
    ``alpha``, only in ``s_b`` weight ``1 - alpha``. The power prices are
    ``eigvals`` and every stream has offset ``1 / (1 + gamma^2)``:
    ``Sigma_i^2 = (w_i mu / lambda_i - 1/(1 + gamma^2))^+``. Both sets default
    to all streams.
    """
    lam = np.asarray(eigvals, dtype=float)
    n = lam.size
    in_a = np.ones(n, bool) if s_a is None else np.isin(np.arange(n), list(s_a))
    in_b = np.ones(n, bool) if s_b is None else np.isin(np.arange(n), list(s_b))
    w = np.where(in_a & in_b, 1.0, np.where(in_a, alpha, np.where(in_b, 1.0 - alpha, 0.0)))
    wf = waterfill(w, lam, np.full(n, 1.0 / (1.0 + gamma**2)), p_t)
    return SigmaSolution(np.sqrt(wf.powers), wf.level, wf.feasible)


def _subsets(n):
    for mask in range(1 << n):
        yield tuple(i for i in range(n) if mask >> i & 1)


def _rotation_for(ga, gb, gamma, rotation):
    if rotation == "unitary":
        dec = k_opt_unitary(ga, gb, gamma)
        return dec.k, dec.eigvals
    if rotation == "identity":
        n = ga.shape[0]
        return np.eye(n), np.diag(ga) + gamma**2 * np.diag(gb)
    raise ValueError(f"unknown rotation rule {rotation!r}")


def _shared_sweep(ga, gb, p_t, alpha, gammas, rotation):
    """WSR of every ``gamma`` with one shared active set, vectorized over ``gamma``.

    Same water-fill as :func:`waterfill_sigma` with all weights 1: thresholds
    are ``lambda_i / (1 + gamma^2)`` and the level follows from the sorted
    prefix sums.
    """
    g2 = gammas**2
    if rotation == "unitary":
        lam = np.linalg.eigvalsh(ga[None] + g2[:, None, None] * gb[None])
    else:
        lam = np.diag(ga)[None] + g2[:, None] * np.diag(gb)[None]
    lam = np.sort(lam, axis=1)
    c = 1.0 / (1.0 + g2)
    n = lam.shape[1]
    k = np.arange(1, n + 1)
    mu = (p_t + c[:, None] * np.cumsum(lam, axis=1)) / k
    nxt = np.concatenate([c[:, None] * lam[:, 1:], np.full((lam.shape[0], 1), np.inf)], axis=1)
    kk = np.argmax(mu <= nxt, axis=1)
    level = mu[np.arange(mu.shape[0]), kk]
    s2 = np.maximum(level[:, None] / lam - c[:, None], 0.0)
    s2[k[None, :] > kk[:, None] + 1] = 0.0
    ra = 0.5 * np.log2(np.maximum(c[:, None] + s2, 1.0))
    rb = 0.5 * np.log2(np.maximum(g2[:, None] * (c[:, None] + s2), 1.0))
    return alpha * ra.sum(axis=1) + (1 - alpha) * rb.sum(axis=1)


def _as1(ga, gb, p_t, alpha, step, rotation, set_search, batched=True):
    if set_search == "shared" and batched:
        gammas = gamma_grid(step)
        gamma = gammas[int(np.argmax(_shared_sweep(ga, gb, p_t, alpha, gammas, rotation)))]
        k, lam = _rotation_for(ga, gb, gamma, rotation)
        sig = waterfill_sigma(lam, gamma, alpha, p_t).sigma
        rates = uplink_rates(sig, gamma * sig)
        return rates.weighted(alpha), gamma, k, sig, rates
    best = None
    n = ga.shape[0]
    if set_search == "full" and n > 4:
        raise DimensionError("full active-set enumeration is limited to 4 streams")
    if set_search not in ("shared", "full"):
        raise ValueError(f"unknown set_search {set_search!r}")
    for gamma in gamma_grid(step):
        k, lam = _rotation_for(ga, gb, gamma, rotation)
        if set_search == "shared":
            cands = [(None, None)]
        else:
            subs = list(_subsets(n))
            cands = [(sa, sb) for sa, sb in product(subs, subs) if sa or sb]
        for sa, sb in cands:
            sig = waterfill_sigma(lam, gamma, alpha, p_t, sa, sb).sigma
            rates = uplink_rates(sig, gamma * sig)
            v = rates.weighted(alpha)
            # ascending gamma, strict improvement: ties go to the smallest gamma
            if best is None or v > best[0]:
                best = (v, gamma, k, sig, rates)
    return best


def _finish(cfg, ga, gb, h_ar, h_br, p_t, alpha, method, gamma, meta=None):
    rates = uplink_rates(cfg.psi_a, cfg.psi_b)
    power = transmit_power(h_ar, h_br, cfg)
    if power > p_t * (1 + POWER_RTOL):
        raise AssertionError(f"{method}: power {power} exceeds budget {p_t}")
    return WsrSolution(cfg, rates, alpha, method, power, gamma, meta or {})


def approx_solution_1(h_ar, h_br, p_t, alpha=0.5, gamma_step=GAMMA_STEP, set_search="shared", rotation="unitary",
                      batched=True):
    """Best ``gamma`` on the grid with the eigenbasis rotation and water-filled ``Sigma``.

    ``set_search="full"`` also enumerates the active-stream sets of both users
    instead of sharing one set. ``batched=False`` runs the shared-set sweep one
    ``gamma`` at a time (reference path).
    """
    _check_alpha(alpha)
    ga, gb = gram_inverse(h_ar), gram_inverse(h_br)
    v, gamma, k, sig, _ = _as1(ga, gb, p_t, alpha, gamma_step, rotation, set_search, batched)
    cfg = PrecoderConfig(k, sig, gamma * sig)
    tag = "as1" if rotation == "unitary" else "naive_as1"
    return _finish(cfg, ga, gb, h_ar, h_br, p_t, alpha, tag, gamma)


def _as2(ga, gb, h_ar, h_br, p_t, alpha, start, tol, max_rounds):
    k = start.cfg.k
    a, b = stream_costs(h_ar, h_br, k)
    n = a.size
    pa = start.cfg.psi_a**2
    pb = start.cfg.psi_b**2
    tot = pa + pb
    theta = np.where(tot > 0, pa / np.where(tot > 0, tot, 1.0), 1.0 / (1.0 + start.gamma**2))
    w = np.concatenate([np.full(n, alpha), np.full(n, 1.0 - alpha)])
    costs = np.concatenate([a, b])
    best_v, best_cfg = start.wsr, start.cfg
    prev = -np.inf
    history = []
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        offs = np.concatenate([theta, 1.0 - theta])
        p = waterfill(w, costs, offs, p_t).powers
        pa, pb = p[:n], p[n:]
        cfg = PrecoderConfig(k, np.sqrt(pa), np.sqrt(pb))
        v = uplink_rates(cfg.psi_a, cfg.psi_b).weighted(alpha)
        history.append(v)
        if v > best_v:
            best_v, best_cfg = v, cfg
        if v - prev < tol:
            break
        prev = v
        tot = pa + pb
        theta = np.where(tot > 0, pa / np.where(tot > 0, tot, 1.0), theta)
    return best_cfg, {"rounds": rounds, "history": history}


def approx_solution_2(h_ar, h_br, p_t, alpha=0.5, gamma_step=GAMMA_STEP, tol=AS2_TOL, max_rounds=AS2_ROUNDS,
                      start=None, rotation="unitary"):
    """Refine the amplitudes of :func:`approx_solution_1` with its rotation held fixed.

    Each round water-fills ``2 n`` modes (user A: weight ``alpha``, price
    ``a_i``, offset ``theta_i``; user B: ``1 - alpha``, ``b_i``,
    ``1 - theta_i``) and then sets ``theta_i = p_A,i / (p_A,i + p_B,i)``.
    Stops when the WSR gains less than ``tol`` or after ``max_rounds``. Never
    returns less than the starting point.
    """
    _check_alpha(alpha)
    ga, gb = gram_inverse(h_ar), gram_inverse(h_br)
    if start is None:
        start = approx_solution_1(h_ar, h_br, p_t, alpha, gamma_step, rotation=rotation)
    cfg, meta = _as2(ga, gb, h_ar, h_br, p_t, alpha, start, tol, max_rounds)
    tag = "as2" if rotation == "unitary" else "naive"
    return _finish(cfg, ga, gb, h_ar, h_br, p_t, alpha, tag, start.gamma, meta)


# -- exhaustive search over two-stream rotations ---------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Resolution of the coarse-to-fine rotation search.

    ``n_angle`` angles in ``[0, pi)`` per row of ``K^{-1}`` and ``n_power``
    budget/user splits per stream on the coarse pass. The best ``n_starts``
    well-separated cells are refined ``refine_rounds`` times, each on a
    ``(2 refine + 1)^2`` local grid whose spacing shrinks by ``refine``. The
    final point is polished with ``polish_power`` splits and ``polish_golden``
    golden-section steps.
    """

    n_angle: int = 48
    n_power: int = 8
    n_starts: int = 3
    refine: int = 3
    refine_rounds: int = 3
    refine_golden: int = 6
    polish_power: int = 64
    polish_golden: int = 40
    unitary_only: bool = False

    def scaled(self, factor):
        f = int(factor)
        return replace(self, n_angle=self.n_angle * f, n_power=self.n_power * f,
                       polish_power=self.polish_power * f, polish_golden=self.polish_golden + 10 * (f - 1))


def _angle_gap(x, y):
    d = np.abs(x - y) % np.pi
    return np.minimum(d, np.pi - d)


def _pick_starts(t1, t2, vals, n_starts, min_gap):
    order = np.argsort(-vals, kind="stable")
    picked = []
    for i in order:
        if len(picked) == n_starts:
            break
        if all(max(_angle_gap(t1[i], t1[j]), _angle_gap(t2[i], t2[j])) > min_gap for j in picked):
            picked.append(i)
    return picked


def principal_angles(*mats):
    """Angles ``theta`` with ``(-sin theta, cos theta)`` along an eigenvector of a price matrix.

    With an ill-conditioned channel the cheap rotations form basins much
    narrower than the uniform grid spacing around these directions.
    """
    out = []
    for g in mats:
        _, v = np.linalg.eigh(g)
        out.extend(np.arctan2(-v[0], v[1]) % np.pi)
    return np.array(out)


def exhaustive_search_2d(h_ar, h_br, p_t, alpha=0.5, grid=GridSpec(), backend=None):
    """Grid search over all two-stream rotations with unit-norm rows of ``K^{-1}``.

    Row ``i`` of ``K^{-1}`` is ``(cos theta_i, sin theta_i)``. For each rotation
    the full budget is split between the streams and, per stream, between the
    users; both splits are searched by grid plus golden section.
    The uniform angle grid is augmented with the eigen-directions of both
    price matrices. ``grid.unitary_only`` restricts to orthogonal ``K`` (``theta_2 = theta_1 + pi/2``).
    """
    _check_alpha(alpha)
    ga, gb = gram_inverse(h_ar), gram_inverse(h_br)
    if ga.shape != (2, 2):
        raise DimensionError("exhaustive search is implemented for two relay dimensions")
    step = np.pi / grid.n_angle
    th = np.unique(np.concatenate([step * np.arange(grid.n_angle), principal_angles(ga, gb)]))
    if grid.unitary_only:
        t1, t2 = th, th + np.pi / 2
    else:
        i, j = np.triu_indices(th.size, 1)
        t1, t2 = th[i], th[j]
    coarse = kernels.rotation_values(kernels.pair_costs(ga, gb, t1, t2), p_t, alpha, grid.n_power, 0, backend)
    starts = _pick_starts(t1, t2, coarse[:, 0], grid.n_starts, 2 * step)

    offs = np.arange(-grid.refine, grid.refine + 1) / grid.refine
    best = (-np.inf, 0.0, 0.0)
    for s in starts:
        c1, c2, h = t1[s], t2[s], step
        cur = -np.inf
        for _ in range(grid.refine_rounds):
            if grid.unitary_only:
                a1 = c1 + h * offs
                a2 = a1 + np.pi / 2
            else:
                a1 = (c1 + h * offs[:, None] + 0 * offs[None, :]).ravel()
                a2 = (c2 + 0 * offs[:, None] + h * offs[None, :]).ravel()
            vals = kernels.rotation_values(kernels.pair_costs(ga, gb, a1, a2), p_t, alpha,
                                           grid.n_power, grid.refine_golden, backend)[:, 0]
            m = int(np.argmax(vals))
            if vals[m] > cur:
                cur, c1, c2 = vals[m], a1[m], a2[m]
            h /= grid.refine
        if cur > best[0]:
            best = (cur, c1, c2)

    _, th1, th2 = best
    costs = kernels.pair_costs(ga, gb, th1, th2)
    v, u, s1, s2 = kernels.rotation_values(costs, p_t, alpha, grid.polish_power, grid.polish_golden, backend)[0]
    a1, b1, a2, b2 = costs[0]
    pa = np.array([s1 * u * p_t / a1, s2 * (1 - u) * p_t / a2])
    pb = np.array([(1 - s1) * u * p_t / b1, (1 - s2) * (1 - u) * p_t / b2])
    kinv = np.array([[np.cos(th1), np.sin(th1)], [np.cos(th2), np.sin(th2)]])
    cfg = PrecoderConfig(np.linalg.inv(kinv), np.sqrt(pa), np.sqrt(pb))
    meta = {"theta": (float(th1 % np.pi), float(th2 % np.pi)), "kernel_value": float(v), "n_coarse": int(t1.size)}
    return _finish(cfg, ga, gb, h_ar, h_br, p_t, alpha, "exhaustive", np.nan, meta)
