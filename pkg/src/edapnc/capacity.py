"""Cut-set style capacity bounds for the two-way relay channel.

Every uplink scheme in the package produces an *offer*: the set of rate pairs
the relay can decode (or compute) in the first phase. The relay then picks a
broadcast covariance on the downlink frontier. A pair ``(r_a, r_b)`` is
end-to-end achievable when it lies under both the offer and the downlink point.
:meth:`DownlinkFrontier.match` finds the pair maximizing
``alpha * r_a + (1 - alpha) * r_b`` under that rule.

The upper bound uses the offer of an ideal relay: user A's rate is capped by
its single-user capacity with power ``P_a``, user B's by its capacity with the
rest of the shared budget.

Rates are ``0.5 * log2 det(I + H Q H^T)`` (real model, unit noise). Downlink
rate of user A is what B decodes, so it goes through ``h_rb``.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .channel import RatePair, normalize_noise, unit_noise_real
from .kernels import GOLD
from .linalg import waterfill, wf_capacity, wf_power_for_rate

FRONTIER_POINTS = 17
GOLDEN_ITERS = 30


def mimo_rate(h, q):
    """``0.5 * log2 det(I + H Q H^T)`` for a real channel and covariance."""
    h = np.asarray(h, dtype=float)
    q = np.asarray(q, dtype=float)
    lam = np.linalg.eigvalsh(0.5 * (q + q.T))
    if lam.size and lam[0] < -1e-9 * max(abs(lam[-1]), 1.0):
        raise ValueError("covariance must be positive semidefinite")
    a = np.eye(h.shape[0]) + h @ q @ h.T
    sign, ld = np.linalg.slogdet(a)
    if sign <= 0:
        raise np.linalg.LinAlgError("I + H Q H^T is not positive definite")
    return max(0.5 * ld / np.log(2.0), 0.0)


def channel_gains(h):
    """Squared singular values, the eigenmode gains of ``H^T H``."""
    return np.linalg.svd(np.asarray(h, dtype=float), compute_uv=False) ** 2


def single_user_capacity(h, power):
    return float(wf_capacity(channel_gains(h), power))


def _eigen_cov(h, powers):
    _, _, vt = np.linalg.svd(h, full_matrices=True)
    v = vt.T[:, : powers.size]
    return (v * powers) @ v.T


@dataclass
class CovariancePair:
    q_a: np.ndarray
    q_b: np.ndarray
    rates: RatePair
    power_a: float


def optimize_uplink_covariances(h_ar, h_br, p_t, alpha=0.5):
    """Maximize ``alpha*C_A(Q_a) + (1-alpha)*C_B(Q_b)`` with ``tr Q_a + tr Q_b <= p_t``.

    Each user talks to the relay alone, so the optimum is a joint water-fill
    over the eigenmodes of both channels (exact, no iteration).
    """
    ga = channel_gains(h_ar)
    gb = channel_gains(h_br)
    ga, gb = ga[ga > 0], gb[gb > 0]
    w = np.concatenate([np.full(ga.size, alpha), np.full(gb.size, 1.0 - alpha)])
    off = np.concatenate([1.0 / ga, 1.0 / gb])
    p = waterfill(w, np.ones_like(w), off, p_t).powers
    pa, pb = p[: ga.size], p[ga.size:]
    q_a = _eigen_cov(h_ar, pa)
    q_b = _eigen_cov(h_br, pb)
    rates = RatePair(float(wf_capacity_alloc(ga, pa)), float(wf_capacity_alloc(gb, pb)))
    return CovariancePair(q_a, q_b, rates, float(pa.sum()))


def wf_capacity_alloc(gains, powers):
    return 0.5 * np.sum(np.log2(1.0 + gains * powers))


@dataclass
class RelayCovariance:
    """Result of the broadcast covariance search."""

    q: np.ndarray
    objective: float
    iterations: int
    converged: bool
    history: np.ndarray = field(repr=False)


def optimize_relay_covariance(channels, weights, p_r, q0=None, max_iter=10_000, tol=1e-10, backend=None):
    """Maximize ``sum_k w_k 0.5 log2 det(I + H_k Q H_k^T)`` over ``tr Q <= p_r``.

    Projected gradient ascent with Armijo backtracking; the projection onto the
    PSD trace ball is exact. Non-convergence is reported in the result, not
    raised; the best iterate is returned either way.
    """
    hs = np.stack([np.asarray(h, dtype=float) for h in channels])
    n = hs.shape[2]
    if q0 is None:
        q0 = np.eye(n) * (p_r / n)
    q, f, it, conv, hist = kernels.pga_logdet(hs, weights, p_r, q0, max_iter=max_iter, ftol=tol, backend=backend)
    return RelayCovariance(q, f, it, conv, hist)


# -- uplink offers -------------------------------------------------------------


TIE_TOL = 1e-12


def _better(cand, cur):
    """Higher value wins; equal values go to the more balanced pair."""
    if not np.isfinite(cur[0]) or cand[0] > cur[0] + TIE_TOL * max(1.0, abs(cur[0])):
        return True
    return cand[0] >= cur[0] - TIE_TOL * max(1.0, abs(cur[0])) and abs(cand[1] - cand[2]) < abs(cur[1] - cur[2])


@dataclass(frozen=True)
class PointOffer:
    """A single uplink rate pair (and everything below it)."""

    r_a: float
    r_b: float

    def best(self, g_a, g_b, alpha):
        ra, rb = min(self.r_a, g_a), min(self.r_b, g_b)
        return alpha * ra + (1 - alpha) * rb, ra, rb


@dataclass(frozen=True)
class SegmentOffer:
    """The segment between two uplink rate pairs (a dominant MAC face)."""

    p1: tuple
    p2: tuple

    def best(self, g_a, g_b, alpha):
        x1, y1 = self.p1
        x2, y2 = self.p2
        ts = [0.0, 1.0]
        if x2 != x1:
            ts.append((g_a - x1) / (x2 - x1))
        if y2 != y1:
            ts.append((g_b - y1) / (y2 - y1))
        # balanced point, preferred when the weighted value is flat along the segment
        if (x2 - x1) != (y2 - y1):
            ts.append((y1 - x1) / ((x2 - x1) - (y2 - y1)))
        out = (-np.inf, 0.0, 0.0)
        for t in ts:
            if not 0.0 <= t <= 1.0:
                continue
            x = x1 + t * (x2 - x1)
            y = y1 + t * (y2 - y1)
            ra, rb = min(x, g_a), min(y, g_b)
            cand = (alpha * ra + (1 - alpha) * rb, ra, rb)
            if _better(cand, out):
                out = cand
        return out


def pareto_hull(points):
    """Vertices of the upper-right boundary of the convex hull of ``points``.

    Ordered by increasing ``r_a`` (decreasing ``r_b``). Time sharing makes
    every point under this boundary achievable.
    """
    pts = sorted({(float(x), float(y)) for x, y in points})
    hull = []
    for p in pts:
        # monotone chain, upper part: pop while the turn is not clockwise
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1) >= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    top = max(range(len(hull)), key=lambda i: (hull[i][1], -hull[i][0]))
    return hull[top:]


@dataclass(frozen=True)
class HullOffer:
    """Convex hull of several uplink rate pairs (time sharing between them)."""

    vertices: tuple

    @classmethod
    def from_points(cls, points):
        return cls(tuple(pareto_hull(points)))

    def best(self, g_a, g_b, alpha):
        if len(self.vertices) == 1:
            return PointOffer(*self.vertices[0]).best(g_a, g_b, alpha)
        out = (-np.inf, 0.0, 0.0)
        for p1, p2 in zip(self.vertices[:-1], self.vertices[1:]):
            cand = SegmentOffer(p1, p2).best(g_a, g_b, alpha)
            if _better(cand, out):
                out = cand
        return out


@dataclass
class CapacityOffer:
    """Offer of an ideal relay: single-user capacities under a shared budget."""

    gains_a: np.ndarray
    gains_b: np.ndarray
    p_t: float

    def cap_a(self, p):
        return float(wf_capacity(self.gains_a, max(p, 0.0)))

    def cap_b(self, p):
        return float(wf_capacity(self.gains_b, max(p, 0.0)))

    def weighted_split(self, alpha):
        """Power of A maximizing ``alpha*C_A(P_a) + (1-alpha)*C_B(p_t - P_a)``."""
        ga, gb = self.gains_a[self.gains_a > 0], self.gains_b[self.gains_b > 0]
        w = np.concatenate([np.full(ga.size, alpha), np.full(gb.size, 1.0 - alpha)])
        off = np.concatenate([1.0 / ga, 1.0 / gb])
        p = waterfill(w, np.ones_like(w), off, self.p_t).powers
        return float(p[: ga.size].sum())

    def best(self, g_a, g_b, alpha):
        # A saturates the downlink beyond pa1, B below pa2
        pa1 = wf_power_for_rate(self.gains_a, g_a)
        pa2 = self.p_t - wf_power_for_rate(self.gains_b, g_b)
        if pa1 <= pa2:
            pa = min(max(pa1, 0.0), self.p_t)
        else:
            lo, hi = max(pa2, 0.0), min(pa1, self.p_t)
            pa = min(max(self.weighted_split(alpha), lo), hi)
        ra = min(self.cap_a(pa), g_a)
        rb = min(self.cap_b(self.p_t - pa), g_b)
        return alpha * ra + (1 - alpha) * rb, ra, rb


# -- downlink frontier -----------------------------------------------------------


@dataclass
class Match:
    rates: RatePair
    value: float
    beta: float
    q_r: np.ndarray


class DownlinkFrontier:
    """Pareto boundary of the broadcast phase for one channel realization.

    ``beta`` weights user A's downlink rate (decoded by B through ``h_rb``).
    Points are solved lazily, warm-started from the nearest cached ``beta``.
    """

    def __init__(self, h_ra, h_rb, p_r, n_points=FRONTIER_POINTS, backend=None, tol=1e-10):
        self.h_ra = np.asarray(h_ra, dtype=float)
        self.h_rb = np.asarray(h_rb, dtype=float)
        self.p_r = float(p_r)
        self.backend = backend
        self.tol = tol
        self._cache = {}
        self.nonconverged = 0
        self.betas = np.linspace(0.0, 1.0, n_points)
        for b in self.betas:
            self.point(b)

    @classmethod
    def from_channel(cls, cs, pc, **kw):
        cs = unit_noise_real(normalize_noise(cs, pc))
        return cls(cs.h_ra, cs.h_rb, pc.p_r, **kw)

    def point(self, beta):
        """``(g_a, g_b, Q)`` on the frontier for weight ``beta``."""
        beta = float(beta)
        if beta in self._cache:
            return self._cache[beta]
        q0 = None
        if self._cache:
            near = min(self._cache, key=lambda b: abs(b - beta))
            q0 = self._cache[near][2]
        res = optimize_relay_covariance(
            [self.h_rb, self.h_ra], np.array([beta, 1.0 - beta]), self.p_r, q0=q0, tol=self.tol, backend=self.backend
        )
        if not res.converged:
            self.nonconverged += 1
        out = (mimo_rate(self.h_rb, res.q), mimo_rate(self.h_ra, res.q), res.q)
        self._cache[beta] = out
        return out

    def match(self, offer, alpha, golden_iters=GOLDEN_ITERS):
        """Best end-to-end pair under ``offer`` for weight ``alpha``.

        The value along the frontier is unimodal in ``beta`` (the boundary is
        concave and the offers are convex), so a grid scan followed by golden
        section on the bracketing cell finds the maximum.
        """

        def val(b):
            ga, gb, _ = self.point(b)
            return offer.best(ga, gb, alpha)

        vals = [val(b)[0] for b in self.betas]
        j = int(np.argmax(vals))
        best_b, best_v = self.betas[j], vals[j]
        lo = self.betas[max(j - 1, 0)]
        hi = self.betas[min(j + 1, len(self.betas) - 1)]
        c = hi - GOLD * (hi - lo)
        d = lo + GOLD * (hi - lo)
        fc, fd = val(c)[0], val(d)[0]
        for _ in range(golden_iters):
            if fc >= fd:
                hi, d, fd = d, c, fc
                c = hi - GOLD * (hi - lo)
                fc = val(c)[0]
            else:
                lo, c, fc = c, d, fd
                d = lo + GOLD * (hi - lo)
                fd = val(d)[0]
        for b, v in ((c, fc), (d, fd)):
            if v > best_v:
                best_b, best_v = b, v
        v, ra, rb = val(best_b)
        return Match(RatePair(float(max(ra, 0.0)), float(max(rb, 0.0))), float(v), float(best_b), self.point(best_b)[2])


def capacity_offer(h_ar, h_br, p_t):
    return CapacityOffer(channel_gains(h_ar), channel_gains(h_br), float(p_t))


def capacity_ub_pair(cs, pc, alpha=0.5, joint=True, frontier=None):
    """Upper bound on the rate pair for weight ``alpha``.

    With ``joint=True`` (default) the uplink and downlink bounds are combined
    into one weighted optimization, giving a true upper bound on
    ``alpha*R_A + (1-alpha)*R_B`` of any scheme. With ``joint=False`` each
    user's rate is bounded separately with the full budgets, the looser
    outer corner of the region.
    """
    rc = unit_noise_real(normalize_noise(cs, pc))
    if not joint:
        ul_a = single_user_capacity(rc.h_ar, pc.p_t)
        ul_b = single_user_capacity(rc.h_br, pc.p_t)
        dl_a = single_user_capacity(rc.h_rb, pc.p_r)
        dl_b = single_user_capacity(rc.h_ra, pc.p_r)
        return RatePair(min(ul_a, dl_a), min(ul_b, dl_b))
    if frontier is None:
        frontier = DownlinkFrontier(rc.h_ra, rc.h_rb, pc.p_r)
    return frontier.match(capacity_offer(rc.h_ar, rc.h_br, pc.p_t), alpha).rates
