"""Reference schemes to compare aligned precoding against.

* Decode-and-forward with network coding (DF-NC): the relay decodes both
  messages over a Gaussian MIMO multiple-access channel, XORs them and
  broadcasts. Its uplink offer is a point (or, for equal weights, the
  dominant face) of the MAC capacity region.
* Naive aligned precoding: rotation fixed to the identity, amplitudes tuned
  by the same two-stage search as the aligned scheme.
* Equal-amplitude inversion: identity rotation with equal amplitudes on all
  streams of both users, scaled onto the power budget.
"""

from dataclasses import dataclass

import numpy as np

from .capacity import DownlinkFrontier, HullOffer, PointOffer, SegmentOffer
from .channel import RatePair, normalize_noise, unit_noise_real
from .eda import PrecoderConfig, stream_costs, transmit_power, uplink_rates
from .linalg import LN2, project_capped_simplex
from .optimizers import GAMMA_STEP, WsrSolution, approx_solution_2

MAC_MAX_ITER = 5000
MAC_TOL = 1e-10
# uplink weights whose optima span an uplink region for end-to-end matching
UPLINK_WEIGHTS = (0.0, 0.2, 0.35, 0.5, 0.65, 0.8, 1.0)


def naive_eda_solution(h_ar, h_br, p_t, alpha=0.5, gamma_step=GAMMA_STEP):
    """Two-stage amplitude search with ``K = I``."""
    return approx_solution_2(h_ar, h_br, p_t, alpha, gamma_step, rotation="identity")


def equal_amplitude_solution(h_ar, h_br, p_t, alpha=0.5):
    """``K = I`` and ``Psi_A = Psi_B = c I`` with ``c`` spending the whole budget.

    For many user antennas ``(H H^T)^{-1}`` concentrates at ``I / n_t`` and
    ``c^2`` tends to ``n_t P_T / (2 n_r)``.
    """
    n = h_ar.shape[0]
    a, b = stream_costs(h_ar, h_br, np.eye(n))
    c = np.sqrt(p_t / np.sum(a + b))
    cfg = PrecoderConfig(np.eye(n), np.full(n, c), np.full(n, c))
    rates = uplink_rates(cfg.psi_a, cfg.psi_b)
    nominal = np.sqrt(h_ar.shape[1] * p_t / (2 * n))
    return WsrSolution(cfg, rates, alpha, "equal_amplitude", transmit_power(h_ar, h_br, cfg),
                       meta={"nominal_amplitude": float(nominal)})


# -- Gaussian MAC -----------------------------------------------------------------


def _logdet2(a):
    sign, ld = np.linalg.slogdet(a)
    return 0.5 * ld / LN2 if sign > 0 else -np.inf


@dataclass
class MacPoint:
    q_a: np.ndarray
    q_b: np.ndarray
    f_a: float
    f_b: float
    f_sum: float
    converged: bool
    iterations: int


def _mac_terms(h_a, h_b, q_a, q_b):
    n = h_a.shape[0]
    sa = h_a @ q_a @ h_a.T
    sb = h_b @ q_b @ h_b.T
    eye = np.eye(n)
    return _logdet2(eye + sa), _logdet2(eye + sb), _logdet2(eye + sa + sb), sa, sb


def _mac_objective(h_a, h_b, q_a, q_b, c_sum, c_a, c_b):
    fa, fb, fs, _, _ = _mac_terms(h_a, h_b, q_a, q_b)
    return c_sum * fs + c_a * fa + c_b * fb


def _mac_gradient(h_a, h_b, q_a, q_b, c_sum, c_a, c_b):
    n = h_a.shape[0]
    eye = np.eye(n)
    sa = h_a @ q_a @ h_a.T
    sb = h_b @ q_b @ h_b.T
    inv_s = np.linalg.inv(eye + sa + sb)
    ga = c_sum * h_a.T @ inv_s @ h_a
    gb = c_sum * h_b.T @ inv_s @ h_b
    if c_a:
        ga = ga + c_a * h_a.T @ np.linalg.solve(eye + sa, h_a)
    if c_b:
        gb = gb + c_b * h_b.T @ np.linalg.solve(eye + sb, h_b)
    k = 0.5 / LN2
    return k * 0.5 * (ga + ga.T), k * 0.5 * (gb + gb.T)


def _project_pair(q_a, q_b, cap):
    la, ua = np.linalg.eigh(0.5 * (q_a + q_a.T))
    lb, ub = np.linalg.eigh(0.5 * (q_b + q_b.T))
    lam = project_capped_simplex(np.concatenate([la, lb]), cap)
    pa = (ua * lam[: la.size]) @ ua.T
    pb = (ub * lam[la.size:]) @ ub.T
    return 0.5 * (pa + pa.T), 0.5 * (pb + pb.T)


def mac_optimize(h_a, h_b, p_t, c_sum, c_a=0.0, c_b=0.0, max_iter=MAC_MAX_ITER, tol=MAC_TOL):
    """Maximize ``c_sum f_sum + c_a f_A + c_b f_B`` over ``tr Q_a + tr Q_b <= p_t``.

    ``f_A``, ``f_B`` are the single-user rates and ``f_sum`` the sum rate of the
    MAC. Projected gradient ascent on the pair of covariances with Armijo
    backtracking and Barzilai-Borwein steps.
    """
    nt = h_a.shape[1]
    q_a = np.eye(nt) * p_t / (2 * nt)
    q_b = q_a.copy()
    f = _mac_objective(h_a, h_b, q_a, q_b, c_sum, c_a, c_b)
    g_a, g_b = _mac_gradient(h_a, h_b, q_a, q_b, c_sum, c_a, c_b)
    t = p_t / (np.sqrt(np.sum(g_a**2) + np.sum(g_b**2)) + 1e-300)
    converged = False
    it = 0
    while it < max_iter:
        accepted = False
        for _ in range(80):
            n_a, n_b = _project_pair(q_a + t * g_a, q_b + t * g_b, p_t)
            d_a, d_b = n_a - q_a, n_b - q_b
            dd = np.sum(d_a**2) + np.sum(d_b**2)
            if dd == 0.0:
                break
            fn = _mac_objective(h_a, h_b, n_a, n_b, c_sum, c_a, c_b)
            if fn >= f + 1e-4 * (np.sum(g_a * d_a) + np.sum(g_b * d_b)):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            converged = True
            break
        it += 1
        df = fn - f
        s_a, s_b = n_a - q_a, n_b - q_b
        q_a, q_b, f = n_a, n_b, fn
        ng_a, ng_b = _mac_gradient(h_a, h_b, q_a, q_b, c_sum, c_a, c_b)
        y_a, y_b = ng_a - g_a, ng_b - g_b
        g_a, g_b = ng_a, ng_b
        if df <= tol:
            converged = True
            break
        sy = np.sum(s_a * y_a) + np.sum(s_b * y_b)
        t = -(np.sum(s_a**2) + np.sum(s_b**2)) / sy if sy < 0 else 2 * t
    fa, fb, fs, _, _ = _mac_terms(h_a, h_b, q_a, q_b)
    return MacPoint(q_a, q_b, fa, fb, fs, converged, it)


def mac_offer(h_a, h_b, p_t, alpha):
    """Uplink offer of DF-NC for weight ``alpha``.

    For ``alpha > 1/2`` the weighted MAC optimum decodes B first, so A gets
    its interference-free rate; symmetric for ``alpha < 1/2``. For
    ``alpha = 1/2`` the whole dominant face at the sum-rate optimum is offered.
    Returns ``(offer, converged)``.
    """
    if alpha > 0.5:
        m = mac_optimize(h_a, h_b, p_t, 1.0 - alpha, c_a=2.0 * alpha - 1.0)
        return PointOffer(m.f_a, max(m.f_sum - m.f_a, 0.0)), m.converged
    if alpha < 0.5:
        m = mac_optimize(h_a, h_b, p_t, alpha, c_b=1.0 - 2.0 * alpha)
        return PointOffer(max(m.f_sum - m.f_b, 0.0), m.f_b), m.converged
    m = mac_optimize(h_a, h_b, p_t, 1.0)
    p1 = (m.f_a, max(m.f_sum - m.f_a, 0.0))
    p2 = (max(m.f_sum - m.f_b, 0.0), m.f_b)
    return SegmentOffer(p1, p2), m.converged


def dfnc_offer(h_a, h_b, p_t, weights=UPLINK_WEIGHTS):
    """MAC region of DF-NC as the hull of its weighted-sum optima.

    Returns ``(HullOffer, number of non-converged MAC solves)``.
    """
    pts = []
    bad = 0
    for w in weights:
        offer, ok = mac_offer(h_a, h_b, p_t, w)
        bad += not ok
        if isinstance(offer, SegmentOffer):
            pts.extend([offer.p1, offer.p2])
        else:
            pts.append((offer.r_a, offer.r_b))
    return HullOffer.from_points(pts), bad


def dfnc_pair(cs, pc, alpha=0.5, frontier=None, weights=UPLINK_WEIGHTS):
    """End-to-end DF-NC rates for weight ``alpha``; also returns a convergence flag."""
    rc = unit_noise_real(normalize_noise(cs, pc))
    if frontier is None:
        frontier = DownlinkFrontier(rc.h_ra, rc.h_rb, pc.p_r)
    offer, bad = dfnc_offer(rc.h_ar, rc.h_br, pc.p_t, sorted(set(weights) | {float(alpha)}))
    return frontier.match(offer, alpha).rates, bad == 0


@dataclass
class RateRegion:
    """Rate pairs of one scheme traced over a set of weights."""

    alphas: np.ndarray
    points: np.ndarray
    method: str

    def weighted_max(self, alpha):
        return float(np.max(alpha * self.points[:, 0] + (1 - alpha) * self.points[:, 1]))

    def pairs(self):
        return [RatePair(float(a), float(b)) for a, b in self.points]


def dfnc_region(cs, pc, alphas, frontier=None):
    rc = unit_noise_real(normalize_noise(cs, pc))
    if frontier is None:
        frontier = DownlinkFrontier(rc.h_ra, rc.h_rb, pc.p_r)
    pts = [tuple(dfnc_pair(cs, pc, a, frontier)[0]) for a in alphas]
    return RateRegion(np.asarray(alphas, dtype=float), np.array(pts), "dfnc")
