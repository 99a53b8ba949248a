"""Hot numeric kernels with a numba build and a pure-numpy build.

Two families live here:

* ``pga_logdet`` - projected gradient ascent on a weighted sum of
  ``0.5*log2 det(I + H_k Q H_k^T)`` over ``{Q psd, tr Q <= cap}``. The numpy
  build runs the exact same source uncompiled.
* ``rotation_values`` / ``rotation_best`` - the inner loops of the two-stream
  exhaustive precoder search. Given the per-stream power prices of a rotation
  matrix, they maximize the weighted uplink rate over the split of the power
  budget between the two streams and between the two users of each stream.
  The numba build loops over scalars; the numpy build vectorizes over rotations.

Select the default with the ``EDAPNC_DISABLE_NUMBA`` environment flag (see
``_backend``) or pass ``backend=`` explicitly.
"""

import math
import types

import numpy as np

from . import _backend

LN2 = math.log(2.0)
GOLD = (math.sqrt(5.0) - 1.0) / 2.0


# ---------------------------------------------------------------------------
# shared-source kernels: plain python here, jitted copies built on demand
# ---------------------------------------------------------------------------


def logdet_obj(hs, w, q):
    m = hs.shape[0]
    nout = hs.shape[1]
    tot = 0.0
    for k in range(m):
        if w[k] == 0.0:
            continue
        h = hs[k]
        a = np.eye(nout) + h @ q @ h.T
        sign, ld = np.linalg.slogdet(a)
        if sign <= 0:
            return -np.inf
        tot += w[k] * 0.5 * ld / LN2
    return tot

def logdet_grad(hs, w, q):
    m = hs.shape[0]
    nout = hs.shape[1]
    n = q.shape[0]
    g = np.zeros((n, n))
    for k in range(m):
        if w[k] == 0.0:
            continue
        h = hs[k]
        a = np.eye(nout) + h @ q @ h.T
        g += (w[k] * 0.5 / LN2) * (h.T @ np.linalg.solve(a, h))
    return 0.5 * (g + g.T)

def capped_simplex(lam, cap):
    n = lam.shape[0]
    out = np.empty(n)
    tot = 0.0
    for i in range(n):
        out[i] = lam[i] if lam[i] > 0.0 else 0.0
        tot += out[i]
    if tot <= cap:
        return out
    s = np.sort(lam)[::-1]
    css = 0.0
    tau = 0.0
    for i in range(n):
        css += s[i]
        t = (css - cap) / (i + 1)
        if s[i] - t > 0.0:
            tau = t
    for i in range(n):
        v = lam[i] - tau
        out[i] = v if v > 0.0 else 0.0
    return out

def project(q, cap):
    lam, u = np.linalg.eigh(0.5 * (q + q.T))
    lam = capped_simplex(lam, cap)
    p = (u * lam) @ u.T
    return 0.5 * (p + p.T)

def pga(hs, w, cap, q0, max_iter, ftol, gtol, hist):
    q = project(q0, cap)
    f = logdet_obj(hs, w, q)
    g = logdet_grad(hs, w, q)
    gn = math.sqrt(np.sum(g * g))
    t = cap / (gn + 1e-300) if gn > 0.0 else 1.0
    hist[0] = f
    it = 0
    converged = False
    q_prev = q.copy()
    g_prev = g.copy()
    while it < max_iter:
        accepted = False
        fn = f
        qn = q
        dd = 0.0
        for _ in range(80):
            qn = project(q + t * g, cap)
            d = qn - q
            dd = np.sum(d * d)
            if dd == 0.0:
                break
            fn = logdet_obj(hs, w, qn)
            if fn >= f + 1e-4 * np.sum(g * d):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            # no ascent step left: stationary to working precision
            converged = True
            break
        it += 1
        hist[it] = fn
        gmap = math.sqrt(dd) / t
        df = fn - f
        q_prev = q
        g_prev = g
        q = qn
        f = fn
        g = logdet_grad(hs, w, q)
        if df <= ftol or gmap <= gtol:
            converged = True
            break
        # Barzilai-Borwein step for ascent: s.y < 0 on concave objectives
        s = q - q_prev
        y = g - g_prev
        sy = np.sum(s * y)
        if sy < 0.0:
            t = -np.sum(s * s) / sy
        else:
            t *= 2.0
    return q, f, it, converged


def stream_value(a, b, budget, s, alpha):
    pa = s * budget / a
    pb = (1.0 - s) * budget / b
    tot = pa + pb
    if tot <= 0.0:
        return 0.0
    xa = pa / tot + pa
    xb = pb / tot + pb
    v = 0.0
    if xa > 1.0:
        v += alpha * 0.5 * math.log2(xa)
    if xb > 1.0:
        v += (1.0 - alpha) * 0.5 * math.log2(xb)
    return v

def stream_best(a, b, budget, alpha, n_split, n_golden):
    if budget <= 0.0:
        return 0.0, 0.5
    best = -1.0
    bs = 0.0
    for j in range(n_split):
        s = j / (n_split - 1)
        v = stream_value(a, b, budget, s, alpha)
        if v > best:
            best = v
            bs = s
    if n_golden > 0:
        h = 1.0 / (n_split - 1)
        lo = max(bs - h, 0.0)
        hi = min(bs + h, 1.0)
        c = hi - GOLD * (hi - lo)
        d = lo + GOLD * (hi - lo)
        fc = stream_value(a, b, budget, c, alpha)
        fd = stream_value(a, b, budget, d, alpha)
        for _ in range(n_golden):
            if fc >= fd:
                hi = d
                d = c
                fd = fc
                c = hi - GOLD * (hi - lo)
                fc = stream_value(a, b, budget, c, alpha)
            else:
                lo = c
                c = d
                fc = fd
                d = lo + GOLD * (hi - lo)
                fd = stream_value(a, b, budget, d, alpha)
        if fc > best:
            best = fc
            bs = c
        if fd > best:
            best = fd
            bs = d
    return best, bs

def split_value(a1, b1, a2, b2, budget, u, alpha, n_split, n_golden):
    v1, _ = stream_best(a1, b1, u * budget, alpha, n_split, n_golden)
    v2, _ = stream_best(a2, b2, (1.0 - u) * budget, alpha, n_split, n_golden)
    return v1 + v2

def rotation_best(a1, b1, a2, b2, budget, alpha, n_power, n_golden):
    best = -1.0
    bu = 0.0
    for j in range(n_power):
        u = j / (n_power - 1)
        v = split_value(a1, b1, a2, b2, budget, u, alpha, n_power, n_golden)
        if v > best:
            best = v
            bu = u
    if n_golden > 0:
        h = 1.0 / (n_power - 1)
        lo = max(bu - h, 0.0)
        hi = min(bu + h, 1.0)
        c = hi - GOLD * (hi - lo)
        d = lo + GOLD * (hi - lo)
        fc = split_value(a1, b1, a2, b2, budget, c, alpha, n_power, n_golden)
        fd = split_value(a1, b1, a2, b2, budget, d, alpha, n_power, n_golden)
        for _ in range(n_golden):
            if fc >= fd:
                hi = d
                d = c
                fd = fc
                c = hi - GOLD * (hi - lo)
                fc = split_value(a1, b1, a2, b2, budget, c, alpha, n_power, n_golden)
            else:
                lo = c
                c = d
                fc = fd
                d = lo + GOLD * (hi - lo)
                fd = split_value(a1, b1, a2, b2, budget, d, alpha, n_power, n_golden)
        if fc > best:
            best = fc
            bu = c
        if fd > best:
            best = fd
            bu = d
    _, s1 = stream_best(a1, b1, bu * budget, alpha, n_power, n_golden)
    _, s2 = stream_best(a2, b2, (1.0 - bu) * budget, alpha, n_power, n_golden)
    return best, bu, s1, s2

def rotation_values_scalar(costs, budget, alpha, n_power, n_golden):
    n = costs.shape[0]
    out = np.empty((n, 4))
    for i in range(n):
        a1 = costs[i, 0]
        b1 = costs[i, 1]
        a2 = costs[i, 2]
        b2 = costs[i, 3]
        if not (a1 < np.inf and b1 < np.inf and a2 < np.inf and b2 < np.inf):
            out[i, 0] = -1.0
            out[i, 1] = 0.0
            out[i, 2] = 0.0
            out[i, 3] = 0.0
            continue
        v, u, s1, s2 = rotation_best(a1, b1, a2, b2, budget, alpha, n_power, n_golden)
        out[i, 0] = v
        out[i, 1] = u
        out[i, 2] = s1
        out[i, 3] = s2
    return out


_SCALAR_KERNELS = (
    logdet_obj,
    logdet_grad,
    capped_simplex,
    project,
    pga,
    stream_value,
    stream_best,
    split_value,
    rotation_best,
    rotation_values_scalar,
)
_JITTED = None


def _jitted():
    """Jitted twins of the shared-source kernels.

    Each function is re-bound to a namespace where its callees resolve to the
    compiled twins, so the plain versions above stay pure python.
    """
    global _JITTED
    if _JITTED is None:
        ns = dict(globals())
        jit = _backend.njit(cache=True)
        for f in _SCALAR_KERNELS:
            g = types.FunctionType(f.__code__, ns, f.__name__, f.__defaults__)
            g.__module__ = f.__module__
            g.__qualname__ = f.__qualname__
            ns[f.__name__] = jit(g)
        _JITTED = {f.__name__: ns[f.__name__] for f in _SCALAR_KERNELS}
    return _JITTED


def pga_logdet(hs, weights, cap, q0, max_iter=10_000, ftol=1e-10, gtol=1e-9, backend=None):
    """Maximize ``sum_k w_k 0.5 log2 det(I + H_k Q H_k^T)`` over the trace ball.

    Returns ``(Q, objective, iterations, converged, history)`` where
    ``history`` holds the accepted objective values (nondecreasing).
    """
    hs = np.ascontiguousarray(hs, dtype=np.float64)
    w = np.ascontiguousarray(weights, dtype=np.float64)
    q0 = np.ascontiguousarray(q0, dtype=np.float64)
    hist = np.empty(int(max_iter) + 1)
    fn = _jitted()["pga"] if _backend.resolve(backend) == "numba" else pga
    q, f, it, conv = fn(hs, w, float(cap), q0, int(max_iter), float(ftol), float(gtol), hist)
    return q, float(f), int(it), bool(conv), hist[: it + 1].copy()


# ---------------------------------------------------------------------------
# two-stream exhaustive search: vectorized numpy build
# ---------------------------------------------------------------------------


def _stream_value_np(a, b, budget, s, alpha):
    pa = s * budget / a
    pb = (1.0 - s) * budget / b
    tot = pa + pb
    pos = tot > 0
    den = np.where(pos, tot, 1.0)
    xa = np.where(pos, pa / den, 0.0) + pa
    xb = np.where(pos, pb / den, 0.0) + pb
    va = np.where(xa > 1.0, 0.5 * np.log2(np.maximum(xa, 1.0)), 0.0)
    vb = np.where(xb > 1.0, 0.5 * np.log2(np.maximum(xb, 1.0)), 0.0)
    return np.where(pos, alpha * va + (1.0 - alpha) * vb, 0.0)


def _golden_np(f, lo, hi, n_iter):
    c = hi - GOLD * (hi - lo)
    d = lo + GOLD * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(n_iter):
        left = fc >= fd
        hi = np.where(left, d, hi)
        lo = np.where(left, lo, c)
        new_c = hi - GOLD * (hi - lo)
        new_d = lo + GOLD * (hi - lo)
        c, d = np.where(left, new_c, d), np.where(left, c, new_d)
        fnew = f(np.where(left, c, d))
        fc, fd = np.where(left, fnew, fd), np.where(left, fc, fnew)
    return c, fc, d, fd


def _stream_best_np(a, b, budget, alpha, n_split, n_golden):
    a, b, budget = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (a, b, budget)))
    grid = np.arange(n_split) / (n_split - 1)
    vals = _stream_value_np(a[..., None], b[..., None], budget[..., None], grid, alpha)
    j = np.argmax(vals, axis=-1)
    best = np.take_along_axis(vals, j[..., None], axis=-1)[..., 0]
    bs = grid[j]
    if n_golden > 0:
        h = 1.0 / (n_split - 1)
        lo = np.maximum(bs - h, 0.0)
        hi = np.minimum(bs + h, 1.0)
        c, fc, d, fd = _golden_np(lambda s: _stream_value_np(a, b, budget, s, alpha), lo, hi, n_golden)
        up = fc > best
        best, bs = np.where(up, fc, best), np.where(up, c, bs)
        up = fd > best
        best, bs = np.where(up, fd, best), np.where(up, d, bs)
    zero = budget <= 0
    return np.where(zero, 0.0, best), np.where(zero, 0.5, bs)


def _rotation_values_np(costs, budget, alpha, n_power, n_golden):
    costs = np.asarray(costs, dtype=float)
    ok = np.all(np.isfinite(costs), axis=1)
    safe = np.where(ok[:, None], costs, 1.0)
    a1, b1, a2, b2 = (safe[:, i] for i in range(4))
    grid = np.arange(n_power) / (n_power - 1)

    def split_value(u):
        v1, _ = _stream_best_np(a1[..., None] if u.ndim > 1 else a1, b1[..., None] if u.ndim > 1 else b1,
                                u * budget, alpha, n_power, n_golden)
        v2, _ = _stream_best_np(a2[..., None] if u.ndim > 1 else a2, b2[..., None] if u.ndim > 1 else b2,
                                (1.0 - u) * budget, alpha, n_power, n_golden)
        return v1 + v2

    vals = split_value(np.broadcast_to(grid, (costs.shape[0], n_power)))
    j = np.argmax(vals, axis=1)
    best = vals[np.arange(vals.shape[0]), j]
    bu = grid[j]
    if n_golden > 0:
        h = 1.0 / (n_power - 1)
        lo = np.maximum(bu - h, 0.0)
        hi = np.minimum(bu + h, 1.0)
        c, fc, d, fd = _golden_np(split_value, lo, hi, n_golden)
        up = fc > best
        best, bu = np.where(up, fc, best), np.where(up, c, bu)
        up = fd > best
        best, bu = np.where(up, fd, best), np.where(up, d, bu)
    _, s1 = _stream_best_np(a1, b1, bu * budget, alpha, n_power, n_golden)
    _, s2 = _stream_best_np(a2, b2, (1.0 - bu) * budget, alpha, n_power, n_golden)
    out = np.stack([best, bu, s1, s2], axis=1)
    out[~ok] = (-1.0, 0.0, 0.0, 0.0)
    return out


def rotation_values(costs, budget, alpha, n_power, n_golden=0, backend=None):
    """Best weighted uplink rate for each row of ``costs``.

    ``costs[i] = (a1, b1, a2, b2)`` are the power prices of users A and B on
    streams 1 and 2 under rotation ``i``. Returns an ``(n, 4)`` array of
    ``(value, stream-1 budget share, user-A share on stream 1, on stream 2)``.
    Rows with non-finite prices get value ``-1``.
    """
    costs = np.ascontiguousarray(costs, dtype=np.float64)
    if _backend.resolve(backend) == "numba":
        return _jitted()["rotation_values_scalar"](costs, float(budget), float(alpha), int(n_power), int(n_golden))
    return _rotation_values_np(costs, float(budget), float(alpha), int(n_power), int(n_golden))


def scalar_rotation_values(costs, budget, alpha, n_power, n_golden=0):
    """Uncompiled scalar build; reference for the two fast paths in tests."""
    costs = np.ascontiguousarray(costs, dtype=np.float64)
    return rotation_values_scalar(costs, float(budget), float(alpha), int(n_power), int(n_golden))


def pair_costs(ga, gb, theta1, theta2):
    """Stream power prices for rotations whose inverse has unit rows at angles
    ``theta1`` and ``theta2``.

    Row ``i`` of ``K^{-1}`` is ``(cos t_i, sin t_i)``; column 1 of ``K`` is
    ``(-sin t2, cos t2) / sin(t1 - t2)`` and column 2 is
    ``(-sin t1, cos t1) / sin(t2 - t1)``. The price of user ``m`` on stream
    ``i`` is ``k_i^T G_m k_i``. Returns ``(n, 4)``; coincident angles give inf.
    """
    t1 = np.atleast_1d(np.asarray(theta1, dtype=float))
    t2 = np.atleast_1d(np.asarray(theta2, dtype=float))
    s2 = np.sin(t1 - t2) ** 2

    def quad(g, t):
        x, y = -np.sin(t), np.cos(t)
        return g[0, 0] * x * x + 2.0 * g[0, 1] * x * y + g[1, 1] * y * y

    with np.errstate(divide="ignore"):
        inv = np.where(s2 > 1e-14, 1.0 / np.where(s2 > 1e-14, s2, 1.0), np.inf)
    return np.stack([quad(ga, t2) * inv, quad(gb, t2) * inv, quad(ga, t1) * inv, quad(gb, t1) * inv], axis=1)
