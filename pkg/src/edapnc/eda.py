"""Eigen-direction aligned precoding for physical-layer network coding.

Both users precode so that, after the relay applies ``K^{-1}``, the two
signals arrive on the same ``n_r`` parallel streams:
``K^{-1} H_AR F_A = Psi_A`` and ``K^{-1} H_BR F_B = Psi_B`` with diagonal
``Psi``. The relay then decodes the lattice sum stream by stream. The
rotation ``K`` is normalized so the rows of ``K^{-1}`` have unit norm, which
keeps the effective noise on every stream at unit variance.

Precoders: ``F = H^T (H H^T)^{-1} K Psi``.
"""

from dataclasses import dataclass

import numpy as np

from .capacity import mimo_rate
from .channel import RatePair, normalize_noise, unit_noise_real
from .linalg import check_invertible, gram_inverse

ROTATION_TOL = 1e-9


class ConstraintError(ValueError):
    """Raised when a rotation matrix violates the unit-row-norm constraint."""


def _diag(psi):
    psi = np.asarray(psi, dtype=float)
    return psi if psi.ndim == 1 else np.diag(psi).copy()


@dataclass
class PrecoderConfig:
    """Rotation ``K`` and per-stream amplitudes of both users."""

    k: np.ndarray
    psi_a: np.ndarray
    psi_b: np.ndarray

    def __post_init__(self):
        self.k = np.asarray(self.k, dtype=float)
        self.psi_a = _diag(self.psi_a)
        self.psi_b = _diag(self.psi_b)
        n = self.k.shape[0]
        if self.k.shape != (n, n) or self.psi_a.shape != (n,) or self.psi_b.shape != (n,):
            raise ValueError("K must be square and match the stream count of psi_a, psi_b")
        if np.any(self.psi_a < 0) or np.any(self.psi_b < 0):
            raise ValueError("stream amplitudes must be nonnegative")

    @property
    def n_streams(self):
        return self.k.shape[0]


@dataclass
class PrecoderMatrices:
    f_a: np.ndarray
    f_b: np.ndarray


def validate_rotation(k, tol=ROTATION_TOL):
    """True when ``K`` is invertible and ``diag(K^{-1} K^{-T}) = 1`` within ``tol``."""
    k = np.asarray(k, dtype=float)
    try:
        check_invertible(k, "K")
    except np.linalg.LinAlgError:
        return False
    kinv = np.linalg.inv(k)
    return bool(np.all(np.abs(np.sum(kinv * kinv, axis=1) - 1.0) <= tol))


def normalize_rotation(k):
    """Rescale the columns of ``K`` so the rows of ``K^{-1}`` have unit norm."""
    k = np.asarray(k, dtype=float)
    kinv = np.linalg.inv(k)
    return k * np.linalg.norm(kinv, axis=1)


def naive_precoder(h, psi):
    """Channel inversion onto the identity rotation: ``H^T (H H^T)^{-1} Psi``."""
    h = np.asarray(h, dtype=float)
    return h.T @ gram_inverse(h) @ np.diag(_diag(psi))


def eda_precoder(h, k, psi):
    """``H^T (H H^T)^{-1} K Psi``; reduces exactly to :func:`naive_precoder` at ``K = I``."""
    check_invertible(np.asarray(k, dtype=float), "K")
    if not validate_rotation(k):
        raise ConstraintError("rows of K^{-1} must have unit norm")
    h = np.asarray(h, dtype=float)
    return h.T @ gram_inverse(h) @ (np.asarray(k, dtype=float) @ np.diag(_diag(psi)))


def precoders(cs, cfg):
    """Both users' precoders for a real-model ChannelSet."""
    return PrecoderMatrices(eda_precoder(cs.h_ar, cfg.k, cfg.psi_a), eda_precoder(cs.h_br, cfg.k, cfg.psi_b))


def alignment_residual(h, k, f, psi):
    """``max |K^{-1} H F - Psi|`` entrywise."""
    return float(np.max(np.abs(np.linalg.solve(k, h @ f) - np.diag(_diag(psi)))))


def stream_rates(psi_m, psi_a, psi_b):
    """Per-stream rates ``0.5 [log2(psi_m^2/(psi_a^2+psi_b^2) + psi_m^2)]^+``.

    Streams on which both amplitudes vanish carry nothing.
    """
    pm, pa, pb = (_diag(x) ** 2 for x in (psi_m, psi_a, psi_b))
    tot = pa + pb
    on = tot > 0
    x = np.where(on, pm / np.where(on, tot, 1.0), 0.0) + pm
    return np.where(x > 1.0, 0.5 * np.log2(np.maximum(x, 1.0)), 0.0)


def uplink_rates(psi_a, psi_b):
    """Computation rates of both users over the aligned streams."""
    if np.any(_diag(psi_a) < 0) or np.any(_diag(psi_b) < 0):
        raise ValueError("stream amplitudes must be nonnegative")
    return RatePair(float(stream_rates(psi_a, psi_a, psi_b).sum()), float(stream_rates(psi_b, psi_a, psi_b).sum()))


def downlink_rates(h_ra, h_rb, q_r):
    """Broadcast rates for relay covariance ``q_r``.

    A's message reaches B through ``h_rb`` and B's reaches A through ``h_ra``.
    """
    return RatePair(mimo_rate(h_rb, q_r), mimo_rate(h_ra, q_r))


def stream_costs(h_ar, h_br, k):
    """Power per unit squared amplitude on each stream: ``diag(K^T (H H^T)^{-1} K)``."""
    k = np.asarray(k, dtype=float)
    ca = np.einsum("ij,jk,ki->i", k.T, gram_inverse(h_ar), k)
    cb = np.einsum("ij,jk,ki->i", k.T, gram_inverse(h_br), k)
    return ca, cb


def transmit_power(h_ar, h_br, cfg):
    """Total uplink power ``tr(F_A F_A^T) + tr(F_B F_B^T)``."""
    ca, cb = stream_costs(h_ar, h_br, cfg.k)
    return float(np.sum(ca * cfg.psi_a**2) + np.sum(cb * cfg.psi_b**2))


def achievable_rate_pair(cs, pc, cfg, q_r):
    """End-to-end rates: the smaller of the uplink and downlink rate per user.

    ``cs`` may be complex; it is mapped to the real model first, and ``cfg``
    must match the real dimensions.
    """
    rc = unit_noise_real(normalize_noise(cs, pc))
    p = transmit_power(rc.h_ar, rc.h_br, cfg)
    if p > pc.p_t * (1 + 1e-8):
        raise ConstraintError(f"precoders use power {p:.6g} > budget {pc.p_t:.6g}")
    if np.trace(q_r) > pc.p_r * (1 + 1e-8):
        raise ConstraintError("relay covariance exceeds the relay power budget")
    ul = uplink_rates(cfg.psi_a, cfg.psi_b)
    dl = downlink_rates(rc.h_ra, rc.h_rb, q_r)
    return RatePair(min(ul.r_a, dl.r_a), min(ul.r_b, dl.r_b))
