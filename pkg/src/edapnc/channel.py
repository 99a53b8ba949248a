"""Channel realizations, power bookkeeping and rate containers for a MIMO
two-way relay channel (TWRC).

Two users with ``n_t`` antennas each talk through a relay with ``n_r``
antennas. Uplink matrices are ``n_r x n_t``, downlink matrices ``n_t x n_r``.
All rates in the package are in bits per channel use (log base 2).
"""

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

RANK_TOL = 1e-10
FIELDS = ("real", "complex")
FORMAT_TAG = "edapnc-channel v1"


class DimensionError(ValueError):
    """Raised for antenna configurations outside ``n_t >= n_r >= 1``."""


class FieldError(TypeError):
    """Raised when an operation receives the wrong real/complex field."""


def _full_row_rank(h, tol=RANK_TOL):
    s = np.linalg.svd(h, compute_uv=False)
    return s[-1] > tol * s[0]


@dataclass(frozen=True)
class ChannelSet:
    """The four channel matrices of one TWRC realization."""

    h_ar: np.ndarray
    h_br: np.ndarray
    h_ra: np.ndarray
    h_rb: np.ndarray
    n_t: int
    n_r: int
    field_tag: str = "real"
    redraws: int = 0

    def __post_init__(self):
        if self.field_tag not in FIELDS:
            raise FieldError(f"field_tag must be one of {FIELDS}, got {self.field_tag!r}")
        if not (self.n_t >= self.n_r >= 1):
            raise DimensionError(f"need n_t >= n_r >= 1, got n_t={self.n_t}, n_r={self.n_r}")
        up = (self.n_r, self.n_t)
        down = (self.n_t, self.n_r)
        for name, shape in (("h_ar", up), ("h_br", up), ("h_ra", down), ("h_rb", down)):
            mat = getattr(self, name)
            if mat.shape != shape:
                raise DimensionError(f"{name} has shape {mat.shape}, expected {shape}")
        for name in ("h_ar", "h_br"):
            if not _full_row_rank(getattr(self, name)):
                raise np.linalg.LinAlgError(f"{name} is not of full row rank")

    @property
    def is_complex(self):
        return self.field_tag == "complex"


@dataclass(frozen=True)
class PowerConfig:
    """Transmit powers and noise variances (all linear scale).

    ``p_t`` is the total uplink power shared by both users, ``p_r`` the relay
    power. The rate formulas assume unit noise; use :func:`normalize_noise`
    to fold non-unit variances into the channel matrices.
    """

    p_t: float
    p_r: float
    sigma_r2: float = 1.0
    sigma_a2: float = 1.0
    sigma_b2: float = 1.0

    def __post_init__(self):
        for name in ("p_t", "p_r", "sigma_r2", "sigma_a2", "sigma_b2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def snr_db(self):
        return 10 * np.log10(self.p_t / (2 * self.sigma_r2))


@dataclass(frozen=True)
class RatePair:
    """Per-user rates in bits per channel use."""

    r_a: float
    r_b: float

    def __post_init__(self):
        if self.r_a < 0 or self.r_b < 0:
            raise ValueError(f"rates must be nonnegative, got ({self.r_a}, {self.r_b})")

    @property
    def total(self):
        return self.r_a + self.r_b

    def weighted(self, alpha):
        return alpha * self.r_a + (1 - alpha) * self.r_b

    def __iter__(self):
        yield self.r_a
        yield self.r_b


def make_rng(seed):
    """Return a PCG64 generator for ``seed``.

    Accepts an int, a ``SeedSequence`` or an existing ``Generator``.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def trial_seed(master_seed, trial):
    """Sub-seed for one trial: ``SeedSequence(master_seed, spawn_key=(trial,))``.

    This is the same stream ``SeedSequence(master_seed).spawn(n)[trial]`` would
    yield, so serial and parallel runs draw identical channels.
    """
    return np.random.SeedSequence(int(master_seed), spawn_key=(int(trial),))


def _draw(rng, shape, field_tag):
    if field_tag == "real":
        return rng.standard_normal(shape)
    scale = np.sqrt(0.5)
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return scale * (re + 1j * im)


def generate_channel(n_t, n_r, field="real", reciprocal=False, rng_seed=0):
    """Draw one i.i.d. Gaussian TWRC realization.

    Entries are N(0, 1) for ``field="real"`` and CN(0, 1) for ``"complex"``.
    With ``reciprocal=True`` the downlink matrices are the plain transposes of
    the uplink ones. Rank-deficient uplink draws are rejected and counted in
    ``ChannelSet.redraws``.
    """
    if field not in FIELDS:
        raise FieldError(f"field must be one of {FIELDS}, got {field!r}")
    if not (int(n_t) >= int(n_r) >= 1):
        raise DimensionError(f"need n_t >= n_r >= 1, got n_t={n_t}, n_r={n_r}")
    rng = make_rng(rng_seed)
    redraws = 0
    while True:
        h_ar = _draw(rng, (n_r, n_t), field)
        h_br = _draw(rng, (n_r, n_t), field)
        if _full_row_rank(h_ar) and _full_row_rank(h_br):
            break
        redraws += 1
    if reciprocal:
        h_ra, h_rb = h_ar.T.copy(), h_br.T.copy()
    else:
        h_ra = _draw(rng, (n_t, n_r), field)
        h_rb = _draw(rng, (n_t, n_r), field)
    return ChannelSet(h_ar, h_br, h_ra, h_rb, int(n_t), int(n_r), field, redraws)


def real_block(mat):
    """``[[Re, -Im], [Im, Re]]`` expansion of a complex matrix."""
    mat = np.asarray(mat)
    re, im = mat.real, mat.imag
    return np.block([[re, -im], [im, re]])


def complex_to_real(cs):
    """Real-valued equivalent of a complex ChannelSet (dimensions doubled)."""
    if not cs.is_complex:
        raise FieldError("complex_to_real expects a complex ChannelSet")
    return ChannelSet(
        real_block(cs.h_ar),
        real_block(cs.h_br),
        real_block(cs.h_ra),
        real_block(cs.h_rb),
        2 * cs.n_t,
        2 * cs.n_r,
        "real",
        cs.redraws,
    )


def unit_noise_real(cs):
    """Real model with unit noise per real dimension.

    A CN(0, 1) noise sample has real and imaginary parts of variance 1/2, so
    the block expansion is scaled by sqrt(2). With covariances expanded as
    ``0.5 * real_block(Q)`` the real-model rate ``0.5 * log2 det`` then equals
    the complex rate in bits per complex channel use. Real inputs pass through.
    """
    if not cs.is_complex:
        return cs
    rs = complex_to_real(cs)
    k = np.sqrt(2.0)
    return replace(rs, h_ar=k * rs.h_ar, h_br=k * rs.h_br, h_ra=k * rs.h_ra, h_rb=k * rs.h_rb)


def normalize_noise(cs, pc):
    """Scale the channels so every receiver sees unit-variance noise."""
    sr = np.sqrt(pc.sigma_r2)
    return replace(
        cs,
        h_ar=cs.h_ar / sr,
        h_br=cs.h_br / sr,
        h_ra=cs.h_ra / np.sqrt(pc.sigma_a2),
        h_rb=cs.h_rb / np.sqrt(pc.sigma_b2),
    )


def snr_to_power(snr_db, sigma_r2=1.0):
    """Total uplink power for an average per-user SNR of ``snr_db``."""
    if not sigma_r2 > 0:
        raise ValueError("sigma_r2 must be positive")
    return 2.0 * sigma_r2 * 10.0 ** (snr_db / 10.0)


def power_config(snr_db, snr_r_db=None):
    """Unit-noise PowerConfig with relay SNR defaulting to the user SNR."""
    if snr_r_db is None:
        snr_r_db = snr_db
    return PowerConfig(p_t=snr_to_power(snr_db), p_r=10.0 ** (snr_r_db / 10.0))


# -- plain-text exchange format ---------------------------------------------

_MATRICES = ("h_ar", "h_br", "h_ra", "h_rb")


def _fmt(x, is_complex):
    if is_complex:
        return f"{x.real:.17g}{x.imag:+.17g}j"
    return f"{x:.17g}"


def dumps_channel(cs):
    lines = [f"# {FORMAT_TAG}", f"n_t {cs.n_t}", f"n_r {cs.n_r}", f"field {cs.field_tag}"]
    for name in _MATRICES:
        mat = getattr(cs, name)
        lines.append(f"{name} {mat.shape[0]} {mat.shape[1]}")
        for row in mat:
            lines.append(" ".join(_fmt(x, cs.is_complex) for x in row))
    return "\n".join(lines) + "\n"


def loads_channel(text):
    rows = [ln.strip() for ln in text.splitlines()]
    rows = [ln for ln in rows if ln and not ln.startswith("#")]
    it = iter(rows)
    header = {}
    for key in ("n_t", "n_r", "field"):
        k, v = next(it).split()
        if k != key:
            raise ValueError(f"expected header key {key!r}, got {k!r}")
        header[key] = v
    is_complex = header["field"] == "complex"
    conv = complex if is_complex else float
    mats = {}
    for name in _MATRICES:
        k, nrow, ncol = next(it).split()
        if k != name:
            raise ValueError(f"expected matrix {name!r}, got {k!r}")
        data = [[conv(tok) for tok in next(it).split()] for _ in range(int(nrow))]
        mats[name] = np.array(data, dtype=complex if is_complex else float).reshape(int(nrow), int(ncol))
    return ChannelSet(n_t=int(header["n_t"]), n_r=int(header["n_r"]), field_tag=header["field"], **mats)


def save_channel(cs, path):
    Path(path).write_text(dumps_channel(cs))


def load_channel(path):
    return loads_channel(Path(path).read_text())
