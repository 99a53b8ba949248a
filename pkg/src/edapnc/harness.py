"""Monte-Carlo experiments over random channel realizations.

Each trial draws one channel from ``SeedSequence(seed, spawn_key=(trial,))``
and evaluates every requested scheme at every SNR and weight on that same
channel. Trials are independent, so they may run in worker processes; results
are always collected in trial order, which keeps the output identical for any
worker count.
"""

import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import __version__
from .benchmarks import UPLINK_WEIGHTS, dfnc_offer, equal_amplitude_solution, naive_eda_solution
from .capacity import DownlinkFrontier, HullOffer, PointOffer, capacity_offer
from .channel import generate_channel, power_config, trial_seed, unit_noise_real
from .optimizers import GAMMA_STEP, GridSpec, approx_solution_1, approx_solution_2, exhaustive_search_2d

SCHEMES = ("capacity_ub", "eda_exhaustive", "eda_as1", "eda_as2", "naive_eda", "dfnc")
# schemes whose uplink is an aligned-precoder optimization
PRECODED = ("eda_exhaustive", "eda_as1", "eda_as2", "naive_eda")


@dataclass(frozen=True)
class Scenario:
    """One experiment: antenna setup, SNR sweep, weights and Monte-Carlo size."""

    n_t: int = 2
    n_r: int = 2
    field: str = "real"
    reciprocal: bool = False
    snr_db: tuple = (15.0,)
    relay_offset_db: float = 0.0
    alphas: tuple = (0.5,)
    schemes: tuple = SCHEMES
    trials: int = 100
    seed: int = 2024
    gamma_step: float = GAMMA_STEP
    grid: GridSpec = GridSpec()
    uplink_weights: tuple = UPLINK_WEIGHTS

    def __post_init__(self):
        unknown = set(self.schemes) - set(SCHEMES)
        if unknown:
            raise ValueError(f"unknown schemes {sorted(unknown)}; choose from {SCHEMES}")
        if self.trials < 1:
            raise ValueError("trials must be positive")
        for a in tuple(self.alphas) + tuple(self.uplink_weights):
            if not 0.0 <= a <= 1.0:
                raise ValueError(f"weight {a} outside [0, 1]")
        if "eda_exhaustive" in self.schemes:
            n = self.n_r * (2 if self.field == "complex" else 1)
            if n != 2:
                raise ValueError(f"eda_exhaustive needs two real relay dimensions, scenario has {n}")

    def weights(self):
        """Uplink weights optimized per scheme: the fixed grid plus every target weight."""
        return tuple(sorted(set(float(w) for w in self.uplink_weights) | set(float(a) for a in self.alphas)))

    def channel(self, trial):
        return generate_channel(self.n_t, self.n_r, self.field, self.reciprocal, trial_seed(self.seed, trial))


@dataclass(frozen=True)
class CurvePoint:
    snr_db: float
    scheme: str
    alpha: float
    mean_r_a: float
    mean_r_b: float
    mean_sum: float
    stderr: float
    trials: int


@dataclass
class TrialTable:
    """Raw per-trial results.

    ``e2e`` and ``uplink`` have shape ``(trials, n_snr, n_alpha, n_scheme, 2)``
    holding ``(r_a, r_b)``; ``uplink`` is NaN for schemes without a precoder
    optimization. ``nonconverged`` counts iterative solves that hit their
    iteration cap.
    """

    scenario: Scenario
    e2e: np.ndarray
    uplink: np.ndarray
    nonconverged: int

    def index(self, scheme):
        return self.scenario.schemes.index(scheme)

    def sums(self, scheme, kind="e2e"):
        arr = self.e2e if kind == "e2e" else self.uplink
        return arr[:, :, :, self.index(scheme), :].sum(axis=-1)

    def weighted(self, scheme, kind="uplink"):
        arr = self.e2e if kind == "e2e" else self.uplink
        al = np.asarray(self.scenario.alphas)[None, None, :]
        x = arr[:, :, :, self.index(scheme), :]
        return al * x[..., 0] + (1 - al) * x[..., 1]


def _precoder(scheme, h_ar, h_br, p_t, alpha, sc):
    if scheme == "eda_exhaustive":
        return exhaustive_search_2d(h_ar, h_br, p_t, alpha, sc.grid)
    if scheme == "eda_as1":
        return approx_solution_1(h_ar, h_br, p_t, alpha, sc.gamma_step)
    if scheme == "eda_as2":
        return approx_solution_2(h_ar, h_br, p_t, alpha, sc.gamma_step)
    return naive_eda_solution(h_ar, h_br, p_t, alpha, sc.gamma_step)


def evaluate_trial(sc, trial):
    """All schemes on one channel draw. Returns ``(e2e, uplink, nonconverged)``.

    Each precoded scheme is optimized at every uplink weight of the scenario;
    the convex hull of those rate pairs is its uplink region, which is then
    matched against the downlink frontier for each target weight.
    """
    rc = unit_noise_real(sc.channel(trial))
    shape = (len(sc.snr_db), len(sc.alphas), len(sc.schemes), 2)
    e2e = np.zeros(shape)
    ul = np.full(shape, np.nan)
    bad = 0
    weights = sc.weights()
    for i, snr in enumerate(sc.snr_db):
        pc = power_config(snr, snr + sc.relay_offset_db)
        frontier = DownlinkFrontier(rc.h_ra, rc.h_rb, pc.p_r)
        for k, scheme in enumerate(sc.schemes):
            if scheme == "capacity_ub":
                offer = capacity_offer(rc.h_ar, rc.h_br, pc.p_t)
            elif scheme == "dfnc":
                offer, nb = dfnc_offer(rc.h_ar, rc.h_br, pc.p_t, weights)
                bad += nb
            else:
                sols = {w: _precoder(scheme, rc.h_ar, rc.h_br, pc.p_t, w, sc) for w in weights}
                offer = HullOffer.from_points([tuple(s.rates) for s in sols.values()])
                for j, alpha in enumerate(sc.alphas):
                    ul[i, j, k] = tuple(sols[float(alpha)].rates)
            for j, alpha in enumerate(sc.alphas):
                e2e[i, j, k] = tuple(frontier.match(offer, alpha).rates)
        bad += frontier.nonconverged
    return e2e, ul, bad


def _run_chunk(args):
    sc, trials = args
    return [evaluate_trial(sc, t) for t in trials]


def default_workers():
    return max(1, min(os.cpu_count() or 1, 8))


def run_trials(sc, workers=1):
    """Evaluate all trials, serially or in ``workers`` processes."""
    ids = list(range(sc.trials))
    if workers <= 1 or sc.trials == 1:
        results = _run_chunk((sc, ids))
    else:
        n_chunks = min(sc.trials, 4 * workers)
        chunks = [ids[c::n_chunks] for c in range(n_chunks)]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_run_chunk, [(sc, c) for c in chunks]))
        results = [None] * sc.trials
        for c, part in zip(chunks, parts):
            for t, r in zip(c, part):
                results[t] = r
    e2e = np.stack([r[0] for r in results])
    ul = np.stack([r[1] for r in results])
    return TrialTable(sc, e2e, ul, int(sum(r[2] for r in results)))


def summarize(table):
    """Mean rates and standard error of the sum rate per (SNR, scheme, weight)."""
    sc = table.scenario
    out = []
    n = sc.trials
    for i, snr in enumerate(sc.snr_db):
        for k, scheme in enumerate(sc.schemes):
            for j, alpha in enumerate(sc.alphas):
                x = table.e2e[:, i, j, k, :]
                s = x.sum(axis=1)
                se = float(np.std(s, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
                out.append(CurvePoint(float(snr), scheme, float(alpha), float(x[:, 0].mean()),
                                      float(x[:, 1].mean()), float(s.mean()), se, n))
    return out


def run_sum_rate_curve(sc, workers=1):
    """Average end-to-end rates versus SNR for every scheme."""
    return summarize(run_trials(sc, workers))


def run_rate_region(sc, alphas, workers=1):
    """Average rate pairs traced over ``alphas`` (one point per weight)."""
    return summarize(run_trials(replace(sc, alphas=tuple(float(a) for a in alphas)), workers))


# -- asymptotic gap --------------------------------------------------------------


@dataclass(frozen=True)
class GapPoint:
    n_t: int
    snr_db: float
    mean_gap_as2: float
    stderr_as2: float
    mean_gap_equal: float
    stderr_equal: float
    trials: int


def gap_on_channel(rc, snr_db, weights=UPLINK_WEIGHTS, gamma_step=GAMMA_STEP, relay_offset_db=0.0):
    """Sum-rate gaps ``(UB - aligned, UB - equal amplitude)`` at weight 1/2 on one real-model channel.

    Also returns the number of non-converged downlink solves.
    """
    pc = power_config(snr_db, snr_db + relay_offset_db)
    frontier = DownlinkFrontier(rc.h_ra, rc.h_rb, pc.p_r)
    ub = frontier.match(capacity_offer(rc.h_ar, rc.h_br, pc.p_t), 0.5).rates.total
    pts = [tuple(approx_solution_2(rc.h_ar, rc.h_br, pc.p_t, w, gamma_step).rates) for w in weights]
    eq = equal_amplitude_solution(rc.h_ar, rc.h_br, pc.p_t, 0.5)
    r2 = frontier.match(HullOffer.from_points(pts), 0.5).rates.total
    req = frontier.match(PointOffer(*eq.rates), 0.5).rates.total
    return ub - r2, ub - req, frontier.nonconverged


def _gap_trial(args):
    sc, trial = args
    return gap_on_channel(unit_noise_real(sc.channel(trial)), sc.snr_db[0], sc.weights(), sc.gamma_step,
                          sc.relay_offset_db)


def run_asymptotic_gap(n_t_values, n_r=2, snr_db=15.0, trials=500, seed=2024, field="real", workers=1,
                       gamma_step=GAMMA_STEP):
    """Mean sum-rate gap to the upper bound versus the number of user antennas.

    Compares the two-stage aligned design with equal-amplitude inversion.
    """
    out = []
    bad = 0
    for n_t in n_t_values:
        sc = Scenario(n_t=n_t, n_r=n_r, field=field, snr_db=(snr_db,), trials=trials, seed=seed,
                      schemes=("capacity_ub", "eda_as2"), gamma_step=gamma_step)
        args = [(sc, t) for t in range(trials)]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as ex:
                res = list(ex.map(_gap_trial, args, chunksize=max(1, trials // (4 * workers))))
        else:
            res = [_gap_trial(a) for a in args]
        g = np.array([(r[0], r[1]) for r in res])
        bad += sum(r[2] for r in res)
        se = np.std(g, axis=0, ddof=1) / np.sqrt(trials) if trials > 1 else np.zeros(2)
        out.append(GapPoint(int(n_t), float(snr_db), float(g[:, 0].mean()), float(se[0]),
                            float(g[:, 1].mean()), float(se[1]), trials))
    return out, bad


# -- CSV output --------------------------------------------------------------------

CURVE_COLUMNS = ("snr_db", "scheme", "alpha", "mean_r_a", "mean_r_b", "mean_sum", "stderr", "trials")
GAP_COLUMNS = ("n_t", "snr_db", "mean_gap_as2", "stderr_as2", "mean_gap_equal", "stderr_equal", "trials")


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{v:.6f}"


def to_csv(rows, columns, meta):
    """Fixed-precision CSV with ``# key: value`` metadata lines on top."""
    buf = io.StringIO()
    buf.write(f"# edapnc {__version__}\n")
    for k in sorted(meta):
        buf.write(f"# {k}: {meta[k]}\n")
    buf.write(",".join(columns) + "\n")
    for r in rows:
        d = asdict(r)
        buf.write(",".join(_fmt(d[c]) for c in columns) + "\n")
    return buf.getvalue()


def scenario_meta(sc):
    g = sc.grid
    return {
        "seed": sc.seed,
        "n_t": sc.n_t,
        "n_r": sc.n_r,
        "field": sc.field,
        "reciprocal": sc.reciprocal,
        "trials": sc.trials,
        "relay_offset_db": sc.relay_offset_db,
        "gamma_step": sc.gamma_step,
        "grid": f"angles={g.n_angle} power={g.n_power} starts={g.n_starts} refine={g.refine}x{g.refine_rounds} "
                f"polish={g.polish_power}/{g.polish_golden} unitary_only={g.unitary_only}",
        "as2_tol": "1e-06",
        "pga_tol": "1e-10",
    }
