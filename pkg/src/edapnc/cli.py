"""Command-line entry point: ``edapnc <sum-rate|region|asymptotic|single> ...``."""

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .benchmarks import naive_eda_solution
from .capacity import DownlinkFrontier, PointOffer, capacity_offer
from .channel import generate_channel, load_channel, power_config, save_channel, unit_noise_real
from .config import ConfigError, load_config, scenario_from_config
from .eda import alignment_residual, downlink_rates, precoders, transmit_power
from .harness import (CURVE_COLUMNS, GAP_COLUMNS, run_asymptotic_gap, run_trials, scenario_meta, summarize,
                      to_csv)
from .optimizers import approx_solution_1, approx_solution_2, exhaustive_search_2d

OUTPUT_ENV = "EDAPNC_OUTPUT_DIR"


def _output_path(arg, cfg, default):
    name = Path(arg or cfg.get("output") or default)
    if name.is_absolute():
        return name
    return Path(os.environ.get(OUTPUT_ENV, ".")) / name


def _write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _finish(path, n_rows, bad, strict):
    print(f"wrote {n_rows} rows to {path}; non-converged solves: {bad}", file=sys.stderr)
    if bad and strict:
        print("error: solver non-convergence with --strict", file=sys.stderr)
        return 3
    return 0


def _cmd_curve(args, region=False):
    cfg = load_config(args.config)
    sc = scenario_from_config(cfg, trials=args.trials, seed=args.seed)
    workers = args.workers or int(cfg.get("workers", 1))
    table = run_trials(sc, workers)
    rows = summarize(table)
    meta = scenario_meta(sc)
    meta["experiment"] = "region" if region else "sum-rate"
    path = _output_path(args.output, cfg, f"{meta['experiment']}.csv")
    _write(path, to_csv(rows, CURVE_COLUMNS, meta))
    return _finish(path, len(rows), table.nonconverged, args.strict)


def _cmd_asymptotic(args):
    cfg = load_config(args.config)
    sc = scenario_from_config(cfg, trials=args.trials, seed=args.seed)
    n_t_values = [int(v) for v in cfg.get("n_t_values", [sc.n_r, sc.n_r + 1, sc.n_r + 2])]
    if any(n < sc.n_r for n in n_t_values) or n_t_values != sorted(n_t_values):
        raise ConfigError("n_t_values must be ascending and each at least n_r")
    workers = args.workers or int(cfg.get("workers", 1))
    rows, bad = run_asymptotic_gap(n_t_values, sc.n_r, sc.snr_db[0], sc.trials, sc.seed, sc.field, workers,
                                   sc.gamma_step)
    meta = scenario_meta(sc)
    meta["experiment"] = "asymptotic"
    meta["n_t_values"] = n_t_values
    path = _output_path(args.output, cfg, "asymptotic.csv")
    _write(path, to_csv(rows, GAP_COLUMNS, meta))
    return _finish(path, len(rows), bad, args.strict)


def _matrix(name, m):
    body = np.array2string(np.asarray(m), precision=6, suppress_small=False, max_line_width=120)
    return f"{name}:\n" + "\n".join("  " + ln for ln in body.splitlines())


def _cmd_single(args):
    if args.channel_file:
        cs = load_channel(args.channel_file)
    else:
        cs = generate_channel(args.nt, args.nr, args.field, args.reciprocal, args.seed)
    if args.save_channel:
        save_channel(cs, args.save_channel)
    rc = unit_noise_real(cs)
    pc = power_config(args.snr)
    if args.method == "exhaustive":
        sol = exhaustive_search_2d(rc.h_ar, rc.h_br, pc.p_t, args.alpha)
    elif args.method == "as1":
        sol = approx_solution_1(rc.h_ar, rc.h_br, pc.p_t, args.alpha)
    elif args.method == "as2":
        sol = approx_solution_2(rc.h_ar, rc.h_br, pc.p_t, args.alpha)
    else:
        sol = naive_eda_solution(rc.h_ar, rc.h_br, pc.p_t, args.alpha)
    cfg = sol.cfg
    pm = precoders(rc, cfg)
    frontier = DownlinkFrontier(rc.h_ra, rc.h_rb, pc.p_r)
    match = frontier.match(PointOffer(*sol.rates), args.alpha)
    ub = frontier.match(capacity_offer(rc.h_ar, rc.h_br, pc.p_t), args.alpha)
    dl = downlink_rates(rc.h_ra, rc.h_rb, match.q_r)
    res_a = alignment_residual(rc.h_ar, cfg.k, pm.f_a, cfg.psi_a)
    res_b = alignment_residual(rc.h_br, cfg.k, pm.f_b, cfg.psi_b)
    used = transmit_power(rc.h_ar, rc.h_br, cfg)
    direct = float(np.trace(pm.f_a @ pm.f_a.T) + np.trace(pm.f_b @ pm.f_b.T))
    kinv = np.linalg.inv(cfg.k)
    lines = [
        f"edapnc {__version__}",
        f"channel: n_t={cs.n_t} n_r={cs.n_r} field={cs.field_tag} seed={args.seed} redraws={cs.redraws}",
        f"real model: n_t={rc.n_t} n_r={rc.n_r}",
        f"snr_db: {args.snr:g}  p_t: {pc.p_t:.6f}  p_r: {pc.p_r:.6f}",
        f"method: {sol.method}  alpha: {args.alpha:g}  gamma: {sol.gamma:.6f}",
        _matrix("K", cfg.k),
        f"row norms of K^-1: {np.array2string(np.linalg.norm(kinv, axis=1), precision=12)}",
        f"psi_a: {np.array2string(cfg.psi_a, precision=6)}",
        f"psi_b: {np.array2string(cfg.psi_b, precision=6)}",
        f"uplink rates: r_a={sol.rates.r_a:.6f} r_b={sol.rates.r_b:.6f} weighted={sol.wsr:.6f}",
        f"downlink rates at matched relay covariance: r_a={dl.r_a:.6f} r_b={dl.r_b:.6f}",
        f"end-to-end rates: r_a={match.rates.r_a:.6f} r_b={match.rates.r_b:.6f} sum={match.rates.total:.6f}",
        f"capacity upper bound: r_a={ub.rates.r_a:.6f} r_b={ub.rates.r_b:.6f} sum={ub.rates.total:.6f}",
        f"power: used={used:.9f} budget={pc.p_t:.9f} residual={pc.p_t - used:.3e}",
        f"power (trace of precoders) residual vs stream prices: {abs(direct - used):.3e}",
        f"relay power: trace={np.trace(match.q_r):.9f} budget={pc.p_r:.9f}",
        f"alignment residual: A={res_a:.3e} B={res_b:.3e} max={max(res_a, res_b):.3e}",
    ]
    print("\n".join(lines))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="edapnc", description="Aligned PNC precoding over MIMO two-way relay channels")
    p.add_argument("--version", action="version", version=f"edapnc {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, hlp in (("sum-rate", "average sum rate versus SNR"), ("region", "average rate pairs over weights"),
                      ("asymptotic", "gap to the upper bound versus user antennas")):
        s = sub.add_parser(name, help=hlp)
        s.add_argument("--config", required=True, help="YAML config file")
        s.add_argument("--output", help=f"CSV path (relative paths go under ${OUTPUT_ENV})")
        s.add_argument("--workers", type=int, default=None, help="worker processes")
        s.add_argument("--trials", type=int, default=None, help="override the trial count")
        s.add_argument("--seed", type=int, default=None, help="override the master seed")
        s.add_argument("--strict", action="store_true", help="fail if any solve did not converge")
    s = sub.add_parser("single", help="one realization with a full diagnostic dump")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--nt", type=int, default=2)
    s.add_argument("--nr", type=int, default=2)
    s.add_argument("--snr", type=float, default=15.0)
    s.add_argument("--alpha", type=float, default=0.5)
    s.add_argument("--field", choices=("real", "complex"), default="real")
    s.add_argument("--reciprocal", action="store_true")
    s.add_argument("--method", choices=("exhaustive", "as1", "as2", "naive"), default="as2")
    s.add_argument("--channel-file", help="read the channel from this file instead of drawing it")
    s.add_argument("--save-channel", help="write the channel used to this file")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "single":
            if not 0.0 <= args.alpha <= 1.0:
                raise ConfigError("--alpha must lie in [0, 1]")
            return _cmd_single(args)
        if args.command == "asymptotic":
            return _cmd_asymptotic(args)
        return _cmd_curve(args, region=args.command == "region")
    except ConfigError as exc:
        print(f"edapnc: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, np.linalg.LinAlgError) as exc:
        print(f"edapnc: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
