"""Command-line harness: sweeps, robustness runs, config checks and oracles."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .experiments import (RobustnessSpec, emit_results, ensure_writable,
                          run_robustness, run_sweep)
from .scenario import ConfigError, load_scenario


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="scenario config file (YAML or JSON)")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seeds", default=None, help="comma-separated seed list override")
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    p.add_argument("--scheme", default=None,
                   help="run only this scheme (overrides solver.schemes)")


def _load(args) -> "Scenario":
    scn = load_scenario(args.config)
    overrides = {}
    if args.seeds:
        overrides["seeds"] = [int(s) for s in args.seeds.split(",")]
    if args.scheme:
        overrides.setdefault("solver", {})["schemes"] = [args.scheme]
    if overrides:
        from .scenario import make_scenario
        raw = scn.resolved()
        if "seeds" in overrides:
            raw["seeds"] = overrides["seeds"]
        if "solver" in overrides:
            raw["solver"]["schemes"] = overrides["solver"]["schemes"]
        scn = make_scenario(raw)
    return scn


def cmd_sweep(args) -> int:
    scn = _load(args)
    ensure_writable(args.out)
    table = run_sweep(scn, workers=args.workers,
                      trace_dir=args.out if args.trace else None)
    paths = emit_results(table, args.out, scn, name="sweep")
    print(f"wrote {paths['csv']} ({len(table.rows)} rows)")
    return 0


def cmd_robustness(args) -> int:
    scn = _load(args)
    ensure_writable(args.out)
    spec = None
    if args.family:
        spec = RobustnessSpec(
            family=args.family,
            magnitudes=[float(m) for m in args.magnitudes.split(",")],
            trials=args.trials,
            scheme=args.scheme or scn.raw["robustness"]["scheme"],
        )
    table = run_robustness(scn, spec)
    paths = emit_results(table, args.out, scn, name="robustness")
    print(f"wrote {paths['csv']} ({len(table.rows)} rows)")
    return 0


def cmd_validate(args) -> int:
    load_scenario(args.config)
    print("config ok")
    return 0


def cmd_oracle(args) -> int:
    """Run one of the independent verification oracles against the library."""
    from .channel import build_stats, even_user_angles
    from .geometry import build_layout, enumerate_patterns
    from .oracles import exhaustive_quantized, mc_snr_mean

    rng = np.random.default_rng(args.seed)
    if args.name == "snr-covariance-mc":
        from .rate import statistical_snr
        lay = build_layout(4, 4, 2, 2, 0.025, 0.1, bs_antennas=3)
        stats = build_stats(lay, even_user_angles(2), beta1=10.0, beta2=10.0, iota=0.05)
        v = np.exp(1j * rng.uniform(0, 2 * np.pi, lay.num_ms1))
        pred = np.array([statistical_snr(v, stats.xi[i]) for i in range(2)])
        emp = mc_snr_mean(stats, v, trials=args.trials, seed=args.seed)
        rel = np.max(np.abs(emp - pred) / pred)
        print(f"closed-form vs Monte Carlo SNR: max relative error {rel:.4%} "
              f"({'PASS' if rel < 0.02 else 'FAIL'} at 2%)")
        return 0 if rel < 0.02 else 1
    if args.name == "quantized-exhaustive":
        from .benchmarks import QuantizedSearchConfig, quantized_search
        lay = build_layout(2, 2, 1, 1, 0.05, 0.1, bs_antennas=2)
        pats = enumerate_patterns(lay)
        stats = build_stats(lay, even_user_angles(2), beta1=10.0, beta2=10.0, iota=0.5)
        qs = quantized_search(stats, pats, QuantizedSearchConfig(bits_ms1=2, bits_ms2=2),
                              seed=args.seed)
        oracle, _ = exhaustive_quantized(stats, pats, 2, 2, "min_rate")
        ok = abs(qs.objective_value - oracle) < 1e-12
        print(f"quantized search {qs.objective_value:.9f} vs exhaustive {oracle:.9f} "
              f"({'PASS' if ok else 'FAIL'})")
        return 0 if ok else 1
    raise ConfigError(f"unknown oracle {args.name!r}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="misopt",
                                     description="movable-surface link design harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="run the configured experiment sweep")
    _add_common(p)
    p.add_argument("--trace", action="store_true",
                   help="also write per-iteration solver traces per cell")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("robustness", help="evaluate a frozen design under injected errors")
    _add_common(p)
    p.add_argument("--family", default=None, help="error family override")
    p.add_argument("--magnitudes", default="0.0,0.1,0.2", help="comma-separated magnitudes")
    p.add_argument("--trials", type=int, default=200)
    p.set_defaults(func=cmd_robustness)

    p = sub.add_parser("validate-config", help="check a scenario config and exit")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("oracle", help="run an independent verification oracle")
    p.add_argument("--name", required=True,
                   choices=["snr-covariance-mc", "quantized-exhaustive"])
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_oracle)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
