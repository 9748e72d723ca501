"""Operator entry point: run one scenario or a rate sweep.

Flags override scenario-file values.  Exit codes: 0 success, 2 config
error (missing file, parse error, validation error - each with its own
message), 3 I/O error writing output.

Sweep seeding: each sweep point runs independently with a seed derived
from the base seed and the rate, ``splitmix64(seed XOR (round(rate*1000)
* 0x9E3779B97F4A7C15))`` truncated to 63 bits, so adding or removing a
rate never changes the other rows.  ``sweep`` at a single rate r is
byte-identical to ``run --rate r --seed <derived>``.
"""

from __future__ import annotations

import argparse
import sys
from multiprocessing import Pool
from pathlib import Path

from sipsim import __version__
from sipsim.metrics import export
from sipsim.scenario import ConfigError, ScenarioConfig, parse_file, run_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3

DEFAULT_SWEEP = [100.0, 300.0, 500.0, 700.0, 900.0, 1100.0, 1300.0, 1500.0, 1700.0]

_M64 = (1 << 64) - 1


def derive_seed(base_seed: int, rate_cps: float) -> int:
    """Mix the base seed with a rate (splitmix64 finalizer, 63-bit result)."""
    x = (base_seed ^ (round(rate_cps * 1000) * 0x9E3779B97F4A7C15)) & _M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _M64
    x ^= x >> 31
    return x & 0x7FFFFFFFFFFFFFFF


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sipsim",
        description="Discrete-event simulator of SIP overload in a dual-proxy topology",
    )
    parser.add_argument("--version", action="version", version=f"sipsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="scenario file (key = value lines)")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("--control", choices=["on", "off"], help="window controller at P1")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", choices=["csv", "json"], default="csv")
        p.add_argument("--duration", type=float, help="virtual duration in seconds")
        p.add_argument("--warmup", type=float, help="measurement warmup in seconds")

    p_run = sub.add_parser("run", help="run one scenario at one offered rate")
    common(p_run)
    p_run.add_argument("--rate", type=float, help="offered rate in cps")

    p_sweep = sub.add_parser("sweep", help="run one scenario per rate in a grid")
    common(p_sweep)
    p_sweep.add_argument("--sweep", help="comma-separated rates in cps")
    p_sweep.add_argument("--plot-script", help="also emit a gnuplot script for the CSV")
    p_sweep.add_argument("--jobs", type=int, default=1, help="parallel sweep workers")
    return parser


def _load_config(args) -> ScenarioConfig:
    path = Path(args.config)
    if not path.is_file():
        raise ConfigError([f"config file not found: {path}"])
    cfg = parse_file(path)
    overrides = {}
    if getattr(args, "rate", None) is not None:
        overrides["offered_rate_cps"] = args.rate
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.control is not None:
        overrides["control_enabled"] = args.control == "on"
    if args.duration is not None:
        overrides["duration_s"] = args.duration
    if args.warmup is not None:
        overrides["warmup_s"] = args.warmup
    return cfg.with_overrides(**overrides)


def _write_output(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise _IoFailure(f"cannot write {out}: {exc}") from exc


class _IoFailure(Exception):
    pass


def _sweep_point(cfg: ScenarioConfig):
    return run_scenario(cfg)


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    report = run_scenario(cfg)
    _write_output(export([report], args.format), args.out)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _load_config(args)
    if args.sweep:
        try:
            rates = [float(x) for x in args.sweep.split(",") if x.strip()]
        except ValueError:
            raise ConfigError([f"--sweep: not a comma-separated number list: {args.sweep!r}"])
        if not rates:
            raise ConfigError(["--sweep: rate list is empty"])
    elif cfg.sweep_cps:
        rates = list(cfg.sweep_cps)
    else:
        rates = list(DEFAULT_SWEEP)
    bad = [r for r in rates if r <= 0]
    if bad:
        raise ConfigError([f"sweep rates must be > 0, got {bad}"])

    points = [
        cfg.with_overrides(
            offered_rate_cps=r, seed=derive_seed(cfg.seed, r), sweep_cps=None
        )
        for r in sorted(rates)
    ]
    if args.jobs > 1:
        with Pool(args.jobs) as pool:
            reports = pool.map(_sweep_point, points)
    else:
        reports = [_sweep_point(p) for p in points]
    _write_output(export(reports, args.format), args.out)
    if args.plot_script:
        if args.format != "csv" or args.out is None:
            raise ConfigError(["--plot-script requires --format csv and --out FILE"])
        _write_output(_gnuplot_script(args.out), args.plot_script)
    return EXIT_OK


def _gnuplot_script(csv_path: str) -> str:
    """Gnuplot commands reproducing the three standard sweep views."""
    base = Path(csv_path).stem
    return f"""\
# gnuplot script generated by sipsim; renders {csv_path}
set datafile separator ","
set key autotitle columnhead
set xlabel "offered load (cps)"
set grid

set terminal pngcairo size 800,600
set output "{base}_throughput.png"
set ylabel "throughput (cps)"
plot "{csv_path}" using 1:2 with linespoints title "throughput"

set output "{base}_delay.png"
set ylabel "call setup delay (ms)"
set logscale y
plot "{csv_path}" using 1:3 with linespoints title "mean setup delay"
unset logscale y

set output "{base}_retx.png"
set ylabel "retransmissions per second"
plot "{csv_path}" using 1:5 with linespoints title "INVITE", \\
     "{csv_path}" using 1:6 with linespoints title "BYE"
unset output
"""


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_sweep(args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"sipsim: config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except _IoFailure as exc:
        print(f"sipsim: io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
