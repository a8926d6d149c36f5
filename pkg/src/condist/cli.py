"""``condist`` command-line front end.

Exit codes: 0 success, 1 configuration or usage error, 2 runtime or
numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import fixtures as fx
from . import simulate
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .kernels import FAMILIES, UnivariateKernel
from .quadrature import QuadratureError, gk15

EXPERIMENTS = ("estimate", "bias", "rates", "alr", "equicont", "clt")
COMMANDS = EXPERIMENTS + ("kernels-check", "fixtures")
SMOKE_R = 5


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _threads(text: str):
    if text == "auto":
        return "auto"
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a positive integer or 'auto'") from None
    if v < 1:
        raise argparse.ArgumentTypeError("expected a positive integer or 'auto'")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError("expected an unsigned 64-bit integer") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("expected an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="condist",
                     description="Local linear conditional-CDF estimation experiments.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", type=Path, help="JSON experiment config (defaults if omitted)")
        p.add_argument("--out", type=Path, help="output directory (env CONDIST_OUT, else ./condist_out)")
        p.add_argument("--seed", type=_seed, help="override the base seed")
        p.add_argument("--threads", type=_threads, default=1, help="worker processes, N or 'auto'")
        p.add_argument("--smoke", action="store_true", help=f"override replications to {SMOKE_R}")
    sub.add_parser("kernels-check", help="print kernel moments against quadrature")
    p = sub.add_parser("fixtures", help="regenerate oracle fixtures and compare with the stored copy")
    p.add_argument("--out", type=Path, help="output directory (env CONDIST_OUT, else ./condist_out)")
    p.add_argument("--write", action="store_true", help="overwrite the packaged fixture file")
    return parser


def _out_dir(arg) -> Path:
    if arg is not None:
        return Path(arg)
    return Path(os.environ.get("CONDIST_OUT") or "condist_out")


def _config(args) -> ExperimentConfig:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if args.config is None:
            cfg = parse_config({}, args.command)
        else:
            cfg = load_config(args.config, args.command)
        over = {}
        if args.seed is not None:
            over["seed"] = args.seed
        if args.smoke:
            over["replications"] = SMOKE_R
        cfg = cfg.with_overrides(**over)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return cfg


def _summary(rep) -> str:
    s = rep.summary
    name = rep.experiment
    if name == "estimate":
        return f"estimate: n={s['n']} sup_error={s['sup_error']:.4g} failed_columns={s['failed_columns']}"
    if name == "bias":
        return (f"bias: max ratio={s['max_ratio']:.3g} (threshold {s['ratio_threshold']}), "
                f"boundary general form better at {s['boundary_general_better']}/{s['boundary_points']}")
    if name == "rates":
        parts = [f"{e} slope={v['slope']:.3f} (se {v['slope_se']:.3f}) excluded={v['excluded']}"
                 for e, v in s["estimators"].items()]
        return "rates: " + "; ".join(parts)
    if name == "alr":
        return (f"alr: normalized max/min={s['max_over_min']:.3g}, ratio decreasing="
                f"{s['ratio_strictly_decreasing']} excluded={s['excluded']}")
    if name == "equicont":
        return f"equicont: normalized max/min={s['max_over_min']:.3g} excluded={s['excluded']}"
    parts = []
    for n, e in s["per_n"].items():
        parts.append(f"n={n} var ratio={e['variance_ratio']:.3f} skew={e['skewness']:.3f} "
                     f"kurt={e['excess_kurtosis']:.3f} mean err={e['mean_error_in_se']:.2f} se")
    return "clt: " + "; ".join(parts)


def _run_experiment(args) -> int:
    cfg = _config(args)
    out = _out_dir(args.out)
    threads = simulate.resolve_threads(args.threads)
    cmd = args.command
    surf = None
    if cmd == "estimate":
        rep, surf = simulate.run_estimate(cfg)
    elif cmd == "bias":
        rep = simulate.run_bias_experiment(cfg, threads=threads)
    elif cmd == "rates":
        rep = simulate.run_rate_experiment(cfg, threads=threads)
    elif cmd == "alr":
        rep = simulate.run_alr_experiment(cfg, threads=threads)
    elif cmd == "equicont":
        rep = simulate.run_equicontinuity_experiment(cfg, threads=threads)
    else:
        rep = simulate.run_clt_experiment(cfg, threads=threads)
    paths = rep.write(out)
    if surf is not None:
        surf.to_csv(out / "estimate_surface.csv")
        paths.append(out / "estimate_surface.csv")
    print(f"{_summary(rep)} -> {paths[0]}")
    return 0


def kernels_check(stream=None) -> int:
    """Closed-form kernel moments and CDFs against adaptive quadrature."""
    stream = sys.stdout if stream is None else stream
    header = f"{'family':<13}{'int k':>12}{'kappa2':>12}{'quad kappa2':>14}{'int k^2':>12}{'sup':>8}{'cdf dev':>11}"
    print(header, file=stream)
    worst = 0.0
    probes = np.linspace(-1.2, 1.2, 49)
    for fam in FAMILIES:
        k = UnivariateKernel(fam)
        mass = float(gk15(k.pdf, -1.0, 1.0, atol=1e-14, breakpoints=(0.0,)))
        k2 = float(gk15(lambda u: u * u * k.pdf(u), -1.0, 1.0, atol=1e-14, breakpoints=(0.0,)))
        l2 = float(gk15(lambda u: k.pdf(u) ** 2, -1.0, 1.0, atol=1e-14, breakpoints=(0.0,)))
        dev = 0.0
        for v in probes:
            hi = min(max(v, -1.0), 1.0)
            num = float(gk15(k.pdf, -1.0, hi, atol=1e-14, breakpoints=(0.0,) if 0.0 < hi else ()))
            dev = max(dev, abs(num - float(k.cdf(v))))
        worst = max(worst, abs(mass - 1.0), abs(k2 - k.kappa2), dev)
        print(f"{fam:<13}{mass:>12.9f}{k.kappa2:>12.9f}{k2:>14.9f}{l2:>12.9f}{k.sup:>8.3f}{dev:>11.2e}",
              file=stream)
    ok = worst <= 1e-10
    print(f"max deviation {worst:.2e} ({'ok' if ok else 'FAIL'})", file=stream)
    return 0 if ok else 2


def run_fixtures(args) -> int:
    out = _out_dir(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fresh = fx.generate()
    target = out / "oracle_fixtures.json"
    fx.dump(fresh, target)
    if args.write:
        fx.dump(fresh, fx.FIXTURE_PATH)
        print(f"fixtures: wrote {target} and {fx.FIXTURE_PATH}")
        return 0
    problems = fx.compare(fresh, fx.load_checked_in())
    for p in problems:
        print(f"mismatch: {p}", file=sys.stderr)
    n = sum(len(fresh[g]) for g in fx.TOLERANCES)
    print(f"fixtures: {n} values regenerated, {len(problems)} outside tolerance -> {target}")
    return 0 if not problems else 2


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    try:
        if args.command == "kernels-check":
            return kernels_check()
        if args.command == "fixtures":
            return run_fixtures(args)
        return _run_experiment(args)
    except ConfigError as exc:
        for msg in exc.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return 1
    except (ArithmeticError, QuadratureError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
