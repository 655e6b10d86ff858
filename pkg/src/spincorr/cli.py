"""Command-line front end.

Every subcommand prints one JSON report on stdout (including the full
configuration it ran with) and a short human-readable summary on stderr.

Exit codes: 0 success, 1 usage error, 2 data or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass

from .errors import ConfigurationError, DataError, EvaluationError, InsufficientDataError, ValidationError
from .estimators import (
    AccumulatorState,
    chsh_from_events,
    conservation_residual,
    correlation_curve,
    grouped_correlation,
    plain_correlation,
)
from .eventlog import accumulate_file, read_header, write_events
from .models import ModelSpec, analytic_corr, lhv_linear_corr, relative_angle
from .optimizer import maximize_chsh, violation_scan
from .simulate import simulate_angles

EXIT_USAGE = 1
EXIT_DATA = 2

CORR_FUNCTIONS = {
    "neg-cos": lambda t: -math.cos(t),
    "linear": lhv_linear_corr,
    "zero": lambda t: 0.0,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    """Validated view of the parsed arguments."""

    subcommand: str
    model: ModelSpec
    theta_a: float
    theta_b: float
    events: int
    seed: int
    normalized: bool
    workers: int

    @classmethod
    def from_args(cls, args) -> RunConfig:
        if args.events < 1:
            raise UsageError("--events must be >= 1")
        for name in ("theta_deg", "theta_a_deg"):
            v = getattr(args, name, 0.0)
            if not 0.0 <= v <= 180.0:
                raise UsageError(f"--{name.replace('_', '-')} must lie in [0, 180]")
        if args.model != "conservation" and args.kind is not None:
            raise UsageError("--kind applies to the conservation model only")
        try:
            if args.model == "conservation":
                model = ModelSpec.conservation(args.spin, args.kind or "extremal")
            else:
                model = ModelSpec.from_descriptor(args.model, args.spin)
        except ValidationError as exc:
            raise UsageError(str(exc)) from None
        return cls(
            args.command,
            model,
            math.radians(getattr(args, "theta_a_deg", 0.0)),
            math.radians(getattr(args, "theta_deg", 0.0)),
            args.events,
            args.seed,
            args.normalized,
            args.workers,
        )


def _config_dict(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


def _emit(report: dict, summary: list[str]) -> None:
    json.dump(report, sys.stdout, indent=2, sort_keys=False)
    sys.stdout.write("\n")
    for line in summary:
        print(line, file=sys.stderr)


def _load(args) -> tuple[AccumulatorState, ModelSpec, float]:
    """Accumulator, model and relative angle from --in or a fresh simulation."""
    if args.input:
        header = read_header(args.input)
        acc = accumulate_file(args.input)
        theta = relative_angle(acc.setting_a, acc.setting_b)
        return acc, header.model, theta
    cfg = RunConfig.from_args(args)
    batch = simulate_angles(cfg.model, cfg.theta_a, cfg.theta_b, cfg.events, cfg.seed, workers=cfg.workers)
    acc = AccumulatorState.from_batch(batch)
    return acc, cfg.model, relative_angle(acc.setting_a, acc.setting_b)


def cmd_simulate(args) -> int:
    if not args.out:
        raise UsageError("simulate requires --out")
    cfg = RunConfig.from_args(args)
    batch = simulate_angles(cfg.model, cfg.theta_a, cfg.theta_b, cfg.events, cfg.seed, workers=cfg.workers)
    count = write_events(batch, args.out, model=cfg.model, seed=cfg.seed)
    _emit(
        {"command": "simulate", "config": _config_dict(args), "model": cfg.model.descriptor, "count": count, "out": args.out},
        [f"# wrote {count} {cfg.model.descriptor} events to {args.out}"],
    )
    return 0


def cmd_estimate(args) -> int:
    acc, model, theta = _load(args)
    plain = plain_correlation(acc)
    report = {
        "command": "estimate",
        "config": _config_dict(args),
        "model": model.descriptor,
        "two_s": model.spin.two_s,
        "theta_rad": theta,
        "n": acc.n,
        "plain": plain.as_dict(),
        "analytic": {"value": analytic_corr(model, theta), "normalized": analytic_corr(model, theta, True)},
    }
    summary = []
    try:
        grouped = grouped_correlation(acc)
        report["grouped"] = grouped.as_dict()
    except InsufficientDataError as exc:
        grouped = None
        report["grouped"] = {"error": str(exc)}
    key, se_key = ("normalized", "normalized_se") if args.normalized else ("value", "se")
    summary.append(f"# theta = {math.degrees(theta):.4f} deg, n = {acc.n}")
    summary.append(f"# plain    {plain.as_dict()[key]:+.6f} +- {plain.as_dict()[se_key]:.6f}")
    if grouped is not None:
        summary.append(f"# grouped  {grouped.as_dict()[key]:+.6f} +- {grouped.as_dict()[se_key]:.6f}")
    summary.append(f"# analytic {report['analytic'][key]:+.6f}")
    _emit(report, summary)
    return 0


def cmd_audit(args) -> int:
    acc, model, theta = _load(args)
    audit = conservation_residual(acc, theta, normalized=args.normalized)
    report = {"command": "audit", "config": _config_dict(args), "model": model.descriptor, "n": acc.n}
    report.update(audit.as_dict())
    report["consistent_4se"] = audit.consistent(4.0)
    summary = [f"# conservation audit at theta = {math.degrees(theta):.4f} deg"]
    for r in audit.residuals:
        if r.value is None:
            summary.append(f"#   m_a = {r.two_m}/2: empty group")
        else:
            summary.append(f"#   m_a = {r.two_m}/2: residual {r.value:+.6f} +- {r.se:.6f} (n={r.n})")
    summary.append("# conserved on average" if audit.consistent(4.0) else "# conservation violated on average")
    _emit(report, summary)
    return 0


def cmd_chsh(args) -> int:
    if args.input:
        if len(args.input) != 4:
            raise UsageError("chsh takes exactly four --in files ordered (a,b) (a,b') (a',b') (a',b)")
        accs = [accumulate_file(p) for p in args.input]
    else:
        cfg = RunConfig.from_args(args)
        a, ap, b, bp = (math.radians(x) for x in args.angles_deg)
        pairs = [(a, b), (a, bp), (ap, bp), (ap, b)]
        accs = [
            AccumulatorState.from_batch(
                simulate_angles(cfg.model, x, y, cfg.events, cfg.seed, stream=i, workers=cfg.workers)
            )
            for i, (x, y) in enumerate(pairs)
        ]
    est = chsh_from_events(accs)
    report = {"command": "chsh", "config": _config_dict(args)}
    report.update(est.as_dict())
    _emit(report, [f"# M = {est.m:.6f} +- {est.se:.6f}: {est.verdict} the local bound M <= 2"])
    return 0


def _scan_grid(step_deg: float) -> list[float]:
    k = round(180.0 / step_deg)
    if k < 1 or not math.isclose(k * step_deg, 180.0):
        raise UsageError("--grid-step-deg must divide 180")
    return [math.pi * i / k for i in range(k + 1)]


def cmd_scan(args) -> int:
    cfg = RunConfig.from_args(args)
    rows = correlation_curve(
        cfg.model, _scan_grid(args.grid_step_deg or 5.0), cfg.events, cfg.seed,
        normalized=cfg.normalized, workers=cfg.workers,
    )
    table = [r.as_dict() for r in rows]
    for d in table:
        d["theta_deg"] = math.degrees(d["theta_rad"])
    if args.out:
        with open(args.out, "w", newline="") as f:
            w = csv.DictWriter(f, ["theta_deg", "theta_rad", "n", "estimate", "se", "analytic"], lineterminator="\n")
            w.writeheader()
            w.writerows(table)
    worst = max(abs(r.estimate - r.analytic) / r.se for r in rows if r.se > 0) if any(r.se > 0 for r in rows) else 0.0
    _emit(
        {"command": "scan", "config": _config_dict(args), "model": cfg.model.descriptor, "normalized": cfg.normalized, "rows": table},
        [f"# {len(rows)} angles, largest |estimate - analytic| = {worst:.2f} SE"],
    )
    return 0


def cmd_optimize(args) -> int:
    if args.function:
        fn = CORR_FUNCTIONS[args.function]
        label = args.function
    else:
        cfg = RunConfig.from_args(args)
        model = cfg.model
        fn = lambda t: analytic_corr(model, t, normalized=True)
        label = model.descriptor
    step = math.radians(args.grid_step_deg or 1.0)
    if not 0.0 < step <= math.radians(5.0):
        raise UsageError("--grid-step-deg must lie in (0, 5]")
    best = maximize_chsh(fn, step, args.refine_tol)
    report = {"command": "optimize", "config": _config_dict(args), "function": label, "best": best.as_dict()}
    summary = [f"# max M = {best.m_value:.9f} at a'={math.degrees(best.a_prime):.4f}, "
               f"b={math.degrees(best.b):.4f}, b'={math.degrees(best.b_prime):.4f} deg"]
    if args.scan:
        scan = violation_scan(fn, step)
        report["violation_scan"] = scan.as_dict()
        summary.append(f"# {scan.count} of {scan.total} grid configurations exceed M = 2")
    _emit(report, summary)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", choices=["qm", "lhv", "conservation"], default="qm")
    common.add_argument("--spin", type=int, default=1, metavar="2S", help="doubled spin, e.g. 1 for spin 1/2")
    common.add_argument("--kind", choices=["extremal", "adjacent"], default=None)
    common.add_argument("--theta-deg", type=float, default=0.0, help="setting angle at B (A sits at --theta-a-deg)")
    common.add_argument("--theta-a-deg", type=float, default=0.0)
    common.add_argument("--events", type=int, default=100_000)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None)
    common.add_argument("--normalized", action="store_true", help="report in +-1 units instead of hbar units")
    common.add_argument("--grid-step-deg", type=float, default=None)
    common.add_argument("--workers", type=int, default=1)

    parser = _Parser(prog="spincorr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="generate an event file")
    p.set_defaults(func=cmd_simulate)
    for name, func, text in (
        ("estimate", cmd_estimate, "plain and grouped correlation estimates"),
        ("audit", cmd_audit, "conservation residual per outcome group"),
    ):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--in", dest="input", default=None)
        p.set_defaults(func=func)
    p = sub.add_parser("chsh", parents=[common], help="CHSH value from four batches")
    p.add_argument("--in", dest="input", nargs="+", default=None)
    p.add_argument("--angles-deg", nargs=4, type=float, default=[0.0, 90.0, 45.0, 135.0], metavar=("A", "A'", "B", "B'"))
    p.set_defaults(func=cmd_chsh)
    p = sub.add_parser("scan", parents=[common], help="correlation against relative angle")
    p.set_defaults(func=cmd_scan)
    p = sub.add_parser("optimize", parents=[common], help="maximize CHSH over coplanar settings")
    p.add_argument("--function", choices=sorted(CORR_FUNCTIONS), default=None)
    p.add_argument("--refine-tol", type=float, default=1e-6)
    p.add_argument("--scan", action="store_true", help="also count grid points above M = 2")
    p.set_defaults(func=cmd_optimize)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ValidationError) as exc:
        print(f"spincorr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ConfigurationError, InsufficientDataError, EvaluationError, OSError) as exc:
        print(f"spincorr: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
