"""Command-line entry point: ``embedregion <subcommand> [flags]``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from .config import example_config, load_config, validate
from .errors import EmbedRegionError, ValidationError
from .region import RateRegion, convex_hull
from .search import (
    RegionReport,
    compute_inner_region,
    compute_outer_subset,
    max_channel_information,
    predicted_inner_count,
    predicted_outer_count,
)

SUBCOMMANDS = ("region-inner", "region-outer", "simulate", "example", "info")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="embedregion",
                     description="Rate regions and coding simulation for two-user "
                                 "public information embedding.")
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(SUBCOMMANDS) + "}")
    sub.required = True
    for name, helptext in (("region-inner", "inner region from separate encoders"),
                           ("region-outer", "outer-bound subset from cooperative encoders"),
                           ("simulate", "Monte-Carlo run of the random-coding scheme"),
                           ("example", "binary example: inner and outer-subset regions"),
                           ("info", "describe a configuration")):
        p = sub.add_parser(name, help=helptext, description=helptext)
        p.add_argument("--config", metavar="PATH", help="INI run configuration "
                       "(default: built-in binary example)")
        p.add_argument("--t-size", type=int, metavar="N", help="both auxiliary alphabet sizes")
        p.add_argument("--t1-size", type=int, metavar="N")
        p.add_argument("--t2-size", type=int, metavar="N")
        p.add_argument("--mode", choices=("exhaustive-grid", "random-sample", "sample-then-refine"))
        p.add_argument("--step", type=float, metavar="REAL", help="grid step")
        p.add_argument("--budget", type=int, metavar="N", help="sample budget")
        p.add_argument("--refine", type=int, metavar="N", help="refinement steps")
        p.add_argument("--seed", type=int, metavar="N")
        p.add_argument("--formula", choices=("general", "independent"))
        p.add_argument("--out", metavar="PREFIX", help="output path prefix")
        p.add_argument("--trials", type=int, metavar="N")
        p.add_argument("--n", type=int, metavar="N", help="block length")
        p.add_argument("--epsilon", type=float, metavar="REAL")
        p.add_argument("--mu", type=float, metavar="REAL")
        p.add_argument("--nu", type=float, metavar="REAL")
        p.add_argument("--r1", type=float, metavar="REAL")
        p.add_argument("--r2", type=float, metavar="REAL")
        p.add_argument("--no-plot", action="store_true", help="skip the PNG figure")
    return parser


def _settings(args):
    cfg = load_config(args.config) if args.config else example_config()
    s = cfg.search
    t1 = args.t1_size or args.t_size or s.t1_size
    t2 = args.t2_size or args.t_size or s.t2_size
    search = replace(s, t1_size=t1, t2_size=t2,
                     **{k: v for k, v in (("mode", args.mode), ("step", args.step),
                                          ("budget", args.budget), ("refine", args.refine),
                                          ("seed", args.seed), ("formula", args.formula))
                        if v is not None})
    m = cfg.simulation
    sim = replace(m, **{k: getattr(args, k) for k in
                        ("trials", "n", "epsilon", "mu", "nu", "r1", "r2")
                        if getattr(args, k) is not None})
    cfg = replace(cfg, search=search, simulation=sim, prefix=args.out or cfg.prefix)
    return validate(cfg)


# ---------------------------------------------------------------------------
# outputs


def _fmt(x: float) -> str:
    return f"{x + 0.0:.6f}".replace("-0.000000", "0.000000")


def write_region_csv(report: RegionReport, path) -> None:
    """CSV of hull vertices plus ``.meta`` (JSON) and ``.dat`` siblings."""
    path = Path(path)
    rows = [(_fmt(r1), _fmt(r2)) for r1, r2 in report.region.vertices]
    path.write_text("R1,R2\n" + "".join(f"{a},{b}\n" for a, b in rows), encoding="utf-8")
    path.with_suffix(".dat").write_text(
        "# R1 R2\n" + "".join(f"{a} {b}\n" for a, b in rows), encoding="utf-8")
    strategy = report.strategy
    meta = {
        "kind": report.kind,
        "label": report.label,
        "formula": report.formula,
        "caps": asdict(report.caps) if report.caps else None,
        "strategy": {k: v for k, v in asdict(strategy).items() if k != "workers"}
        if strategy else None,
        "seed": strategy.seed if strategy else None,
        "candidates_evaluated": report.candidates_evaluated,
        "feasible_count": report.feasible_count,
        "pareto_triples": [[round(float(x), 12) for x in t.as_array()]
                           for t, _ in report.pareto_triples],
        "vertex_count": len(rows),
    }
    path.with_suffix(".meta").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


def read_region_csv(path) -> RateRegion:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != "R1,R2":
        raise ValidationError(f"{path}: missing R1,R2 header")
    pts = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:] if ln.strip()])
    return RateRegion(tuple(map(tuple, convex_hull(pts))))


def _plot(regions, path, title):
    from .plotting import plot_regions

    plot_regions(regions, path, title)


# ---------------------------------------------------------------------------
# subcommands


def _region(cfg, kind: str, include=()) -> RegionReport:
    s = cfg.search
    fn = compute_inner_region if kind == "inner" else compute_outer_subset
    return fn(cfg.problem, s.caps(), s.strategy(), s.formula, include=include)


def _emit(report, prefix: str, plot: bool, extra=()) -> str:
    path = Path(f"{prefix}.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    write_region_csv(report, path)
    if plot:
        _plot([(report.label, report.region), *extra], path.with_suffix(".png"), None)
    return str(path)


def cmd_region(cfg, args, kind: str) -> str:
    report = _region(cfg, kind)
    out = _emit(report, cfg.prefix, not args.no_plot)
    return (f"{report.kind}: {len(report.region.vertices)} vertices, "
            f"max sum-rate {report.region.max_sum_rate():.6f}, "
            f"{report.candidates_evaluated} candidates -> {out}")


def cmd_example(cfg, args) -> str:
    s = cfg.search
    note = ""
    if s.mode == "exhaustive-grid" and \
            predicted_outer_count(cfg.problem, s.caps(), s.step) > s.strategy().exhaustive_cap:
        cfg = replace(cfg, search=replace(s, mode="sample-then-refine"))
        note = " (grid too large; sampled and refined)"
    inner = _region(cfg, "inner")
    outer = _region(cfg, "outer", include=[p for _, p in inner.pareto_triples])
    inner_csv = _emit(inner, f"{cfg.prefix}_inner", False)
    outer_csv = _emit(outer, f"{cfg.prefix}_outer", False)
    if not args.no_plot:
        _plot([(inner.label, inner.region), (outer.label, outer.region)],
              f"{cfg.prefix}.png", "binary example")
    return (f"example{note}: inner {len(inner.region.vertices)} vertices "
            f"(sum-rate {inner.region.max_sum_rate():.6f}), outer-subset "
            f"{len(outer.region.vertices)} vertices (sum-rate {outer.region.max_sum_rate():.6f})"
            f" -> {inner_csv}, {outer_csv}")


def _best_policy(cfg):
    s = cfg.search
    quick = replace(s, mode="random-sample", budget=min(s.budget, 2000))
    report = compute_inner_region(cfg.problem, quick.caps(), quick.strategy(), s.formula)
    if not report.pareto_triples:
        raise ValidationError("no feasible policy found for the simulation", field="policy")
    return max(report.pareto_triples, key=lambda tp: min(tp[0].c, tp[0].a + tp[0].b))[1]


def cmd_simulate(cfg, args) -> str:
    from .simlab import SimulationConfig, run_trials

    m = cfg.simulation
    policy = _best_policy(cfg)
    sc = SimulationConfig(cfg.problem, policy, m.r1, m.r2, m.n, m.epsilon, mu=m.mu, nu=m.nu,
                          estimator_samples=m.estimator_samples, trials=m.trials,
                          seed=cfg.search.seed, codebook_cap=m.codebook_cap)
    report = run_trials(sc)
    path = Path(f"{cfg.prefix}_sim.json")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({
        "trials_run": report.trials_run, "p_e_hat": report.p_e_hat,
        "d1_hat": report.d1_hat, "d2_hat": report.d2_hat,
        "event_counts": report.event_counts,
        "encoder_fallbacks": list(report.encoder_fallbacks),
        "code_sizes": list(report.code_sizes),
    }, indent=2) + "\n", encoding="utf-8")
    return report.summary() + f" -> {path}"


def cmd_info(cfg, args) -> str:
    p = cfg.problem
    caps = cfg.search.caps()
    step = cfg.search.step
    sizes = "x".join(str(len(a)) for a in (p.U1, p.U2, p.X1, p.X2, p.Y))
    return (f"alphabets U1,U2,X1,X2,Y = {sizes}; D = ({p.D1:g}, {p.D2:g}); "
            f"max I(X1X2;Y) ~ {max_channel_information(p):.6f}; "
            f"grid step {step:g} at |T| = ({caps.t1_size}, {caps.t2_size}): "
            f"{predicted_inner_count(p, caps, step):.3g} inner, "
            f"{predicted_outer_count(p, caps, step):.3g} outer candidates")


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        cfg = _settings(args)
        dispatch = {
            "region-inner": lambda: cmd_region(cfg, args, "inner"),
            "region-outer": lambda: cmd_region(cfg, args, "outer"),
            "simulate": lambda: cmd_simulate(cfg, args),
            "example": lambda: cmd_example(cfg, args),
            "info": lambda: cmd_info(cfg, args),
        }
        print(dispatch[args.command]())
        return 0
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (EmbedRegionError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
