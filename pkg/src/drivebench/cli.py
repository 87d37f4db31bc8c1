"""Command-line entry point: ``drivebench <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 a route aborted.

Seeds: the CLI ``--seed`` is a 64-bit unsigned value. Each route gets its own
stream ``route_seed(seed, route_id)`` (blake2b of the pair), so running a
subset of routes reproduces exactly what the full run produced for them.
Frame retention in ``filter`` is keyed the same way by (seed, route, frame).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics
from .config import apply_idm_overrides, controllers_from_mapping, load_gains, load_toml
from .dataset import (SPEED_CLASSES, DataError, class_counts, class_weights, encode_two_hot,
                      filter_frames, read_frames, write_frames)
from .planner import PRESETS, get_preset
from .route import RouteError
from .svg import line_plot
from .worldsim.harness import EarlyTerminationDriver, Limits, run_route
from .worldsim.suite import BUNDLED, load_suite, resolve_suite
from .worldsim.world import DT, INFRACTION_TYPES, InfractionLedger

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ABORTED = 0, 1, 2, 3
OUTPUT_ENV = "DRIVEBENCH_OUTPUT_DIR"
DEFAULT_OUTPUT = "drivebench-out"
COLLECT_LOG_EVERY = 2  # 10 Hz frame logs at the default 20 Hz simulation step
SEED_MAX = 2 ** 64 - 1


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def route_seed(seed: int, route_id: str) -> int:
    digest = hashlib.blake2b(f"{int(seed)}\x1f{route_id}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT)


# ---------------------------------------------------------------- config

@dataclass
class RunConfig:
    suite: str = "bundled"
    style: str = "adjusted"
    seed: int = 0
    dt: float = DT
    cutoff_km: float | None = None
    out: Path = field(default_factory=default_output_dir)
    workers: int = 1
    log_every: int = 1
    routes: tuple | None = None
    idm: dict = field(default_factory=dict)
    pid: object = None
    lon: object = None

    def validate(self) -> None:
        if not 0 <= self.seed <= SEED_MAX:
            raise UsageError("seed must be a 64-bit unsigned integer")
        if not self.dt > 0:
            raise UsageError("dt must be positive")
        if self.cutoff_km is not None and not self.cutoff_km > 0:
            raise UsageError("cutoff must be positive")
        if self.workers < 1 or self.log_every < 0:
            raise UsageError("workers must be >= 1 and log-every >= 0")
        if self.style not in PRESETS:
            raise UsageError(f"unknown style {self.style!r}")
        if self.suite not in BUNDLED and not Path(self.suite).exists():
            raise UsageError(f"suite file not found: {self.suite}")


_RUN_KEYS = {"suite", "style", "seed", "dt", "cutoff", "out", "workers", "log_every", "routes"}


def build_config(args, log_every_default: int) -> RunConfig:
    cfg = RunConfig(suite=args.suite, style=args.style, seed=args.seed, dt=args.dt,
                    cutoff_km=args.cutoff, out=Path(args.out) if args.out else default_output_dir(),
                    workers=args.workers,
                    log_every=log_every_default if args.log_every is None else args.log_every,
                    routes=tuple(args.routes.split(",")) if args.routes else None)
    if args.gains_file:
        cfg.pid, cfg.lon = load_gains(args.gains_file)
    if args.config:
        # the config file wins over flags
        doc = load_toml(args.config)
        run = doc.get("run", {})
        unknown = set(run) - _RUN_KEYS
        if unknown:
            raise DataError(f"[run]: unknown keys {sorted(unknown)}", args.config)
        for key, value in run.items():
            if key == "cutoff":
                cfg.cutoff_km = float(value)
            elif key == "out":
                cfg.out = Path(value)
            elif key == "routes":
                cfg.routes = tuple(str(r) for r in value)
            else:
                setattr(cfg, key, type(getattr(cfg, key))(value))
        cfg.idm = dict(doc.get("idm", {}))
        pid, lon = controllers_from_mapping(doc, args.config)
        cfg.pid = pid or cfg.pid
        cfg.lon = lon or cfg.lon
    cfg.validate()
    return cfg


# ------------------------------------------------------------------- run

def _execute(job):
    from .expert import ExpertDriver

    route, preset, pid, lon, seed, dt, cutoff, log_every = job
    driver = ExpertDriver(preset, lon=lon, pid=pid)
    if cutoff is not None:
        driver = EarlyTerminationDriver(driver, cutoff)
    ledger, frames = run_route(route, driver=driver, limits=Limits(), seed=seed, dt=dt,
                               log_every=log_every)
    return ledger, frames


def execute_suite(cfg: RunConfig):
    """Run every selected route; results are ordered by route id."""
    routes = load_suite(resolve_suite(cfg.suite))
    if cfg.routes is not None:
        known = {r.route_id for r in routes}
        missing = sorted(set(cfg.routes) - known)
        if missing:
            raise UsageError(f"unknown route ids {missing}")
        routes = [r for r in routes if r.route_id in cfg.routes]
    routes.sort(key=lambda r: r.route_id)
    preset = apply_idm_overrides(get_preset(cfg.style), cfg.idm) if cfg.idm else get_preset(cfg.style)
    jobs = [(r, preset, cfg.pid, cfg.lon, route_seed(cfg.seed, r.route_id), cfg.dt, cfg.cutoff_km,
             cfg.log_every) for r in routes]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(_execute, jobs))
    return [_execute(j) for j in jobs]


def _fmt(v) -> str:
    return f"{v:.10g}" if isinstance(v, float) else str(v)


def summary_csv(ledgers, table: metrics.PenaltyTable = metrics.DEFAULT_TABLE,
                normalized: bool = True) -> str:
    cols = ["route_id", "status", "RC", "IS", "DS", "I"]
    if normalized:
        cols.append("DS_hat")
    cols += ["distance_km", *INFRACTION_TYPES]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    scores = []
    for led in sorted(ledgers, key=lambda l: l.route_id):
        s = metrics.score_route(led, table)
        scores.append(s)
        row = [s.route_id, led.status, s.RC, s.IS, s.DS, s.I]
        if normalized:
            row.append(s.DS_hat)
        row += [s.distance_km, *(s.counts.get(k, 0) for k in INFRACTION_TYPES)]
        w.writerow([_fmt(v) for v in row])
    if scores:
        agg = metrics.aggregate(scores)
        row = ["mean", "", agg["RC"], agg["IS"], agg["DS"], agg["I"]]
        if normalized:
            row.append(agg["DS_hat"])
        row += [agg["distance_km"], *(sum(s.counts.get(k, 0) for s in scores) for k in INFRACTION_TYPES)]
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _write_ledgers(out: Path, ledgers) -> None:
    d = out / "ledgers"
    d.mkdir(parents=True, exist_ok=True)
    for led in ledgers:
        (d / f"{led.route_id}.json").write_text(json.dumps(led.to_dict(), indent=2, sort_keys=True) + "\n",
                                               encoding="utf-8")


def cmd_run(args) -> int:
    cfg = build_config(args, log_every_default=0)
    results = execute_suite(cfg)
    ledgers = [led for led, _ in results]
    cfg.out.mkdir(parents=True, exist_ok=True)
    _write_ledgers(cfg.out, ledgers)
    text = summary_csv(ledgers)
    (cfg.out / "summary.csv").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    aborted = [led.route_id for led in ledgers if led.aborted]
    if aborted:
        print(f"aborted routes: {', '.join(aborted)}", file=sys.stderr)
        return EXIT_ABORTED
    return EXIT_OK


def cmd_collect(args) -> int:
    cfg = build_config(args, log_every_default=COLLECT_LOG_EVERY)
    if cfg.log_every == 0:
        raise UsageError("collect needs --log-every >= 1")
    results = execute_suite(cfg)
    ledgers = [led for led, _ in results]
    frames = [fr for _, frs in results for fr in frs]
    cfg.out.mkdir(parents=True, exist_ok=True)
    _write_ledgers(cfg.out, ledgers)
    log = Path(args.log) if args.log else cfg.out / "frames.jsonl"
    write_frames(log, frames)
    print(f"wrote {len(frames)} frames from {len(ledgers)} routes to {log}")
    return EXIT_ABORTED if any(led.aborted for led in ledgers) else EXIT_OK


# ------------------------------------------------------- dataset commands

def cmd_filter(args) -> int:
    if not 0 <= args.seed <= SEED_MAX:
        raise UsageError("seed must be a 64-bit unsigned integer")
    frames = read_frames(args.log)
    kept, stats = filter_frames(frames, dv=args.dv, dangle=args.dangle, keep_frac=args.keep, seed=args.seed)
    out = Path(args.out) if args.out else default_output_dir() / "filtered.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_frames(out, kept)
    for k, v in stats.as_dict().items():
        print(f"{k}: {_fmt(v) if isinstance(v, float) else v}")
    print(f"output: {out}")
    return EXIT_OK


def cmd_labels(args) -> int:
    frames = read_frames(args.log)
    out = Path(args.out) if args.out else default_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    names = [f"w_{c:g}" for c in SPEED_CLASSES]
    with (out / "labels.csv").open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["route_id", "frame_index", "target_speed", *names])
        for fr in frames:
            lab = encode_two_hot(fr.target_speed_label).weights
            w.writerow([fr.route_id, fr.frame_index, _fmt(fr.target_speed_label), *(_fmt(float(x)) for x in lab)])
    counts = class_counts([fr.target_speed_label for fr in frames]) + args.pseudo_count
    weights = class_weights(counts).weights
    with (out / "class_weights.csv").open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["class_speed", "count", "weight"])
        for c, n, wt in zip(SPEED_CLASSES, counts, weights):
            w.writerow([_fmt(float(c)), int(n), _fmt(float(wt))])
    print(f"wrote {len(frames)} labels and {len(weights)} class weights to {out}")
    return EXIT_OK


# ------------------------------------------------------- metrics commands

def cmd_score(args) -> int:
    d = Path(args.ledgers)
    if not d.is_dir():
        raise UsageError(f"not a directory: {d}")
    ledgers = []
    for p in sorted(d.glob("*.json")):
        try:
            ledgers.append(InfractionLedger.from_dict(json.loads(p.read_text(encoding="utf-8"))))
        except json.JSONDecodeError as exc:
            raise DataError(f"malformed JSON: {exc.msg}", str(p), exc.lineno) from None
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"bad ledger: {exc}", str(p)) from None
    try:
        table = metrics.PenaltyTable(alpha=args.alpha)
    except metrics.MetricsError as exc:
        raise UsageError(str(exc)) from None
    text = summary_csv(ledgers, table, normalized=args.normalized)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_analyze_et(args) -> int:
    I, L = args.I, args.L
    try:
        x_max, ds_max = metrics.x_opt(I, L)
        xs = np.linspace(0.0, 1.0, args.points)
        ds = metrics.expected_ds(xs, I, L)
        dsh = metrics.normalized_ds(xs, I)
    except metrics.MetricsError as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out) if args.out else default_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    with (out / "et_curve.csv").open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "DS", "DS_hat"])
        for row in zip(xs, ds, dsh):
            w.writerow([_fmt(float(v)) for v in row])
    svg = line_plot([("expected DS", xs, ds), ("DS_hat", xs, dsh)],
                    title=f"Early termination, I = {I:g}, L = {L:g} km",
                    xlabel="route fraction x", ylabel="score",
                    markers=[(f"x_max = {x_max:.3f}", x_max, ds_max)])
    (out / "et_curve.svg").write_text(svg, encoding="utf-8")
    print(f"x_max = {x_max:.3f}")
    print(f"d = {x_max * L:.2f} km")
    print(f"DS_max = {ds_max:.3f}")
    print(f"threshold I = {metrics.interior_threshold(L):.3f}")
    print(f"output: {out}")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--suite", default="bundled",
                   help=f"suite TOML path or bundled name {BUNDLED} (default: bundled)")
    p.add_argument("--style", default="adjusted", choices=sorted(PRESETS), help="expert style preset")
    p.add_argument("--seed", type=int, default=0, help="64-bit unsigned master seed")
    p.add_argument("--dt", type=float, default=DT, help="simulation step in seconds")
    p.add_argument("--cutoff", type=float, default=None,
                   help="early-termination cutoff in km (stop once the odometer passes it)")
    p.add_argument("--out", default=None,
                   help=f"output directory (default: ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")
    p.add_argument("--workers", type=int, default=1, help="parallel route workers")
    p.add_argument("--routes", default=None, help="comma-separated subset of route ids")
    p.add_argument("--log-every", type=int, default=None, help="log every N-th frame (0 disables)")
    p.add_argument("--config", default=None,
                   help="TOML file with [run], [idm], [pid], [lon] tables; overrides flags")
    p.add_argument("--gains-file", default=None, help="TOML file with [pid] and/or [lon] tables")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="drivebench", description="Closed-loop 2D driving benchmark toolkit.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run the expert on a suite; write ledgers and summary.csv")
    _run_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("collect", help="run the expert and write a frame log")
    _run_flags(p)
    p.add_argument("--log", default=None, help="frame log path (default: OUT/frames.jsonl)")
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("filter", help="change-detection filter over a frame log")
    p.add_argument("log", help="input frame log")
    p.add_argument("--out", default=None, help="filtered log path (default: OUT/filtered.jsonl)")
    p.add_argument("--dv", type=float, default=0.1, help="target-speed change threshold, m/s")
    p.add_argument("--dangle", type=float, default=0.5, help="checkpoint bearing change threshold, deg")
    p.add_argument("--keep", type=float, default=0.14, help="retained share of non-change frames")
    p.add_argument("--seed", type=int, default=0, help="retention seed")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("labels", help="two-hot labels and class weights as CSV")
    p.add_argument("log", help="input frame log")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--pseudo-count", type=int, default=0,
                   help="added to every class count before weighting (lets sparse logs through)")
    p.set_defaults(func=cmd_labels)

    p = sub.add_parser("score", help="score a directory of ledger JSON files")
    p.add_argument("--ledgers", required=True, help="directory of *.json ledgers")
    p.add_argument("--alpha", type=float, default=1.0, help="penalty scale applied to every factor")
    p.add_argument("--normalized", action="store_true", help="add the DS_hat column")
    p.add_argument("--out", default=None, help="also write the CSV here")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("analyze-et", help="early-termination curves for a given I and L")
    p.add_argument("--I", type=float, required=True, help="infraction coefficient per km, in (0, 1]")
    p.add_argument("--L", type=float, required=True, help="route length in km")
    p.add_argument("--points", type=int, default=1001, help="curve samples")
    p.add_argument("--out", default=None, help="output directory")
    p.set_defaults(func=cmd_analyze_et)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"drivebench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, RouteError) as exc:
        print(f"drivebench: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
