"""
Command-line front end.

    rovernav simulate concrete_turn -o data/ct --seed 3
    rovernav run -d data/ct --updates IZNOB IZO -o runs/ct
    rovernav eval -d data/ct -e runs/ct/nav_IZNBO_smoothed.csv
    rovernav report -m runs/ct runs/rt

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__, pipeline, sim
from .dataset import read_dataset, write_dataset
from .errors import NumericalError, RoverNavError, ValidationError

log = logging.getLogger("rovernav")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


def _cmd_simulate(args) -> int:
    scn = sim.get_scenario(args.scenario)
    ds = pipeline.simulate_dataset(scn, args.seed)
    out = write_dataset(args.output, ds, args.odom_format)
    print(f"wrote {scn.name} (seed {args.seed}, {len(ds.imu.t)} IMU samples) to {out}")
    return EXIT_OK


def _combos(args) -> list[pipeline.UpdateCombo]:
    if args.all:
        return list(pipeline.ALL_COMBOS)
    if not args.updates:
        raise ValidationError("give --updates or --all")
    out = []
    for text in args.updates:
        c = pipeline.UpdateCombo.parse(text)
        if c not in out:
            out.append(c)
    return out


def _cmd_run(args) -> int:
    ds = read_dataset(args.data)
    cfg = pipeline.config_from_manifest(ds.manifest)
    combos = _combos(args)
    out = Path(args.output) if args.output else Path(args.data) / "runs"
    out.mkdir(parents=True, exist_ok=True)
    results = pipeline.run_combos(ds, cfg, combos, args.workers)
    reports = []
    for res, reps in results:
        tag = res.combo.label.replace("+", "")
        pipeline.write_trace(out / f"nav_{tag}_forward.csv", res.forward)
        if res.smoothed is not None:
            pipeline.write_trace(out / f"nav_{tag}_smoothed.csv", res.smoothed)
        if len(results) == 1:
            pipeline.write_events(out, res)
        else:
            sub = out / f"events_{tag}"
            sub.mkdir(exist_ok=True)
            pipeline.write_events(sub, res)
        flagged = sum(1 for s in res.slips if s.flag.value)
        log.info("%s: %d stops, %d slip flags", res.combo.label, len(res.stops), flagged)
        reports.extend(reps)
    if reports:
        sys.stdout.write(pipeline.report(reports, out))
    else:
        print(f"no truth in {args.data}; wrote navigation traces to {out}")
    return EXIT_OK


def _label_from_stem(stem: str) -> str:
    """``nav_IZNBO_smoothed`` -> ``I+Z+N+B+O``; other names pass through."""
    parts = stem.split("_")
    if len(parts) == 3 and parts[0] == "nav":
        try:
            return pipeline.UpdateCombo.parse(parts[1]).label
        except ValidationError:
            pass
    return stem


def _cmd_eval(args) -> int:
    ds = read_dataset(args.data)
    if ds.truth is None:
        raise ValidationError(f"{args.data} has no truth file")
    cfg = pipeline.config_from_manifest(ds.manifest)
    name = Path(args.estimate).stem
    stream = "smoothed" if name.endswith("_smoothed") else "forward"
    label = args.label or _label_from_stem(name)
    est = pipeline.read_trace(args.estimate, label, stream)
    rep = pipeline.evaluate(est, ds.truth, cfg.model)
    sys.stdout.write(pipeline.report([rep], args.output))
    return EXIT_OK


def _reports_from_run(directory: Path) -> list[pipeline.ErrorReport]:
    out = []
    for p in sorted(directory.glob("trace_*_*.csv")):
        tag, stream = p.stem[len("trace_"):].rsplit("_", 1)
        try:
            label = pipeline.UpdateCombo.parse(tag).label
        except ValidationError:
            label = tag
        out.append(pipeline.read_error_trace(p, label, stream))
    return out


def _cmd_report(args) -> int:
    reports = []
    for m in args.runs:
        d = Path(m)
        if not d.is_dir():
            raise ValidationError(f"{d} is not a run directory")
        found = _reports_from_run(d)
        if not found:
            raise ValidationError(f"{d} holds no error traces")
        reports.extend(found)
    sys.stdout.write(pipeline.report(reports, args.output))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rovernav", description="Wheeled-rover dead reckoning toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0, help="repeat for more detail")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a synthetic dataset")
    s.add_argument("scenario", choices=sorted(sim.SCENARIOS))
    s.add_argument("-o", "--output", required=True, help="dataset directory")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--odom-format", choices=("mps", "counts"), default="mps")
    s.set_defaults(func=_cmd_simulate)

    r = sub.add_parser("run", help="run the filter on a dataset")
    r.add_argument("-d", "--data", required=True, help="dataset directory or manifest")
    r.add_argument("--updates", nargs="+", metavar="LETTERS", help="subsets of IZNOB, e.g. IZNOB IZO")
    r.add_argument("--all", action="store_true", help="run all twelve standard combinations")
    r.add_argument("-o", "--output", help="run directory (default: <data>/runs)")
    r.add_argument("--workers", type=int, default=None, help="process count (env ROVERNAV_WORKERS)")
    r.set_defaults(func=_cmd_run)

    e = sub.add_parser("eval", help="score a navigation trace against dataset truth")
    e.add_argument("-d", "--data", required=True)
    e.add_argument("-e", "--estimate", required=True, help="navigation trace CSV")
    e.add_argument("--label", help="row label (default: file stem)")
    e.add_argument("-o", "--output", help="directory for summary and error trace")
    e.set_defaults(func=_cmd_eval)

    m = sub.add_parser("report", help="tabulate one or more run directories")
    m.add_argument("-m", "--runs", nargs="+", required=True)
    m.add_argument("-o", "--output", help="directory for the combined summary")
    m.set_defaults(func=_cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"rovernav: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"rovernav: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except RoverNavError as exc:
        print(f"rovernav: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
