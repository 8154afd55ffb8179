"""Command-line entry point.

Subcommands: ``analyze``, ``bootstrap``, ``train``, ``predict``, ``synth``
and ``landmarks``. Every output starts with provenance (tool version, seed
and the flags of the run) and is byte-identical across repeated runs with the
same flags. Exit codes: 0 success, 1 degenerate computation, 2 usage or
input error.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import __version__
from .activity.evaluate import LEARNERS, dumps_model, evaluate, model_from_dict, model_to_dict
from .activity.features import MODEL_FEATURES, build_dataset, format_exercises, read_exercises, synthetic_exercises
from .activity.linear import DegenerateFit, RankDeficient, fit_linear, residual_diagnostics
from .activity.network import DEEP_HIDDEN, SHALLOW_HIDDEN, TrainingConfig, TrainingError, fit_network
from .bootstrap import DEFAULT_TRIALS, BootstrapConfig, bootstrap_cloud, cloud_summary
from .ingest import (
    Phase,
    drop_implausible,
    format_recording,
    mark_phases,
    parse_recording,
    read_phase_sidecar,
    validate_series,
)
from .load_metrics import (
    DEFAULT_DELTA,
    PeakConfig,
    detect_regime_changes,
    metric_series,
    recovery_delay,
    slope,
)
from .moments import (
    DEFAULT_WINDOW,
    DegenerateSample,
    accumulated_trajectory,
    batch_moments,
    window_trajectory,
)
from .pearson import DEFAULT_TOL, boundaries, classify_array, landmarks, metric1_array, metric2_array
from .synth import DEFAULT_SEED, Segment, SynthSpec, generate, three_phase_spec

EXIT_OK = 0
EXIT_DEGENERATE = 1
EXIT_USAGE = 2

_DEGENERATE = (DegenerateSample, DegenerateFit, RankDeficient, TrainingError)


class UsageError(ValueError):
    pass


# -- provenance and output -------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    """Validated flags of one invocation, as recorded in the provenance."""

    command: str
    seed: int
    options: tuple[tuple[str, object], ...]

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        # output paths and the worker hint do not change results
        skip = {"command", "func", "seed", "output", "phases_out", "diagnostics", "workers"}
        opts = tuple(sorted((k, v) for k, v in vars(args).items() if k not in skip))
        return cls(args.command, args.seed, opts)

    @property
    def flags(self) -> str:
        return " ".join(f"--{k.replace('_', '-')}={_flag_value(v)}" for k, v in self.options)

    def provenance(self) -> dict:
        return {
            "tool": "hbload",
            "version": __version__,
            "command": self.command,
            "seed": self.seed,
            "flags": self.flags,
        }

    def header(self) -> str:
        return "".join(f"# {k}: {v}\n" for k, v in self.provenance().items())


def _flag_value(v) -> str:
    if isinstance(v, (list, tuple)):
        return ",".join(str(x) for x in v)
    return str(v)


@dataclass(frozen=True)
class Table:
    name: str
    columns: dict[str, Sequence]

    def __len__(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0


def _scalar(v):
    if v is None:
        return None
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    return str(v)


def _csv_cell(v) -> str:
    v = _scalar(v)
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render(tables: list[Table], fmt: str, run: RunConfig) -> str:
    """CSV sections introduced by ``# table:`` lines, or one JSON document."""
    if fmt == "json":
        doc: dict = {"provenance": run.provenance()}
        for tab in tables:
            cols = list(tab.columns)
            doc[tab.name] = [
                {c: _scalar(v) for c, v in zip(cols, row)} for row in zip(*tab.columns.values())
            ]
        return json.dumps(doc, indent=1) + "\n"
    parts = [run.header()]
    for tab in tables:
        lines = [f"# table: {tab.name}", ",".join(tab.columns)]
        cells = [[_csv_cell(v) for v in col] for col in tab.columns.values()]
        lines.extend(",".join(row) for row in zip(*cells))
        parts.append("\n".join(lines) + "\n")
    return "\n".join(parts)


def _write(text: str, path: str | None) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _note(msg: str) -> None:
    print(f"hbload: {msg}", file=sys.stderr)


# -- shared series loading -------------------------------------------------


def _load_series(args):
    with open(args.input, encoding="utf-8") as fh:
        series = parse_recording(fh)
    report = validate_series(series)
    if report.range_violations:
        action = "dropped" if args.drop_implausible else "kept"
        _note(f"{len(report.range_violations)} intervals outside the plausible range ({action})")
    if args.drop_implausible:
        series = drop_implausible(series)
    if args.phases is not None:
        start, end = read_phase_sidecar(args.phases)
    else:
        start, end = args.start_s, args.end_s
    if start is not None:
        series = mark_phases(series, start, end)
    if len(series) == 0:
        raise UsageError("no samples left after filtering")
    return series


def _check_phase_flags(args) -> None:
    if (args.start_s is None) != (args.end_s is None):
        raise UsageError("--start-s and --end-s must be given together")
    if args.start_s is not None and args.phases is not None:
        raise UsageError("give either --start-s/--end-s or --phases, not both")
    if args.start_s is not None and not args.start_s < args.end_s:
        raise UsageError("--start-s must be smaller than --end-s")


# -- analyze ---------------------------------------------------------------


def _trajectory_table(ms_list, traj_list) -> Table:
    cols: dict[str, list] = {k: [] for k in (
        "mode", "index", "t_s", "n", "mean", "std", "skewness", "kurtosis",
        "beta1", "beta2", "metric1", "metric2", "region")}
    for ms, tr in zip(ms_list, traj_list):
        cols["mode"].extend([tr.mode] * len(tr))
        cols["index"].extend(tr.index.tolist())
        cols["t_s"].extend(tr.t.tolist())
        cols["n"].extend(tr.n.tolist())
        for name in ("mean", "std", "skewness", "kurtosis"):
            cols[name].extend(getattr(tr, name).tolist())
        for name in ("beta1", "beta2", "metric1", "metric2"):
            cols[name].extend(getattr(ms, name).tolist())
        cols["region"].extend(classify_array(ms.beta1, ms.beta2, DEFAULT_TOL).tolist())
    return Table("trajectory", cols)


def _phase_slopes(series, ms_list) -> Table:
    cols: dict[str, list] = {k: [] for k in (
        "mode", "phase", "t0_s", "t1_s", "slope_per_s", "intercept", "residual_std", "count")}
    if series.has_phases:
        t0, t1 = series.span
        spans = {
            Phase.REST_BEFORE: (t0, series.start_s),
            Phase.EXERCISE: (series.start_s, series.end_s),
            Phase.REST_AFTER: (series.end_s, t1),
        }
        for ms in ms_list:
            for phase, (a, b) in spans.items():
                try:
                    est = slope(ms, a, b)
                except ValueError:
                    continue
                for k, v in (("mode", ms.mode), ("phase", phase.value), ("t0_s", a), ("t1_s", b),
                             ("slope_per_s", est.slope), ("intercept", est.intercept),
                             ("residual_std", est.residual_std), ("count", est.count)):
                    cols[k].append(v)
    return Table("slopes", cols)


def _landmark_tables() -> list[Table]:
    marks = landmarks()
    lines = boundaries()
    return [
        Table("landmarks", {
            "name": [m.name for m in marks],
            "beta1": [m.point.beta1 for m in marks],
            "beta2": [m.point.beta2 for m in marks],
        }),
        Table("boundaries", {
            "name": [b.name for b in lines],
            "intercept": [b.intercept for b in lines],
            "slope": [b.slope for b in lines],
        }),
    ]


def cmd_analyze(args) -> int:
    _check_phase_flags(args)
    if args.window < 4:
        raise UsageError("--window must be >= 4")
    series = _load_series(args)
    acc = accumulated_trajectory(series, args.stride)
    win = window_trajectory(series, args.window, args.stride)
    if len(acc) == 0 or len(win) == 0:
        raise DegenerateSample("every ensemble has zero variance; skewness and kurtosis are undefined")
    ms_acc, ms_win = metric_series(acc), metric_series(win)

    events = []
    try:
        events = detect_regime_changes(ms_win, PeakConfig(args.half_width, args.k), args.source)
    except ValueError as exc:
        _note(f"regime detection skipped: {exc}")

    delay = None
    if series.has_phases:
        try:
            delay = recovery_delay(ms_acc, series.start_s, series.end_s, args.delta)
        except ValueError as exc:
            _note(f"recovery delay skipped: {exc}")

    tables = [
        _trajectory_table([ms_acc, ms_win], [acc, win]),
        Table("degenerate", {
            "mode": [acc.mode] * acc.degenerate_index.size + [win.mode] * win.degenerate_index.size,
            "index": acc.degenerate_index.tolist() + win.degenerate_index.tolist(),
            "t_s": acc.degenerate_t.tolist() + win.degenerate_t.tolist(),
        }),
        Table("events", {
            "t_s": [e.t for e in events],
            "index": [e.index for e in events],
            "magnitude": [e.magnitude for e in events],
            "source": [e.source for e in events],
            "kind": [e.kind for e in events],
        }),
        _phase_slopes(series, [ms_acc, ms_win]),
        Table("recovery", {
            "delta": [args.delta] if series.has_phases else [],
            "delay_s": [delay] if series.has_phases else [],
        }),
        *_landmark_tables(),
    ]
    _write(render(tables, args.format, RunConfig.from_args(args)), args.output)
    return EXIT_OK


# -- bootstrap -------------------------------------------------------------


def cmd_bootstrap(args) -> int:
    _check_phase_flags(args)
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    config = BootstrapConfig(args.trials, args.m, args.seed)
    series = _load_series(args)
    if args.phase != "all":
        if not series.has_phases:
            raise UsageError(f"--phase {args.phase} needs exercise markers")
        series = series.select(series.phase_mask(args.phase))
    x = series.hb_ms
    full = batch_moments(x)
    if not full.std > 0:
        raise DegenerateSample("input has zero variance")
    cloud = bootstrap_cloud(x, config, workers=args.workers)
    summ = cloud_summary(cloud)
    tables = [
        Table("cloud", {
            "trial": cloud.trial.tolist(),
            "beta1": cloud.beta1.tolist(),
            "beta2": cloud.beta2.tolist(),
            "metric1": metric1_array(cloud.beta1, cloud.beta2).tolist(),
            "metric2": metric2_array(cloud.beta1, cloud.beta2).tolist(),
        }),
        Table("summary", {
            "seed": [args.seed],
            "trials": [args.trials],
            "m": [cloud.m],
            "count": [summ.count],
            "degenerate_count": [summ.degenerate_count],
            "sample_beta1": [full.skewness**2],
            "sample_beta2": [full.kurtosis],
            "centroid_beta1": [summ.centroid.beta1],
            "centroid_beta2": [summ.centroid.beta2],
            "std_beta1": [summ.std_beta1],
            "std_beta2": [summ.std_beta2],
            "box_beta1_lo": [summ.box_beta1[0]],
            "box_beta1_hi": [summ.box_beta1[1]],
            "box_beta2_lo": [summ.box_beta2[0]],
            "box_beta2_hi": [summ.box_beta2[1]],
        }),
    ]
    _write(render(tables, args.format, RunConfig.from_args(args)), args.output)
    return EXIT_OK


# -- train / predict -------------------------------------------------------


def _read_dataset(path: str, model_id: int):
    with open(path, encoding="utf-8") as fh:
        records = read_exercises(fh)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        ds = build_dataset(records, model_id)
    for w in caught:
        _note(str(w.message))
    return ds


def cmd_train(args) -> int:
    if args.restarts < 1 or args.workers < 1:
        raise UsageError("--restarts and --workers must be >= 1")
    if args.max_epochs < 0:
        raise UsageError("--max-epochs must be >= 0")
    ds = _read_dataset(args.input, args.model)
    run = RunConfig.from_args(args)
    diag_text = None
    if args.learner == "lm":
        model = fit_linear(ds.X, ds.y, ds.feature_names)
        training = {"method": "qr_least_squares"}
        if args.diagnostics:
            d = residual_diagnostics(model)
            diag_text = render([Table("residuals", {
                "fitted": d.fitted.tolist(),
                "standardized": d.standardized.tolist(),
                "sqrt_abs_standardized": d.sqrt_abs_standardized.tolist(),
            })], "csv", run)
    else:
        if args.diagnostics:
            raise UsageError("--diagnostics applies to the lm learner only")
        hidden = SHALLOW_HIDDEN if args.learner == "nn" else DEEP_HIDDEN
        configs = [
            TrainingConfig(
                learning_rate=args.learning_rate,
                threshold=args.threshold,
                max_epochs=args.max_epochs,
                seed=args.seed + r,
            )
            for r in range(args.restarts)
        ]

        def fit(cfg):
            return fit_network(ds.X, ds.y, hidden, cfg)

        if args.workers > 1 and len(configs) > 1:
            with ThreadPoolExecutor(max_workers=args.workers) as pool:
                results = list(pool.map(fit, configs))
        else:
            results = [fit(c) for c in configs]
        best = min(range(len(results)), key=lambda i: results[i].final_sse)
        res = results[best]
        model = res.model
        training = {
            "method": "irprop_plus",
            "config": res.config.to_dict(),
            "epochs": res.epochs,
            "converged": res.converged,
            "initial_sse": float(res.history[0]),
            "final_sse": res.final_sse,
            "restart_sse": [r.final_sse for r in results],
        }
    report = evaluate(model, ds.X, ds.y)
    doc = model_to_dict(model, args.learner, args.model, extra={
        "provenance": run.provenance(),
        "training": training,
        "train_sse": report.sse,
        "train_accuracy": report.accuracy,
        "n_records": int(ds.y.size),
    })
    if diag_text is not None:
        _write(diag_text, args.diagnostics)
    _write(dumps_model(doc), args.output)
    _note(f"{args.learner} model {args.model}: SSE {report.sse:.6g}, accuracy {report.accuracy:.3f}")
    return EXIT_OK


def cmd_predict(args) -> int:
    with open(args.artifact, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"artifact is not valid JSON: {exc}") from None
    model = model_from_dict(doc)
    ds = _read_dataset(args.input, int(doc["model_id"]))
    report = evaluate(model, ds.X, ds.y)
    tables = [
        Table("predictions", {
            "record": list(range(ds.y.size)),
            "activity": ds.y.astype(int).tolist(),
            "prediction": report.predictions.tolist(),
            "class": report.classes.tolist(),
        }),
        Table("summary", {
            "learner": [doc["learner"]],
            "model_id": [int(doc["model_id"])],
            "count": [int(ds.y.size)],
            "sse": [report.sse],
            "accuracy": [report.accuracy],
        }),
    ]
    _write(render(tables, args.format, RunConfig.from_args(args)), args.output)
    return EXIT_OK


# -- synth / landmarks -----------------------------------------------------


def _parse_segment(text: str) -> Segment:
    parts = text.split(":")
    if len(parts) not in (3, 4):
        raise argparse.ArgumentTypeError(f"segment must be BEATS:MEAN:STD[:TREND], got {text!r}")
    try:
        beats = int(parts[0])
        vals = [float(p) for p in parts[1:]]
        return Segment(beats, *vals)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad segment {text!r}: {exc}") from None


def cmd_synth(args) -> int:
    run = RunConfig.from_args(args)
    if args.exercises is not None:
        if args.exercises < 3:
            raise UsageError("--exercises needs at least 3 records")
        records = synthetic_exercises(args.exercises, seed=args.seed)
        _write(run.header() + format_exercises(records), args.output)
        return EXIT_OK
    if args.segment:
        spec = SynthSpec(tuple(args.segment), args.seed)
    else:
        spec = three_phase_spec(args.seed)
    series = generate(spec)
    text = run.header()
    if series.has_phases:
        text += f"# exercise_s: {series.start_s!r} {series.end_s!r}\n"
    _write(text + format_recording(series), args.output)
    if args.phases_out:
        if not series.has_phases:
            raise UsageError("--phases-out needs exactly three segments")
        _write(f"{series.start_s!r} {series.end_s!r}\n", args.phases_out)
    return EXIT_OK


def cmd_landmarks(args) -> int:
    if args.points < 2 or not args.beta1_max > 0:
        raise UsageError("--points must be >= 2 and --beta1-max positive")
    grid = np.linspace(0.0, args.beta1_max, args.points)
    curves: dict[str, list] = {"name": [], "beta1": [], "beta2": []}
    for b in boundaries():
        curves["name"].extend([b.name] * grid.size)
        curves["beta1"].extend(grid.tolist())
        curves["beta2"].extend(b.at(grid).tolist())
    tables = [*_landmark_tables(), Table("boundary_curves", curves)]
    _write(render(tables, args.format, RunConfig.from_args(args)), args.output)
    return EXIT_OK


# -- parser ----------------------------------------------------------------


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def _pos_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hbload", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"hbload {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_nonneg_int, default=DEFAULT_SEED,
                        help=f"random seed (default {DEFAULT_SEED})")
    common.add_argument("-o", "--output", default=None, help="output path (default stdout)")

    fmt = argparse.ArgumentParser(add_help=False)
    fmt.add_argument("--format", choices=("csv", "json"), default="csv")

    recording = argparse.ArgumentParser(add_help=False)
    recording.add_argument("input", help="heartbeat recording (t_s optional, hb_ms or hr_bpm)")
    recording.add_argument("--start-s", type=float, default=None, help="exercise start, seconds")
    recording.add_argument("--end-s", type=float, default=None, help="exercise end, seconds")
    recording.add_argument("--phases", default=None, help="sidecar file with start and end seconds")
    recording.add_argument("--drop-implausible", action="store_true",
                           help="drop intervals outside [250, 3000] ms")

    p = sub.add_parser("analyze", parents=[common, fmt, recording],
                       help="trajectories, metrics, regime events and slopes")
    p.add_argument("--window", type=int, default=DEFAULT_WINDOW)
    p.add_argument("--stride", type=_pos_int, default=1)
    p.add_argument("--half-width", type=_pos_int, default=PeakConfig().half_width,
                   help="peak detector baseline half-width, in points")
    p.add_argument("--k", type=float, default=PeakConfig().k, help="peak threshold in rolling MADs")
    p.add_argument("--source", choices=("window_metric1", "window_kurtosis", "window_skew2"),
                   default="window_metric1")
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA,
                   help="recovery band around the resting metric1 baseline")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("bootstrap", parents=[common, fmt, recording],
                       help="bootstrap cloud of Pearson points")
    p.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    p.add_argument("--m", type=_pos_int, default=None, help="resample size (default input size)")
    p.add_argument("--phase", choices=("all", *(ph.value for ph in Phase)), default="all")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("train", parents=[common], help="fit an activity model and save it as JSON")
    p.add_argument("input", help="exercise dataset")
    p.add_argument("--learner", choices=LEARNERS, required=True)
    p.add_argument("--model", type=int, choices=sorted(MODEL_FEATURES), required=True)
    p.add_argument("--max-epochs", type=int, default=TrainingConfig.max_epochs)
    p.add_argument("--threshold", type=float, default=TrainingConfig.threshold)
    p.add_argument("--learning-rate", type=float, default=TrainingConfig.learning_rate)
    p.add_argument("--restarts", type=int, default=1,
                   help="independent initializations (seeds seed..seed+R-1); the lowest SSE wins")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--diagnostics", default=None, help="write lm residual diagnostics to this path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common, fmt], help="apply a saved model to a dataset")
    p.add_argument("artifact", help="model JSON written by train")
    p.add_argument("input", help="exercise dataset")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic recording")
    p.add_argument("--segment", type=_parse_segment, action="append", default=None,
                   metavar="BEATS:MEAN:STD[:TREND]",
                   help="repeatable; default is rest/exercise/rest, 1000 beats each")
    p.add_argument("--phases-out", default=None, help="also write an exercise-marker sidecar")
    p.add_argument("--exercises", type=int, default=None,
                   help="generate an exercise dataset with this many records instead")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("landmarks", parents=[common, fmt], help="reference points and lines of the plane")
    p.add_argument("--beta1-max", type=float, default=4.0)
    p.add_argument("--points", type=int, default=41)
    p.set_defaults(func=cmd_landmarks)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _DEGENERATE as exc:
        _note(f"degenerate input: {exc}")
        return EXIT_DEGENERATE
    except (OSError, ValueError, KeyError) as exc:
        _note(f"error: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
