"""Command-line interface: calibrate, monitor, chart, simulate.

Exit codes: 0 success / no alarms, 1 alarms raised by ``monitor``, 2 errors.
"""

from __future__ import annotations

import argparse
import os
import sys
import warnings

import numpy as np

from . import calibration as cal
from . import charts, multivariate, persist, render, scores, simulate
from .datafile import INDIVIDUALS, LABELED, SUBGROUPS, VECTORS, DataFileError, read_table
from .core import LabeledPoint

EXIT_OK, EXIT_ALARM, EXIT_ERROR = 0, 1, 2

SCORERS = {
    "individual": scores.INDIVIDUAL,
    "subgroup-mean": scores.SUBGROUP_MEAN,
    "subgroup-range": scores.SUBGROUP_RANGE,
    "residual": scores.MODEL_RESIDUAL,
    "normalized": scores.NORMALIZED_RESIDUAL,
}
DEFAULT_SCORER = {INDIVIDUALS: "individual", SUBGROUPS: "subgroup-mean", LABELED: "residual"}
ALLOWED = {
    INDIVIDUALS: {"individual"},
    SUBGROUPS: {"subgroup-mean", "subgroup-range"},
    LABELED: {"residual", "normalized"},
}


class CliError(Exception):
    pass


def _alpha(text: str) -> float:
    try:
        a = float(text)
        cal.alpha_fraction(a)
    except ValueError:
        raise argparse.ArgumentTypeError(f"alpha must lie in (0, 1), got {text!r}")
    return a


def _table(path):
    if not os.path.exists(path):
        raise CliError(f"no such file: {path}")
    return read_table(path)


def _file_digest(path) -> str:
    with open(path, "rb") as fh:
        return persist.digest_bytes(fh.read())


def _fit_with_warning(scorer, items, alpha):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", cal.QuantileClampWarning)
        model = cal.calibrate(scorer, items, alpha)
    msgs = [str(w.message) for w in caught if issubclass(w.category, cal.QuantileClampWarning)]
    return model, msgs


def build_calibration(table, args):
    """Library composition behind ``calibrate``; returns (scorer, model, extras, warnings)."""
    kind = table.kind
    split_spec = cal.SplitSpec(args.split, args.seed)
    extras = {}
    if kind == VECTORS:
        if args.scorer:
            raise CliError("vector input takes --detector, not --scorer")
        train, calib = cal.split(table.items, split_spec)
        if args.detector == "mahalanobis":
            scorer = multivariate.train_mahalanobis(train, args.ridge)
        else:
            scorer = multivariate.train_knn(train, args.k)
        model, msgs = _fit_with_warning(scorer, calib, args.alpha)
        return scorer, model, extras, msgs

    if args.detector:
        raise CliError("--detector applies to vector input only")
    name = args.scorer or DEFAULT_SCORER[kind]
    if name not in ALLOWED[kind]:
        raise CliError(f"scorer {name!r} does not fit {kind} input")
    if kind == INDIVIDUALS:
        scorer, calib = scores.fit_individual(table.items), table.items
    elif kind == SUBGROUPS:
        fit = scores.fit_subgroup_mean if name == "subgroup-mean" else scores.fit_subgroup_range
        scorer, calib = fit(table.items), table.items
    else:
        train, calib = cal.split(table.items, split_spec)
        X = np.array([p.x for p in train])
        y = np.array([p.y for p in train])
        if name == "normalized":
            model = scores.KNNRegressor.fit(X, y, args.k)
            scorer = scores.fit_normalized_residual(model)
            extras["calibration_points"] = {"x": [list(p.x) for p in calib], "y": [p.y for p in calib]}
        else:
            model = scores.KNNRegressor.fit(X, y, args.k) if args.model == "knn" else scores.LeastSquaresLine.fit(X, y)
            scorer = scores.fit_model_residual(model)
    model, msgs = _fit_with_warning(scorer, calib, args.alpha)
    return scorer, model, extras, msgs


def cmd_calibrate(args) -> int:
    table = _table(args.input)
    scorer, model, extras, msgs = build_calibration(table, args)
    archive = persist.make_archive(model, scorer, _file_digest(args.input), args.seed, extras)
    persist.save(archive, args.out)
    for m in msgs:
        print(f"warning: {m}", file=sys.stderr)
    print(f"input\t{table.kind}")
    print(f"scorer\t{model.scorer_id}")
    print(f"n\t{model.n}")
    print(f"alpha\t{model.alpha!r}")
    print(f"k\t{model.k}")
    print(f"q\t{model.q!r}")
    if model.clamped:
        print(f"clamped\tyes (guarantee needs n >= {cal.required_calibration_size(model.alpha)})")
    print(f"archive\t{args.out}")
    return EXIT_OK


def _load_archive(path):
    if not os.path.exists(path):
        raise CliError(f"no such file: {path}")
    return persist.load(path)


def _check_stream(archive, table):
    sid = archive.calibration.scorer_id
    expected = {
        scores.INDIVIDUAL: INDIVIDUALS,
        scores.SUBGROUP_MEAN: SUBGROUPS,
        scores.SUBGROUP_RANGE: SUBGROUPS,
        scores.MODEL_RESIDUAL: LABELED,
        scores.NORMALIZED_RESIDUAL: LABELED,
    }.get(sid, VECTORS)
    if table.kind != expected:
        raise CliError(f"stream holds {table.kind} but archive scorer {sid} expects {expected}")


def monitor_series(archive, items, alpha=None):
    """Library composition behind ``monitor``: (series, scores, p-values)."""
    scorer = archive.build_scorer()
    model = archive.calibration
    if archive.is_detector:
        series = multivariate.monitor(scorer, model, items, alpha)
    elif alpha is not None:
        series = charts.p_value_chart(model, scorer, items, alpha)
    else:
        series = charts.conformal_score_chart(model, scorer, items)
    s = scorer.score_many(items) if len(items) else np.empty(0)
    return series, s, cal.p_values(model, s)


def cmd_monitor(args) -> int:
    archive = _load_archive(args.archive)
    table = _table(args.stream)
    _check_stream(archive, table)
    series, s, pv = monitor_series(archive, table.items, args.alpha)
    if args.out:
        persist.save_series(series, args.out)
    n_alarm = 0
    for pos, point in enumerate(series.points):
        if point.flagged:
            n_alarm += 1
            print(f"alarm\t{point.index}\t{float(s[pos])!r}\t{float(pv[pos])!r}")
    print(f"summary\tpoints={len(series)}\talarms={n_alarm}", file=sys.stderr)
    return EXIT_ALARM if n_alarm else EXIT_OK


CHART_KINDS = ("shewhart", "score", "interval", "spike", "p_value")


def chart_series(args):
    """Library composition behind ``chart``."""
    if args.series:
        return persist.load_series(args.series)
    if args.kind == "shewhart":
        if not (args.calibration and args.stream):
            raise CliError("shewhart chart needs --calibration and --stream")
        calib, stream = _table(args.calibration), _table(args.stream)
        if calib.kind != INDIVIDUALS or stream.kind != INDIVIDUALS:
            raise CliError("shewhart chart needs individual values")
        return charts.shewhart_chart(calib.items, stream.items)
    if not (args.archive and args.stream):
        raise CliError("chart needs --archive and --stream (or --series)")
    archive = _load_archive(args.archive)
    table = _table(args.stream)
    model = archive.calibration
    if args.kind == "interval":
        if model.scorer_id != scores.MODEL_RESIDUAL:
            raise CliError("chart kind requires model-residual archive")
        _check_stream(archive, table)
        return charts.conformal_interval_chart(model, archive.build_scorer().model, table.items)
    if args.kind == "spike":
        if model.scorer_id != scores.NORMALIZED_RESIDUAL or "calibration_points" not in archive.extras:
            raise CliError("chart kind requires normalized-residual archive")
        _check_stream(archive, table)
        cp = archive.extras["calibration_points"]
        calib = [LabeledPoint(tuple(x), y) for x, y in zip(cp["x"], cp["y"])]
        return charts.uncertainty_spike_chart(model, archive.build_scorer().model, table.items,
                                              calib, args.width_alpha)
    _check_stream(archive, table)
    scorer = archive.build_scorer()
    if args.kind == "p_value":
        return charts.p_value_chart(model, scorer, table.items, args.alpha)
    return charts.conformal_score_chart(model, scorer, table.items)


def cmd_chart(args) -> int:
    series = chart_series(args)
    spec = render.RenderSpec(args.width, args.height, title=args.title)
    svg = render.render_chart(series, spec)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)
    print(f"wrote\t{args.out}\t{series.kind}\tpoints={len(series)}\tflagged={len(series.flagged_indices)}")
    return EXIT_OK


def simulation_spec(args) -> simulate.SimulationSpec:
    g = args.generator
    if g == "normal":
        gen = simulate.Normal(args.mu, args.sigma)
    elif g == "exponential":
        gen = simulate.Exponential(args.rate)
    else:
        gen = simulate.Bimodal(args.mu1, args.mu2, args.sigma, args.weight)
    if args.shift == "none":
        shift = None
    else:
        onset = args.n_stream // 2 if args.onset is None else args.onset
        kind = simulate.MEAN_SHIFT if args.shift == "mean" else simulate.SCALE_SHIFT
        shift = simulate.Shift(kind, args.delta, onset)
    return simulate.SimulationSpec(gen, args.n_calibration, args.n_stream, shift, args.seed)


def cmd_simulate(args) -> int:
    spec = simulation_spec(args)
    report = simulate.compare_charts(spec, args.alpha, args.reps)
    os.makedirs(args.out, exist_ok=True)
    files = {
        "report.tsv": render.render_report(report),
        "summary.tsv": render.render_summary(report),
    }
    if args.reps >= 1 and spec.n_stream:
        shew, conf = simulate.run_once(spec, args.alpha, 0)
        files["shewhart.svg"] = render.render_chart(shew)
        files["conformal.svg"] = render.render_chart(conf)
    for name, text in files.items():
        with open(os.path.join(args.out, name), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    sys.stdout.write(files["summary.tsv"])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="conformal-spc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("calibrate", help="fit control limits from in-control data")
    c.add_argument("input")
    c.add_argument("--alpha", type=_alpha, default=0.0027)
    c.add_argument("--scorer", choices=sorted(SCORERS))
    c.add_argument("--model", choices=("line", "knn"), default="line",
                   help="predictive model for the residual scorer")
    c.add_argument("--detector", choices=("knn", "mahalanobis"))
    c.add_argument("--k", type=int, default=5)
    c.add_argument("--ridge", type=float, default=None)
    c.add_argument("--split", type=float, default=0.5, help="training fraction for model/detector fits")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_calibrate)

    m = sub.add_parser("monitor", help="score a stream against an archive")
    m.add_argument("archive")
    m.add_argument("stream")
    m.add_argument("--alpha", type=_alpha, default=None, help="p-value line (defaults to archive alpha)")
    m.add_argument("--out", help="chart data file (JSON)")
    m.set_defaults(func=cmd_monitor)

    ch = sub.add_parser("chart", help="render a chart as SVG")
    ch.add_argument("--kind", choices=CHART_KINDS, default="score")
    ch.add_argument("--archive")
    ch.add_argument("--stream")
    ch.add_argument("--calibration", help="individual values for the shewhart chart")
    ch.add_argument("--series", help="chart data file written by monitor")
    ch.add_argument("--alpha", type=_alpha, default=None)
    ch.add_argument("--width-alpha", type=_alpha, default=0.05)
    ch.add_argument("--width", type=int, default=800)
    ch.add_argument("--height", type=int, default=360)
    ch.add_argument("--title")
    ch.add_argument("--out", required=True)
    ch.set_defaults(func=cmd_chart)

    s = sub.add_parser("simulate", help="compare Shewhart and conformal charts on simulated data")
    s.add_argument("--generator", choices=tuple(simulate.GENERATORS), default="normal")
    s.add_argument("--mu", type=float, default=0.0)
    s.add_argument("--sigma", type=float, default=1.0)
    s.add_argument("--rate", type=float, default=1.0)
    s.add_argument("--mu1", type=float, default=-3.0)
    s.add_argument("--mu2", type=float, default=3.0)
    s.add_argument("--weight", type=float, default=0.5)
    s.add_argument("--n-calibration", type=int, default=1000)
    s.add_argument("--n-stream", type=int, default=200)
    s.add_argument("--shift", choices=("none", "mean", "scale"), default="mean")
    s.add_argument("--delta", type=float, default=2.0, help="mean shift, or scale factor")
    s.add_argument("--onset", type=int, default=None)
    s.add_argument("--alpha", type=_alpha, default=0.0027)
    s.add_argument("--reps", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, DataFileError, persist.ArchiveError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
