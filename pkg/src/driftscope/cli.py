"""Command-line workflow: learn, score, detect drift, explain.

Every subcommand is a pure function of its input files and flags and writes
its artifacts deterministically, so reruns produce identical bytes.  Plot
output defaults to the shared JSON plot-data format; ``--svg`` additionally
renders static figures next to the data files.  Logs go to stderr, data only
to files.  A ``key = value`` config file can supply any flag's default, and
``DRIFTSCOPE_THREADS`` caps internal parallelism.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from . import analysis, drift as drift_mod, plotdata, scoring, testkit
from .eventlog import (
    EventLog,
    Schema,
    apply_bins,
    discretize,
    DiscretizerSpec,
    infer_schema,
    load_schema,
    parse_log,
    slice_traces,
    split_train,
    write_csv,
)
from .parameters import EDBNModel, load_model, save_model, train_model
from .structure import StructureConfig

THREADS_ENV = "DRIFTSCOPE_THREADS"


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    try:
        n = int(raw)
        return max(1, n)
    except ValueError:
        return os.cpu_count() or 1


def _log(message: str) -> None:
    click.echo(message, err=True)


def _config_callback(ctx: click.Context, param: click.Parameter, value):
    """Load ``key = value`` lines as flag defaults before parsing the rest."""
    if not value:
        return value
    by_flag = {}
    for p in ctx.command.params:
        for opt in p.opts:
            by_flag[opt.lstrip("-")] = p
    defaults = {}
    for ln, line in enumerate(open(value, "r", encoding="utf-8"), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise click.BadParameter(f"{value}:{ln}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        target = by_flag.get(key) or by_flag.get(key.replace("_", "-"))
        if target is None:
            raise click.BadParameter(f"{value}:{ln}: unknown flag {key!r}")
        defaults[target.name] = raw.split() if target.multiple else raw
    ctx.default_map = {**defaults, **(ctx.default_map or {})}
    return value


def _config_option():
    return click.option(
        "--config", type=click.Path(exists=True, dir_okay=False), is_eager=True,
        expose_value=False, callback=_config_callback,
        help="key = value file supplying defaults for any flag",
    )


def _wrap_errors(fn):
    import functools

    @functools.wraps(fn)
    def inner(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except (ValueError, KeyError, OSError) as exc:
            raise click.ClickException(str(exc)) from exc

    return inner


@click.group()
@click.version_option(package_name="driftscope", prog_name="driftscope")
def main():
    """Event-log drift detection and root-cause analysis."""


def _load_log(input_path: str, schema_path: str | None, trace_id: str | None,
              timestamp: str | None, numeric: tuple[str, ...]) -> EventLog:
    if schema_path:
        schema = load_schema(schema_path)
    else:
        if not trace_id:
            raise click.ClickException("provide --schema or --trace-id")
        with open(input_path, "r", encoding="utf-8", newline="") as fh:
            header = next(csv.reader(fh))
        schema = infer_schema([h.strip() for h in header], trace_id=trace_id,
                              timestamp=timestamp, numeric=numeric)
    return parse_log(input_path, schema)


def _apply_model_bins(model: EDBNModel, log: EventLog) -> EventLog:
    """Replay the training discretization on fresh data."""
    for spec in model.schema.data_attributes:
        if spec.bins is not None and log.schema.attribute(spec.name).kind == "numeric":
            log = apply_bins(log, spec.name, spec.bins)
    return log


@main.command()
@_config_option()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--schema", "schema_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--trace-id", help="trace-id column (schema inferred: all else categorical)")
@click.option("--timestamp", help="timestamp column for trace ordering")
@click.option("--numeric", multiple=True, help="numeric column (repeatable); needs --discretize")
@click.option("--train-events", default=30000, show_default=True, type=int)
@click.option("--drop", multiple=True, help="attribute to remove before training (repeatable)")
@click.option("--discretize", "discretize_specs", multiple=True, metavar="ATTR=BINS",
              help="equal-frequency binning for a numeric attribute (repeatable)")
@click.option("--fd-threshold", default=0.99, show_default=True, type=float)
@click.option("--cardinality-guard", default=0.95, show_default=True, type=float)
@click.option("--k-max", default=2, show_default=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@_wrap_errors
def learn(input_path, schema_path, trace_id, timestamp, numeric, train_events, drop,
          discretize_specs, fd_threshold, cardinality_guard, k_max, out_path):
    """Train a model on the first --train-events events and save it."""
    from .eventlog import filter_attributes

    log = _load_log(input_path, schema_path, trace_id, timestamp, numeric)
    if drop:
        log = filter_attributes(log, list(drop))
    train, _ = split_train(log, train_events)
    for spec in discretize_specs:
        attr, _, bins = spec.partition("=")
        if not bins:
            raise click.ClickException(f"--discretize expects ATTR=BINS, got {spec!r}")
        train = discretize(train, DiscretizerSpec(attr, int(bins)))
    config = StructureConfig(fd_threshold=fd_threshold, cardinality_guard=cardinality_guard,
                             k_max=k_max)
    model = train_model(train, config)
    save_model(model, out_path)
    _log(f"trained on {train.n_traces} traces / {train.n_events} events; "
         f"{len(model.graph.fd_edges)} FDs, {len(model.graph.cd_edges)} CDs -> {out_path}")


@main.command()
@_config_option()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--schema", "schema_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--trace-id", help="trace-id column when no schema file is given")
@click.option("--timestamp")
@click.option("--numeric", multiple=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False),
              help="per-attribute scores CSV")
@click.option("--trace-out", "trace_out", type=click.Path(dir_okay=False),
              help="compact per-trace means CSV")
@_wrap_errors
def score(model_path, input_path, schema_path, trace_id, timestamp, numeric, out_path, trace_out):
    """Score a log against a saved model (training data may be included)."""
    model = load_model(model_path)
    if not schema_path and not trace_id:
        schema = model.schema
        log = parse_log(input_path, schema)
    else:
        log = _load_log(input_path, schema_path, trace_id, timestamp, numeric)
    log = _apply_model_bins(model, log)
    table = scoring.score_log_table(model, log)
    scoring.write_scores_csv(model, log, out_path, table=table)
    if trace_out:
        _write_trace_means(table, trace_out)
    _log(f"scored {table.n_traces} traces / {len(table.total)} events -> {out_path}")


def _write_trace_means(table: scoring.LogScores, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["trace_index", "trace_id", "trace_mean", "first_event_time"])
        for i in range(table.n_traces):
            epoch = table.first_event_epochs[i]
            writer.writerow([i, table.trace_ids[i], repr(float(table.trace_means[i])),
                             "" if epoch is None else repr(epoch)])


def _read_trace_means(path) -> list[float]:
    """Trace means from either the compact or the long scores CSV, in order."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise click.ClickException(f"{path}: empty scores file")
        cols = {name: i for i, name in enumerate(header)}
        if "trace_mean" not in cols:
            raise click.ClickException(f"{path}: no trace_mean column")
        means: list[float] = []
        if "trace_index" in cols:
            for row in reader:
                means.append(float(row[cols["trace_mean"]]))
        else:
            tid_col, mean_col = cols["trace_id"], cols["trace_mean"]
            last_tid = None
            for row in reader:
                if row[tid_col] != last_tid:
                    means.append(float(row[mean_col]))
                    last_tid = row[tid_col]
    if not means:
        raise click.ClickException(f"{path}: no scored traces")
    return means


@main.command("drift")
@_config_option()
@click.option("--scores", "scores_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--window", "windows", multiple=True, type=int, default=(400,), show_default=True)
@click.option("--step", default=1, show_default=True, type=int)
@click.option("--threshold", default=0.01, show_default=True, type=float)
@click.option("--min-separation", type=int, help="merge radius for drift points [default: window]")
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--svg", is_flag=True, help="also render static figures")
@_wrap_errors
def drift_cmd(scores_path, windows, step, threshold, min_separation, out_dir, svg):
    """Sliding-window KS p-values and drift points for one or more windows."""
    means = _read_trace_means(scores_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def run(window: int):
        series = drift_mod.sliding_window_pvalues(means, window, step)
        points = drift_mod.detect_drift_points(series, threshold, min_separation)
        return window, series, points

    with ThreadPoolExecutor(max_workers=min(_threads(), len(windows))) as pool:
        results = list(pool.map(run, windows))

    all_series, all_points = [], {}
    for window, series, points in results:
        all_series.append(series)
        all_points[window] = points
        with open(out / f"pvalues_w{window}.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["center_index", "d", "p"])
            for pt in series.points:
                writer.writerow([pt.center_index, repr(pt.d_stat), repr(pt.p_value)])

    points_doc = {
        str(window): [
            {"trace_index": p.trace_index, "p_at_min": p.p_at_min, "window_size": p.window_size}
            for p in points
        ]
        for window, points in all_points.items()
    }
    with open(out / "drift_points.json", "w", encoding="utf-8") as fh:
        json.dump(points_doc, fh, sort_keys=True, indent=1)
        fh.write("\n")

    doc = plotdata.drift_pvalues_doc(all_series, threshold, all_points)
    plotdata.write_doc(doc, out / "drift_pvalues.json")
    if svg:
        plotdata.render_svg(doc, out / "drift_pvalues.svg")
    for window, points in sorted(all_points.items()):
        _log(f"window {window}: {len(points)} drift point(s) "
             f"{[p.trace_index for p in points]}")


@main.command()
@_config_option()
@click.option("--drifts", "drifts_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--window", type=int, help="which window's drift points to use")
@click.option("--n-traces", required=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@_wrap_errors
def segment(drifts_path, window, n_traces, out_path):
    """Partition the trace range at detected drift points."""
    doc = json.load(open(drifts_path, "r", encoding="utf-8"))
    if window is not None:
        key = str(window)
        if key not in doc:
            raise click.ClickException(f"no drift points for window {window} in {drifts_path}")
        entries = doc[key]
    elif len(doc) == 1:
        entries = next(iter(doc.values()))
    else:
        raise click.ClickException(f"{drifts_path} holds several windows; pick one with --window")
    indices = [e["trace_index"] for e in entries]
    segments = drift_mod.segment_log(n_traces, indices)
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(
            {"segments": [
                {"id": s.id, "start_trace": s.start_trace, "end_trace": s.end_trace,
                 "label": s.label}
                for s in segments
            ]},
            fh, sort_keys=True, indent=1,
        )
        fh.write("\n")
    _log(f"{len(segments)} segments -> {out_path}")


def _load_segments(path) -> list[drift_mod.Segment]:
    doc = json.load(open(path, "r", encoding="utf-8"))
    return [
        drift_mod.Segment(id=s["id"], start_trace=s["start_trace"], end_trace=s["end_trace"],
                          label=s.get("label"))
        for s in doc["segments"]
    ]


def _scored_log(model_path, input_path, schema_path, trace_id, timestamp, numeric):
    model = load_model(model_path)
    if not schema_path and not trace_id:
        log = parse_log(input_path, model.schema)
    else:
        log = _load_log(input_path, schema_path, trace_id, timestamp, numeric)
    log = _apply_model_bins(model, log)
    return model, log, scoring.score_log_table(model, log)


_shared_input_options = [
    click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False)),
    click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False)),
    click.option("--schema", "schema_path", type=click.Path(exists=True, dir_okay=False)),
    click.option("--trace-id"),
    click.option("--timestamp"),
    click.option("--numeric", multiple=True),
]


def _with_options(options):
    def deco(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn

    return deco


@main.command()
@_config_option()
@_with_options(_shared_input_options)
@click.option("--segments", "segments_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--svg", is_flag=True)
@_wrap_errors
def density(model_path, input_path, schema_path, trace_id, timestamp, numeric,
            segments_path, out_dir, svg):
    """Attribute-density summaries per segment plus the median overlay."""
    model, log, table = _scored_log(model_path, input_path, schema_path, trace_id,
                                    timestamp, numeric)
    segments = _load_segments(segments_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def summarize(seg):
        return analysis.attribute_density(model, log, seg, table=table)

    with ThreadPoolExecutor(max_workers=min(_threads(), len(segments))) as pool:
        summaries = list(pool.map(summarize, segments))

    overlay: dict[str, dict[int, float]] = {}
    for summary in summaries:
        doc = plotdata.attribute_density_doc(summary)
        plotdata.write_doc(doc, out / f"density_seg{summary.segment_id}.json")
        if svg:
            plotdata.render_svg(doc, out / f"density_seg{summary.segment_id}.svg")
        for attr, d in summary.per_attribute.items():
            overlay.setdefault(attr, {})[summary.segment_id] = d.median

    overlay_doc = plotdata.median_overlay_doc(overlay)
    plotdata.write_doc(overlay_doc, out / "median_overlay.json")
    if svg:
        plotdata.render_svg(overlay_doc, out / "median_overlay.svg")
    with open(out / "median_overlay.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        seg_ids = [s.id for s in segments]
        writer.writerow(["attribute"] + [f"segment_{sid}" for sid in seg_ids])
        for attr, per_seg in overlay.items():
            writer.writerow([attr] + [repr(per_seg[sid]) for sid in seg_ids])
    _log(f"{len(summaries)} density summaries -> {out_dir}")


@main.command()
@_config_option()
@_with_options(_shared_input_options)
@click.option("--attribute", required=True)
@click.option("--segments", "segments_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--segment", "segment_id", type=int, help="segment id within --segments")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--svg", is_flag=True)
@_wrap_errors
def decompose(model_path, input_path, schema_path, trace_id, timestamp, numeric,
              attribute, segments_path, segment_id, out_path, svg):
    """Per-trace value/CPT/FD component series for one attribute."""
    model, log, table = _scored_log(model_path, input_path, schema_path, trace_id,
                                    timestamp, numeric)
    seg = None
    if segments_path is not None and segment_id is not None:
        matches = [s for s in _load_segments(segments_path) if s.id == segment_id]
        if not matches:
            raise click.ClickException(f"segment {segment_id} not in {segments_path}")
        seg = matches[0]
    breakdown = analysis.decompose_attribute(model, log, attribute, seg, table=table)
    doc = plotdata.component_breakdown_doc(breakdown)
    plotdata.write_doc(doc, out_path)
    if svg:
        plotdata.render_svg(doc, Path(out_path).with_suffix(".svg"))
    _log(f"decomposed {attribute!r} over {len(breakdown.trace_ids)} traces -> {out_path}")


@main.command()
@_config_option()
@_with_options(_shared_input_options)
@click.option("--segments", "segments_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--segment", "segment_id", type=int)
@click.option("--k", default=2.5, show_default=True, type=float)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@_wrap_errors
def outliers(model_path, input_path, schema_path, trace_id, timestamp, numeric,
             segments_path, segment_id, k, out_path):
    """Flag traces deviating more than k scaled MADs on any attribute."""
    model, log, table = _scored_log(model_path, input_path, schema_path, trace_id,
                                    timestamp, numeric)
    seg = None
    if segments_path is not None and segment_id is not None:
        matches = [s for s in _load_segments(segments_path) if s.id == segment_id]
        if not matches:
            raise click.ClickException(f"segment {segment_id} not in {segments_path}")
        seg = matches[0]
    summary = analysis.attribute_density(model, log, seg, table=table)
    reports = analysis.flag_outliers(summary, k)
    plotdata.write_doc(plotdata.outlier_report_doc(reports, k), out_path)
    _log(f"{len(reports)} outlier trace(s) -> {out_path}")


@main.command()
@_config_option()
@click.option("--fixture", type=click.Choice(["default", "drift-benchmark"]), default="default",
              show_default=True)
@click.option("--n-traces", default=2000, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--drift-at", type=int, help="drift index for the drift-benchmark fixture")
@click.option("--id-column", is_flag=True, help="include a unique per-event id column")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--truth-out", type=click.Path(dir_okay=False))
@_wrap_errors
def synth(fixture, n_traces, seed, drift_at, id_column, out_path, truth_out):
    """Generate a synthetic process log with known ground truth."""
    drifts: list[testkit.DriftSpec] = []
    if fixture == "drift-benchmark":
        spec, drift_spec = testkit.drift_benchmark(seed, at_trace=drift_at or n_traces // 2)
        drifts = [drift_spec]
    else:
        spec = testkit.default_spec(seed, id_column="eventid" if id_column else None)
    log, truth = testkit.generate_log(spec, n_traces, drifts)
    write_csv(log, out_path)
    if truth_out:
        with open(truth_out, "w", encoding="utf-8") as fh:
            json.dump(truth.to_dict(), fh, sort_keys=True, indent=1)
            fh.write("\n")
    _log(f"{log.n_traces} traces / {log.n_events} events -> {out_path}")


@main.command()
@_config_option()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8571, show_default=True, type=int)
@click.option("--data-dir", type=click.Path(file_okay=False), default=".driftscope",
              show_default=True)
@_wrap_errors
def serve(host, port, data_dir):
    """Start the HTTP API used by the explorer UI."""
    import uvicorn

    from .api import create_app

    app = create_app(data_dir)
    _log(f"serving on http://{host}:{port} (data dir {data_dir})")
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
