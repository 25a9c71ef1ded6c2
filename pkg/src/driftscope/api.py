"""HTTP/JSON service backing the explorer UI.

Uploaded logs and trained models live in memory (files mirrored under the
data directory); trace-score series are cached per model so changing the
drift window or the detection threshold never rescoures anything — the
``scoring_runs`` counter on the model resource makes that observable.
Training runs asynchronously with one job in flight per log, and a model id
resolves only once the trained model is fully published.
"""

from __future__ import annotations

import threading
import traceback
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, File, Form, HTTPException, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from . import analysis, plotdata
from .drift import Segment, detect_drift_points, segment_log, sliding_window_pvalues
from .eventlog import EventLog, ParseError, SchemaError, infer_schema, parse_log, slice_traces, split_train
from .parameters import EDBNModel, train_model
from .scoring import LogScores, score_log_table
from .structure import StructureConfig


@dataclass
class LogEntry:
    id: str
    log: EventLog
    path: Path | None
    training_job: str | None = None  # job id while a trainer is in flight


@dataclass
class ModelEntry:
    id: str
    log_id: str
    model: EDBNModel
    table: LogScores
    train_range: tuple[int, int]
    scoring_runs: int = 1
    segments: list[Segment] = field(default_factory=list)


@dataclass
class Job:
    id: str
    log_id: str
    model_id: str
    status: str = "queued"  # queued | running | done | error
    error: str | None = None


class TrainRequest(BaseModel):
    train_events: int | None = None
    segment: tuple[int, int] | None = None
    fd_threshold: float = 0.99
    cardinality_guard: float = 0.95
    k_max: int = 2


class SegmentsRequest(BaseModel):
    from_drifts: dict | None = None  # {window, threshold?, step?, min_separation?}
    ranges: list[tuple[int, int]] | None = None


class _State:
    def __init__(self, data_dir: Path | None):
        self.data_dir = data_dir
        self.logs: dict[str, LogEntry] = {}
        self.models: dict[str, ModelEntry] = {}
        self.jobs: dict[str, Job] = {}
        self.lock = threading.Lock()
        self._counter = 0

    def next_id(self, prefix: str) -> str:
        with self.lock:
            self._counter += 1
            return f"{prefix}-{self._counter}"


def create_app(data_dir=None, run_jobs_inline: bool = False) -> FastAPI:
    """Build the service; ``run_jobs_inline`` executes training synchronously
    (used by tests that do not want to poll)."""
    state = _State(Path(data_dir) if data_dir else None)
    if state.data_dir:
        state.data_dir.mkdir(parents=True, exist_ok=True)

    app = FastAPI(title="driftscope")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.store = state

    def get_log(log_id: str) -> LogEntry:
        entry = state.logs.get(log_id)
        if entry is None:
            raise HTTPException(404, f"unknown log {log_id}")
        return entry

    def get_model(model_id: str) -> ModelEntry:
        entry = state.models.get(model_id)
        if entry is None:
            raise HTTPException(404, f"unknown model {model_id}")
        return entry

    def get_segment(entry: ModelEntry, segment_id: int) -> Segment:
        for seg in entry.segments:
            if seg.id == segment_id:
                return seg
        raise HTTPException(404, f"model {entry.id} has no segment {segment_id}")

    @app.post("/logs")
    async def upload_log(file: UploadFile = File(...), trace_id: str = Form(...),
                         timestamp: str | None = Form(None)):
        raw = await file.read()
        log_id = state.next_id("log")
        path = None
        if state.data_dir:
            path = state.data_dir / f"{log_id}.csv"
            path.write_bytes(raw)
        else:
            import tempfile

            with tempfile.NamedTemporaryFile("wb", suffix=".csv", delete=False) as fh:
                fh.write(raw)
                path = Path(fh.name)
        try:
            with open(path, "r", encoding="utf-8", newline="") as fh:
                import csv as _csv

                header = next(_csv.reader(fh))
            schema = infer_schema([h.strip() for h in header], trace_id=trace_id,
                                  timestamp=timestamp or None)
            log = parse_log(path, schema)
        except (StopIteration, ParseError, SchemaError) as exc:
            raise HTTPException(422, str(exc)) from None
        with state.lock:
            state.logs[log_id] = LogEntry(id=log_id, log=log, path=path)
        return {"log_id": log_id, "n_traces": log.n_traces, "n_events": log.n_events}

    @app.post("/logs/{log_id}/models", status_code=202)
    def train(log_id: str, request: TrainRequest):
        entry = get_log(log_id)
        if (request.train_events is None) == (request.segment is None):
            raise HTTPException(422, "provide exactly one of train_events or segment")
        with state.lock:
            if entry.training_job is not None and state.jobs[entry.training_job].status in (
                "queued", "running"
            ):
                raise HTTPException(409, f"training already running for log {log_id}")
        job_id = state.next_id("job")
        model_id = state.next_id("model")
        job = Job(id=job_id, log_id=log_id, model_id=model_id)
        with state.lock:
            state.jobs[job_id] = job
            entry.training_job = job_id

        def run():
            job.status = "running"
            try:
                log = entry.log
                if request.train_events is not None:
                    if not (0 < request.train_events <= log.n_events):
                        raise ValueError(
                            f"train_events must be in (0, {log.n_events}]"
                        )
                    train_log, _ = split_train(log, request.train_events)
                    train_range = (0, train_log.n_traces)
                else:
                    lo, hi = request.segment
                    train_log = slice_traces(log, lo, hi)
                    train_range = (lo, hi)
                config = StructureConfig(
                    fd_threshold=request.fd_threshold,
                    cardinality_guard=request.cardinality_guard,
                    k_max=request.k_max,
                )
                model = train_model(train_log, config)
                table = score_log_table(model, log)  # the one and only scoring run
                published = ModelEntry(
                    id=model_id, log_id=log_id, model=model, table=table,
                    train_range=train_range,
                )
                with state.lock:
                    state.models[model_id] = published
                job.status = "done"
            except Exception as exc:  # report, don't crash the server
                job.error = f"{exc.__class__.__name__}: {exc}"
                job.status = "error"
                traceback.print_exc()
            finally:
                with state.lock:
                    if entry.training_job == job_id:
                        entry.training_job = None

        if run_jobs_inline:
            run()
        else:
            threading.Thread(target=run, daemon=True).start()
        return {"job_id": job_id, "model_id": model_id}

    @app.get("/jobs/{job_id}")
    def job_status(job_id: str):
        job = state.jobs.get(job_id)
        if job is None:
            raise HTTPException(404, f"unknown job {job_id}")
        return {"job_id": job.id, "status": job.status, "model_id": job.model_id,
                "error": job.error}

    @app.get("/logs/{log_id}")
    def log_info(log_id: str):
        entry = get_log(log_id)
        return {
            "log_id": entry.id,
            "n_traces": entry.log.n_traces,
            "n_events": entry.log.n_events,
            "attributes": [a.name for a in entry.log.schema.data_attributes],
            "training_job": entry.training_job,
        }

    @app.get("/models/{model_id}")
    def model_info(model_id: str):
        entry = get_model(model_id)
        return {
            "model_id": entry.id,
            "log_id": entry.log_id,
            "train_range": list(entry.train_range),
            "n_traces": entry.table.n_traces,
            "scoring_runs": entry.scoring_runs,
            "attributes": list(entry.table.attrs),
            "segments": [
                {"id": s.id, "start_trace": s.start_trace, "end_trace": s.end_trace,
                 "label": s.label}
                for s in entry.segments
            ],
        }

    @app.get("/models/{model_id}/scores")
    def model_scores(model_id: str):
        entry = get_model(model_id)
        return plotdata.trace_scores_doc(entry.table, train_end=entry.train_range[1])

    @app.get("/models/{model_id}/drift")
    def model_drift(model_id: str, window: int = 400, threshold: float = 0.01,
                    step: int = 1, min_separation: int | None = None):
        entry = get_model(model_id)
        try:
            series = sliding_window_pvalues(entry.table.trace_means, window, step)
            points = detect_drift_points(series, threshold, min_separation)
        except ValueError as exc:
            raise HTTPException(422, str(exc)) from None
        doc = plotdata.drift_pvalues_doc([series], threshold, {window: points})
        return {
            "plot": doc,
            "drift_points": [
                {"trace_index": p.trace_index, "p_at_min": p.p_at_min,
                 "window_size": p.window_size}
                for p in points
            ],
        }

    @app.post("/models/{model_id}/segments")
    def model_segments(model_id: str, request: SegmentsRequest):
        entry = get_model(model_id)
        n = entry.table.n_traces
        if (request.from_drifts is None) == (request.ranges is None):
            raise HTTPException(422, "provide exactly one of from_drifts or ranges")
        try:
            if request.from_drifts is not None:
                params = request.from_drifts
                series = sliding_window_pvalues(
                    entry.table.trace_means, int(params.get("window", 400)),
                    int(params.get("step", 1))
                )
                points = detect_drift_points(
                    series, float(params.get("threshold", 0.01)),
                    params.get("min_separation"),
                )
                segments = segment_log(n, points)
            else:
                segments = []
                for lo, hi in request.ranges:
                    if not (0 <= lo < hi <= n):
                        raise ValueError(f"range [{lo}, {hi}) out of bounds for {n} traces")
                    segments.append(Segment(id=len(segments), start_trace=lo, end_trace=hi))
        except ValueError as exc:
            raise HTTPException(422, str(exc)) from None
        entry.segments = segments
        return {
            "segments": [
                {"id": s.id, "start_trace": s.start_trace, "end_trace": s.end_trace,
                 "label": s.label}
                for s in segments
            ]
        }

    @app.get("/models/{model_id}/segments/{segment_id}/density")
    def segment_density(model_id: str, segment_id: int):
        entry = get_model(model_id)
        seg = get_segment(entry, segment_id)
        summary = analysis.attribute_density(
            entry.model, state.logs[entry.log_id].log, seg, table=entry.table
        )
        return plotdata.attribute_density_doc(summary)

    @app.get("/models/{model_id}/segments/{segment_id}/decompose")
    def segment_decompose(model_id: str, segment_id: int, attribute: str):
        entry = get_model(model_id)
        seg = get_segment(entry, segment_id)
        try:
            breakdown = analysis.decompose_attribute(
                entry.model, state.logs[entry.log_id].log, attribute, seg, table=entry.table
            )
        except KeyError as exc:
            raise HTTPException(422, str(exc)) from None
        return plotdata.component_breakdown_doc(breakdown)

    @app.get("/models/{model_id}/outliers")
    def model_outliers(model_id: str, k: float = 2.5, segment: int | None = None):
        entry = get_model(model_id)
        seg = get_segment(entry, segment) if segment is not None else None
        try:
            summary = analysis.attribute_density(
                entry.model, state.logs[entry.log_id].log, seg, table=entry.table
            )
            reports = analysis.flag_outliers(summary, k)
        except ValueError as exc:
            raise HTTPException(422, str(exc)) from None
        return plotdata.outlier_report_doc(reports, k)

    return app
