"""Local HTTP+JSON analysis service.

Endpoints mirror the CLI subcommands and share its serialization, so
identical inputs produce byte-identical JSON on both paths.  Requests are
validated against the shipped schemas: schema violations return 400 with
the offending field path, computation failures return 422.  The service
is stateless except for named session documents written to a working
directory (single writer per session name).
"""

from __future__ import annotations

import json
import tempfile
import threading
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware

from .analysis import (
    evaluate_project,
    margins_to_dict,
    tune_policy_from_dict,
    tune_result_to_dict,
)
from .config import ConfigError, project_from_dict, validate_document
from .loop import SingularityError, closed_to_open_trace, margins
from .measure import FitError, ParseError, fit_ringdown, parse_bode_csv, parse_ringdown_csv
from .serialize import dumps_canonical, to_jsonable, trace_to_dict
from .tuning import autotune_fast

__all__ = ["create_app"]


def _json_response(doc, status_code: int = 200) -> Response:
    return Response(
        content=dumps_canonical(doc), status_code=status_code, media_type="application/json"
    )


def _error(status: int, message: str, field: str = "") -> Response:
    return _json_response({"error": {"message": message, "field": field}}, status)


def _parse_csv_text(text: str, parser):
    """Run a file parser over request-supplied CSV text."""
    with tempfile.NamedTemporaryFile(
        "w", suffix=".csv", encoding="utf-8", delete=False
    ) as fh:
        fh.write(text)
        path = fh.name
    try:
        return parser(path)
    finally:
        Path(path).unlink(missing_ok=True)


class _SessionStore:
    """Named JSON documents in a working directory, one writer per name."""

    def __init__(self, workdir: Path):
        self.workdir = workdir
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def _lock(self, name: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(name, threading.Lock())

    def save(self, name: str, doc: dict) -> None:
        self.workdir.mkdir(parents=True, exist_ok=True)
        with self._lock(name):
            (self.workdir / f"{name}.json").write_text(
                dumps_canonical(doc), encoding="utf-8"
            )

    def load(self, name: str) -> dict | None:
        path = self.workdir / f"{name}.json"
        if not path.exists():
            return None
        with self._lock(name):
            return json.loads(path.read_text(encoding="utf-8"))


def create_app(workdir: str | Path = ".pdhlock-sessions", ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="pdhlock", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    sessions = _SessionStore(Path(workdir))

    async def _body(request: Request, schema: str):
        try:
            doc = json.loads(await request.body())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"request body is not valid JSON: {exc}") from None
        validate_document(doc, schema)
        return doc

    @app.get("/health")
    async def health() -> Response:
        return _json_response({"status": "ok"})

    @app.post("/evaluate")
    async def evaluate(request: Request) -> Response:
        try:
            body = await _body(request, "evaluate_request")
            pc = project_from_dict(body["config"])
        except ConfigError as exc:
            return _error(400, str(exc), exc.field_path)
        grid = body.get("grid", {})
        try:
            doc = evaluate_project(
                pc,
                f_min=grid.get("f_min_Hz", 10.0),
                f_max=grid.get("f_max_Hz", 10e6),
                points_per_decade=grid.get("points_per_decade", 100),
                branch=body.get("branch", "both"),
            )
            validate_document(doc, "evaluate_response")
        except (SingularityError, FitError, ValueError, ZeroDivisionError) as exc:
            return _error(422, str(exc))
        if "session" in body:
            sessions.save(body["session"], {"request": body, "response": doc})
        return _json_response(doc)

    @app.post("/tune")
    async def tune(request: Request) -> Response:
        try:
            body = await _body(request, "tune_request")
            pc = project_from_dict(body["config"])
            policy = tune_policy_from_dict(body.get("policy"))
        except (ConfigError, ValueError) as exc:
            field = exc.field_path if isinstance(exc, ConfigError) else ""
            return _error(400, str(exc), field)
        try:
            res = autotune_fast(pc.loop, policy)
            doc = tune_result_to_dict(res)
            validate_document(doc, "tune_result")
        except (SingularityError, FitError, ValueError, ZeroDivisionError) as exc:
            return _error(422, str(exc))
        return _json_response(doc)

    @app.post("/ingest/bode")
    async def ingest_bode(request: Request) -> Response:
        try:
            body = await _body(request, "ingest_bode_request")
        except ConfigError as exc:
            return _error(400, str(exc), exc.field_path)
        try:
            trace = _parse_csv_text(body["csv"], parse_bode_csv)
            if body.get("label"):
                trace = trace.with_label(body["label"])
            if body.get("closed_to_open"):
                trace = closed_to_open_trace(trace)
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                rep = margins(trace)
        except ParseError as exc:
            return _error(400, str(exc))
        except (SingularityError, ValueError) as exc:
            return _error(422, str(exc))
        return _json_response(
            to_jsonable({"trace": trace_to_dict(trace), "margins": margins_to_dict(rep)})
        )

    @app.post("/ingest/ringdown")
    async def ingest_ringdown(request: Request) -> Response:
        try:
            body = await _body(request, "ingest_ringdown_request")
        except ConfigError as exc:
            return _error(400, str(exc), exc.field_path)
        try:
            trace = _parse_csv_text(body["csv"], parse_ringdown_csv)
            delta_nu_c, report = fit_ringdown(trace, body.get("exclude_initial_s"))
        except ParseError as exc:
            return _error(400, str(exc))
        except (FitError, ValueError) as exc:
            return _error(422, str(exc))
        doc = {"delta_nu_c_Hz": delta_nu_c, "report": report.to_dict()}
        validate_document(doc["report"], "fit_report")
        return _json_response(doc)

    @app.get("/session/{name}")
    async def session(name: str) -> Response:
        doc = sessions.load(name)
        if doc is None:
            return _error(404, f"no session named {name!r}")
        return _json_response(doc)

    if ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
