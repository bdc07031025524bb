"""Minimal HTTP session service for live trial collection.

JSON request/response bodies over plain HTTP; stimulus payloads are the
standard 2-channel wave files. The service owns the schedule: clients fetch
the next trial, play the delivered audio, and post exactly one grade per
trial in order. Several sessions can run concurrently; writes within one
session are serialized.

Routes:
    GET  /health
    GET  /designs
    POST /sessions                     {design_id, participant_id, seed}
    GET  /sessions/{id}/next
    POST /sessions/{id}/responses      {trial_index, grade, latency_ms}
    GET  /sessions/{id}/log            line-delimited session records
    GET  /sessions/{id}/report         logistic fit of this session
    GET  /stimuli/{design_id}/{pair_id}.wav
Optionally serves a static console directory at /console/.
"""

from __future__ import annotations

import io
import json
import re
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from . import psychometrics, session as session_mod, stimulus
from .session import (
    DuplicateResponseError,
    ExperimentDesign,
    Grade,
    SessionLog,
    UnknownTrialError,
    builtin_designs,
    log_to_lines,
    new_session,
)


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


@dataclass
class _LiveSession:
    log: SessionLog
    design: ExperimentDesign
    lock: threading.Lock = field(default_factory=threading.Lock)
    served: set[int] = field(default_factory=set)


class SessionService:
    """Session registry and trial protocol, independent of the transport."""

    def __init__(
        self,
        designs: dict[str, ExperimentDesign] | None = None,
        sample_rate: int = stimulus.DEFAULT_SAMPLE_RATE,
        encoding: str = "int16",
        tail_ms: float = 50.0,
    ):
        self.designs = dict(designs) if designs is not None else builtin_designs()
        self.sample_rate = sample_rate
        self.encoding = encoding
        self.tail_ms = tail_ms
        self._sessions: dict[str, _LiveSession] = {}
        self._registry_lock = threading.Lock()
        self._wav_cache: dict[tuple[str, str], bytes] = {}

    # -- protocol operations ------------------------------------------------

    def design_summaries(self) -> list[dict]:
        out = []
        for design in self.designs.values():
            out.append(
                {
                    "id": design.id,
                    "n_test_pairs": len(design.test_pairs),
                    "repetitions": design.repetitions,
                    "n_trials": len(design.test_pairs) * design.repetitions,
                    "judgment_labels": list(design.judgment_labels),
                }
            )
        return out

    def create_session(self, design_id: str, participant_id: str, seed: int) -> dict:
        design = self.designs.get(design_id)
        if design is None:
            raise ApiError(404, f"unknown design {design_id!r}")
        log = new_session(design, participant_id, int(seed), started_at=_now())
        session_id = uuid.uuid4().hex[:12]
        with self._registry_lock:
            self._sessions[session_id] = _LiveSession(log=log, design=design)
        return {
            "session_id": session_id,
            "design_id": design_id,
            "participant_id": participant_id,
            "seed": int(seed),
            "n_trials": len(log.schedule),
            "judgment_labels": list(design.judgment_labels),
            "gap_ms": design.gap_ms,
            "iti_ms": design.iti_ms,
        }

    def _live(self, session_id: str) -> _LiveSession:
        live = self._sessions.get(session_id)
        if live is None:
            raise ApiError(404, f"unknown session {session_id!r}")
        return live

    def next_trial(self, session_id: str) -> dict:
        live = self._live(session_id)
        with live.lock:
            index = live.log.first_unanswered()
            total = len(live.log.schedule)
            if index is None:
                return {
                    "done": True,
                    "answered": live.log.answered,
                    "n_trials": total,
                }
            trial = live.log.schedule[index]
            live.served.add(index)
            design = live.design
            return {
                "done": False,
                "trial_index": trial.index,
                "pair_id": trial.pair_id,
                "repetition": trial.repetition,
                "answered": live.log.answered,
                "n_trials": total,
                "order": ["reference", "test"],
                "gap_ms": design.gap_ms,
                "judgment_labels": list(design.judgment_labels),
                "reference_url": f"/stimuli/{design.id}/{design.reference.id}.wav",
                "test_url": f"/stimuli/{design.id}/{trial.pair_id}.wav",
            }

    def submit_response(
        self,
        session_id: str,
        trial_index: int,
        grade: str,
        latency_ms: float | None = None,
    ) -> dict:
        live = self._live(session_id)
        with live.lock:
            expected = live.log.first_unanswered()
            if expected is None:
                raise ApiError(409, "session already complete")
            if trial_index != expected:
                if live.log.response_for(trial_index) is not None:
                    raise ApiError(409, f"trial {trial_index} already answered")
                raise ApiError(
                    409,
                    f"out of order: trial {expected} is next, got {trial_index}",
                )
            if trial_index not in live.served:
                raise ApiError(409, f"trial {trial_index} has not been fetched")
            try:
                canonical = Grade(grade)
            except ValueError:
                raise ApiError(400, f"unknown grade {grade!r}")
            try:
                live.log.record(trial_index, canonical, latency_ms, at=_now())
            except (DuplicateResponseError, UnknownTrialError) as exc:
                raise ApiError(409, str(exc))
            return {
                "ok": True,
                "answered": live.log.answered,
                "n_trials": len(live.log.schedule),
                "done": live.log.is_complete,
            }

    def log_text(self, session_id: str) -> str:
        live = self._live(session_id)
        with live.lock:
            return "\n".join(log_to_lines(live.log)) + "\n"

    def report(self, session_id: str) -> dict:
        live = self._live(session_id)
        with live.lock:
            table = session_mod.tally(live.log, live.design)
        points = psychometrics.collapse(table, psychometrics.CollapseRule.LOWER_VS_NOT_LOWER)
        try:
            fit = psychometrics.fit_logistic(
                points, collapse_rule=psychometrics.CollapseRule.LOWER_VS_NOT_LOWER
            )
            band = psychometrics.confidence_band(fit, [p.level for p in points])
        except (psychometrics.DegenerateDataError, psychometrics.SeparationError,
                psychometrics.NotConvergedError) as exc:
            raise ApiError(422, f"cannot fit this session: {exc}")
        return psychometrics.fit_report(fit, points, band)

    def wav_bytes(self, design_id: str, pair_id: str) -> bytes:
        key = (design_id, pair_id)
        cached = self._wav_cache.get(key)
        if cached is not None:
            return cached
        design = self.designs.get(design_id)
        if design is None:
            raise ApiError(404, f"unknown design {design_id!r}")
        try:
            pair = design.pair(pair_id)
        except KeyError:
            raise ApiError(404, f"unknown pair {pair_id!r} in design {design_id!r}")
        rendered = stimulus.render_pair(pair, self.sample_rate, tail_ms=self.tail_ms)
        buffer = io.BytesIO()
        stimulus.write_wav(rendered, buffer, self.encoding)
        data = buffer.getvalue()
        self._wav_cache[key] = data
        return data


# -- HTTP layer --------------------------------------------------------------

_ROUTES = {
    "health": re.compile(r"^/health$"),
    "designs": re.compile(r"^/designs$"),
    "sessions": re.compile(r"^/sessions$"),
    "next": re.compile(r"^/sessions/([0-9a-f]+)/next$"),
    "responses": re.compile(r"^/sessions/([0-9a-f]+)/responses$"),
    "log": re.compile(r"^/sessions/([0-9a-f]+)/log$"),
    "report": re.compile(r"^/sessions/([0-9a-f]+)/report$"),
    "wav": re.compile(r"^/stimuli/([\w.-]+)/([\w+-]+)\.wav$"),
}

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".svg": "image/svg+xml",
    ".map": "application/json",
}


class _Handler(BaseHTTPRequestHandler):
    service: SessionService
    console_dir: Path | None = None
    quiet = True

    # -- plumbing -----------------------------------------------------------

    def log_message(self, fmt, *args):  # noqa: N802 - base class signature
        if not self.quiet:
            super().log_message(fmt, *args)

    def _send(self, status: int, body: bytes, content_type: str) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, payload, status: int = 200) -> None:
        self._send(status, json.dumps(payload).encode(), "application/json")

    def _send_error_json(self, status: int, message: str) -> None:
        self._send_json({"error": message}, status)

    def _read_json(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw:
            raise ApiError(400, "empty request body")
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ApiError(400, f"malformed JSON body ({exc})")
        if not isinstance(data, dict):
            raise ApiError(400, "request body must be a JSON object")
        return data

    # -- handlers -------------------------------------------------------------

    def do_OPTIONS(self):  # noqa: N802
        self._send(204, b"", "text/plain")

    def do_GET(self):  # noqa: N802
        try:
            self._route_get()
        except ApiError as exc:
            self._send_error_json(exc.status, exc.message)
        except Exception as exc:  # pragma: no cover - defensive
            self._send_error_json(500, f"internal error: {exc}")

    def do_POST(self):  # noqa: N802
        try:
            self._route_post()
        except ApiError as exc:
            self._send_error_json(exc.status, exc.message)
        except Exception as exc:  # pragma: no cover - defensive
            self._send_error_json(500, f"internal error: {exc}")

    def _route_get(self) -> None:
        path = self.path.split("?", 1)[0]
        service = self.service
        if _ROUTES["health"].match(path):
            self._send_json({"status": "ok"})
            return
        if _ROUTES["designs"].match(path):
            self._send_json(service.design_summaries())
            return
        m = _ROUTES["next"].match(path)
        if m:
            self._send_json(service.next_trial(m.group(1)))
            return
        m = _ROUTES["log"].match(path)
        if m:
            self._send(200, service.log_text(m.group(1)).encode(), "text/plain; charset=utf-8")
            return
        m = _ROUTES["report"].match(path)
        if m:
            self._send_json(service.report(m.group(1)))
            return
        m = _ROUTES["wav"].match(path)
        if m:
            self._send(200, service.wav_bytes(m.group(1), m.group(2)), "audio/wav")
            return
        if self.console_dir is not None and self._serve_static(path):
            return
        raise ApiError(404, f"no route for {path}")

    def _route_post(self) -> None:
        path = self.path.split("?", 1)[0]
        service = self.service
        if _ROUTES["sessions"].match(path):
            body = self._read_json()
            for key in ("design_id", "participant_id", "seed"):
                if key not in body:
                    raise ApiError(400, f"missing field {key!r}")
            created = service.create_session(
                body["design_id"], str(body["participant_id"]), int(body["seed"])
            )
            self._send_json(created, status=201)
            return
        m = _ROUTES["responses"].match(path)
        if m:
            body = self._read_json()
            for key in ("trial_index", "grade"):
                if key not in body:
                    raise ApiError(400, f"missing field {key!r}")
            result = service.submit_response(
                m.group(1),
                int(body["trial_index"]),
                str(body["grade"]),
                body.get("latency_ms"),
            )
            self._send_json(result)
            return
        raise ApiError(404, f"no route for {path}")

    def _serve_static(self, path: str) -> bool:
        if path in ("/", "/console", "/console/"):
            path = "/console/index.html"
        if not path.startswith("/console/"):
            return False
        rel = path[len("/console/"):]
        base = self.console_dir.resolve()
        target = (base / rel).resolve()
        if not str(target).startswith(str(base)) or not target.is_file():
            raise ApiError(404, f"no console file {rel!r}")
        content_type = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
        self._send(200, target.read_bytes(), content_type)
        return True


def make_server(
    service: SessionService,
    host: str = "127.0.0.1",
    port: int = 8765,
    console_dir: str | Path | None = None,
    quiet: bool = True,
) -> ThreadingHTTPServer:
    handler = type(
        "BoundHandler",
        (_Handler,),
        {
            "service": service,
            "console_dir": Path(console_dir) if console_dir else None,
            "quiet": quiet,
        },
    )
    return ThreadingHTTPServer((host, port), handler)


def serve_forever(
    service: SessionService,
    host: str = "127.0.0.1",
    port: int = 8765,
    console_dir: str | Path | None = None,
    quiet: bool = False,
) -> None:
    server = make_server(service, host, port, console_dir, quiet)
    address = f"http://{server.server_address[0]}:{server.server_address[1]}"
    print(f"session service listening on {address}", flush=True)
    if console_dir:
        print(f"console at {address}/console/", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
