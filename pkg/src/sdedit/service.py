"""HTTP editing service: sessions, guide upload, candidate generation, t0 search.

JSON envelopes everywhere; image payloads are base64-encoded binary netpbm
(P6/P5) bytes so round-trips are bit-exact. One session serves one operator:
requests within a session are serialized (a second concurrent writer gets
``busy``), sessions are independent, and every generation is seeded so results
are reproducible. Generation is synchronous and desk-scale request limits are
enforced up front (larger requests are rejected, not queued).
"""

from __future__ import annotations

import base64
import binascii
import secrets
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel

from .errors import SdeditError
from .metrics import faithfulness
from .netpbm import decode_netpbm, encode_netpbm
from .presets import ModelPreset, resolve_presets
from .sampler import (
    FEEDBACK_ACCEPT,
    EditMask,
    Guide,
    SdeditConfig,
    T0SearchState,
    sdedit,
    sdedit_masked,
    t0_binary_search,
)

MAX_DIM = 64 * 64 * 3
MAX_STEPS = 1000
MAX_REPEATS = 10
HISTORY_CAP = 32
DEFAULT_STEPS = 500


class ApiError(Exception):
    """Service-level error with a machine code from the closed enum."""

    STATUS = {"bad-request": 400, "shape-mismatch": 400, "busy": 409,
              "not-found": 404, "internal": 500}

    def __init__(self, code: str, message: str):
        assert code in self.STATUS
        super().__init__(message)
        self.code = code
        self.message = message

    def response(self) -> JSONResponse:
        return JSONResponse(status_code=self.STATUS[self.code],
                            content={"code": self.code, "message": self.message})


@dataclass
class StoredResult:
    payload: bytes
    media_type: str
    meta: dict


@dataclass
class Session:
    id: str
    preset: ModelPreset
    guide: Optional[Guide] = None
    mask: Optional[EditMask] = None
    search: T0SearchState = field(default_factory=T0SearchState)
    frozen_t0: Optional[float] = None
    pending_candidate: bool = False
    seed_counter: int = 0
    results: "OrderedDict[str, StoredResult]" = field(default_factory=OrderedDict)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def store(self, rid: str, result: StoredResult) -> None:
        self.results[rid] = result
        while len(self.results) > HISTORY_CAP:
            self.results.popitem(last=False)


class GuideBody(BaseModel):
    guide_ppm: Optional[str] = None
    guide_vector: Optional[list[float]] = None
    mask_ppm: Optional[str] = None
    mask_vector: Optional[list[float]] = None


class GenerateBody(BaseModel):
    t0: Optional[float] = None
    n_steps: Optional[int] = None
    repeats: Optional[int] = None
    seed: Optional[int] = None


class FeedbackBody(BaseModel):
    verdict: str


class SessionBody(BaseModel):
    preset: str


def _b64_image(data: str) -> np.ndarray:
    try:
        raw = base64.b64decode(data, validate=True)
        return decode_netpbm(raw)
    except (ValueError, binascii.Error) as exc:
        raise ApiError("bad-request", f"cannot decode netpbm payload: {exc}")


def create_app(preset_dir: Optional[str] = None,
               presets: Optional[dict[str, ModelPreset]] = None) -> FastAPI:
    """Build the service app; presets default to built-ins plus the preset dir."""
    app = FastAPI(title="sdedit edit service")
    app.state.presets = presets if presets is not None else resolve_presets(preset_dir)
    app.state.sessions = {}

    def get_session(sid: str) -> Session:
        session = app.state.sessions.get(sid)
        if session is None:
            raise ApiError("not-found", f"no session {sid!r}")
        return session

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError):
        return exc.response()

    @app.exception_handler(SdeditError)
    async def _lib_error(_req: Request, exc: SdeditError):
        return ApiError("internal", str(exc)).response()

    @app.get("/v1/presets")
    def list_presets():
        return {"presets": [p.info() for p in app.state.presets.values()]}

    @app.post("/v1/sessions")
    def create_session(body: SessionBody):
        preset = app.state.presets.get(body.preset)
        if preset is None:
            raise ApiError("not-found", f"unknown preset {body.preset!r}")
        session = Session(id=secrets.token_hex(16), preset=preset)
        app.state.sessions[session.id] = session
        return {"session_id": session.id, "preset": preset.info(),
                "probe_t0": session.search.probe}

    @app.post("/v1/sessions/{sid}/guide")
    def submit_guide(sid: str, body: GuideBody):
        session = get_session(sid)
        if not session.lock.acquire(blocking=False):
            raise ApiError("busy", "a generation is in flight on this session")
        try:
            if body.guide_ppm is not None:
                img = _b64_image(body.guide_ppm)
                guide = Guide.from_image(img)
            elif body.guide_vector is not None:
                guide = Guide.from_vector(np.asarray(body.guide_vector, dtype=np.float64))
            else:
                raise ApiError("bad-request", "need guide_ppm or guide_vector")
            if guide.dim != session.preset.dim or (
                    guide.kind == "image" and guide.shape != tuple(session.preset.shape)):
                raise ApiError("shape-mismatch",
                               f"guide shape {guide.shape} does not match preset "
                               f"shape {tuple(session.preset.shape)}")
            mask = None
            if body.mask_ppm is not None:
                m = _b64_image(body.mask_ppm)
                channels = guide.shape[2] if len(guide.shape) == 3 else None
                mask = EditMask.from_image(np.rint(m), channels)
            elif body.mask_vector is not None:
                mask = EditMask(np.asarray(body.mask_vector, dtype=np.float64),
                                (len(body.mask_vector),))
            if mask is not None and mask.dim != guide.dim:
                raise ApiError("shape-mismatch",
                               f"mask has {mask.dim} entries, guide {guide.dim}")
            session.guide = guide
            session.mask = mask
            session.search = T0SearchState()
            session.frozen_t0 = None
            session.pending_candidate = False
        finally:
            session.lock.release()
        if guide.kind == "image":
            h, w = guide.shape[:2]
            channels = guide.shape[2] if len(guide.shape) == 3 else 1
            return {"width": w, "height": h, "channels": channels,
                    "masked": mask is not None}
        return {"dim": guide.dim, "masked": mask is not None}

    @app.post("/v1/sessions/{sid}/generate")
    def generate(sid: str, body: GenerateBody):
        session = get_session(sid)
        if not session.lock.acquire(blocking=False):
            raise ApiError("busy", "a generation is already in flight")
        try:
            if session.guide is None:
                raise ApiError("bad-request", "no guide submitted yet")
            t0 = body.t0 if body.t0 is not None else (
                session.frozen_t0 if session.frozen_t0 is not None
                else session.search.probe)
            n_steps = body.n_steps or DEFAULT_STEPS
            repeats = body.repeats or 1
            if session.preset.dim > MAX_DIM or n_steps > MAX_STEPS or repeats > MAX_REPEATS:
                raise ApiError("bad-request",
                               f"request exceeds desk-scale limits (d<={MAX_DIM}, "
                               f"N<={MAX_STEPS}, K<={MAX_REPEATS})")
            if body.seed is not None:
                seed = body.seed
            else:
                session.seed_counter += 1
                seed = session.seed_counter
            try:
                config = SdeditConfig(t0=float(t0), n_steps=int(n_steps),
                                      repeats=int(repeats), seed=int(seed))
            except SdeditError as exc:
                raise ApiError("bad-request", str(exc))
            score = session.preset.score()
            schedule = session.preset.schedule
            if session.mask is not None:
                result = sdedit_masked(session.guide, session.mask, score, schedule, config)
            else:
                result = sdedit(session.guide, score, schedule, config)
            fs = faithfulness(session.guide, result.output)
            rid = secrets.token_hex(8)
            if session.guide.kind == "image":
                img = np.clip(result.output.reshape(session.guide.shape), 0.0, 1.0)
                payload = encode_netpbm(img)
                media = ("image/x-portable-pixmap" if len(session.guide.shape) == 3
                         else "image/x-portable-graymap")
            else:
                payload = " ".join(repr(float(v)) for v in result.output).encode()
                media = "text/plain"
            meta = {"t0": config.t0, "n_steps": config.n_steps,
                    "repeats": config.repeats, "seed": config.seed,
                    "l2": fs.l2, "l2_squared": fs.l2_squared}
            session.store(rid, StoredResult(payload, media, meta))
            session.pending_candidate = True
            return {"result_id": rid, **meta}
        finally:
            session.lock.release()

    @app.post("/v1/sessions/{sid}/feedback")
    def feedback(sid: str, body: FeedbackBody):
        session = get_session(sid)
        if not session.lock.acquire(blocking=False):
            raise ApiError("busy", "a generation is in flight on this session")
        try:
            if not session.pending_candidate:
                raise ApiError("bad-request", "no candidate generated since last feedback")
            try:
                session.search = t0_binary_search(session.search, body.verdict)
            except SdeditError as exc:
                raise ApiError("bad-request", str(exc))
            if body.verdict == FEEDBACK_ACCEPT:
                # probe is frozen at the accepted value
                session.frozen_t0 = session.search.history[-1][0]
            session.pending_candidate = False
            probe = session.frozen_t0 if session.frozen_t0 is not None else session.search.probe
            return {"probe_t0": probe, "accepted": session.search.accepted,
                    "interval": [session.search.lo, session.search.hi]}
        finally:
            session.lock.release()

    @app.get("/v1/sessions/{sid}/results/{rid}")
    def fetch_result(sid: str, rid: str):
        session = get_session(sid)
        stored = session.results.get(rid)
        if stored is None:
            raise ApiError("not-found", f"no result {rid!r} in session")
        return Response(content=stored.payload, media_type=stored.media_type)

    return app


def serve(addr: str = "127.0.0.1:8000", preset_dir: Optional[str] = None,
          frontend_dir: Optional[str] = None) -> None:
    """Run the service with uvicorn; optionally serve the static UI bundle."""
    import uvicorn

    app = create_app(preset_dir)
    if frontend_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="ui")
    host, _, port = addr.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
