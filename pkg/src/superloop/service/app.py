"""HTTP API wiring the engine to interactive clients.

Stateless across requests apart from the record store; model weights
are shared read-only between request handlers, and sampling runs on a
bounded worker pool (excess load answers 429).  Seeds are echoed in
every response so any result can be reproduced byte for byte.
"""

from __future__ import annotations

import os
import threading
from typing import Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response

from ..model import SuperposedLM
from ..representation import (
    RepresentationError,
    build_syntax_mask,
    decode_tokens,
    loop_from_json,
    loop_to_json,
)
from ..sampler import SamplerConfig, sample
from ..steering import (
    EditSpec,
    Infeasible,
    UnknownAction,
    action_to_spec,
    compile_spec,
    spec_from_json,
)
from ..superposition import EmptySupport, prior_from_sparse
from ..corpus.midi import write_loop_midi
from .schemas import (
    ApiErrorModel,
    EditRequest,
    GenerateRequest,
    HealthModel,
    LoopListModel,
    LoopRecordModel,
    SamplerOptionsModel,
)
from .store import LoopStore

SEED_ENV_VAR = "SUPERLOOP_SEED"


class EngineState:
    """Shared service state: model, vocabulary, mask, store, worker pool."""

    def __init__(
        self,
        model: Optional[SuperposedLM],
        store: LoopStore,
        checkpoint_path: Optional[str] = None,
        max_workers: int = 4,
    ):
        self.model = model
        self.store = store
        self.checkpoint_path = checkpoint_path
        self.workers = threading.BoundedSemaphore(max_workers)
        if model is not None:
            self.vocab = model.config.vocab()
            self.n_notes = model.config.n_notes
            self.syntax_mask = build_syntax_mask(self.vocab, self.n_notes)
        else:
            self.vocab = None
            self.n_notes = None
            self.syntax_mask = None


class _ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, detail: Optional[dict] = None):
        self.status = status
        self.code = code
        self.message = message
        self.detail = detail
        super().__init__(message)


def _resolve_seed(options: SamplerOptionsModel) -> int:
    if options.seed is not None:
        return int(options.seed)
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        return int(env)
    return int(np.random.SeedSequence().entropy % (2 ** 31))


def create_app(state: EngineState) -> FastAPI:
    app = FastAPI(title="superloop", version="0.1.0")

    @app.exception_handler(_ApiError)
    async def api_error_handler(request: Request, exc: _ApiError):
        body = ApiErrorModel(code=exc.code, message=exc.message, detail=exc.detail)
        return JSONResponse(status_code=exc.status, content=body.model_dump())

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        body = ApiErrorModel(
            code="schema_violation",
            message="request body does not match the schema",
            detail={"errors": [
                {"loc": [str(p) for p in err["loc"]], "msg": err["msg"]}
                for err in exc.errors()
            ]},
        )
        return JSONResponse(status_code=400, content=body.model_dump())

    def require_model() -> SuperposedLM:
        if state.model is None:
            raise _ApiError(503, "model_not_loaded", "no model checkpoint is loaded")
        return state.model

    def run_sampler(prior, options: SamplerOptionsModel, seed: int):
        model = require_model()
        config = SamplerConfig(
            temperature=options.temperature,
            seed=seed,
            enforce_prior_support=options.enforce_prior_support,
        )
        if not state.workers.acquire(blocking=False):
            raise _ApiError(429, "over_capacity", "sampling workers are saturated")
        try:
            tokens, _ = sample(model, prior, state.syntax_mask, config)
        finally:
            state.workers.release()
        return decode_tokens(tokens, state.vocab)

    def compile_request_prior(payload: GenerateRequest):
        model = require_model()
        spec = EditSpec()
        if payload.spec is not None:
            try:
                spec = spec_from_json(
                    payload.spec.model_dump(), state.vocab
                )
            except (RepresentationError, ValueError) as exc:
                raise _ApiError(400, "bad_spec", str(exc))
        try:
            prior = compile_spec(spec, state.vocab, model.config.n_notes)
        except Infeasible as exc:
            raise _ApiError(422, "infeasible", str(exc), detail={"row": exc.row})
        if payload.prior is not None:
            truth = None
            if spec.base is not None:
                from ..representation import encode_loop
                truth = encode_loop(spec.base, state.vocab, model.config.n_notes)
            try:
                sparse = prior_from_sparse(
                    payload.prior.model_dump(), state.syntax_mask, truth=truth
                )
            except EmptySupport as exc:
                raise _ApiError(422, "empty_support", str(exc), detail={"row": exc.row})
            except (RepresentationError, ValueError) as exc:
                raise _ApiError(400, "bad_prior", str(exc))
            from ..superposition import mix_priors
            try:
                prior = mix_priors(prior, sparse, op="intersect")
            except EmptySupport as exc:
                raise _ApiError(422, "empty_support", str(exc), detail={"row": exc.row})
        return prior

    @app.post("/v1/generate", response_model=LoopRecordModel)
    def generate(payload: GenerateRequest):
        prior = compile_request_prior(payload)
        seed = _resolve_seed(payload.sampler)
        try:
            loop = run_sampler(prior, payload.sampler, seed)
        except EmptySupport as exc:
            raise _ApiError(422, "empty_support", str(exc), detail={"row": exc.row})
        record = state.store.add(loop_to_json(loop), seed=seed, parent_id=None)
        return LoopRecordModel(**record.to_json())

    @app.post("/v1/loops/{record_id}/edit", response_model=LoopRecordModel)
    def edit(record_id: str, payload: EditRequest):
        model = require_model()
        record = state.store.get(record_id)
        if record is None:
            raise _ApiError(404, "unknown_loop", f"no record {record_id}")
        current = loop_from_json(record.loop, state.vocab)
        try:
            spec = action_to_spec(
                payload.action, payload.args, current, state.vocab, model.config.n_notes
            )
        except UnknownAction as exc:
            raise _ApiError(400, "unknown_action", str(exc))
        except (RepresentationError, ValueError, KeyError) as exc:
            raise _ApiError(400, "bad_action_args", str(exc))
        try:
            prior = compile_spec(spec, state.vocab, model.config.n_notes)
        except Infeasible as exc:
            raise _ApiError(422, "infeasible", str(exc), detail={"row": exc.row})
        seed = _resolve_seed(payload.sampler)
        try:
            loop = run_sampler(prior, payload.sampler, seed)
        except EmptySupport as exc:
            raise _ApiError(422, "empty_support", str(exc), detail={"row": exc.row})
        record = state.store.add(loop_to_json(loop), seed=seed, parent_id=record_id)
        return LoopRecordModel(**record.to_json())

    @app.get("/v1/loops", response_model=LoopListModel)
    def list_loops(offset: int = 0, limit: int = 50):
        records, total = state.store.list(offset=offset, limit=limit)
        return LoopListModel(
            records=[LoopRecordModel(**r.to_json()) for r in records],
            total=total,
            offset=offset,
        )

    @app.get("/v1/loops/{record_id}", response_model=LoopRecordModel)
    def get_loop(record_id: str):
        record = state.store.get(record_id)
        if record is None:
            raise _ApiError(404, "unknown_loop", f"no record {record_id}")
        return LoopRecordModel(**record.to_json())

    @app.get("/v1/loops/{record_id}/midi")
    def get_midi(record_id: str):
        record = state.store.get(record_id)
        if record is None:
            raise _ApiError(404, "unknown_loop", f"no record {record_id}")
        if state.vocab is None:
            raise _ApiError(503, "model_not_loaded", "no model checkpoint is loaded")
        loop = loop_from_json(record.loop, state.vocab)
        return Response(content=write_loop_midi(loop), media_type="audio/midi")

    @app.get("/v1/health", response_model=HealthModel)
    def health():
        return HealthModel(
            status="ok",
            model_loaded=state.model is not None,
            checkpoint=state.checkpoint_path,
            n_notes=state.n_notes,
            vocab_size=state.vocab.total if state.vocab is not None else None,
        )

    return app
