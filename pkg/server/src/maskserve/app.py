"""HTTP surface: POST /score, POST /score_batch, GET /health."""

from __future__ import annotations

from typing import Any

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict, Field

from .config import ServerConfig
from .engine import ScoreItem, ScoringEngine, SpanResolutionError

PROTOCOL_VERSION = 1


class ScoreRequestModel(BaseModel):
    """Unknown fields are ignored for forward compatibility."""

    model_config = ConfigDict(extra="ignore")

    variant_id: str = ""
    prompt_text: str
    annotated_spans: list[tuple[int, int]] = Field(default_factory=list)
    masked_indices: list[int] = Field(default_factory=list)
    target_token: str

    def to_item(self) -> ScoreItem:
        return ScoreItem(
            prompt_text=self.prompt_text,
            annotated_spans=tuple(tuple(s) for s in self.annotated_spans),
            masked_indices=tuple(self.masked_indices),
            target_token=self.target_token,
        )


def create_app(config: ServerConfig) -> FastAPI:
    app = FastAPI(title="maskserve")
    try:
        engine: ScoringEngine | None = ScoringEngine(config)
        load_error: str | None = None
    except Exception as exc:  # noqa: BLE001 - surfaced as 503 per request
        engine = None
        load_error = f"{type(exc).__name__}: {exc}"

    def require_engine() -> ScoringEngine:
        if engine is None:
            raise HTTPException(status_code=503, detail=f"model unavailable: {load_error}")
        return engine

    @app.get("/health")
    def health() -> dict[str, Any]:
        if engine is None:
            raise HTTPException(status_code=503, detail=f"model unavailable: {load_error}")
        return {
            "model_id": engine.model_id,
            "baseline_mode": config.baseline_mode,
            "protocol_version": PROTOCOL_VERSION,
        }

    @app.post("/score")
    def score(request: ScoreRequestModel) -> dict[str, Any]:
        eng = require_engine()
        try:
            outcome = eng.score(request.to_item())
        except SpanResolutionError as exc:
            raise HTTPException(
                status_code=422,
                detail={"error": str(exc), "span_index": exc.span_index},
            ) from exc
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return {
            "probability": outcome.probability,
            "model_id": eng.model_id,
            "token_matched": outcome.token_matched,
            "protocol_version": PROTOCOL_VERSION,
        }

    @app.post("/score_batch")
    def score_batch(requests: list[ScoreRequestModel]) -> list[dict[str, Any]]:
        eng = require_engine()
        # per-item isolation: build items first, collect bad ones by index
        items: list[tuple[int, ScoreItem]] = []
        results: list[dict[str, Any] | None] = [None] * len(requests)
        for i, req in enumerate(requests):
            try:
                item = req.to_item()
                eng.build_masked_embeddings(item)  # shape check before batching
                items.append((i, item))
            except (SpanResolutionError, ValueError) as exc:
                results[i] = {"index": i, "error": str(exc)}
        outcomes = eng.score_batch([item for _, item in items])
        for (i, _), outcome in zip(items, outcomes):
            results[i] = {
                "probability": outcome.probability,
                "model_id": eng.model_id,
                "token_matched": outcome.token_matched,
                "protocol_version": PROTOCOL_VERSION,
            }
        return [r for r in results if r is not None]

    return app
