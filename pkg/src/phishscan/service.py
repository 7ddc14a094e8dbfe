"""Realtime classification over HTTP.

POST /v1/classify takes a tweet id (resolved against a tweet store) or an
inline tweet object, fans the four feature groups out to a thread pool so
they extract simultaneously, and answers with a verdict. A group that
misses its per-group budget degrades to sentinels rather than stalling
the response.
"""

from __future__ import annotations

import concurrent.futures
import json
import time
from dataclasses import dataclass
from functools import partial

import numpy as np
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from starlette.concurrency import run_in_threadpool
from starlette.responses import JSONResponse, Response

from .corpus import InvalidTweetError, Tweet, tweet_from_json
from .ml import FEATURE_NAMES, GROUP_BOUNDS, GROUP_ORDER, MODEL_FORMAT_VERSION, SENTINEL, TrainedModel
from .pipeline import FeatureExtractor

# Per-group extraction budgets. URL expansion chases redirect chains and
# registration lookups may hit a slow server; the text and account groups
# are pure computation on data already in hand.
GROUP_TIMEOUTS_MS = {"url": 1200, "whois": 800, "tweet": 50, "network": 50}
DEADLINE_MS = 2000

PHISHING_VERDICT = "phishing"
SAFE_VERDICT = "safe"


class ServiceError(Exception):
    pass


@dataclass(frozen=True)
class ClassifyResponse:
    verdict: str
    score: float
    partial: bool
    latency_ms: int
    feature_vector: list[float] | None = None

    def to_json(self) -> dict:
        doc = {
            "verdict": self.verdict,
            "score": self.score,
            "partial": self.partial,
            "latency_ms": self.latency_ms,
        }
        if self.feature_vector is not None:
            doc["feature_vector"] = self.feature_vector
        return doc


def _sentinel_group(group: str) -> dict[str, float]:
    lo, hi = GROUP_BOUNDS[group]
    return {name: SENTINEL for name in FEATURE_NAMES[lo:hi]}


def classify_tweet(
    tweet: Tweet,
    model: TrainedModel,
    extractor: FeatureExtractor,
    executor: concurrent.futures.Executor,
    *,
    group_timeouts_ms: dict[str, int] | None = None,
    deadline_ms: int = DEADLINE_MS,
    sequential: bool = False,
    debug: bool = False,
) -> ClassifyResponse:
    """Extract all four groups (concurrently unless forced sequential),
    score the assembled vector, and report whether any group degraded."""
    timeouts = dict(GROUP_TIMEOUTS_MS)
    if group_timeouts_ms:
        timeouts.update(group_timeouts_ms)

    start = time.monotonic()
    values: dict[str, float] = {}
    partial_result = False

    if sequential:
        for group in GROUP_ORDER:
            future = executor.submit(extractor.extract_group, group, tweet)
            budget_s = min(timeouts[group], deadline_ms) / 1000.0
            try:
                values.update(future.result(timeout=budget_s))
            except Exception:
                values.update(_sentinel_group(group))
                partial_result = True
    else:
        futures = {
            group: executor.submit(extractor.extract_group, group, tweet)
            for group in GROUP_ORDER
        }
        for group, future in futures.items():
            group_deadline = start + min(timeouts[group], deadline_ms) / 1000.0
            try:
                values.update(future.result(timeout=max(0.0, group_deadline - time.monotonic())))
            except Exception:
                values.update(_sentinel_group(group))
                partial_result = True

    vector = np.array([values[name] for name in FEATURE_NAMES], dtype=float)
    score = float(model.score(vector))
    verdict = PHISHING_VERDICT if model.predict(vector) == 1 else SAFE_VERDICT
    latency_ms = int((time.monotonic() - start) * 1000)
    return ClassifyResponse(
        verdict=verdict,
        score=score,
        partial=partial_result,
        latency_ms=latency_ms,
        feature_vector=[float(v) for v in vector] if debug else None,
    )


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse({"error": {"code": code, "message": message}}, status_code=status)


def build_app(
    model: TrainedModel,
    extractor: FeatureExtractor,
    provider=None,
    *,
    group_timeouts_ms: dict[str, int] | None = None,
    deadline_ms: int = DEADLINE_MS,
    sequential: bool = False,
    max_workers: int = 16,
) -> FastAPI:
    """Assemble the API around an immutable model, an extractor, and an
    optional tweet store for the by-id request form."""
    app = FastAPI(openapi_url=None, docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    executor = concurrent.futures.ThreadPoolExecutor(max_workers=max_workers)
    started = time.monotonic()
    model_version = f"{model.algorithm}-fmt{MODEL_FORMAT_VERSION}"

    @app.get("/v1/health")
    def health():
        return JSONResponse(
            {
                "status": "ok",
                "model_version": model_version,
                "uptime_s": int(time.monotonic() - started),
            }
        )

    @app.post("/v1/classify")
    async def classify(request: Request):
        try:
            body = json.loads(await request.body())
        except (json.JSONDecodeError, UnicodeDecodeError):
            return _error(400, "bad_request", "body is not valid JSON")
        if not isinstance(body, dict):
            return _error(400, "bad_request", "body must be a JSON object")
        has_id = "tweet_id" in body
        has_inline = "tweet" in body
        if has_id == has_inline:
            return _error(400, "bad_request", "provide exactly one of tweet_id or tweet")

        if has_id:
            if provider is None:
                return _error(404, "not_found", "no tweet store configured")
            tweet = provider.get(str(body["tweet_id"]))
            if tweet is None:
                return _error(404, "not_found", f"unknown tweet_id {body['tweet_id']!r}")
        else:
            obj = body["tweet"]
            if not isinstance(obj, dict):
                return _error(400, "bad_request", "tweet must be a JSON object")
            if not obj.get("urls"):
                return _error(422, "unprocessable", "tweet has no URLs to analyze")
            try:
                tweet = tweet_from_json(obj)
            except InvalidTweetError as exc:
                return _error(400, "bad_request", str(exc))

        result = await run_in_threadpool(
            partial(
                classify_tweet,
                tweet,
                model,
                extractor,
                executor,
                group_timeouts_ms=group_timeouts_ms,
                deadline_ms=deadline_ms,
                sequential=sequential,
                debug=bool(body.get("debug", False)),
            )
        )
        return JSONResponse(result.to_json())

    @app.exception_handler(Exception)
    async def on_unhandled(request: Request, exc: Exception) -> Response:
        return _error(500, "internal", "internal error")

    return app


def serve(app: FastAPI, host: str, port: int) -> None:
    import uvicorn

    uvicorn.run(app, host=host, port=port, log_level="warning")
