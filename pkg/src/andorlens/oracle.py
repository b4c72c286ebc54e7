"""Scoring backends that produce value tables.

Three backends share one contract: given a prompt variant and a mask, return
the confidence score of the target token under that masked prompt.

* synthetic - a planted-ground-truth surrogate evaluated in closed form;
  scores are already in confidence space, no transform applied.
* replay    - a warm probability cache on disk; no network, bit-exact reuse.
* remote    - a scoring HTTP service speaking the score/score_batch protocol;
  probabilities are cached so reruns are free.

Probabilities are converted to confidence scores with the log-odds transform
after clamping into [p_clamp, 1 - p_clamp]; the cache stores raw pre-clamp
probabilities so changing the clamp never invalidates it.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Mapping, Protocol, Sequence

import numpy as np

from .errors import (
    AlignmentError,
    CacheIntegrityError,
    ConfigurationError,
    DataError,
    PartialTableError,
)
from .lattice import Mask, ValueTable, _check_n

Backend = Literal["synthetic", "replay", "remote"]

DEFAULT_P_CLAMP = 1e-6


@dataclass(frozen=True)
class OracleConfig:
    """Backend selection plus transport and caching knobs."""

    backend: Backend = "synthetic"
    endpoint: str = ""
    auth_env: str = ""
    parallelism: int = 4
    retries: int = 3
    backoff: tuple[float, ...] = (0.5, 1.0, 2.0)
    p_clamp: float = DEFAULT_P_CLAMP
    cache_path: str | None = None

    def __post_init__(self):
        if not 0.0 < self.p_clamp < 0.5:
            raise ConfigurationError("p_clamp must be in (0, 0.5)")
        if self.parallelism < 1:
            raise ConfigurationError("parallelism must be >= 1")
        if self.retries < 0:
            raise ConfigurationError("retries must be >= 0")


@dataclass(frozen=True)
class SyntheticModel:
    """Planted-effect surrogate: baseline plus triggered AND / OR weights.

    AND weights fire when all their members are unmasked, OR weights when at
    least one member is. Optional Gaussian noise is deterministic per
    (seed, mask) so tables are reproducible.
    """

    n: int
    planted_and: Mapping[int, float] = field(default_factory=dict)
    planted_or: Mapping[int, float] = field(default_factory=dict)
    baseline: float = 0.0
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        _check_n(self.n)
        size = 1 << self.n
        for name, planted in (("planted_and", self.planted_and),
                              ("planted_or", self.planted_or)):
            for bits, weight in planted.items():
                if not 0 <= bits < size:
                    raise ConfigurationError(f"{name} mask {bits} out of range")
                if bits == 0:
                    raise ConfigurationError(f"{name} may not contain the empty mask")
                if not math.isfinite(weight):
                    raise DataError(f"{name} weight at mask {bits} is not finite")
        if self.noise_sigma < 0:
            raise ConfigurationError("noise_sigma must be non-negative")
        object.__setattr__(self, "planted_and", dict(self.planted_and))
        object.__setattr__(self, "planted_or", dict(self.planted_or))

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "baseline": self.baseline,
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
            "and": {str(k): v for k, v in self.planted_and.items()},
            "or": {str(k): v for k, v in self.planted_or.items()},
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "SyntheticModel":
        return cls(
            n=int(doc["n"]),
            planted_and={int(k): float(v) for k, v in doc.get("and", {}).items()},
            planted_or={int(k): float(v) for k, v in doc.get("or", {}).items()},
            baseline=float(doc.get("baseline", 0.0)),
            noise_sigma=float(doc.get("noise_sigma", 0.0)),
            seed=int(doc.get("seed", 0)),
        )


@dataclass(frozen=True)
class ScoreRequest:
    """Wire record sent to a remote scorer."""

    variant_id: str
    prompt_text: str
    annotated_spans: tuple[tuple[int, int], ...]
    masked_indices: tuple[int, ...]
    target_token: str

    def to_json_dict(self) -> dict:
        return {
            "variant_id": self.variant_id,
            "prompt_text": self.prompt_text,
            "annotated_spans": [list(s) for s in self.annotated_spans],
            "masked_indices": list(self.masked_indices),
            "target_token": self.target_token,
        }


@dataclass(frozen=True)
class ScoreResponse:
    """Wire record returned by a remote scorer."""

    probability: float
    model_id: str
    token_matched: bool

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ScoreResponse":
        return cls(
            probability=float(doc["probability"]),
            model_id=str(doc.get("model_id", "")),
            token_matched=bool(doc.get("token_matched", True)),
        )


def confidence_from_prob(p: float, p_clamp: float = DEFAULT_P_CLAMP) -> float:
    """Log-odds confidence log(p / (1-p)) after clamping into [p_clamp, 1-p_clamp].

    Strictly increasing in p; rejects probabilities outside (0, 1) before
    clamping since those indicate a broken scorer, not an extreme score.
    """
    if not 0.0 < p_clamp < 0.5:
        raise ConfigurationError("p_clamp must be in (0, 0.5)")
    if not (isinstance(p, (int, float)) and math.isfinite(p)) or not 0.0 < p < 1.0:
        raise DataError(f"probability {p!r} outside (0, 1)")
    p = min(max(p, p_clamp), 1.0 - p_clamp)
    return math.log(p / (1.0 - p))


def synthetic_eval(model: SyntheticModel, mask: Mask | int) -> float:
    """Closed-form surrogate score at one mask."""
    bits = mask.bits if isinstance(mask, Mask) else int(mask)
    size = 1 << model.n
    if not 0 <= bits < size:
        raise ConfigurationError(f"mask {bits} out of range for n={model.n}")
    total = model.baseline
    for s, w in model.planted_and.items():
        if s & ~bits == 0:
            total += w
    for s, w in model.planted_or.items():
        if s & bits != 0:
            total += w
    if model.noise_sigma > 0.0:
        noise_rng = np.random.default_rng([model.seed, bits])
        total += float(noise_rng.normal(0.0, model.noise_sigma))
    return float(total)


def synthetic_table(model: SyntheticModel, variant_id: str) -> ValueTable:
    values = np.array([synthetic_eval(model, bits) for bits in range(1 << model.n)])
    return ValueTable(n=model.n, values=values, variant_id=variant_id)


def average_value_tables(tables: Sequence[ValueTable]) -> ValueTable:
    """Entry-wise mean; the variant id records the member list."""
    if not tables:
        raise AlignmentError("need at least one table to average")
    n = tables[0].n
    for t in tables:
        if t.n != n:
            raise AlignmentError(f"tables disagree on n: {t.n} vs {n}")
    mean = np.mean([t.values for t in tables], axis=0)
    member_ids = ",".join(t.variant_id for t in tables)
    return ValueTable(n=n, values=mean, variant_id=f"avg({member_ids})")


# ---------------------------------------------------------------------------
# Probability cache: JSON map "variant|mask|target|model" -> raw probability
# ---------------------------------------------------------------------------


def cache_key(variant_id: str, bits: int, target: str, model_id: str) -> str:
    return f"{variant_id}|{bits}|{target}|{model_id}"


class ProbabilityCache:
    """Concurrent-read, serialized-write JSON probability store."""

    def __init__(self, path: str | os.PathLike):
        self.path = str(path)
        self._lock = threading.Lock()
        self._data: dict[str, float] = {}
        if os.path.exists(self.path):
            with open(self.path, "r", encoding="utf-8") as fh:
                try:
                    raw = json.load(fh)
                except json.JSONDecodeError as exc:
                    raise CacheIntegrityError(
                        f"cache file {self.path} is not valid JSON: {exc}", key=""
                    ) from exc
            for key, value in raw.items():
                if not isinstance(value, (int, float)) or not 0.0 < value < 1.0:
                    raise CacheIntegrityError(
                        f"cache entry {key!r} holds invalid probability {value!r}",
                        key=key,
                    )
                self._data[key] = float(value)

    def __len__(self) -> int:
        return len(self._data)

    def get(self, key: str) -> float | None:
        return self._data.get(key)

    def put(self, key: str, probability: float) -> None:
        with self._lock:
            self._data[key] = float(probability)

    def model_ids(self) -> set[str]:
        return {key.rsplit("|", 1)[-1] for key in self._data}

    def flush(self) -> None:
        """Atomic write: temp file in the same directory, then replace."""
        with self._lock:
            directory = os.path.dirname(os.path.abspath(self.path))
            os.makedirs(directory, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
            try:
                with os.fdopen(fd, "w", encoding="utf-8") as fh:
                    json.dump(self._data, fh, sort_keys=True)
                os.replace(tmp, self.path)
            finally:
                if os.path.exists(tmp):
                    os.unlink(tmp)


# ---------------------------------------------------------------------------
# Backends
# ---------------------------------------------------------------------------


class VariantLike(Protocol):
    variant_id: str
    text: str
    annotated_spans: Sequence[tuple[int, int]]


class SyntheticOracle:
    """Scores from planted surrogate models, keyed by variant id."""

    backend = "synthetic"
    model_id = "synthetic"

    def __init__(self, models: Mapping[str, SyntheticModel]):
        if not models:
            raise ConfigurationError("synthetic oracle needs at least one model")
        ns = {m.n for m in models.values()}
        if len(ns) != 1:
            raise AlignmentError("all synthetic models must share one n")
        self.models = dict(models)
        self.n = ns.pop()

    def build_value_table(self, variant: VariantLike, target_token: str = "") -> ValueTable:
        model = self.models.get(variant.variant_id)
        if model is None:
            raise ConfigurationError(
                f"no synthetic model for variant {variant.variant_id!r}"
            )
        return synthetic_table(model, variant.variant_id)

    @classmethod
    def from_json_file(cls, path) -> "SyntheticOracle":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        models = {
            vid: SyntheticModel.from_json_dict(spec)
            for vid, spec in doc["variants"].items()
        }
        return cls(models)


class ReplayOracle:
    """Scores replayed from a complete probability cache; never any network."""

    backend = "replay"

    def __init__(self, config: OracleConfig, model_id: str | None = None):
        if not config.cache_path:
            raise ConfigurationError("replay backend needs cache_path")
        self.config = config
        self.cache = ProbabilityCache(config.cache_path)
        if model_id is None:
            ids = self.cache.model_ids()
            if len(ids) != 1:
                raise ConfigurationError(
                    f"cache holds {sorted(ids)!r}; pass model_id to disambiguate"
                )
            model_id = ids.pop()
        self.model_id = model_id

    def build_value_table(self, variant: VariantLike, target_token: str) -> ValueTable:
        n = len(variant.annotated_spans)
        _check_n(n)
        size = 1 << n
        values = np.empty(size)
        missing = []
        for bits in range(size):
            key = cache_key(variant.variant_id, bits, target_token, self.model_id)
            p = self.cache.get(key)
            if p is None:
                missing.append(bits)
            else:
                values[bits] = confidence_from_prob(p, self.config.p_clamp)
        if missing:
            raise PartialTableError(
                f"replay cache is missing {len(missing)} masks for variant "
                f"{variant.variant_id!r} (first: {missing[:5]})",
                missing_masks=missing,
            )
        return ValueTable(n=n, values=values, variant_id=variant.variant_id)


class RemoteOracle:
    """HTTP scoring client with retries, bounded parallelism, and caching.

    Masking semantics normally live server-side: the client only transmits
    which annotated word indices are masked, and the server blanks those
    words at the embedding level. For backends without embedding access,
    text_masking=True rewrites the prompt instead, replacing each masked
    word with a fixed placeholder. That mode loses fidelity (the model sees
    a real token, not a neutral embedding), so every table it produces is
    labeled with a "+textmask" provenance suffix that propagates through
    caches and downstream artifacts.

    Every probability fetched is written back to the cache, so a completed
    run can be replayed offline later.
    """

    backend = "remote"

    TEXT_MASK_LABEL = "+textmask"

    def __init__(
        self,
        config: OracleConfig,
        session=None,
        text_masking: bool = False,
        placeholder: str = "_",
    ):
        if not config.endpoint:
            raise ConfigurationError("remote backend needs an endpoint URL")
        self.config = config
        if session is None:
            import requests

            session = requests.Session()
        self.session = session
        self.text_masking = text_masking
        self.placeholder = placeholder
        self.cache = (
            ProbabilityCache(config.cache_path) if config.cache_path else None
        )
        # adopt the warm cache's model id so the very first table build can
        # be served from cache; otherwise learned from the first response
        self.model_id = ""
        if self.cache is not None:
            ids = self.cache.model_ids()
            if len(ids) == 1:
                self.model_id = ids.pop()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.config.auth_env:
            credential = os.environ.get(self.config.auth_env)
            if credential is None:
                raise ConfigurationError(
                    f"credential environment variable {self.config.auth_env!r} is unset"
                )
            headers["Authorization"] = f"Bearer {credential}"
        return headers

    def _post_score(self, request: ScoreRequest, headers: dict[str, str]) -> ScoreResponse:
        url = self.config.endpoint.rstrip("/") + "/score"
        last_error: Exception | None = None
        for attempt in range(self.config.retries + 1):
            try:
                resp = self.session.post(
                    url, json=request.to_json_dict(), headers=headers, timeout=60,
                )
                resp.raise_for_status()
                return ScoreResponse.from_json_dict(resp.json())
            except Exception as exc:  # noqa: BLE001 - retried, re-raised below
                last_error = exc
                if attempt < self.config.retries:
                    schedule = self.config.backoff
                    delay = schedule[min(attempt, len(schedule) - 1)] if schedule else 0.0
                    time.sleep(delay)
        raise last_error  # type: ignore[misc]

    def _variant_label(self, variant: VariantLike) -> str:
        if self.text_masking:
            return variant.variant_id + self.TEXT_MASK_LABEL
        return variant.variant_id

    def _request_for(self, variant: VariantLike, bits: int, n: int,
                     target_token: str) -> ScoreRequest:
        masked = tuple(i for i in range(n) if not bits >> i & 1)
        if not self.text_masking:
            return ScoreRequest(
                variant_id=variant.variant_id,
                prompt_text=variant.text,
                annotated_spans=tuple(tuple(s) for s in variant.annotated_spans),
                masked_indices=masked,
                target_token=target_token,
            )
        # text-level fallback: splice the placeholder over each masked word
        # and shift the remaining spans; the server masks nothing itself
        text = variant.text
        pieces = []
        new_spans = []
        cursor = 0
        shift = 0
        for i, (start, end) in enumerate(variant.annotated_spans):
            pieces.append(text[cursor:start])
            word = self.placeholder if i in masked else text[start:end]
            new_spans.append((start + shift, start + shift + len(word)))
            pieces.append(word)
            shift += len(word) - (end - start)
            cursor = end
        pieces.append(text[cursor:])
        return ScoreRequest(
            variant_id=self._variant_label(variant),
            prompt_text="".join(pieces),
            annotated_spans=tuple(new_spans),
            masked_indices=(),
            target_token=target_token,
        )

    def build_value_table(self, variant: VariantLike, target_token: str) -> ValueTable:
        n = len(variant.annotated_spans)
        _check_n(n)
        size = 1 << n
        label = self._variant_label(variant)
        values = np.full(size, np.nan)
        to_fetch = []
        for bits in range(size):
            cached = None
            if self.cache is not None and self.model_id:
                cached = self.cache.get(
                    cache_key(label, bits, target_token, self.model_id)
                )
            if cached is not None:
                values[bits] = confidence_from_prob(cached, self.config.p_clamp)
            else:
                to_fetch.append(bits)

        failures: dict[int, Exception] = {}
        headers = self._headers()  # resolves credentials; fails fast if unset

        def fetch(bits: int) -> None:
            request = self._request_for(variant, bits, n, target_token)
            try:
                response = self._post_score(request, headers)
            except Exception as exc:  # noqa: BLE001 - collected per mask
                failures[bits] = exc
                return
            self.model_id = self.model_id or response.model_id
            values[bits] = confidence_from_prob(
                response.probability, self.config.p_clamp
            )
            if self.cache is not None:
                self.cache.put(
                    cache_key(label, bits, target_token, response.model_id),
                    response.probability,
                )

        if to_fetch:
            with ThreadPoolExecutor(max_workers=self.config.parallelism) as pool:
                list(pool.map(fetch, to_fetch))
            if self.cache is not None:
                self.cache.flush()
        if failures:
            missing = sorted(failures)
            raise PartialTableError(
                f"remote scoring failed for {len(missing)} masks on variant "
                f"{variant.variant_id!r} (first error: {failures[missing[0]]})",
                missing_masks=missing,
            )
        return ValueTable(n=n, values=values, variant_id=label)


def make_oracle(
    config: OracleConfig,
    synthetic_models: Mapping[str, SyntheticModel] | None = None,
    model_id: str | None = None,
    text_masking: bool = False,
):
    if config.backend == "synthetic":
        if not synthetic_models:
            raise ConfigurationError("synthetic backend needs planted models")
        return SyntheticOracle(synthetic_models)
    if config.backend == "replay":
        return ReplayOracle(config, model_id=model_id)
    if config.backend == "remote":
        return RemoteOracle(config, text_masking=text_masking)
    raise ConfigurationError(f"unknown backend {config.backend!r}")
