"""Model hosting and embedding-level masked scoring.

Masking a word replaces the embeddings of every token overlapping its span
with one fixed baseline embedding; the rest of the forward pass is the
stock causal LM. The target's probability is the product of its tokens'
teacher-forced conditional probabilities (single-token targets report
token_matched=True).
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass
from typing import Sequence

import torch

from .config import ServerConfig


class SpanResolutionError(ValueError):
    """An annotated span does not cover any tokens under this tokenizer."""

    def __init__(self, message: str, span_index: int):
        super().__init__(message)
        self.span_index = span_index


@dataclass(frozen=True)
class ScoreItem:
    """One scoring job, already shape-checked."""

    prompt_text: str
    annotated_spans: tuple[tuple[int, int], ...]
    masked_indices: tuple[int, ...]
    target_token: str


@dataclass(frozen=True)
class ScoreOutcome:
    probability: float
    token_matched: bool


class ScoringEngine:
    """Tokenizer + causal LM + baseline embedding, behind a single lock.

    The model executes on one worker; batched and serial paths share the
    same per-item embedding construction, so they agree up to float
    reduction order.
    """

    def __init__(self, config: ServerConfig):
        from transformers import AutoModelForCausalLM, AutoTokenizer

        self.config = config
        self.tokenizer = AutoTokenizer.from_pretrained(config.model)
        self.model = AutoModelForCausalLM.from_pretrained(config.model)
        self.model.to(config.device)
        self.model.eval()
        # a stable identity survives moving the model directory around;
        # fall back to the basename so cache keys never embed temp paths
        self.model_id = (
            getattr(self.model.config, "model_identity", None)
            or os.path.basename(os.path.normpath(config.model))
            or config.model
        )
        self._lock = threading.Lock()

        embeddings = self.model.get_input_embeddings().weight.detach()
        if config.baseline_mode == "vocab-mean":
            self.baseline_embedding = embeddings.mean(dim=0)
        else:
            token_id = self.tokenizer.unk_token_id
            if token_id is None:
                token_id = self.tokenizer.pad_token_id
            if token_id is None:
                raise ValueError(
                    "tokenizer defines neither unk nor pad token; cannot build "
                    "the baseline embedding"
                )
            self.baseline_embedding = embeddings[token_id].clone()

    # -- tokenization ------------------------------------------------------

    def _encode_prompt(self, text: str) -> tuple[list[int], list[tuple[int, int]]]:
        enc = self.tokenizer(
            text, add_special_tokens=False, return_offsets_mapping=True
        )
        return enc["input_ids"], [tuple(o) for o in enc["offset_mapping"]]

    def _target_ids(self, target: str) -> list[int]:
        ids = self.tokenizer(target, add_special_tokens=False)["input_ids"]
        if not ids:
            raise ValueError(f"target {target!r} tokenizes to nothing")
        return ids

    def resolve_span_tokens(
        self, text: str, spans: Sequence[tuple[int, int]]
    ) -> list[list[int]]:
        """Token indices overlapping each annotated span; 'all related tokens'."""
        _ids, offsets = self._encode_prompt(text)
        resolved = []
        for i, (start, end) in enumerate(spans):
            hits = [
                t for t, (ts, te) in enumerate(offsets) if ts < end and te > start
            ]
            if not hits:
                raise SpanResolutionError(
                    f"span {i} [{start},{end}) resolves to no tokens", span_index=i
                )
            resolved.append(hits)
        return resolved

    # -- embedding construction ---------------------------------------------

    def build_masked_embeddings(self, item: ScoreItem) -> tuple[torch.Tensor, int, list[int]]:
        """(embeddings [seq, dim], prompt_len, target_ids) with masking applied."""
        prompt_ids, _ = self._encode_prompt(item.prompt_text)
        span_tokens = self.resolve_span_tokens(item.prompt_text, item.annotated_spans)
        n = len(item.annotated_spans)
        for idx in item.masked_indices:
            if not 0 <= idx < n:
                raise SpanResolutionError(
                    f"masked index {idx} outside 0..{n - 1}", span_index=idx
                )
        target_ids = self._target_ids(item.target_token)
        all_ids = prompt_ids + target_ids
        ids_tensor = torch.tensor(all_ids, dtype=torch.long, device=self.config.device)
        with torch.no_grad():
            embeds = self.model.get_input_embeddings()(ids_tensor).clone()
        for idx in item.masked_indices:
            for t in span_tokens[idx]:
                embeds[t] = self.baseline_embedding
        return embeds, len(prompt_ids), target_ids

    # -- scoring -------------------------------------------------------------

    def score(self, item: ScoreItem) -> ScoreOutcome:
        return self.score_batch([item])[0]

    def score_batch(self, items: Sequence[ScoreItem]) -> list[ScoreOutcome]:
        """Outcomes in request order; micro-batched up to config.batch_size."""
        outcomes: list[ScoreOutcome | None] = [None] * len(items)
        with self._lock:
            for start in range(0, len(items), self.config.batch_size):
                chunk = list(enumerate(items))[start : start + self.config.batch_size]
                self._score_chunk(chunk, outcomes)
        return [o for o in outcomes if o is not None]

    def _score_chunk(self, chunk, outcomes) -> None:
        prepared = []
        for pos, item in chunk:
            embeds, prompt_len, target_ids = self.build_masked_embeddings(item)
            prepared.append((pos, embeds, prompt_len, target_ids))

        max_len = max(e.shape[0] for _, e, _, _ in prepared)
        dim = prepared[0][1].shape[1]
        batch = torch.zeros(len(prepared), max_len, dim, device=self.config.device)
        attention = torch.zeros(len(prepared), max_len, dtype=torch.long,
                                device=self.config.device)
        for row, (_, embeds, _, _) in enumerate(prepared):
            batch[row, : embeds.shape[0]] = embeds
            attention[row, : embeds.shape[0]] = 1

        with torch.no_grad():
            logits = self.model(inputs_embeds=batch, attention_mask=attention).logits
        log_probs = torch.log_softmax(logits.float(), dim=-1)

        for row, (pos, embeds, prompt_len, target_ids) in enumerate(prepared):
            total = 0.0
            for k, token_id in enumerate(target_ids):
                position = prompt_len - 1 + k  # logits at t predict token t+1
                total += float(log_probs[row, position, token_id])
            probability = float(torch.exp(torch.tensor(total)))
            probability = min(max(probability, 1e-300), 1.0 - 1e-16)
            outcomes[pos] = ScoreOutcome(
                probability=probability, token_matched=len(target_ids) == 1
            )
