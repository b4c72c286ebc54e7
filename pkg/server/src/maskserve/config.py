"""Server configuration."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

BaselineMode = Literal["unk-token", "vocab-mean"]


@dataclass(frozen=True)
class ServerConfig:
    """Which model to host and how to mask.

    baseline_mode picks the substitute embedding written over masked words:
    the unknown/pad token's embedding row, or the mean over the whole
    vocabulary.
    """

    model: str
    device: str = "cpu"
    baseline_mode: BaselineMode = "unk-token"
    batch_size: int = 32
    port: int = 8301

    def __post_init__(self):
        if self.baseline_mode not in ("unk-token", "vocab-mean"):
            raise ValueError(
                f"baseline_mode must be 'unk-token' or 'vocab-mean', "
                f"got {self.baseline_mode!r}"
            )
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
