"""Scoring service for masked-prompt next-token probabilities."""

from .app import create_app
from .config import ServerConfig
from .engine import ScoreItem, ScoreOutcome, ScoringEngine, SpanResolutionError
from .tinymodel import build_tiny_model

__version__ = "0.1.0"
