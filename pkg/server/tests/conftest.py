import json
import os
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from maskserve.config import ServerConfig
from maskserve.engine import ScoringEngine
from maskserve.tinymodel import build_tiny_model

TABLE1_PATH = os.path.join(
    os.path.dirname(__file__), "..", "..", "src", "andorlens", "data", "table1.json"
)


def table1_texts():
    with open(TABLE1_PATH, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    texts = []
    for sample in doc["samples"]:
        texts.append(sample["target"])
        for v in sample["variants"]:
            texts.append(v["text"])
    return texts


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("tinymodel")
    extra = ["alpha beta gamma delta tok", "piano violin well badly"]
    return build_tiny_model(table1_texts() + extra, out, seed=0)


@pytest.fixture(scope="session")
def engine(tiny_model_dir):
    return ScoringEngine(ServerConfig(model=tiny_model_dir, batch_size=16))
