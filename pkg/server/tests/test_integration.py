"""Live-wire integration: the extraction client against a running server.

Starts uvicorn on a local port and drives it through the primary package's
remote oracle, so the JSON wire format is exercised end to end over real
HTTP including caching and warm replays.
"""

import json
import socket
import threading
import time

import numpy as np
import pytest

pytest.importorskip("andorlens")

from andorlens.dataset import load_dataset
from andorlens.oracle import OracleConfig, RemoteOracle, ReplayOracle

from maskserve.app import create_app
from maskserve.config import ServerConfig

from conftest import TABLE1_PATH


@pytest.fixture(scope="module")
def live_server(tiny_model_dir):
    import uvicorn

    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]

    app = create_app(ServerConfig(model=tiny_model_dir, batch_size=32, port=port))
    server = uvicorn.Server(
        uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error")
    )
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 30
    import requests

    while time.monotonic() < deadline:
        try:
            if requests.get(f"http://127.0.0.1:{port}/health", timeout=2).ok:
                break
        except requests.ConnectionError:
            time.sleep(0.1)
    else:
        raise RuntimeError("server did not come up")
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=10)


def test_remote_extraction_full_n10_table(live_server, tmp_path):
    (sample,) = load_dataset(TABLE1_PATH)
    variant = sample.original
    cache_path = tmp_path / "probs.json"
    oracle = RemoteOracle(
        OracleConfig(
            backend="remote", endpoint=live_server, parallelism=16,
            cache_path=str(cache_path),
        )
    )
    start = time.monotonic()
    table = oracle.build_value_table(variant, sample.target_token)
    elapsed = time.monotonic() - start

    assert table.n == 10
    assert table.values.shape == (1024,)
    assert np.all(np.isfinite(table.values))
    assert oracle.model_id == "tiny-wordlm-v1"
    print(f"[PASS] remote_full_table: 1024 requests in {elapsed:.1f}s")

    # the populated cache replays bit-exactly without the server
    with open(cache_path, "r", encoding="utf-8") as fh:
        assert len(json.load(fh)) == 1024
    replay = ReplayOracle(
        OracleConfig(backend="replay", cache_path=str(cache_path))
    )
    table2 = replay.build_value_table(variant, sample.target_token)
    np.testing.assert_array_equal(table2.values, table.values)


def test_remote_and_direct_scores_agree(live_server, tmp_path):
    (sample,) = load_dataset(TABLE1_PATH)
    q = sample.question_only
    oracle = RemoteOracle(
        OracleConfig(backend="remote", endpoint=live_server, parallelism=4)
    )
    import requests

    table = oracle.build_value_table(q, sample.target_token)
    # spot-check three masks against direct HTTP calls
    for bits in (0, 37, 1023):
        masked = [i for i in range(10) if not bits >> i & 1]
        resp = requests.post(
            f"{live_server}/score",
            json={
                "variant_id": q.variant_id,
                "prompt_text": q.text,
                "annotated_spans": [list(s) for s in q.annotated_spans],
                "masked_indices": masked,
                "target_token": sample.target_token,
            },
            timeout=30,
        )
        p = resp.json()["probability"]
        from andorlens.oracle import confidence_from_prob

        assert table.values[bits] == pytest.approx(confidence_from_prob(p), rel=1e-12)
