"""Wire protocol: /score, /score_batch, /health."""

import pytest
from fastapi.testclient import TestClient

from maskserve.app import create_app
from maskserve.config import ServerConfig

PROMPT = "Caren works as a teacher. Emily is the colleague of Caren, Emily works as a"
SPANS = [
    [26, 31], [32, 34], [35, 38], [39, 48], [49, 51],
    [52, 57], [59, 64], [65, 70], [71, 73], [74, 75],
]


def request_body(masked=(), **overrides):
    body = {
        "variant_id": "original",
        "prompt_text": PROMPT,
        "annotated_spans": SPANS,
        "masked_indices": list(masked),
        "target_token": "teacher",
    }
    body.update(overrides)
    return body


@pytest.fixture(scope="module")
def client(tiny_model_dir):
    app = create_app(ServerConfig(model=tiny_model_dir, batch_size=8))
    return TestClient(app)


class TestHealth:
    def test_health_reports_model_and_mode(self, client):
        resp = client.get("/health")
        assert resp.status_code == 200
        doc = resp.json()
        assert doc["baseline_mode"] == "unk-token"
        assert doc["protocol_version"] == 1
        assert doc["model_id"]

    def test_unloadable_model_gives_503(self, tmp_path):
        app = create_app(ServerConfig(model=str(tmp_path / "nope")))
        client = TestClient(app)
        assert client.get("/health").status_code == 503
        resp = client.post("/score", json=request_body())
        assert resp.status_code == 503


class TestScore:
    def test_score_round_trip(self, client):
        resp = client.post("/score", json=request_body(masked=(0, 3)))
        assert resp.status_code == 200
        doc = resp.json()
        assert 0.0 < doc["probability"] < 1.0
        assert doc["token_matched"] is True
        assert doc["model_id"]

    def test_no_masking_vs_all_masked_distinct(self, client):
        p0 = client.post("/score", json=request_body()).json()["probability"]
        p1 = client.post(
            "/score", json=request_body(masked=tuple(range(10)))
        ).json()["probability"]
        assert 0.0 < p0 < 1.0 and 0.0 < p1 < 1.0
        assert p0 != p1

    def test_unknown_fields_ignored(self, client):
        body = request_body()
        body["future_field"] = {"anything": [1, 2, 3]}
        resp = client.post("/score", json=body)
        assert resp.status_code == 200
        assert resp.json()["protocol_version"] == 1

    def test_bad_span_is_422_with_span_index(self, client):
        body = request_body()
        body["annotated_spans"] = [[0, 0]] + SPANS[1:]
        resp = client.post("/score", json=body)
        assert resp.status_code == 422
        assert resp.json()["detail"]["span_index"] == 0

    def test_deterministic_across_calls(self, client):
        a = client.post("/score", json=request_body(masked=(2, 5))).json()
        b = client.post("/score", json=request_body(masked=(2, 5))).json()
        assert a["probability"] == b["probability"]


class TestScoreBatch:
    def test_batch_of_one_equals_score(self, client):
        single = client.post("/score", json=request_body(masked=(1,))).json()
        batch = client.post("/score_batch", json=[request_body(masked=(1,))]).json()
        assert len(batch) == 1
        assert batch[0]["probability"] == pytest.approx(
            single["probability"], rel=1e-5
        )

    def test_order_preserved(self, client):
        bodies = [request_body(masked=(i,)) for i in range(6)]
        batch = client.post("/score_batch", json=bodies).json()
        singles = [
            client.post("/score", json=b).json()["probability"] for b in bodies
        ]
        assert [pytest.approx(r["probability"], rel=1e-5) for r in batch] == singles

    def test_malformed_item_isolated(self, client):
        bodies = [request_body(masked=(0,)) for _ in range(3)]
        bodies[1]["annotated_spans"] = [[0, 0]] + SPANS[1:]
        batch = client.post("/score_batch", json=bodies).json()
        assert len(batch) == 3
        assert "probability" in batch[0]
        assert batch[1]["index"] == 1 and "error" in batch[1]
        assert "probability" in batch[2]
