"""Generate the committed replay fixture for the primary acceptance suite.

Builds the deterministic tiny model, scores every mask of every variant of
the bundled teacher/colleague sample through the scoring engine, writes the
probability cache to the primary package's tests/data/, then runs the
primary pipeline against that cache and freezes the resulting report values
as the expected outputs.

Run from the repository root:  python3 server/scripts/make_replay_fixture.py
"""

import json
import os
import sys
import tempfile
import time

HERE = os.path.dirname(os.path.abspath(__file__))
REPO = os.path.abspath(os.path.join(HERE, "..", ".."))
sys.path.insert(0, os.path.join(REPO, "server", "src"))
sys.path.insert(0, os.path.join(REPO, "src"))

from maskserve.config import ServerConfig  # noqa: E402
from maskserve.engine import ScoreItem, ScoringEngine  # noqa: E402
from maskserve.tinymodel import build_tiny_model  # noqa: E402

from andorlens.dataset import load_dataset  # noqa: E402
from andorlens.oracle import OracleConfig, ReplayOracle, cache_key  # noqa: E402
from andorlens.pipeline import decompose_sample, extract_sample, verify_artifacts  # noqa: E402

DATASET = os.path.join(REPO, "src", "andorlens", "data", "table1.json")
OUT_DIR = os.path.join(REPO, "tests", "data")
CACHE_PATH = os.path.join(OUT_DIR, "table1_replay_cache.json")
EXPECTED_PATH = os.path.join(OUT_DIR, "table1_expected.json")


def main():
    (sample,) = load_dataset(DATASET)
    texts = [sample.target_token] + [v.text for v in sample.all_variants()]

    with tempfile.TemporaryDirectory() as model_dir:
        build_tiny_model(texts, model_dir, seed=0)
        engine = ScoringEngine(ServerConfig(model=model_dir, batch_size=64))
        print(f"model ready: {engine.model_id}")

        cache = {}
        start = time.monotonic()
        for variant in sample.all_variants():
            n = variant.n
            items = []
            for bits in range(1 << n):
                masked = tuple(i for i in range(n) if not bits >> i & 1)
                items.append(
                    ScoreItem(
                        prompt_text=variant.text,
                        annotated_spans=variant.annotated_spans,
                        masked_indices=masked,
                        target_token=sample.target_token,
                    )
                )
            outcomes = engine.score_batch(items)
            for bits, outcome in enumerate(outcomes):
                key = cache_key(
                    variant.variant_id, bits, sample.target_token, engine.model_id
                )
                cache[key] = outcome.probability
            print(
                f"  scored {variant.variant_id}: {len(outcomes)} masks "
                f"({time.monotonic() - start:.1f}s elapsed)"
            )

    os.makedirs(OUT_DIR, exist_ok=True)
    with open(CACHE_PATH, "w", encoding="utf-8") as fh:
        json.dump(cache, fh, sort_keys=True)
    print(f"wrote {CACHE_PATH} ({len(cache)} entries)")

    with tempfile.TemporaryDirectory() as run_dir:
        oracle = ReplayOracle(OracleConfig(backend="replay", cache_path=CACHE_PATH))
        extract_sample(sample, oracle, out_dir=run_dir)
        report = decompose_sample(sample.sample_id, run_dir)
        summary = verify_artifacts(sample.sample_id, run_dir)
        for line in summary.lines():
            print(line)
        if not summary.all_passed or report.failed:
            raise SystemExit("pipeline run on the fixture did not verify clean")

    expected = {
        "model_id": report.model_id,
        "tau": report.tau,
        "salient_counts": {
            "and": report.salient_count_and,
            "or": report.salient_count_or,
        },
        "rho_r": report.ratios.rho_r,
        "rho_c": report.ratios.rho_c,
        "e_all": report.ratios.e_all,
        "additivity_residual": report.additivity_residual,
    }
    with open(EXPECTED_PATH, "w", encoding="utf-8") as fh:
        json.dump(expected, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"wrote {EXPECTED_PATH}")
    print(json.dumps(expected, indent=1))


if __name__ == "__main__":
    main()
