"""Acceptance suite: one test per criterion, one pass/fail line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines. Tolerances are pinned here and nowhere else.
"""

import json
import os
import time
from importlib import resources

import numpy as np
import pytest

from andorlens.dataset import load_dataset
from andorlens.effects import effect_ratios, order_strengths
from andorlens.lattice import (
    FAMILY_AND,
    mobius_and,
    mobius_or,
    reconstruct_table,
    reflect,
    subset_zeta,
)
from andorlens.oracle import (
    OracleConfig,
    ReplayOracle,
    SyntheticModel,
    SyntheticOracle,
    synthetic_table,
)
from andorlens.pipeline import (
    decompose_sample,
    extract_sample,
    sparsity_sweep,
    verify_artifacts,
)
from andorlens.sparsify import (
    interaction_pair,
    matching_error_curve,
    optimize_theta,
)

from conftest import dense_and_matrix, dense_or_matrix
from test_effects import make_record

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


def _report(name: str, detail: str) -> None:
    print(f"[PASS] {name}: {detail}")


# ---------------------------------------------------------------------------
# Criterion: Mobius/zeta inversion at scale
# ---------------------------------------------------------------------------


def test_mobius_zeta_inversion_1000_tables():
    rng = np.random.default_rng(1001)
    start = time.monotonic()
    worst = 0.0
    count = 0
    for n in range(1, 9):
        for _ in range(125):
            table = rng.normal(0, 4, size=1 << n)
            table[0] = 0.0
            rebuilt = subset_zeta(mobius_and(table).effects)
            scale = max(np.abs(table).max(), 1e-300)
            worst = max(worst, float(np.abs(rebuilt - table).max() / scale))
            count += 1
    elapsed = time.monotonic() - start
    assert count == 1000
    assert worst <= 1e-12, f"max relative inversion error {worst:.3e}"
    assert elapsed < 5.0, f"inversion sweep took {elapsed:.2f}s"
    _report(
        "mobius_zeta_inversion",
        f"1000 tables n=1..8, max rel err {worst:.2e}, {elapsed:.2f}s",
    )


# ---------------------------------------------------------------------------
# Criterion: universal matching (full-set reconstruction, any theta)
# ---------------------------------------------------------------------------


def test_universal_matching_any_theta():
    rng = np.random.default_rng(1002)
    start = time.monotonic()
    worst = 0.0
    for n in range(2, 11):
        raw = rng.normal(0, 3, size=1 << n)
        u = raw - raw[0]
        for _ in range(20):
            theta = rng.normal(0, 2, size=1 << n)
            theta[0] = 0.0
            rebuilt = reconstruct_table(
                mobius_and(0.5 * u + theta), mobius_or(0.5 * u - theta), raw[0]
            )
            worst = max(worst, float(np.abs(rebuilt - raw).max()))
    elapsed = time.monotonic() - start
    assert worst <= 1e-10, f"max reconstruction error {worst:.3e}"
    assert elapsed < 30.0, f"universal matching sweep took {elapsed:.2f}s"
    _report(
        "universal_matching",
        f"n=2..10 x 20 thetas, max abs err {worst:.2e}, {elapsed:.2f}s",
    )


# ---------------------------------------------------------------------------
# Criterion: component identities and duality vs dense oracles
# ---------------------------------------------------------------------------


def test_component_identities_and_duality_dense_oracle():
    rng = np.random.default_rng(1003)
    worst_identity = 0.0
    worst_duality = 0.0
    worst_dense = 0.0
    for trial in range(100):
        n = int(rng.integers(1, 7))
        size = 1 << n
        table = rng.normal(0, 3, size=size)
        table[0] = 0.0

        and_iv = mobius_and(table)
        or_iv = mobius_or(table)

        # dense-matrix cross-check of both transforms
        worst_dense = max(
            worst_dense,
            float(np.abs(and_iv.effects - dense_and_matrix(n) @ table).max()),
            float(np.abs(or_iv.effects - dense_or_matrix(n) @ table).max()),
        )

        # component identities: subset sums of AND effects and
        # intersection sums of OR effects reproduce the table
        zeta_and = subset_zeta(and_iv.effects)
        or_sums = float(or_iv.effects.sum()) - reflect(subset_zeta(or_iv.effects))
        worst_identity = max(
            worst_identity,
            float(np.abs(zeta_and - table).max()),
            float(np.abs(or_sums - table).max()),
        )

        # duality: OR route equals negated AND route on the reflected table
        dual = table.copy()
        dual[-1] = 0.0
        worst_duality = max(
            worst_duality,
            float(
                np.abs(
                    mobius_or(dual).effects + mobius_and(reflect(dual)).effects
                ).max()
            ),
        )
    assert worst_dense <= 1e-12, f"dense oracle gap {worst_dense:.3e}"
    assert worst_identity <= 1e-12, f"component identity gap {worst_identity:.3e}"
    assert worst_duality <= 1e-12, f"duality gap {worst_duality:.3e}"
    _report(
        "component_identities_duality",
        f"100 tables n<=6: dense {worst_dense:.2e}, identities "
        f"{worst_identity:.2e}, duality {worst_duality:.2e}",
    )


# ---------------------------------------------------------------------------
# Criterion: additivity on every pipeline run
# ---------------------------------------------------------------------------


def bundled(name):
    return resources.files("andorlens.data").joinpath(name)


def test_additivity_on_pipeline_runs(tmp_path):
    (sample,) = load_dataset(bundled("demo_synthetic.json"))
    oracle = SyntheticOracle.from_json_file(bundled("demo_models.json"))
    extract_sample(sample, oracle, out_dir=tmp_path)
    report = decompose_sample("demo", tmp_path)
    assert report.additivity_residual <= 1e-10
    assert not report.failed
    _report(
        "additivity",
        f"pipeline max |Jf+Jc+K-I| = {report.additivity_residual:.2e} <= 1e-10",
    )


# ---------------------------------------------------------------------------
# Criterion: synthetic recovery of 12 planted effects at n=10
# ---------------------------------------------------------------------------


def planted_model_n10(seed=77):
    """7 AND + 5 OR planted effects, orders 2..4, magnitudes in [0.5, 2]."""
    rng = np.random.default_rng(seed)
    n = 10
    size = 1 << n
    orders = np.array([bin(m).count("1") for m in range(size)])
    pool = np.flatnonzero((orders >= 2) & (orders <= 4))
    picks = rng.choice(pool, size=12, replace=False)
    mags = rng.uniform(0.5, 2.0, size=12) * rng.choice([-1.0, 1.0], size=12)
    planted_and = {int(m): float(w) for m, w in zip(picks[:7], mags[:7])}
    planted_or = {int(m): float(w) for m, w in zip(picks[7:], mags[7:])}
    model = SyntheticModel(
        n=n, planted_and=planted_and, planted_or=planted_or,
        baseline=0.8, noise_sigma=0.0, seed=seed,
    )
    return model, planted_and, planted_or


@pytest.fixture(scope="module")
def recovered_n10():
    model, planted_and, planted_or = planted_model_n10()
    table = synthetic_table(model, "planted_n10")
    start = time.monotonic()
    theta, noise, history = optimize_theta(table)
    elapsed = time.monotonic() - start
    and_iv, or_iv = interaction_pair(table, theta, noise)
    return model, planted_and, planted_or, table, and_iv, or_iv, elapsed


def test_synthetic_recovery_n10(recovered_n10):
    model, planted_and, planted_or, table, and_iv, or_iv, elapsed = recovered_n10
    size = 1 << model.n
    stacked = np.concatenate([and_iv.effects, or_iv.effects])
    top12 = set(np.argsort(-np.abs(stacked))[:12])
    expected = {m for m in planted_and} | {size + m for m in planted_or}
    assert top12 == expected, "planted supports not the 12 largest effects"

    worst_rel = 0.0
    for m, w in planted_and.items():
        worst_rel = max(worst_rel, abs(and_iv.effects[m] - w) / abs(w))
    for m, w in planted_or.items():
        worst_rel = max(worst_rel, abs(or_iv.effects[size + m - size] - w) / abs(w))
    assert worst_rel <= 0.05, f"magnitude error {worst_rel:.2%}"

    others = np.delete(np.abs(stacked), sorted(top12))
    assert others.max() < 0.05, f"largest spurious effect {others.max():.3f}"
    assert elapsed < 60.0, f"optimization took {elapsed:.1f}s"
    _report(
        "synthetic_recovery",
        f"12/12 supports exact, max mag err {worst_rel:.2e}, spurious "
        f"{others.max():.2e}, {elapsed:.1f}s",
    )


# ---------------------------------------------------------------------------
# Criterion: matching-error curve on the planted model
# ---------------------------------------------------------------------------


def test_matching_error_curve_n10(recovered_n10):
    model, _, _, table, and_iv, or_iv, _ = recovered_n10
    curves = matching_error_curve(and_iv, or_iv, table, [50, 100, 150, 200])
    value_range = float(table.values.max() - table.values.min())
    means = [c.mean_error for c in curves]
    assert means[0] < 0.01 * value_range, (
        f"mean error at k=50 is {means[0]:.3e}, range {value_range:.3f}"
    )
    # non-increasing up to the exact solver's noise floor (~1e-10 absolute),
    # far below any real approximation error this check exists to catch
    slack = 1e-9 * max(value_range, 1.0)
    for a, b in zip(means, means[1:]):
        assert b <= a + slack, f"curve not non-increasing: {a:.3e} -> {b:.3e}"
    _report(
        "matching_error_curve",
        "k=50..200 means: " + ", ".join(f"{m:.2e}" for m in means)
        + f" (range {value_range:.2f})",
    )


# ---------------------------------------------------------------------------
# Criterion: sparsity diagnostic on the smooth family
# ---------------------------------------------------------------------------


def test_sparsity_diagnostic_smooth_family():
    reports = sparsity_sweep([8, 10, 12], tau_policy=("relative", 0.05), seed=5)
    details = []
    for rep in reports:
        assert rep.salient_count < 5 * rep.n, (
            f"n={rep.n}: {rep.salient_count} salient >= {5 * rep.n}"
        )
        strengths = rep.sorted_strengths
        top20_share = strengths[:20].sum() / strengths.sum()
        assert top20_share >= 0.90, (
            f"n={rep.n}: top-20 share {top20_share:.1%} < 90%"
        )
        details.append(
            f"n={rep.n}: salient={rep.salient_count} top20={top20_share:.1%}"
        )
    kappa = reports[0].fitted_kappa
    assert kappa is not None
    in_band = 0.5 <= kappa <= 2.0
    assert in_band, f"fitted kappa {kappa:.3f} outside plausibility band [0.5, 2.0]"
    _report(
        "sparsity_diagnostic",
        "; ".join(details) + f"; fitted kappa={kappa:.3f} "
        "(reported reference band 0.9..1.2, not asserted)",
    )


# ---------------------------------------------------------------------------
# Criterion: axiom realizations
# ---------------------------------------------------------------------------


def test_axiom_realizations(tmp_path):
    from test_pipeline import make_variant, toggle_sample_and_oracle
    from andorlens.dataset import SampleSpec

    # premise absent: full == question text, no equivalents
    q_text = "alpha beta gamma delta"
    spans = [(0, 5), (6, 10), (11, 16), (17, 22)]
    same = SampleSpec(
        sample_id="axiom1",
        original=make_variant("orig", "original", q_text, spans),
        question_only=make_variant("q", "question_only", q_text, spans),
        equivalents=(),
        target_token="tok",
        n=4,
    )
    model = SyntheticModel(
        n=4, planted_and={0b0011: 1.0, 0b1100: -0.6}, planted_or={0b0110: 0.8},
        baseline=0.25,
    )
    oracle = SyntheticOracle({"orig": model, "q": model})
    extract_sample(same, oracle, out_dir=tmp_path)
    report = decompose_sample("axiom1", tmp_path)
    assert all(r.k_reason == 0.0 for r in report.records)
    assert all(r.j_chaotic == 0.0 for r in report.records)

    # single-member equivalence family: chaotic ratio is exactly 0
    sample, oracle = toggle_sample_and_oracle()
    bare = SampleSpec(
        sample_id="axiom2", original=sample.original,
        question_only=sample.question_only, equivalents=(),
        target_token="tok", n=3,
    )
    extract_sample(bare, oracle, out_dir=tmp_path)
    bare_report = decompose_sample("axiom2", tmp_path)
    assert bare_report.ratios is not None and bare_report.ratios.rho_c == 0.0

    # partition: every salient record lands in exactly one reasoning class
    for rep in (report, bare_report):
        classified = [r for r in rep.records if r.salient]
        assert len(classified) == rep.salient_count_and + rep.salient_count_or
        for r in classified:
            assert r.class_label in ("enhanced", "eliminated", "reversed")

    # full invariant suite over the persisted artifacts
    summary = verify_artifacts("axiom2", tmp_path)
    assert summary.all_passed, "\n".join(summary.lines())
    _report(
        "axiom_realizations",
        "no-premise K=Jc=0 exact; single-family rho_c=0; partition exact; "
        "verify suite green",
    )


# ---------------------------------------------------------------------------
# Criterion: ratio pipeline shape (fixture totals) + replay fixture run
# ---------------------------------------------------------------------------


def test_ratio_fixture_totals():
    records = [
        make_record(3, 0b001, FAMILY_AND, jf=53.51, jc=0.0, k=0.0),
        make_record(3, 0b010, FAMILY_AND, jf=0.0, jc=7.37, k=0.0),
        make_record(3, 0b100, FAMILY_AND, jf=0.0, jc=0.0, k=39.12),
    ]
    ratios = effect_ratios(order_strengths(records))
    assert ratios.e_all == pytest.approx(100.0, abs=1e-12)
    assert ratios.rho_r == pytest.approx(0.3912, abs=1e-12)
    assert ratios.rho_c == pytest.approx(0.0737, abs=1e-12)
    _report(
        "ratio_fixture",
        f"engineered strengths -> rho_r={ratios.rho_r:.2%}, rho_c={ratios.rho_c:.2%}",
    )


def test_replay_fixture_end_to_end(tmp_path):
    cache_path = os.path.join(DATA_DIR, "table1_replay_cache.json")
    expected_path = os.path.join(DATA_DIR, "table1_expected.json")
    assert os.path.exists(cache_path), (
        "replay fixture missing; generate it with server/scripts/make_replay_fixture.py"
    )
    assert os.path.exists(expected_path), "expected-values fixture missing"

    (sample,) = load_dataset(bundled("table1.json"))
    oracle = ReplayOracle(
        OracleConfig(backend="replay", cache_path=cache_path)
    )
    result = extract_sample(sample, oracle, out_dir=tmp_path)
    assert result.variant_count == 11
    report = decompose_sample("teacher_colleague", tmp_path)
    assert not report.failed
    assert report.additivity_residual <= 1e-10

    with open(expected_path, "r", encoding="utf-8") as fh:
        expected = json.load(fh)
    assert report.model_id == expected["model_id"]
    assert report.salient_count_and == expected["salient_counts"]["and"]
    assert report.salient_count_or == expected["salient_counts"]["or"]
    assert report.ratios is not None
    assert report.ratios.rho_r == pytest.approx(expected["rho_r"], abs=1e-9)
    assert report.ratios.rho_c == pytest.approx(expected["rho_c"], abs=1e-9)
    assert report.tau == pytest.approx(expected["tau"], abs=1e-12)

    summary = verify_artifacts("teacher_colleague", tmp_path)
    assert summary.all_passed, "\n".join(summary.lines())
    _report(
        "replay_fixture",
        f"bundled sample on frozen scores: rho_r={report.ratios.rho_r:.2%}, "
        f"rho_c={report.ratios.rho_c:.2%}, salient "
        f"{report.salient_count_and}+{report.salient_count_or}",
    )
