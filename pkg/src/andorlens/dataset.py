"""Question-answer samples with aligned word annotations.

A sample is one premise+question prompt together with its question-only
variant and a family of logically equivalent rewrites (irrelevant-background
edits, paraphrases of the premise, entity renamings). Every variant carries
the same number of annotated word spans, and the i-th span always plays the
same logical role, so the i-th lattice bit is comparable across variants.

On-disk format (one JSON document per dataset):

    {"samples": [{"sample_id": ..., "target": ..., "n": ...,
                  "variants": [{"variant_id", "type", "text",
                                "spans": [[start, end], ...]}, ...]}]}

Variant types: original | background | paraphrase | renaming | question_only.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Literal, Sequence

from .errors import DatasetValidationError
from .lattice import MAX_VARS

EquivalenceType = Literal[
    "original", "background", "paraphrase", "renaming", "question_only"
]

EQUIVALENCE_FAMILIES = ("background", "paraphrase", "renaming")

# words the annotation guidance says to skip; the loader only warns
_STOPWORD_RE = re.compile(
    r"^(a|an|the|of|in|on|at|to|for|with|by|and|or|but|as|is|are|was|were)$",
    re.IGNORECASE,
)
_WORDLIKE_RE = re.compile(r"^[\w'-]+$", re.UNICODE)


@dataclass(frozen=True)
class PromptVariant:
    """One concrete prompt text with its annotated word spans."""

    variant_id: str
    text: str
    annotated_spans: tuple[tuple[int, int], ...]
    includes_premise: bool
    equivalence_type: EquivalenceType

    def annotated_words(self) -> tuple[str, ...]:
        return tuple(self.text[a:b] for a, b in self.annotated_spans)

    @property
    def n(self) -> int:
        return len(self.annotated_spans)


@dataclass(frozen=True)
class SampleSpec:
    """A premise+question prompt plus its aligned variants and target token."""

    sample_id: str
    original: PromptVariant
    question_only: PromptVariant
    equivalents: tuple[PromptVariant, ...]
    target_token: str
    n: int

    def all_variants(self) -> tuple[PromptVariant, ...]:
        return (self.original, self.question_only) + self.equivalents

    def equivalence_class(self) -> tuple[PromptVariant, ...]:
        """The logically equivalent prompt family; includes the original."""
        return (self.original,) + self.equivalents


@dataclass
class ValidationReport:
    """Violations block a sample; warnings are advisory."""

    sample_id: str
    violations: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _check_spans(variant: PromptVariant, report: ValidationReport) -> None:
    text = variant.text
    prev_end = -1
    for i, (start, end) in enumerate(variant.annotated_spans):
        if not (0 <= start < end <= len(text)):
            report.violations.append(
                f"{variant.variant_id}: span {i} [{start},{end}) outside text bounds"
            )
            continue
        if start < prev_end:
            report.violations.append(
                f"{variant.variant_id}: spans overlap at indices ({i - 1},{i})"
            )
        elif start == prev_end:
            report.violations.append(
                f"{variant.variant_id}: spans {i - 1} and {i} are adjacent without "
                "a separator; each span must cover a whole word"
            )
        prev_end = end
        word = text[start:end]
        if not _WORDLIKE_RE.match(word):
            report.violations.append(
                f"{variant.variant_id}: span {i} {word!r} is not a single word"
            )
            continue
        before = text[start - 1] if start > 0 else " "
        after = text[end] if end < len(text) else " "
        if re.match(r"[\w]", before) or re.match(r"[\w]", after):
            report.violations.append(
                f"{variant.variant_id}: span {i} {word!r} does not cover a whole word"
            )
        if _STOPWORD_RE.match(word):
            report.warnings.append(
                f"{variant.variant_id}: span {i} annotates insignificant word {word!r}"
            )


def validate_sample(sample: SampleSpec) -> ValidationReport:
    """Structural validation; returns a report instead of raising."""
    report = ValidationReport(sample_id=sample.sample_id)

    if not 1 <= sample.n <= MAX_VARS:
        report.violations.append(f"annotation count n={sample.n} outside 1..{MAX_VARS}")
    if not sample.target_token.strip():
        report.violations.append("target_token is empty")

    for variant in sample.all_variants():
        if variant.n != sample.n:
            report.violations.append(
                f"{variant.variant_id}: has {variant.n} spans, sample declares n={sample.n}"
            )
        _check_spans(variant, report)

    if sample.original.equivalence_type != "original":
        report.violations.append("original variant must have type 'original'")
    if sample.question_only.equivalence_type != "question_only":
        report.violations.append("question_only variant must have type 'question_only'")
    if sample.question_only.includes_premise:
        report.violations.append("question_only variant must not include the premise")
    for eq in sample.equivalents:
        if eq.equivalence_type not in EQUIVALENCE_FAMILIES:
            report.violations.append(
                f"{eq.variant_id}: equivalence type {eq.equivalence_type!r} invalid"
            )

    # the question-only text should be a contiguous part of the original
    if sample.question_only.text and sample.question_only.text not in sample.original.text:
        report.violations.append(
            "question_only text does not occur inside the original prompt"
        )

    # the i-th annotated word plays the same role everywhere; renaming is the
    # only family allowed to change the surface form
    reference = sample.original.annotated_words()
    for variant in sample.all_variants():
        if variant is sample.original or variant.n != sample.n:
            continue
        words = variant.annotated_words()
        if variant.equivalence_type == "renaming":
            continue
        for i, (a, b) in enumerate(zip(reference, words)):
            if a != b:
                report.warnings.append(
                    f"{variant.variant_id}: annotated word {i} {b!r} differs from "
                    f"original {a!r} outside a renaming variant"
                )

    present = {eq.equivalence_type for eq in sample.equivalents}
    for family in EQUIVALENCE_FAMILIES:
        if family not in present:
            report.warnings.append(f"no {family} variant present")

    return report


def analysis_plan(sample: SampleSpec) -> list[tuple[PromptVariant, str]]:
    """The exact value tables an analysis must build, in deterministic order.

    The equivalence family (original plus equivalents) feeds the averaged
    table; the question-only variant feeds the memorization-only extraction.
    """
    plan = [(sample.original, "full"), (sample.question_only, "question_only")]
    plan.extend((eq, "equivalent-member") for eq in sample.equivalents)
    return plan


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


def _variant_from_doc(doc: dict) -> PromptVariant:
    vtype = doc["type"]
    return PromptVariant(
        variant_id=str(doc["variant_id"]),
        text=str(doc["text"]),
        annotated_spans=tuple((int(a), int(b)) for a, b in doc["spans"]),
        includes_premise=vtype != "question_only",
        equivalence_type=vtype,
    )


def sample_from_doc(doc: dict) -> SampleSpec:
    variants = [_variant_from_doc(v) for v in doc["variants"]]
    by_type: dict[str, list[PromptVariant]] = {}
    for v in variants:
        by_type.setdefault(v.equivalence_type, []).append(v)
    sample_id = str(doc["sample_id"])
    if len(by_type.get("original", [])) != 1:
        raise DatasetValidationError(
            f"sample {sample_id!r}: needs exactly one original variant"
        )
    if len(by_type.get("question_only", [])) != 1:
        raise DatasetValidationError(
            f"sample {sample_id!r}: needs exactly one question_only variant"
        )
    equivalents = tuple(
        v for v in variants if v.equivalence_type in EQUIVALENCE_FAMILIES
    )
    return SampleSpec(
        sample_id=sample_id,
        original=by_type["original"][0],
        question_only=by_type["question_only"][0],
        equivalents=equivalents,
        target_token=str(doc["target"]),
        n=int(doc["n"]),
    )


def load_dataset(path) -> list[SampleSpec]:
    """Parse and validate a dataset file.

    Loading is all-or-nothing per sample: any sample with violations makes
    the load fail with a DatasetValidationError carrying every sample's
    report, so one bad sample cannot silently vanish from an analysis.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DatasetValidationError(
                f"dataset {path} is not valid JSON at line {exc.lineno}, "
                f"column {exc.colno}: {exc.msg}"
            ) from exc

    samples = []
    reports = []
    for sample_doc in doc.get("samples", []):
        sample = sample_from_doc(sample_doc)
        report = validate_sample(sample)
        reports.append(report)
        if report.ok:
            samples.append(sample)
    bad = [r for r in reports if not r.ok]
    if bad:
        lines = "; ".join(
            f"{r.sample_id}: {r.violations[0]}" for r in bad
        )
        raise DatasetValidationError(
            f"dataset {path} has {len(bad)} invalid sample(s): {lines}",
            reports=reports,
        )
    return samples


def dataset_to_doc(samples: Sequence[SampleSpec]) -> dict:
    return {
        "samples": [
            {
                "sample_id": s.sample_id,
                "target": s.target_token,
                "n": s.n,
                "variants": [
                    {
                        "variant_id": v.variant_id,
                        "type": v.equivalence_type,
                        "text": v.text,
                        "spans": [list(span) for span in v.annotated_spans],
                    }
                    for v in s.all_variants()
                ],
            }
            for s in samples
        ]
    }
