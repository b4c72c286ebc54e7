"""Decomposing interactions into memorization and in-context reasoning effects.

Three extractions of the same prompt feed this module, all over the same
annotated variable set: the full prompt (premise + question), the question
alone, and the average over the logically equivalent prompt family. Each
effect then splits exactly as

    i_full = j_found + j_chaotic + k_reason
    j_found   = i_question            (present with the question alone)
    j_chaotic = i_full - i_avg        (surface-form sensitivity)
    k_reason  = i_avg - i_question    (introduced by the premise)

The identity telescopes, so additivity is exact for every mask. Salient
effects are further classified by how the reasoning term interacts with the
total memorization term j = j_found + j_chaotic:

    enhanced    j * k > 0            (reasoning amplifies the memorized effect)
    eliminated  j * k < 0, |j| >= |k| (reasoning attenuates it)
    reversed    j * k < 0, |j| <  |k| (reasoning flips its sign)
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

from .errors import AlignmentError, UndefinedRatioError
from .lattice import FAMILY_AND, FAMILY_OR, Family, InteractionVector, Mask
from .sparsify import SalientSet

ClassLabel = Literal["enhanced", "eliminated", "reversed", "unclassified"]

EFFECT_KINDS = ("foundational", "chaotic", "reasoning")
REASONING_CLASSES = ("enhanced", "eliminated", "reversed")


@dataclass(frozen=True)
class EffectRecord:
    """Per-mask decomposition of one family's interaction effect."""

    mask: Mask
    family: Family
    i_full: float
    i_avg: float
    i_question: float
    j_found: float
    j_chaotic: float
    k_reason: float
    class_label: ClassLabel

    @property
    def order(self) -> int:
        return self.mask.order

    @property
    def salient(self) -> bool:
        return self.class_label != "unclassified"

    @property
    def memorization_share(self) -> float:
        """|j_found| / (|j_found| + |j_chaotic| + |k_reason|); 0 when all zero."""
        total = abs(self.j_found) + abs(self.j_chaotic) + abs(self.k_reason)
        return abs(self.j_found) / total if total > 0 else 0.0


@dataclass(frozen=True)
class OrderStrengths:
    """Positive/negative strength sums per order and per effect kind.

    pos[m][kind] accumulates max(0, effect); neg[m][kind] accumulates
    -min(0, effect); all entries are therefore non-negative.
    """

    n: int
    pos: dict[int, dict[str, float]]
    neg: dict[int, dict[str, float]]

    def total(self, kind: str) -> float:
        return sum(self.pos[m][kind] + self.neg[m][kind] for m in self.pos)

    def grand_total(self) -> float:
        return sum(self.total(kind) for kind in EFFECT_KINDS)


@dataclass(frozen=True)
class ReasoningOrderStrengths:
    """Positive/negative reasoning-strength sums per order and per class."""

    n: int
    pos: dict[int, dict[str, float]]
    neg: dict[int, dict[str, float]]

    def total(self, cls: str) -> float:
        return sum(self.pos[m][cls] + self.neg[m][cls] for m in self.pos)


@dataclass(frozen=True)
class EffectRatios:
    """Share of reasoning and chaotic-memorization strength in all strength."""

    rho_r: float
    rho_c: float
    e_all: float

    def __post_init__(self):
        if not (0.0 <= self.rho_r and 0.0 <= self.rho_c):
            raise ValueError("ratios must be non-negative")
        if self.rho_r + self.rho_c > 1.0 + 1e-12:
            raise ValueError("ratios may not exceed 1 in total")


def classify_pattern(j_total: float, k_reason: float) -> ClassLabel:
    """Reasoning-pattern class from total memorization j and reasoning k.

    Boundary cases (j*k == 0): no reasoning change (k == 0) or a purely
    reasoning-born effect (j == 0) count as enhanced; both zero is
    unclassifiable.
    """
    if j_total == 0.0 and k_reason == 0.0:
        return "unclassified"
    prod = j_total * k_reason
    if prod > 0.0:
        return "enhanced"
    if prod == 0.0:
        return "enhanced"
    if abs(j_total) >= abs(k_reason):
        return "eliminated"
    return "reversed"


def decompose_effects(
    iv_full: InteractionVector,
    iv_avg: InteractionVector,
    iv_question: InteractionVector,
    salient: SalientSet,
) -> list[EffectRecord]:
    """One record per mask for a single family.

    The three vectors must come from extractions over the same annotated
    variable set (same n, canonical indexing). Classification is populated
    only for masks in the salient set.
    """
    if not (iv_full.n == iv_avg.n == iv_question.n):
        raise AlignmentError(
            f"effect vectors disagree on n: {iv_full.n}/{iv_avg.n}/{iv_question.n}"
        )
    if not (iv_full.family == iv_avg.family == iv_question.family):
        raise AlignmentError("effect vectors disagree on family")
    if salient.family != iv_full.family:
        raise AlignmentError("salient set family does not match the vectors")

    n = iv_full.n
    salient_bits = salient.bits
    records = []
    for bits in range(1 << n):
        i_full = float(iv_full.effects[bits])
        i_avg = float(iv_avg.effects[bits])
        i_question = float(iv_question.effects[bits])
        j_found = i_question
        j_chaotic = i_full - i_avg
        k_reason = i_avg - i_question
        if bits in salient_bits:
            label = classify_pattern(j_found + j_chaotic, k_reason)
        else:
            label = "unclassified"
        records.append(
            EffectRecord(
                mask=Mask(bits, n),
                family=iv_full.family,
                i_full=i_full,
                i_avg=i_avg,
                i_question=i_question,
                j_found=j_found,
                j_chaotic=j_chaotic,
                k_reason=k_reason,
                class_label=label,
            )
        )
    return records


def decompose_both_families(
    full: tuple[InteractionVector, InteractionVector],
    avg: tuple[InteractionVector, InteractionVector],
    question: tuple[InteractionVector, InteractionVector],
    salient: tuple[SalientSet, SalientSet],
) -> list[EffectRecord]:
    """Records for both families, AND first, in canonical mask order."""
    out = []
    for i, family in enumerate((FAMILY_AND, FAMILY_OR)):
        for iv in (full[i], avg[i], question[i]):
            if iv.family != family:
                raise AlignmentError("family tuples must be ordered (and, or)")
        out.extend(decompose_effects(full[i], avg[i], question[i], salient[i]))
    return out


def verify_additivity(records: Iterable[EffectRecord]) -> float:
    """Max |j_found + j_chaotic + k_reason - i_full| over the records."""
    residual = 0.0
    for r in records:
        residual = max(residual, abs(r.j_found + r.j_chaotic + r.k_reason - r.i_full))
    return residual


def _kind_values(record: EffectRecord) -> dict[str, float]:
    return {
        "foundational": record.j_found,
        "chaotic": record.j_chaotic,
        "reasoning": record.k_reason,
    }


def order_strengths(
    records: Sequence[EffectRecord], salient_only: bool = True
) -> OrderStrengths:
    """Per-order positive/negative strength sums across both families."""
    if not records:
        raise AlignmentError("order_strengths needs at least one record")
    n = records[0].mask.n
    pos: dict[int, dict[str, float]] = {
        m: {k: 0.0 for k in EFFECT_KINDS} for m in range(1, n + 1)
    }
    neg: dict[int, dict[str, float]] = {
        m: {k: 0.0 for k in EFFECT_KINDS} for m in range(1, n + 1)
    }
    for r in records:
        if salient_only and not r.salient:
            continue
        m = r.order
        if m == 0:
            continue
        for kind, value in _kind_values(r).items():
            if value >= 0:
                pos[m][kind] += value
            else:
                neg[m][kind] += -value
    return OrderStrengths(n=n, pos=pos, neg=neg)


def reasoning_order_strengths(
    records: Sequence[EffectRecord],
) -> ReasoningOrderStrengths:
    """Per-order, per-class positive/negative sums of the reasoning effect."""
    if not records:
        raise AlignmentError("reasoning_order_strengths needs at least one record")
    n = records[0].mask.n
    pos: dict[int, dict[str, float]] = {
        m: {c: 0.0 for c in REASONING_CLASSES} for m in range(1, n + 1)
    }
    neg: dict[int, dict[str, float]] = {
        m: {c: 0.0 for c in REASONING_CLASSES} for m in range(1, n + 1)
    }
    for r in records:
        if r.class_label == "unclassified" or r.order == 0:
            continue
        if r.k_reason >= 0:
            pos[r.order][r.class_label] += r.k_reason
        else:
            neg[r.order][r.class_label] += -r.k_reason
    return ReasoningOrderStrengths(n=n, pos=pos, neg=neg)


def effect_ratios(strengths: OrderStrengths) -> EffectRatios:
    """Reasoning and chaotic shares of the total strength.

    Raises UndefinedRatioError when the total strength is zero instead of
    silently reporting 0.
    """
    e_all = strengths.grand_total()
    if e_all == 0.0:
        raise UndefinedRatioError("total effect strength is zero; ratios undefined")
    return EffectRatios(
        rho_r=strengths.total("reasoning") / e_all,
        rho_c=strengths.total("chaotic") / e_all,
        e_all=e_all,
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def records_to_json(records: Sequence[EffectRecord]) -> list[dict]:
    return [
        {
            "family": r.family,
            "mask": r.mask.bits,
            "order": r.order,
            "i_full": r.i_full,
            "i_avg": r.i_avg,
            "i_question": r.i_question,
            "j_found": r.j_found,
            "j_chaotic": r.j_chaotic,
            "k_reason": r.k_reason,
            "class": r.class_label,
            "memorization_share": r.memorization_share,
        }
        for r in records
    ]


def records_from_json(docs: Sequence[dict], n: int) -> list[EffectRecord]:
    return [
        EffectRecord(
            mask=Mask(int(d["mask"]), n),
            family=d["family"],
            i_full=float(d["i_full"]),
            i_avg=float(d["i_avg"]),
            i_question=float(d["i_question"]),
            j_found=float(d["j_found"]),
            j_chaotic=float(d["j_chaotic"]),
            k_reason=float(d["k_reason"]),
            class_label=d["class"],
        )
        for d in docs
    ]


def write_records_csv(records: Sequence[EffectRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["family", "mask", "order", "I_full", "I_avg", "I_question",
             "Jf", "Jc", "K", "class"]
        )
        for r in records:
            writer.writerow(
                [r.family, r.mask.bits, r.order, repr(r.i_full), repr(r.i_avg),
                 repr(r.i_question), repr(r.j_found), repr(r.j_chaotic),
                 repr(r.k_reason), r.class_label]
            )


def write_strengths_csv(strengths: OrderStrengths, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["order", "kind", "pos", "neg"])
        for m in sorted(strengths.pos):
            for kind in EFFECT_KINDS:
                writer.writerow(
                    [m, kind, repr(strengths.pos[m][kind]), repr(strengths.neg[m][kind])]
                )


def write_reasoning_strengths_csv(strengths: ReasoningOrderStrengths, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["order", "class", "pos", "neg"])
        for m in sorted(strengths.pos):
            for cls in REASONING_CLASSES:
                writer.writerow(
                    [m, cls, repr(strengths.pos[m][cls]), repr(strengths.neg[m][cls])]
                )


def strengths_to_json(strengths: OrderStrengths) -> dict:
    return {
        "n": strengths.n,
        "pos": {str(m): dict(v) for m, v in strengths.pos.items()},
        "neg": {str(m): dict(v) for m, v in strengths.neg.items()},
    }


def reasoning_strengths_to_json(strengths: ReasoningOrderStrengths) -> dict:
    return {
        "n": strengths.n,
        "pos": {str(m): dict(v) for m, v in strengths.pos.items()},
        "neg": {str(m): dict(v) for m, v in strengths.neg.items()},
    }
