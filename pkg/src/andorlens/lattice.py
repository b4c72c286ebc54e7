"""Exact combinatorics on the subset lattice.

A prompt with n annotated variables induces 2^n masked versions, indexed by
bitmask: bit i set means variable i is present (unmasked). All tables in this
package are flat float64 arrays of length 2^n in numeric bitmask order, so
position k in any array always refers to the same masked sample.

Two families of signed effects live on this lattice:

* AND effects: ``effects[S] = sum_{T subset S} (-1)^(|S|-|T|) table[T]``,
  the inclusion-exclusion residual of the table. The inverse (subset sums)
  recovers the table exactly.
* OR effects: the same residual computed on the complement-reflected table,
  negated. An OR effect contributes to every masked sample that keeps at
  least one of its members.

Both transforms run in O(n * 2^n) via in-place butterflies over the bit axes.
All operations here are pure functions over immutable inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator, Literal, Sequence

import numpy as np

from .errors import ConfigurationError, DataError, ShapeError

MAX_VARS = 20  # tables are materialized: 2^20 doubles is the hard ceiling

FAMILY_AND: Literal["and"] = "and"
FAMILY_OR: Literal["or"] = "or"

Family = Literal["and", "or"]

CANONICAL_ORDER = "numeric-bitmask"


def _check_n(n: int) -> None:
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= MAX_VARS:
        raise ConfigurationError(
            f"variable count n={n!r} out of range: need 1 <= n <= {MAX_VARS}"
        )


def _infer_n(size: int) -> int:
    n = size.bit_length() - 1
    if size < 2 or (1 << n) != size:
        raise ShapeError(f"table length {size} is not a power of two >= 2")
    _check_n(n)
    return n


def _as_table(values: Sequence[float] | np.ndarray, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeError(f"{what} must be one-dimensional, got shape {arr.shape}")
    bad = np.flatnonzero(~np.isfinite(arr))
    if bad.size:
        raise DataError(f"{what} has non-finite entry at mask {int(bad[0])}")
    return arr


@dataclass(frozen=True, order=True)
class Mask:
    """A subset of the n annotated variables, encoded as a bit pattern.

    ``bits`` bit i corresponds to the i-th annotated word in reading order
    (0-based). The numeric value of ``bits`` is the canonical table index.
    """

    bits: int
    n: int = field(compare=False)

    def __post_init__(self):
        _check_n(self.n)
        if not 0 <= self.bits < (1 << self.n):
            raise ConfigurationError(
                f"mask bits {self.bits:#x} out of range for n={self.n}"
            )

    @property
    def order(self) -> int:
        """Number of participating variables, |S|."""
        return self.bits.bit_count()

    def members(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.n) if self.bits >> i & 1)

    def contains(self, other: "Mask | int") -> bool:
        bits = other.bits if isinstance(other, Mask) else other
        return bits & ~self.bits == 0

    def intersects(self, other: "Mask | int") -> bool:
        bits = other.bits if isinstance(other, Mask) else other
        return bits & self.bits != 0

    def complement(self) -> "Mask":
        return Mask(self.bits ^ ((1 << self.n) - 1), self.n)

    def __int__(self) -> int:
        return self.bits

    def __iter__(self) -> Iterator[int]:
        return iter(self.members())

    def __repr__(self) -> str:
        return f"Mask({{{','.join(map(str, self.members()))}}}, n={self.n})"


def enumerate_masks(n: int) -> list[Mask]:
    """All 2^n masks in canonical numeric order; index == numeric value."""
    _check_n(n)
    return [Mask(bits, n) for bits in range(1 << n)]


def mask_orders(n: int) -> np.ndarray:
    """Vector of |S| for every mask index 0 .. 2^n-1."""
    _check_n(n)
    orders = np.zeros(1 << n, dtype=np.int64)
    for bit in range(n):
        orders += (np.arange(1 << n) >> bit) & 1
    return orders


@dataclass(frozen=True)
class ValueTable:
    """The 2^n scalar scores of one prompt variant, plus provenance.

    ``values[T]`` is the model's confidence score on the masked sample that
    keeps exactly the variables in T. The baseline is the all-masked score.
    """

    n: int
    values: np.ndarray
    variant_id: str = ""

    def __post_init__(self):
        _check_n(self.n)
        arr = _as_table(self.values, "value table")
        if arr.size != 1 << self.n:
            raise ShapeError(
                f"value table for n={self.n} must have {1 << self.n} entries,"
                f" got {arr.size}"
            )
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def baseline(self) -> float:
        """Score of the fully masked sample, values[0]."""
        return float(self.values[0])

    def shifted(self) -> np.ndarray:
        """Baseline-shifted scores u[T] = values[T] - values[0]; u[0] == 0."""
        return self.values - self.values[0]

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "variant_id": self.variant_id,
            "order": CANONICAL_ORDER,
            "values": self.values.tolist(),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ValueTable":
        if doc.get("order", CANONICAL_ORDER) != CANONICAL_ORDER:
            raise DataError(f"unsupported table order {doc.get('order')!r}")
        return cls(n=int(doc["n"]), values=np.asarray(doc["values"], dtype=np.float64),
                   variant_id=str(doc.get("variant_id", "")))


@dataclass(frozen=True)
class InteractionVector:
    """2^n signed effects for one family (AND or OR), indexed by mask."""

    n: int
    family: Family
    effects: np.ndarray

    def __post_init__(self):
        _check_n(self.n)
        if self.family not in (FAMILY_AND, FAMILY_OR):
            raise ConfigurationError(f"unknown family {self.family!r}")
        arr = _as_table(self.effects, f"{self.family} effects")
        if arr.size != 1 << self.n:
            raise ShapeError(
                f"effects for n={self.n} must have {1 << self.n} entries, got {arr.size}"
            )
        if arr[0] != 0.0:
            raise DataError("effect at the empty mask must be exactly 0")
        arr.flags.writeable = False
        object.__setattr__(self, "effects", arr)

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "variant_id": "",
            "family": self.family,
            "order": CANONICAL_ORDER,
            "values": self.effects.tolist(),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "InteractionVector":
        if doc.get("order", CANONICAL_ORDER) != CANONICAL_ORDER:
            raise DataError(f"unsupported vector order {doc.get('order')!r}")
        return cls(n=int(doc["n"]), family=doc["family"],
                   effects=np.asarray(doc["values"], dtype=np.float64))


@dataclass(frozen=True)
class ComponentSplit:
    """A raw table split into its AND-modeled and OR-modeled components.

    For every mask T: and_table[T] + or_table[T] + epsilon[T] equals the
    baseline-shifted raw score u[T]. With noise disabled epsilon is None and
    the equality is exact by construction.
    """

    n: int
    and_table: np.ndarray
    or_table: np.ndarray
    theta: "np.ndarray"
    epsilon: np.ndarray | None = None

    def __post_init__(self):
        size = 1 << self.n
        for name in ("and_table", "or_table", "theta"):
            arr = _as_table(getattr(self, name), name)
            if arr.size != size:
                raise ShapeError(f"{name} must have {size} entries, got {arr.size}")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.epsilon is not None:
            arr = _as_table(self.epsilon, "epsilon")
            if arr.size != size:
                raise ShapeError(f"epsilon must have {size} entries, got {arr.size}")
            arr.flags.writeable = False
            object.__setattr__(self, "epsilon", arr)


# ---------------------------------------------------------------------------
# Fast transforms. All operate on flat float64 copies, O(n * 2^n).
# ---------------------------------------------------------------------------


def _cube(values: np.ndarray) -> tuple[np.ndarray, int]:
    n = _infer_n(values.size)
    return values.astype(np.float64, copy=True).reshape((2,) * n), n


def subset_mobius(values: np.ndarray) -> np.ndarray:
    """effects[S] = sum_{T subset S} (-1)^(|S|-|T|) values[T]."""
    cube, n = _cube(np.asarray(values))
    for axis in range(n):
        hi = tuple(1 if a == axis else slice(None) for a in range(n))
        lo = tuple(0 if a == axis else slice(None) for a in range(n))
        cube[hi] -= cube[lo]
    return cube.reshape(-1)


def subset_zeta(values: np.ndarray) -> np.ndarray:
    """table[T] = sum_{S subset T} values[S]; inverse of subset_mobius."""
    cube, n = _cube(np.asarray(values))
    for axis in range(n):
        hi = tuple(1 if a == axis else slice(None) for a in range(n))
        lo = tuple(0 if a == axis else slice(None) for a in range(n))
        cube[hi] += cube[lo]
    return cube.reshape(-1)


def superset_mobius(values: np.ndarray) -> np.ndarray:
    """out[T] = sum_{S superset T} (-1)^(|S|-|T|) values[S]; transpose of subset_mobius."""
    cube, n = _cube(np.asarray(values))
    for axis in range(n):
        hi = tuple(1 if a == axis else slice(None) for a in range(n))
        lo = tuple(0 if a == axis else slice(None) for a in range(n))
        cube[lo] -= cube[hi]
    return cube.reshape(-1)


def reflect(values: np.ndarray) -> np.ndarray:
    """Reindex by complement: out[T] = values[N \\ T].

    In numeric bitmask order the complement of index k is (2^n - 1) - k, so
    reflection is an array reversal.
    """
    return np.asarray(values)[::-1].copy()


# ---------------------------------------------------------------------------
# Public interaction transforms
# ---------------------------------------------------------------------------


def mobius_and(component_table: Sequence[float] | np.ndarray) -> InteractionVector:
    """AND effects of a baseline-shifted component table (entry 0 must be 0)."""
    table = _as_table(component_table, "AND component table")
    n = _infer_n(table.size)
    if table[0] != 0.0:
        raise DataError("AND component table must be 0 at the empty mask")
    return InteractionVector(n=n, family=FAMILY_AND, effects=subset_mobius(table))


def mobius_or(component_table: Sequence[float] | np.ndarray) -> InteractionVector:
    """OR effects of a baseline-shifted component table (entry 0 must be 0).

    Computed by reflecting the table through set complement, running the AND
    residual, and negating: an OR pattern over S is an AND pattern over S in
    the presence/absence-swapped encoding.
    """
    table = _as_table(component_table, "OR component table")
    n = _infer_n(table.size)
    if table[0] != 0.0:
        raise DataError("OR component table must be 0 at the empty mask")
    effects = -subset_mobius(reflect(table))
    effects[0] = 0.0
    return InteractionVector(n=n, family=FAMILY_OR, effects=effects)


def and_component_sums(and_iv: InteractionVector) -> np.ndarray:
    """Per-mask sums sum_{S subset T} effects[S]; inverts mobius_and."""
    return subset_zeta(and_iv.effects)


def or_component_sums(or_iv: InteractionVector) -> np.ndarray:
    """Per-mask sums sum_{S: S intersects T} effects[S]; inverts mobius_or."""
    total = float(or_iv.effects.sum())
    # sum over S with S ∩ T ≠ ∅ == total - sum over S ⊆ complement(T)
    return total - reflect(subset_zeta(or_iv.effects))


def reconstruct_table(
    and_iv: InteractionVector, or_iv: InteractionVector, baseline: float
) -> np.ndarray:
    """Surrogate scores at every mask from full (unthresholded) effect vectors."""
    if and_iv.n != or_iv.n:
        raise ShapeError(f"family vectors disagree on n: {and_iv.n} vs {or_iv.n}")
    return baseline + and_component_sums(and_iv) + or_component_sums(or_iv)


def zeta_reconstruct(
    and_iv: InteractionVector,
    or_iv: InteractionVector,
    baseline: float,
    mask: Mask | int,
) -> float:
    """Surrogate score at one mask: baseline + triggered AND + triggered OR.

    AND effects trigger when all their members are present (S ⊆ T); OR
    effects trigger when any member is present (S ∩ T ≠ ∅).
    """
    if and_iv.n != or_iv.n:
        raise ShapeError(f"family vectors disagree on n: {and_iv.n} vs {or_iv.n}")
    n = and_iv.n
    bits = mask.bits if isinstance(mask, Mask) else int(mask)
    if isinstance(mask, Mask) and mask.n != n:
        raise ShapeError(f"mask n={mask.n} does not match vectors n={n}")
    if not 0 <= bits < (1 << n):
        raise ShapeError(f"mask bits {bits:#x} out of range for n={n}")

    and_sum = 0.0
    sub = bits
    while True:  # iterate submasks of T, including 0 (effect there is 0)
        and_sum += and_iv.effects[sub]
        if sub == 0:
            break
        sub = (sub - 1) & bits

    comp = bits ^ ((1 << n) - 1)
    miss = 0.0
    sub = comp
    while True:  # OR effects NOT triggered are exactly those inside the complement
        miss += or_iv.effects[sub]
        if sub == 0:
            break
        sub = (sub - 1) & comp
    or_sum = float(or_iv.effects.sum()) - miss
    return float(baseline + and_sum + or_sum)


def adjoint_zeta(gradient: Sequence[float] | np.ndarray, family: Family) -> np.ndarray:
    """Transpose of the linear map table -> effects for the given family.

    Lets the sparsifier pull L1 subgradients on the effect side back to the
    table/theta side in O(n * 2^n) instead of materializing the 2^n x 2^n
    matrix.
    """
    grad = _as_table(gradient, "adjoint input")
    _infer_n(grad.size)
    if family == FAMILY_AND:
        return superset_mobius(grad)
    if family == FAMILY_OR:
        g = grad.copy()
        g[0] = 0.0  # forward map zeroes the empty-mask effect
        return reflect(-superset_mobius(g))
    raise ConfigurationError(f"unknown family {family!r}")


# ---------------------------------------------------------------------------
# JSON document helpers
# ---------------------------------------------------------------------------


def dump_json(doc: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
