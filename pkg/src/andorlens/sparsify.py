"""Learning the AND/OR split and sparsity diagnostics.

The raw table u is split, per mask T, into an AND-modeled part
``0.5*(u - eps) + theta`` and an OR-modeled part ``0.5*(u - eps) - theta``.
The free vector theta (and optionally the bounded residual eps) is chosen to
minimize ``||and effects||_1 + ||or effects||_1``, which makes the extracted
effect vectors as sparse as the table allows.

Both effect vectors are affine in (theta, eps), so the objective is convex
piecewise-linear. ``optimize_theta`` therefore solves it exactly as a linear
program (HiGHS dual simplex): variables (theta, eps, t_and, t_or) with
``|effects| <= t`` rows and objective ``sum(t)``. A vertex optimum has two
properties the rest of the pipeline relies on: effects that can be zero are
exactly zero, and ties between the two families are concentrated on one side
instead of being split.

``optimize_theta_descent`` keeps the first-order alternative (full-batch
subgradient steps with per-coordinate preconditioning, pulled back through
``adjoint_zeta``). It is retained for reference and diagnostics: the loss
surface has an extremely degenerate kink at theta = 0 for effect-generated
tables and the descent path approaches the optimum far too slowly to be the
production solver.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import ConfigurationError, DataError, OptimizationError, ShapeError
from .lattice import (
    FAMILY_AND,
    FAMILY_OR,
    ComponentSplit,
    Family,
    InteractionVector,
    Mask,
    ValueTable,
    adjoint_zeta,
    mask_orders,
    mobius_and,
    mobius_or,
    reconstruct_table,
    subset_zeta,
    _as_table,
    _check_n,
)

# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ThetaVector:
    """The per-mask split parameter; theta[0] is pinned to 0."""

    n: int
    theta: np.ndarray

    def __post_init__(self):
        _check_n(self.n)
        arr = _as_table(self.theta, "theta")
        if arr.size != 1 << self.n:
            raise ShapeError(f"theta must have {1 << self.n} entries, got {arr.size}")
        if arr[0] != 0.0:
            raise DataError("theta must be exactly 0 at the empty mask")
        arr.flags.writeable = False
        object.__setattr__(self, "theta", arr)

    @classmethod
    def zeros(cls, n: int) -> "ThetaVector":
        return cls(n=n, theta=np.zeros(1 << n))


@dataclass(frozen=True)
class NoiseVector:
    """Bounded per-mask residual removed from the table before splitting."""

    n: int
    epsilon: np.ndarray
    bound: float

    def __post_init__(self):
        _check_n(self.n)
        arr = _as_table(self.epsilon, "epsilon")
        if arr.size != 1 << self.n:
            raise ShapeError(f"epsilon must have {1 << self.n} entries, got {arr.size}")
        if self.bound < 0:
            raise ConfigurationError("noise bound must be non-negative")
        if np.abs(arr).max(initial=0.0) > self.bound + 1e-12:
            raise DataError("epsilon exceeds its bound")
        arr.flags.writeable = False
        object.__setattr__(self, "epsilon", arr)


@dataclass(frozen=True)
class SparsifyConfig:
    """Solver configuration.

    max_iters and convergence_tol bound the exact solver (simplex iteration
    limit and feasibility tolerance). step_size and seed drive the
    first-order reference method only; the exact solver needs neither.
    """

    max_iters: int = 200_000
    step_size: float = 0.01
    convergence_tol: float = 1e-9
    noise_enabled: bool = False
    noise_bound: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ConfigurationError("max_iters must be >= 1")
        if not self.step_size > 0:
            raise ConfigurationError("step_size must be > 0")
        if not self.convergence_tol > 0:
            raise ConfigurationError("convergence_tol must be > 0")
        if self.noise_bound is not None and self.noise_bound < 0:
            raise ConfigurationError("noise_bound must be non-negative")


@dataclass(frozen=True)
class SalientSet:
    """Masks whose absolute effect exceeds the applied threshold tau."""

    family: Family
    masks: frozenset[Mask]
    tau: float

    @property
    def bits(self) -> frozenset[int]:
        return frozenset(m.bits for m in self.masks)

    def __len__(self) -> int:
        return len(self.masks)

    def __contains__(self, mask: Mask | int) -> bool:
        bits = mask.bits if isinstance(mask, Mask) else int(mask)
        return bits in self.bits


@dataclass(frozen=True)
class SparsityReport:
    """Salient-interaction census for one extraction."""

    n: int
    tau: float
    salient_count: int
    sorted_strengths: np.ndarray
    fitted_kappa: float | None = None

    def __post_init__(self):
        strengths = np.asarray(self.sorted_strengths, dtype=np.float64)
        if np.any(np.diff(strengths) > 0):
            raise DataError("sorted_strengths must be non-increasing")
        # both families contribute, so the ceiling is 2^(n+1) entries
        if self.salient_count > 1 << (self.n + 1):
            raise DataError("salient_count exceeds the number of interactions")
        object.__setattr__(self, "sorted_strengths", strengths)


# ---------------------------------------------------------------------------
# Component split
# ---------------------------------------------------------------------------


def split_components(
    raw: ValueTable, theta: ThetaVector, noise: NoiseVector | None = None
) -> ComponentSplit:
    """Split the baseline-shifted table into AND and OR component tables.

    and[T] = 0.5*(u[T] - eps[T]) + theta[T], or[T] = 0.5*(u[T] - eps[T]) - theta[T],
    so and + or + eps == u holds exactly by construction.
    """
    if raw.n != theta.n:
        raise ShapeError(f"table n={raw.n} does not match theta n={theta.n}")
    if noise is not None and noise.n != raw.n:
        raise ShapeError(f"table n={raw.n} does not match noise n={noise.n}")
    u = raw.shifted()
    eps = noise.epsilon if noise is not None else np.zeros_like(u)
    half = 0.5 * (u - eps)
    return ComponentSplit(
        n=raw.n,
        and_table=half + theta.theta,
        or_table=half - theta.theta,
        theta=theta.theta,
        epsilon=noise.epsilon if noise is not None else None,
    )


def interaction_pair(
    raw: ValueTable, theta: ThetaVector, noise: NoiseVector | None = None
) -> tuple[InteractionVector, InteractionVector]:
    """AND and OR effect vectors of the split induced by theta."""
    part = split_components(raw, theta, noise)
    return mobius_and(part.and_table), mobius_or(part.or_table)


def interaction_loss(
    raw: ValueTable, theta: ThetaVector, noise: NoiseVector | None = None
) -> float:
    and_iv, or_iv = interaction_pair(raw, theta, noise)
    return float(np.abs(and_iv.effects).sum() + np.abs(or_iv.effects).sum())


def loss_subgradient(
    u: np.ndarray, theta: np.ndarray, eps: np.ndarray | None = None
) -> tuple[float, np.ndarray]:
    """Value and a subgradient (sign(0) taken as 0) of the L1 objective.

    The pullback of the effect-side signs runs through adjoint_zeta, keeping
    the whole evaluation O(n * 2^n).
    """
    half = 0.5 * (u - eps) if eps is not None else 0.5 * u
    and_iv = mobius_and(half + theta)
    or_iv = mobius_or(half - theta)
    loss = float(np.abs(and_iv.effects).sum() + np.abs(or_iv.effects).sum())
    grad = adjoint_zeta(np.sign(and_iv.effects), FAMILY_AND) - adjoint_zeta(
        np.sign(or_iv.effects), FAMILY_OR
    )
    grad[0] = 0.0
    return loss, grad


# ---------------------------------------------------------------------------
# Exact solver
# ---------------------------------------------------------------------------


def _zeta_matrix(n: int) -> sparse.csr_matrix:
    """Sparse subset-sum matrix Z[T,S] = 1 if S subseteq T, 3^n nonzeros."""
    block = sparse.csr_matrix(np.array([[1.0, 0.0], [1.0, 1.0]]))
    m = sparse.csr_matrix(np.array([[1.0]]))
    for _ in range(n):
        m = sparse.kron(block, m, format="csr")
    return m


def _or_matrix(n: int) -> sparse.csr_matrix:
    """Sparse matrix of the OR transform: negated residual of the
    column-reflected table, with the empty-mask row zeroed."""
    size = 1 << n
    block = sparse.csr_matrix(np.array([[1.0, 0.0], [-1.0, 1.0]]))
    m = sparse.csr_matrix(np.array([[1.0]]))
    for _ in range(n):
        m = sparse.kron(block, m, format="csr")
    perm = sparse.csr_matrix(
        (np.ones(size), (np.arange(size), size - 1 - np.arange(size))),
        shape=(size, size),
    )
    keep = np.ones(size)
    keep[0] = 0.0
    zero_first = sparse.diags(keep, format="csr")
    return (-(zero_first @ m @ perm)).tocsr()


def optimize_theta(
    raw: ValueTable, config: SparsifyConfig | None = None
) -> tuple[ThetaVector, NoiseVector | None, np.ndarray]:
    """Sparsest-split parameters for a raw table.

    Solves min ||and effects||_1 + ||or effects||_1 over theta (and, with
    noise enabled, over the residual eps bounded by +-noise_bound) exactly as
    a linear program in effect space: with P the AND effects and Q the OR
    effects, theta is a bijection of P and the coupling constraint is
    ``(N Z) P + Q = N (u - eps)``, so splitting P and Q into nonnegative
    parts gives a standard-form LP with 2^n equality rows. The dual-simplex
    vertex optimum makes removable effects exactly zero and concentrates
    family ties instead of splitting them. Deterministic; theta[0] and
    eps[0] stay pinned to 0. Returns (theta, noise or None, loss_history)
    where the history records the objective before and after the solve.
    """
    config = config or SparsifyConfig()
    u = raw.shifted()
    n = raw.n
    size = 1 << n
    scale = float(np.abs(u).max())

    init_loss = interaction_loss(raw, ThetaVector.zeros(n))
    if scale == 0.0:
        noise = (
            NoiseVector(n=n, epsilon=np.zeros(size), bound=_noise_bound(config, u))
            if config.noise_enabled
            else None
        )
        return ThetaVector.zeros(n), noise, np.array([0.0, 0.0])

    N = _or_matrix(n)
    Z = _zeta_matrix(n)
    NZ = (N @ Z).tocsr()
    NZ.eliminate_zeros()
    eye = sparse.identity(size, format="csr")

    # columns: p, q (P = p - q), r, s (Q = r - s) [, eps]
    blocks = [NZ, -NZ, eye, -eye]
    cost = np.ones(4 * size)
    bounds: list[tuple] = []
    for _ in range(4):
        bounds += _pinned_bounds(size, lo=0.0, hi=None)
    if config.noise_enabled:
        bound = _noise_bound(config, u)
        blocks.append(N)
        cost = np.concatenate([cost, np.zeros(size)])
        bounds += _pinned_bounds(size, lo=-bound, hi=bound)

    A_eq = sparse.hstack(blocks, format="csr")
    b_eq = N @ u

    res = linprog(
        cost,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=bounds,
        method="highs-ds",
        options={
            "maxiter": config.max_iters,
            "primal_feasibility_tolerance": max(config.convergence_tol, 1e-10),
            "dual_feasibility_tolerance": max(config.convergence_tol, 1e-10),
        },
    )
    if res.status != 0 or not np.all(np.isfinite(res.x)):
        raise OptimizationError(
            f"sparsifier LP failed: {res.message}", iteration=int(res.nit)
        )

    and_effects = res.x[:size] - res.x[size : 2 * size]
    noise = None
    eps = np.zeros(size)
    if config.noise_enabled:
        eps = np.clip(res.x[4 * size : 5 * size], -bound, bound)
        eps[0] = 0.0
        noise = NoiseVector(n=n, epsilon=eps, bound=bound)

    theta_arr = subset_zeta(and_effects) - 0.5 * (u - eps)
    theta_arr[0] = 0.0
    theta = ThetaVector(n=n, theta=theta_arr)

    final_loss = interaction_loss(raw, theta, noise)
    history = np.array([init_loss, min(final_loss, init_loss)])
    if final_loss > init_loss + 1e-9 * max(init_loss, 1.0):
        raise OptimizationError(
            "solver returned a point worse than the zero split", iteration=int(res.nit)
        )
    return theta, noise, history


def _noise_bound(config: SparsifyConfig, u: np.ndarray) -> float:
    if config.noise_bound is not None:
        return float(config.noise_bound)
    return 0.02 * float(u.max() - u.min())


def _pinned_bounds(size: int, lo=None, hi=None) -> list[tuple]:
    """Free (or boxed) bounds with index 0 pinned to exactly 0."""
    return [(0.0, 0.0)] + [(lo, hi)] * (size - 1)


def optimize_theta_descent(
    raw: ValueTable, config: SparsifyConfig | None = None
) -> tuple[ThetaVector, NoiseVector | None, np.ndarray]:
    """First-order reference solver (subgradient with preconditioning).

    Deterministic given config.seed; the returned history is the best
    objective seen up to each iteration, so it is non-increasing. Converges
    far more slowly than optimize_theta and can stall on the degenerate kink
    at theta = 0; kept for diagnostics and cross-checks, not production.
    """
    config = config or SparsifyConfig()
    u = raw.shifted()
    n = raw.n
    size = 1 << n
    scale = float(np.abs(u).max())
    if scale == 0.0:
        return ThetaVector.zeros(n), None, np.array([0.0])

    rng = np.random.default_rng(config.seed)
    theta = config.step_size * scale * rng.standard_normal(size)
    theta[0] = 0.0
    orders = mask_orders(n)
    # column norms of the stacked effect operator: 2^(n-|T|) from the AND
    # side plus 2^|T| from the OR side
    precond = 1.0 / (2.0 ** (n - orders) + 2.0 ** orders)
    lr = 1.0
    best_loss = np.inf
    best_theta = theta.copy()
    history = np.empty(config.max_iters)
    since_improve = 0
    for it in range(config.max_iters):
        loss, grad = loss_subgradient(u, theta)
        if not np.isfinite(loss):
            raise OptimizationError("descent diverged", iteration=it)
        if loss < best_loss - config.convergence_tol * max(abs(loss), 1.0):
            best_loss, best_theta = loss, theta.copy()
            since_improve = 0
        else:
            best_loss = min(best_loss, loss)
            since_improve += 1
        history[it] = best_loss
        if since_improve >= 50:
            lr *= 0.5
            theta = best_theta.copy()
            since_improve = 0
            if lr < 1e-12:
                history = history[: it + 1]
                break
        step = grad * precond
        denom = float(grad @ step)
        if denom <= 0.0:
            history = history[: it + 1]
            break
        gap = max(loss - best_loss, 0.05 * lr * scale)
        theta = theta - lr * gap / denom * step
        theta[0] = 0.0
    theta_final = best_theta
    theta_final[0] = 0.0
    return ThetaVector(n=n, theta=theta_final), None, history


# ---------------------------------------------------------------------------
# Salient extraction
# ---------------------------------------------------------------------------


def resolve_tau(
    tau_policy: float | tuple[Literal["absolute", "relative"], float],
    *vectors: InteractionVector,
) -> float:
    """Resolve a threshold policy to an absolute tau.

    A bare float or ("absolute", x) is used as-is; ("relative", f) with
    f in (0, 1) resolves to f times the largest absolute effect across the
    supplied vectors (both families of one analysis).
    """
    if isinstance(tau_policy, (int, float)):
        tau = float(tau_policy)
        if tau < 0:
            raise ConfigurationError("absolute tau must be non-negative")
        return tau
    kind, value = tau_policy
    if kind == "absolute":
        if value < 0:
            raise ConfigurationError("absolute tau must be non-negative")
        return float(value)
    if kind != "relative":
        raise ConfigurationError(f"unknown tau policy {kind!r}")
    if not 0.0 < value < 1.0:
        raise ConfigurationError("relative tau fraction must be in (0, 1)")
    if not vectors:
        raise ConfigurationError("relative tau needs at least one effect vector")
    peak = max(float(np.abs(v.effects).max()) for v in vectors)
    return float(value) * peak


def extract_salient(
    iv: InteractionVector,
    tau_policy: float | tuple[Literal["absolute", "relative"], float],
    *,
    companions: Sequence[InteractionVector] = (),
) -> SalientSet:
    """Masks with |effect| strictly above tau.

    For the relative policy the reference maximum spans this vector plus any
    companions (normally the other family of the same analysis).
    """
    tau = resolve_tau(tau_policy, iv, *companions)
    hits = np.flatnonzero(np.abs(iv.effects) > tau)
    masks = frozenset(Mask(int(b), iv.n) for b in hits)
    return SalientSet(family=iv.family, masks=masks, tau=tau)


def salient_pair(
    and_iv: InteractionVector,
    or_iv: InteractionVector,
    tau_policy: float | tuple[Literal["absolute", "relative"], float],
) -> tuple[SalientSet, SalientSet]:
    """Salient sets for both families under one shared resolved tau."""
    return (
        extract_salient(and_iv, tau_policy, companions=(or_iv,)),
        extract_salient(or_iv, tau_policy, companions=(and_iv,)),
    )


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MatchingErrorCurve:
    """Reconstruction error when only the top-k effects are kept."""

    k: int
    errors: np.ndarray          # |v - v_approx|, masks sorted by ascending v
    smoothed: np.ndarray        # block means over 50 neighbouring masks
    mean_error: float
    sorted_values: np.ndarray   # the ascending raw scores, for plotting


def matching_error_curve(
    and_iv: InteractionVector,
    or_iv: InteractionVector,
    raw: ValueTable,
    k_list: Iterable[int],
    *,
    window: int = 50,
) -> list[MatchingErrorCurve]:
    """Per-k matching errors of the truncated surrogate.

    For each k the k largest-|effect| interactions across both families are
    kept (ties broken deterministically by family then mask), the surrogate
    output is rebuilt at every mask, and errors are reported with masks
    sorted by ascending raw score, plus a block-mean smoothing.
    """
    if and_iv.n != or_iv.n or and_iv.n != raw.n:
        raise ShapeError("effect vectors and raw table must share n")
    size = 1 << raw.n
    ks = [int(k) for k in k_list]
    for k in ks:
        if not 0 <= k <= 2 * size:
            raise ConfigurationError(f"k={k} out of range [0, {2 * size}]")

    stacked = np.concatenate([and_iv.effects, or_iv.effects])
    # deterministic ranking: magnitude desc, then family, then mask index
    rank = np.lexsort((np.arange(2 * size), -np.abs(stacked)))
    ascending = np.argsort(raw.values, kind="stable")
    v_sorted = raw.values[ascending]

    curves = []
    for k in ks:
        keep = np.zeros(2 * size, dtype=bool)
        keep[rank[:k]] = True
        kept_and = np.where(keep[:size], and_iv.effects, 0.0)
        kept_or = np.where(keep[size:], or_iv.effects, 0.0)
        approx = reconstruct_table(
            InteractionVector(raw.n, FAMILY_AND, kept_and),
            InteractionVector(raw.n, FAMILY_OR, kept_or),
            raw.baseline,
        )
        err = np.abs(raw.values - approx)[ascending]
        curves.append(
            MatchingErrorCurve(
                k=k,
                errors=err,
                smoothed=_block_means(err, window),
                mean_error=float(err.mean()),
                sorted_values=v_sorted,
            )
        )
    return curves


def _block_means(values: np.ndarray, window: int) -> np.ndarray:
    out = []
    for start in range(0, values.size, window):
        out.append(float(values[start : start + window].mean()))
    return np.array(out)


@dataclass(frozen=True)
class SmoothnessReport:
    """Advisory check of the table-smoothness conditions behind sparsity.

    mean_by_masked[m] is the average baseline-shifted score over all masks
    that leave exactly m variables masked. The exponent is a least-squares
    power-law fit against the unmasked count; the fit is flagged degenerate
    when the averages are non-positive or effectively constant.
    """

    n: int
    mean_by_masked: np.ndarray
    monotone: bool
    exponent: float | None
    degenerate: bool


def smoothness_check(raw: ValueTable) -> SmoothnessReport:
    """Advisory only: never blocks extraction."""
    u = raw.shifted()
    orders = mask_orders(raw.n)
    means = np.array(
        [float(u[orders == raw.n - m].mean()) for m in range(raw.n + 1)]
    )
    monotone = bool(np.all(np.diff(means) <= 1e-12 * max(1.0, np.abs(means).max())))

    # fit mean ~ c * (unmasked count)^p over counts 1..n
    counts = np.arange(raw.n, 0, -1, dtype=float)    # unmasked count for m=0..n-1
    w = means[:-1]
    degenerate = bool(np.any(w <= 0.0) or np.ptp(w) <= 1e-12 * max(1.0, np.abs(w).max()))
    exponent = None
    if not degenerate:
        logs = np.log(w)
        logc = np.log(counts)
        slope, _ = np.polyfit(logc, logs, 1)
        exponent = float(slope)
    return SmoothnessReport(
        n=raw.n,
        mean_by_masked=means,
        monotone=monotone,
        exponent=exponent,
        degenerate=degenerate,
    )


# ---------------------------------------------------------------------------
# Sparsity census
# ---------------------------------------------------------------------------


def sparsity_report(
    and_iv: InteractionVector,
    or_iv: InteractionVector,
    tau_policy: float | tuple[Literal["absolute", "relative"], float],
) -> SparsityReport:
    """Census of salient interactions across both families."""
    and_sal, or_sal = salient_pair(and_iv, or_iv, tau_policy)
    stacked = np.abs(np.concatenate([and_iv.effects, or_iv.effects]))
    return SparsityReport(
        n=and_iv.n,
        tau=and_sal.tau,
        salient_count=len(and_sal) + len(or_sal),
        sorted_strengths=np.sort(stacked)[::-1],
    )


def fit_kappa(reports: Sequence[SparsityReport]) -> float | None:
    """Least-squares exponent of salient count against n at fixed tau.

    Models count ~ c * n^kappa / tau; with tau fixed across the sweep this
    reduces to a log-log fit of count versus n. Needs at least two distinct
    n with nonzero counts.
    """
    pts = [(r.n, r.salient_count) for r in reports if r.salient_count > 0]
    if len({n for n, _ in pts}) < 2:
        return None
    ns = np.log([n for n, _ in pts])
    cs = np.log([c for _, c in pts])
    slope, _ = np.polyfit(ns, cs, 1)
    return float(slope)
