"""Prevalence-controlled sampling: draw samples at prescribed class prevalences.

Samples are lists of integer positions into a labelled pool, so the pool is
never copied or modified and one document may appear in many samples.  Per
class, drawing is without replacement when the pool holds enough documents of
that class and with replacement otherwise.

All randomness flows through numpy's PCG64 generator seeded from explicit
64-bit seeds; per-sample seeds are a SHA-256 mix of (master seed, grid
position, sample position), so any sample can be regenerated independently of
the order in which the others are drawn.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .prevalence import NEGATIVE, POSITIVE, check_binary_labels

#: The 21-point prevalence grid {0.00, 0.05, ..., 1.00}.
DEFAULT_PREVALENCE_GRID: tuple[float, ...] = tuple(round(0.05 * i, 2) for i in range(21))

#: Human-readable generator identification, recorded in experiment manifests.
RNG_DESCRIPTION = f"numpy PCG64 (numpy {np.__version__}), seeds via SHA-256 mix"


def derive_seed(*parts: int | str) -> int:
    """Deterministically mix integers and strings into a 64-bit seed.

    Uses SHA-256 over a length-prefixed encoding, so the mix is stable across
    platforms, Python processes, and library versions.
    """
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, (bool,)):
            raise TypeError("booleans are ambiguous seed parts; use 0/1 or a string")
        if isinstance(part, (int, np.integer)):
            h.update(b"i")
            h.update(int(part).to_bytes(16, "little", signed=True))
        elif isinstance(part, str):
            data = part.encode("utf-8")
            h.update(b"s")
            h.update(len(data).to_bytes(4, "little"))
            h.update(data)
        else:
            raise TypeError(f"seed parts must be int or str, got {type(part).__name__}")
    return int.from_bytes(h.digest()[:8], "little")


def round_half_up(x: float) -> int:
    """Round half away from zero (for nonnegative x).  round(0.5) -> 1."""
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class SampleSpec:
    """One sample to draw: target positive prevalence, size q, and a seed."""

    target_prevalence: float
    size: int
    seed: int

    def __post_init__(self) -> None:
        if not (0.0 <= self.target_prevalence <= 1.0):
            raise ValueError(f"target prevalence {self.target_prevalence} outside [0, 1]")
        if self.size < 1:
            raise ValueError(f"sample size must be positive, got {self.size}")

    @property
    def n_positive(self) -> int:
        return round_half_up(self.target_prevalence * self.size)


@dataclass(frozen=True)
class ProtocolPlan:
    """A full sampling plan: prevalence grid x m samples of size q each."""

    grid: tuple[float, ...] = DEFAULT_PREVALENCE_GRID
    samples_per_point: int = 10
    sample_size: int = 500
    master_seed: int = 0

    def __post_init__(self) -> None:
        grid = tuple(float(g) for g in self.grid)
        if len(grid) == 0:
            raise ValueError("prevalence grid is empty")
        if any(not (0.0 <= g <= 1.0) for g in grid):
            raise ValueError(f"grid values must lie in [0, 1], got {grid}")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("grid values must be strictly increasing")
        if self.samples_per_point < 1:
            raise ValueError("samples_per_point must be positive")
        if self.sample_size < 1:
            raise ValueError("sample_size must be positive")
        object.__setattr__(self, "grid", grid)

    @property
    def total_samples(self) -> int:
        return len(self.grid) * self.samples_per_point


@dataclass(frozen=True)
class SampleIndex:
    """Positions into a labelled pool that materialize one drawn sample."""

    indices: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 1 or idx.size == 0:
            raise ValueError("a sample must be a nonempty 1-d index sequence")
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return int(self.indices.size)


def _draw(rng: np.random.Generator, candidates: np.ndarray, count: int) -> np.ndarray:
    if count == 0:
        return np.empty(0, dtype=np.int64)
    replace = candidates.size < count
    return rng.choice(candidates, size=count, replace=replace).astype(np.int64)


def generate_indices(pool_labels, spec: SampleSpec) -> SampleIndex:
    """Draw one sample at the spec's prevalence by per-class undersampling.

    Positives are drawn first, then negatives; each class is drawn without
    replacement when the pool contains at least the required count of that
    class, with replacement otherwise.  Deterministic given (pool, spec).

    Raises ``ValueError("class unavailable...")`` when a class with a
    positive required count is absent from the pool.
    """
    y = check_binary_labels(pool_labels)
    n_pos = spec.n_positive
    n_neg = spec.size - n_pos
    pos_candidates = np.flatnonzero(y == POSITIVE)
    neg_candidates = np.flatnonzero(y == NEGATIVE)
    if n_pos > 0 and pos_candidates.size == 0:
        raise ValueError("class unavailable: pool has no positive documents")
    if n_neg > 0 and neg_candidates.size == 0:
        raise ValueError("class unavailable: pool has no negative documents")
    rng = np.random.default_rng(spec.seed)
    drawn = np.concatenate([_draw(rng, pos_candidates, n_pos), _draw(rng, neg_candidates, n_neg)])
    return SampleIndex(drawn)


def protocol_samples(
    pool_labels, plan: ProtocolPlan
) -> list[tuple[float, list[SampleIndex]]]:
    """Materialize a full plan: for each grid prevalence, m samples of size q.

    Per-sample seeds are ``derive_seed(master_seed, grid_index, sample_index)``,
    so regeneration does not depend on iteration order.
    """
    y = check_binary_labels(pool_labels)
    out: list[tuple[float, list[SampleIndex]]] = []
    for grid_index, prevalence in enumerate(plan.grid):
        samples = []
        for sample_index in range(plan.samples_per_point):
            spec = SampleSpec(
                target_prevalence=prevalence,
                size=plan.sample_size,
                seed=derive_seed(plan.master_seed, grid_index, sample_index),
            )
            samples.append(generate_indices(y, spec))
        out.append((prevalence, samples))
    return out


def stratified_split(
    labels, train_fraction: float, seed: int
) -> tuple[SampleIndex, SampleIndex]:
    """Split a pool into disjoint, exhaustive train/holdout parts per class.

    Each class contributes round(train_fraction * class size) documents to the
    train part (half rounded away from zero), remainder to the holdout, so
    both parts match the pool prevalence up to rounding.

    Raises ``ValueError("degenerate stratification...")`` if a class is empty.
    """
    if not (0.0 < train_fraction < 1.0):
        raise ValueError(f"train fraction must lie in (0, 1), got {train_fraction}")
    y = check_binary_labels(labels)
    rng = np.random.default_rng(seed)
    train_parts: list[np.ndarray] = []
    holdout_parts: list[np.ndarray] = []
    for cls in (POSITIVE, NEGATIVE):
        members = np.flatnonzero(y == cls)
        if members.size == 0:
            name = "positive" if cls == POSITIVE else "negative"
            raise ValueError(f"degenerate stratification: no {name} documents")
        n_train = round_half_up(train_fraction * members.size)
        permuted = rng.permutation(members)
        train_parts.append(permuted[:n_train])
        holdout_parts.append(permuted[n_train:])
    train = np.sort(np.concatenate(train_parts))
    holdout = np.sort(np.concatenate(holdout_parts))
    if holdout.size == 0 or train.size == 0:
        raise ValueError("degenerate stratification: one side of the split is empty")
    return SampleIndex(train), SampleIndex(holdout)


def realized_prevalence(pool_labels, sample: SampleIndex) -> float:
    """Fraction of positives actually present in a drawn sample."""
    y = check_binary_labels(pool_labels)
    picked = y[sample.indices]
    return float(np.count_nonzero(picked == POSITIVE)) / picked.size
