"""Domain types and numeric conventions shared by the whole package.

All containers are frozen dataclasses holding read-only numpy arrays, so
they can be shared freely between threads. Index sets exposed to users are
1-based, matching the usual ``k = 1, ..., K`` notation of multiple testing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

WEIGHT_SUM_TOL = 1e-9
SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-10
STD_ERROR_TOL = 1e-12


class NegdepError(ValueError):
    """Base class for all validation errors raised by the package."""


class InputError(NegdepError):
    """Malformed input: wrong shapes, missing columns, unparsable values."""


class DomainError(NegdepError):
    """Well-formed input that violates a mathematical precondition."""


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def check_alpha(alpha: float, *, upper_inclusive: bool = False) -> float:
    alpha = float(alpha)
    ok = 0.0 < alpha <= 1.0 if upper_inclusive else 0.0 < alpha < 1.0
    if not ok:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    return alpha


@dataclass(frozen=True)
class PVector:
    values: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.values)
        if arr.ndim != 1 or arr.size == 0:
            raise InputError("a p-vector needs at least one entry")
        if np.isnan(arr).any():
            raise DomainError("p-values must not be NaN")
        if (arr < 0).any() or (arr > 1).any():
            raise DomainError("p-values must lie in [0, 1]")
        object.__setattr__(self, "values", arr)

    @property
    def K(self) -> int:
        return int(self.values.size)

    def __len__(self) -> int:
        return self.K


@dataclass(frozen=True)
class EVector:
    values: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.values)
        if arr.ndim != 1 or arr.size == 0:
            raise InputError("an e-vector needs at least one entry")
        if np.isnan(arr).any() or (arr < 0).any():
            raise DomainError("e-values must be nonnegative")
        object.__setattr__(self, "values", arr)

    @property
    def K(self) -> int:
        return int(self.values.size)

    def __len__(self) -> int:
        return self.K


@dataclass(frozen=True)
class WeightVector:
    """Prior weights on the simplex ``{w >= 0 : sum(w) = K}``."""

    weights: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.weights)
        if arr.ndim != 1 or arr.size == 0:
            raise InputError("a weight vector needs at least one entry")
        if np.isnan(arr).any() or (arr < 0).any():
            raise DomainError("weights must be nonnegative")
        if abs(math.fsum(arr) - arr.size) > WEIGHT_SUM_TOL:
            raise DomainError(
                f"weights must sum to K={arr.size}, got {math.fsum(arr)!r}"
            )
        object.__setattr__(self, "weights", arr)

    @property
    def K(self) -> int:
        return int(self.weights.size)

    @classmethod
    def uniform(cls, K: int) -> WeightVector:
        return cls(np.ones(K))


@dataclass(frozen=True)
class NullMask:
    is_null: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.is_null, dtype=bool)
        if arr.ndim != 1:
            raise InputError("null mask must be one-dimensional")
        object.__setattr__(self, "is_null", arr)

    @property
    def K(self) -> int:
        return int(self.is_null.size)

    @property
    def K0(self) -> int:
        return int(self.is_null.sum())

    @classmethod
    def all_null(cls, K: int) -> NullMask:
        return cls(np.ones(K, dtype=bool))

    @classmethod
    def first_null(cls, K: int, K0: int) -> NullMask:
        """Mask whose first ``K0`` coordinates are null."""
        if not 0 <= K0 <= K:
            raise DomainError(f"need 0 <= K0 <= K, got K0={K0}, K={K}")
        return cls(np.arange(K) < K0)


@dataclass(frozen=True)
class CorrMatrix:
    entries: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.entries)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
            raise InputError("correlation matrix must be square and nonempty")
        if not np.isfinite(arr).all():
            raise DomainError("correlation matrix must be finite")
        if np.abs(arr - arr.T).max() > SYMMETRY_TOL:
            raise DomainError("correlation matrix must be symmetric")
        if np.abs(np.diag(arr) - 1.0).max() > SYMMETRY_TOL:
            raise DomainError("correlation matrix must have unit diagonal")
        min_eig = float(np.linalg.eigvalsh(arr).min())
        if min_eig < -PSD_TOL:
            raise DomainError(
                f"correlation matrix is not positive semidefinite "
                f"(smallest eigenvalue {min_eig:.3e})"
            )
        object.__setattr__(self, "entries", arr)

    @property
    def K(self) -> int:
        return int(self.entries.shape[0])

    @property
    def all_offdiag_nonpositive(self) -> bool:
        off = self.entries[~np.eye(self.K, dtype=bool)]
        return bool((off <= 0).all())

    @classmethod
    def equicorrelated(cls, K: int, rho: float) -> CorrMatrix:
        sigma = np.full((K, K), float(rho))
        np.fill_diagonal(sigma, 1.0)
        return cls(sigma)

    @classmethod
    def identity(cls, K: int) -> CorrMatrix:
        return cls(np.eye(K))


@dataclass(frozen=True)
class RejectionSet:
    """Rejected hypotheses (1-based indices) and the step-up count."""

    rejected: frozenset
    k_star: int

    def __post_init__(self):
        rejected = frozenset(int(i) for i in self.rejected)
        object.__setattr__(self, "rejected", rejected)
        if len(rejected) != self.k_star:
            raise NegdepError("k_star must equal the number of rejections")

    def sorted(self) -> list[int]:
        return sorted(self.rejected)

    def __len__(self) -> int:
        return self.k_star


@dataclass(frozen=True)
class McEstimate:
    estimate: float
    std_error: float
    reps: int
    seed: int

    def __post_init__(self):
        if self.reps < 1:
            raise NegdepError("reps must be positive")
        if not self.std_error >= 0:
            raise NegdepError("standard error must be nonnegative")

    @classmethod
    def from_count(cls, hits: int, reps: int, seed: int) -> McEstimate:
        p = hits / reps
        return cls(p, math.sqrt(p * (1.0 - p) / reps), reps, seed)

    @classmethod
    def from_moments(cls, total: float, total_sq: float, reps: int, seed: int) -> McEstimate:
        mean = total / reps
        var = max(total_sq / reps - mean * mean, 0.0)
        if reps > 1:
            var *= reps / (reps - 1)
        return cls(mean, math.sqrt(var / reps), reps, seed)


@dataclass(frozen=True)
class GroupPartition:
    """Disjoint, nonempty groups of 1-based hypothesis indices."""

    groups: tuple = field(default_factory=tuple)

    def __post_init__(self):
        groups = tuple(tuple(int(i) for i in g) for g in self.groups)
        if not groups:
            raise InputError("need at least one group")
        seen: set[int] = set()
        for g in groups:
            if not g:
                raise DomainError("groups must be nonempty")
            if len(set(g)) != len(g) or seen.intersection(g):
                raise DomainError("groups must not overlap")
            if min(g) < 1:
                raise DomainError("group indices are 1-based")
            seen.update(g)
        object.__setattr__(self, "groups", groups)

    def __len__(self) -> int:
        return len(self.groups)

    def check_within(self, K: int) -> None:
        if max(max(g) for g in self.groups) > K:
            raise DomainError(f"group index exceeds K={K}")

    @classmethod
    def from_labels(cls, labels: Sequence) -> GroupPartition:
        """Groups from a per-hypothesis label column, ordered by first appearance."""
        order: dict = {}
        for i, lab in enumerate(labels, start=1):
            order.setdefault(lab, []).append(i)
        return cls(tuple(order.values()))

    @classmethod
    def singletons(cls, K: int) -> GroupPartition:
        return cls(tuple((i,) for i in range(1, K + 1)))


def as_pvector(p) -> PVector:
    return p if isinstance(p, PVector) else PVector(p)


def as_evector(e) -> EVector:
    return e if isinstance(e, EVector) else EVector(e)


def as_weights(w) -> WeightVector:
    return w if isinstance(w, WeightVector) else WeightVector(w)


def as_groups(groups) -> GroupPartition:
    return groups if isinstance(groups, GroupPartition) else GroupPartition(tuple(groups))


def check_indices(indices: Iterable[int], K: int) -> list[int]:
    """Validate 1-based indices and return them 0-based."""
    out = []
    for i in indices:
        i = int(i)
        if not 1 <= i <= K:
            raise DomainError(f"index {i} outside 1..{K}")
        out.append(i - 1)
    return out


def stable_order(values: np.ndarray) -> np.ndarray:
    """Permutation sorting by (value, original index)."""
    return np.argsort(values, kind="stable")


def order_statistics(p) -> np.ndarray:
    p = as_pvector(p)
    out = p.values[stable_order(p.values)]
    out.setflags(write=False)
    return out


@lru_cache(maxsize=256)
def harmonic_ell(K: int) -> float:
    """Harmonic number ``1 + 1/2 + ... + 1/K``, smallest terms first."""
    if int(K) != K or K < 1:
        raise DomainError(f"K must be a positive integer, got {K!r}")
    K = int(K)
    return float(np.sum(1.0 / np.arange(K, 0, -1, dtype=float)))
