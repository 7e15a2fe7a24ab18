"""Merging e-values that are negatively upper orthant dependent.

Products, lambda-products, U-statistics and convex combinations of subset
products all remain e-values under that condition. An infinite e-value is
a legitimate certain rejection and propagates through products, except
that ``0 * inf`` is taken to be 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import integrate

from .core import DomainError, EVector, InputError, WEIGHT_SUM_TOL, as_evector, as_pvector, check_indices


@dataclass(frozen=True)
class CalibratorSpec:
    """Power calibrator ``phi(p) = kappa * p**(kappa - 1)``."""

    kappa: float

    def __post_init__(self):
        if not 0.0 < self.kappa < 1.0:
            raise DomainError(f"kappa must lie in (0, 1), got {self.kappa!r}")

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        with np.errstate(divide="ignore"):
            return self.kappa * np.power(p, self.kappa - 1.0)


def check_calibrator(phi: Callable[[float], float], grid_size: int = 257) -> float:
    """Check that ``phi`` is a calibrator: nonnegative and decreasing with integral at most 1.

    Returns the integral over [0, 1]. Raises ``DomainError`` on violation.
    """
    grid = np.linspace(0.0, 1.0, grid_size)[1:]
    vals = np.array([phi(t) for t in grid], dtype=float)
    if (vals < 0).any() or np.isnan(vals).any():
        raise DomainError("calibrator must be nonnegative")
    if (np.diff(vals) > 1e-12 * np.maximum(1.0, np.abs(vals[:-1]))).any():
        raise DomainError("calibrator must be decreasing")
    total, _ = integrate.quad(phi, 0.0, 1.0, limit=200)
    if total > 1.0 + 1e-8:
        raise DomainError(f"calibrator integrates to {total!r} > 1")
    return total


def calibrate(p, spec: CalibratorSpec | Callable = CalibratorSpec(0.5)) -> EVector:
    """Turn p-values into e-values; ``p = 0`` maps to ``+inf``."""
    p = as_pvector(p)
    if isinstance(spec, CalibratorSpec):
        return EVector(spec(p.values))
    check_calibrator(spec)
    return EVector([spec(x) for x in p.values])


def _safe_prod(values: np.ndarray) -> float:
    if values.size == 0:
        return 1.0
    if (values == 0).any():
        return 0.0
    return float(np.prod(values))


def product_e(e, subset: Iterable[int] | None = None) -> float:
    """Product of the e-values indexed by ``subset`` (1-based; all if None)."""
    e = as_evector(e)
    if subset is None:
        return _safe_prod(e.values)
    idx = check_indices(subset, e.K)
    return _safe_prod(e.values[idx])


def lambda_product(e, lambdas: Sequence[float]) -> float:
    """``prod_i (1 - lambda_i + lambda_i e_i)`` for constant bets in [0, 1]."""
    e = as_evector(e)
    lam = np.asarray(lambdas, dtype=float)
    if lam.shape != e.values.shape:
        raise InputError(f"need {e.K} lambdas, got {lam.size}")
    if (lam < 0).any() or (lam > 1).any() or np.isnan(lam).any():
        raise DomainError("lambdas must lie in [0, 1]")
    with np.errstate(invalid="ignore"):
        factors = np.where(lam == 0, 1.0, 1.0 - lam + lam * e.values)
    return _safe_prod(factors)


def elementary_symmetric(values: np.ndarray, k: int) -> float:
    """k-th elementary symmetric polynomial by the prefix recurrence."""
    acc = [1.0] + [0.0] * k
    for i, x in enumerate(values):
        for j in range(min(i + 1, k), 0, -1):
            acc[j] = acc[j] + x * acc[j - 1]
    return acc[k]


def u_statistic(e, k: int) -> float:
    """Average of ``prod_{i in A} e_i`` over all subsets of size ``k``, in O(K k)."""
    e = as_evector(e)
    if int(k) != k or not 1 <= k <= e.K:
        raise DomainError(f"order k must lie in 1..{e.K}, got {k!r}")
    k = int(k)
    vals = e.values
    if np.isinf(vals).any():
        # some k-subset holds an infinite entry and no zero
        return math.inf if e.K - int((vals == 0).sum()) >= k else 0.0
    return elementary_symmetric(vals, k) / math.comb(e.K, k)


def u_statistic_bruteforce(e, k: int) -> float:
    """Enumeration over all k-subsets; a test oracle, exponential in K."""
    vals = as_evector(e).values
    prods = [math.prod(vals[list(A)]) for A in combinations(range(vals.size), k)]
    return math.fsum(prods) / len(prods)


def convex_combo(e, terms: Sequence[tuple[Iterable[int], float]]) -> float:
    """``sum_A weight_A * prod_{i in A} e_i``; weights must sum to 1."""
    e = as_evector(e)
    if not terms:
        raise InputError("need at least one term")
    weights = [float(wt) for _, wt in terms]
    if any(w < 0 or math.isnan(w) for w in weights):
        raise DomainError("weights must be nonnegative")
    if abs(math.fsum(weights) - 1.0) > WEIGHT_SUM_TOL:
        raise DomainError(f"weights must sum to 1, got {math.fsum(weights)!r}")
    parts = [w * product_e(e, A) for (A, _), w in zip(terms, weights) if w > 0]
    return math.fsum(parts) if parts else 0.0


def average_e(e) -> float:
    """Arithmetic mean; an e-value under any dependence."""
    e = as_evector(e)
    return float(math.fsum(e.values) / e.K)


@dataclass(frozen=True)
class SubPsiSpec:
    """Moment generating function bound ``E exp(l (X - mu)) <= exp(psi(l) v)``."""

    v: float
    mu: float = 0.0
    family: str = "subGaussian"

    def __post_init__(self):
        if self.family != "subGaussian":
            raise DomainError(f"unsupported psi family {self.family!r}")
        if not self.v >= 0:
            raise DomainError("variance proxy must be nonnegative")

    lambda_domain = (-math.inf, math.inf)

    def psi(self, lam: float) -> float:
        return 0.5 * lam * lam

    def in_domain(self, lam: float) -> bool:
        lo, hi = self.lambda_domain
        return lo <= lam <= hi


def chernoff_e(x: Sequence[float], specs: Sequence[SubPsiSpec], lambdas: Sequence[float]) -> float:
    """``exp(sum l_i (x_i - mu_i) - sum psi_i(l_i) v_i)``."""
    if not len(x) == len(specs) == len(lambdas):
        raise InputError("x, specs and lambdas must have equal length")
    drift = []
    penalty = []
    for xi, spec, lam in zip(x, specs, lambdas):
        lam = float(lam)
        if not spec.in_domain(lam) or math.isnan(lam):
            raise DomainError(f"lambda {lam!r} outside the domain of psi")
        drift.append(lam * (float(xi) - spec.mu))
        penalty.append(spec.psi(lam) * spec.v)
    return math.exp(math.fsum(drift) - math.fsum(penalty))


def chernoff_e_homogeneous(x: Sequence[float], mu: float, v: float, lam: float) -> float:
    """Equal means, variance proxies and bets: ``exp(n l (xbar - mu) - n v l^2 / 2)``."""
    x = np.asarray(x, dtype=float)
    n = x.size
    return math.exp(n * lam * (x.mean() - mu) - n * v * lam * lam / 2.0)


def hoeffding_lambda(alpha: float, n: int, v: float) -> float:
    """Bet that turns the homogeneous Chernoff e-value into Hoeffding's bound."""
    return math.sqrt(2.0 * math.log(1.0 / alpha) / (n * v))
