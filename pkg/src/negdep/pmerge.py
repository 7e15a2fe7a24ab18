"""Simes-type merging of p-values and their type-1 error bounds under
weak negative dependence."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln

from .core import (
    DomainError,
    InputError,
    as_groups,
    as_pvector,
    as_weights,
    check_alpha,
    harmonic_ell,
)

# Multiplier making the Simes statistic a valid p-value under weak negative
# dependence, for every alpha in (0, 1).
GLOBAL_MULTIPLIER = 3.4
# Same, restricted to alpha <= 0.1.
SMALL_ALPHA_MULTIPLIER = 1.26
# Two-level (Simes of Simes) multiplier for alpha < SIMES_OF_SIMES_ALPHA_MAX.
SIMES_OF_SIMES_SMALL_ALPHA = 1.52
SIMES_OF_SIMES_ALPHA_MAX = 0.083

_INV_SQRT_8PI = 1.0 / math.sqrt(8.0 * math.pi)


def _clamp01(x: float) -> float:
    return min(max(float(x), 0.0), 1.0)


def _simes_sorted(q: np.ndarray) -> float:
    K = q.size
    ks = np.arange(1, K + 1, dtype=float)
    return _clamp01((float(K) * q / ks).min())


def simes(p) -> float:
    """Simes combination ``min_k (K/k) p_(k)`` of a p-vector."""
    p = as_pvector(p)
    return _simes_sorted(np.sort(p.values))


def weighted_simes(p, w) -> float:
    """Weighted Simes combination with weights on the simplex sum(w) = K.

    Zero weights follow the limit convention: ``p/0 = inf`` for ``p > 0`` and
    ``0/0 = 0``.
    """
    p = as_pvector(p)
    w = as_weights(w)
    if p.K != w.K:
        raise InputError(f"length mismatch: {p.K} p-values, {w.K} weights")
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        q = p.values / w.weights
    q = np.where(w.weights == 0, np.where(p.values == 0, 0.0, np.inf), q)
    return _simes_sorted(np.sort(q))


def simes_bound_additive(alpha: float, K: int) -> float:
    """``alpha + sum_{k>=2} C(K,k) (alpha k / K)^k``, clamped to [0, 1].

    Terms are evaluated in log space so the bound stays finite for very
    large ``K``.
    """
    alpha = check_alpha(alpha)
    K = _check_K(K)
    if K == 1:
        return alpha
    k = np.arange(2, K + 1, dtype=float)
    log_terms = (
        gammaln(K + 1.0) - gammaln(k + 1.0) - gammaln(K - k + 1.0)
        + k * np.log(alpha * k / K)
    )
    total = alpha + math.fsum(np.exp(log_terms[::-1]))
    return _clamp01(total)


def simes_bound_succinct(alpha: float) -> float:
    """Unclamped closed-form bound; ``inf`` once ``e * alpha >= 1``."""
    alpha = check_alpha(alpha)
    ea = math.e * alpha
    if ea >= 1.0:
        return math.inf
    return (
        alpha + 2.0 * alpha**2 + 4.5 * alpha**3
        + _INV_SQRT_8PI * ea**4 / (1.0 - ea)
    )


def simes_bound_tilde(alpha: float) -> float:
    """K-free bound on the Simes type-1 error, equal to 1 for alpha >= 1/e."""
    return _clamp01(simes_bound_succinct(alpha))


def simes_bound_cubic(alpha: float) -> float:
    """``alpha + 2 alpha^2 + 6 alpha^3``, valid for alpha in (0, 0.1]."""
    alpha = float(alpha)
    if not 0.0 < alpha <= 0.1:
        raise DomainError(f"the cubic bound needs alpha in (0, 0.1], got {alpha!r}")
    return alpha + 2.0 * alpha**2 + 6.0 * alpha**3


def tilde_inverse(target: float) -> float:
    """Largest alpha whose tilde bound equals ``target`` (root finding)."""
    target = check_alpha(target)
    hi = 1.0 / math.e - 1e-12
    if simes_bound_tilde(hi) <= target:
        return hi
    return brentq(lambda a: simes_bound_tilde(a) - target, 1e-300, hi, xtol=1e-15)


def correction_factor(K: int) -> float:
    return min(GLOBAL_MULTIPLIER, harmonic_ell(_check_K(K)))


def simes_corrected_p(p) -> float:
    """``min(3.4, l_K) * S_K(p)``, a valid p-value under weak negative dependence."""
    p = as_pvector(p)
    return _clamp01(correction_factor(p.K) * simes(p))


@dataclass(frozen=True)
class SimesOfSimes:
    """Two-level Simes value with the multipliers that make it a p-value.

    ``factor_total`` uses the harmonic number of the total count K and
    ``factor_groups`` that of the number of groups. Both readings of the
    two-level correction are plausible, so both are reported.
    """

    value: float
    group_values: tuple
    factor_total: float
    factor_groups: float
    small_alpha_factor: float = SIMES_OF_SIMES_SMALL_ALPHA
    small_alpha_max: float = SIMES_OF_SIMES_ALPHA_MAX
    prd_factor: float = 1.0

    def corrected(self, which: str = "total") -> float:
        factor = {"total": self.factor_total, "groups": self.factor_groups}[which]
        return _clamp01(factor * self.value)


def simes_of_simes(p, groups) -> SimesOfSimes:
    p = as_pvector(p)
    groups = as_groups(groups)
    groups.check_within(p.K)
    inner = tuple(simes(p.values[[i - 1 for i in g]]) for g in groups.groups)
    outer = simes(inner)
    return SimesOfSimes(
        value=outer,
        group_values=inner,
        factor_total=correction_factor(p.K) ** 2,
        factor_groups=correction_factor(len(groups)) ** 2,
    )


@dataclass(frozen=True)
class SimesBoundReport:
    alpha: float
    K: int
    additive_general: float
    succinct: float
    cubic: Optional[float]
    tilde_s: float
    hommel: float

    @property
    def combined(self) -> float:
        """Smallest of the K-specific, tilde and Hommel bounds."""
        return min(self.tilde_s, self.hommel, self.additive_general)

    @property
    def ratio(self) -> float:
        return self.tilde_s / self.alpha

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "K": self.K,
            "additive_general": self.additive_general,
            "succinct": self.succinct,
            "cubic": self.cubic,
            "tilde_s": self.tilde_s,
            "hommel": self.hommel,
            "combined": self.combined,
            "ratio": self.ratio,
        }


def hommel_bound(alpha: float, K: int) -> float:
    """Worst case over all dependence structures, ``min(l_K alpha, 1)``."""
    return _clamp01(harmonic_ell(_check_K(K)) * check_alpha(alpha))


def bound_report(alpha: float, K: int) -> SimesBoundReport:
    alpha = check_alpha(alpha)
    K = _check_K(K)
    return SimesBoundReport(
        alpha=alpha,
        K=K,
        additive_general=simes_bound_additive(alpha, K),
        succinct=simes_bound_succinct(alpha),
        cubic=simes_bound_cubic(alpha) if alpha <= 0.1 else None,
        tilde_s=simes_bound_tilde(alpha),
        hommel=hommel_bound(alpha, K),
    )


def _check_K(K) -> int:
    if int(K) != K or K < 1:
        raise DomainError(f"K must be a positive integer, got {K!r}")
    return int(K)
