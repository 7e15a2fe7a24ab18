"""Benjamini-Hochberg procedure, FDP accounting and FDR bounds under weak
negative dependence of the null p-values."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    InputError,
    NullMask,
    RejectionSet,
    as_groups,
    as_pvector,
    check_alpha,
    harmonic_ell,
    stable_order,
)
from .pmerge import GLOBAL_MULTIPLIER, simes

# Constant in alpha * (-log(alpha) + c); the sharper value is what the
# derivation actually yields, the rounded one is the headline figure.
SU_NEG_CONSTANT = 3.1792
SU_NEG_CONSTANT_HEADLINE = 3.18


def bh(p, alpha: float) -> RejectionSet:
    """Reject the ``k*`` smallest p-values, ``k* = max{k : K p_(k) / k <= alpha}``.

    Ties are broken by original index, so the output is deterministic.
    """
    p = as_pvector(p)
    alpha = check_alpha(alpha)
    K = p.K
    order = stable_order(p.values)
    ps = p.values[order]
    ks = np.arange(1, K + 1, dtype=float)
    hits = np.flatnonzero(float(K) * ps / ks <= alpha)
    k_star = int(hits[-1]) + 1 if hits.size else 0
    return RejectionSet(frozenset(int(i) + 1 for i in order[:k_star]), k_star)


def by(p, alpha: float) -> RejectionSet:
    """BH at level ``alpha / l_K``, valid under arbitrary dependence."""
    p = as_pvector(p)
    alpha = check_alpha(alpha)
    return bh(p, alpha / harmonic_ell(p.K))


def fdp(r: RejectionSet, mask: NullMask) -> float:
    """False discovery proportion with the convention 0/0 = 0."""
    if r.rejected and max(r.rejected) > mask.K:
        raise InputError("rejection set and null mask disagree on K")
    false = sum(1 for i in r.rejected if mask.is_null[i - 1])
    return false / max(r.k_star, 1)


@dataclass(frozen=True)
class FdrBoundReport:
    alpha: float
    K: int
    su_neg_bound: float
    su_neg_headline: float
    hommel_bound: float
    combined: float
    hommel_null_bound: Optional[float] = None

    @property
    def ratio(self) -> float:
        return self.su_neg_bound / self.alpha

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "K": self.K,
            "su_neg_bound": self.su_neg_bound,
            "su_neg_headline": self.su_neg_headline,
            "hommel_bound": self.hommel_bound,
            "combined": self.combined,
            "hommel_null_bound": self.hommel_null_bound,
            "ratio": self.ratio,
        }


def su_neg_bound(alpha: float, constant: float = SU_NEG_CONSTANT) -> float:
    alpha = check_alpha(alpha)
    return min(max(alpha * (-math.log(alpha) + constant), 0.0), 1.0)


def bh_fdr_bound_negdep(alpha: float, K: int, mask: NullMask | None = None) -> FdrBoundReport:
    """FDR bound of BH when the null p-values are weakly negatively dependent.

    With a null mask (simulation only) the BY-type bound is sharpened to
    ``l_K K0 / K * alpha``.
    """
    alpha = check_alpha(alpha)
    su = su_neg_bound(alpha)
    hommel = harmonic_ell(K) * alpha
    null_bound = None
    if mask is not None:
        if mask.K != K:
            raise InputError("null mask length differs from K")
        null_bound = hommel * mask.K0 / K
    candidates = [su, hommel, 1.0] + ([null_bound] if null_bound is not None else [])
    return FdrBoundReport(
        alpha=alpha,
        K=int(K),
        su_neg_bound=su,
        su_neg_headline=su_neg_bound(alpha, SU_NEG_CONSTANT_HEADLINE),
        hommel_bound=hommel,
        combined=min(candidates),
        hommel_null_bound=null_bound,
    )


def bh_fdr_bound_k2(alpha: float, clamp: bool = True) -> float:
    """The two-hypothesis display ``2 alpha + alpha^2 - log(alpha)`` as printed.

    Reproduced verbatim even though it does not follow from the line before
    it; ``clamp=False`` returns the raw value, which exceeds 1 for small alpha.
    """
    alpha = check_alpha(alpha)
    raw = 2.0 * alpha + alpha * alpha - math.log(alpha)
    return min(raw, 1.0) if clamp else raw


def group_na_bound(alpha: float, multiplier: float = GLOBAL_MULTIPLIER) -> float:
    """Group-level FDR guarantee of Simes+BH under negative association."""
    alpha = check_alpha(alpha)
    a = multiplier * alpha
    return min(max(a * (-math.log(a) + SU_NEG_CONSTANT_HEADLINE), 0.0), 1.0)


@dataclass(frozen=True)
class GroupRejection:
    rejected_groups: frozenset
    k_star: int
    group_pvalues: tuple
    na_bound: float
    na_bound_tight: float
    prd_bound: float

    def sorted(self) -> list[int]:
        return sorted(self.rejected_groups)


def group_simes_bh(p, groups, alpha: float) -> GroupRejection:
    """BH at level alpha on within-group Simes values, with no correction.

    Groups are reported by 1-based position in ``groups``.
    """
    p = as_pvector(p)
    groups = as_groups(groups)
    groups.check_within(p.K)
    alpha = check_alpha(alpha)
    group_p = tuple(simes(p.values[[i - 1 for i in g]]) for g in groups.groups)
    r = bh(group_p, alpha)
    return GroupRejection(
        rejected_groups=r.rejected,
        k_star=r.k_star,
        group_pvalues=group_p,
        na_bound=group_na_bound(alpha),
        na_bound_tight=group_na_bound(alpha, min(GLOBAL_MULTIPLIER, harmonic_ell(p.K))),
        prd_bound=alpha,
    )
