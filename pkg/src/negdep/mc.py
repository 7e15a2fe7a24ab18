"""Monte Carlo harness: type-1 error of Simes tests, FDR of BH and means of
merged e-values, checked against the closed-form bounds.

Replications are split into fixed-size blocks; block ``b`` always draws
from stream ``(seed, stream_id, b)``. Blocks may run on any number of
threads and are aggregated in block order, so estimates do not depend on
the thread count.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels
from .core import (
    CorrMatrix,
    DomainError,
    InputError,
    McEstimate,
    NullMask,
    as_groups,
    as_weights,
    check_alpha,
    harmonic_ell,
)
from .emerge import CalibratorSpec, SubPsiSpec
from .fdr import bh_fdr_bound_negdep, su_neg_bound
from .gendep import RngSeed, SamplerConfig
from .pmerge import simes_bound_cubic, simes_bound_tilde, tilde_inverse

BLOCK_SIZE = 10_000
DEFAULT_MARGIN = 3.0
PROCEDURES = ("simes", "weighted_simes", "simes_of_simes", "bh", "by",
              "group_simes_bh", "evalue_pipeline")


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("NEGDEP_THREADS", "1")))
    except ValueError:
        return 1


def _as_seed(seed) -> RngSeed:
    return seed if isinstance(seed, RngSeed) else RngSeed(int(seed))


def run_blocks(reps: int, seed, work: Callable[[np.random.Generator, int], object],
               threads: int | None = None) -> list:
    """Run ``work(generator, size)`` over fixed blocks; results in block order."""
    if reps < 1:
        raise DomainError("reps must be positive")
    seed = _as_seed(seed)
    sizes = [min(BLOCK_SIZE, reps - start) for start in range(0, reps, BLOCK_SIZE)]
    threads = default_threads() if threads is None else max(1, int(threads))

    def job(b):
        return work(seed.generator(block=b), sizes[b])

    if threads == 1 or len(sizes) == 1:
        return [job(b) for b in range(len(sizes))]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(job, range(len(sizes))))


def _mean_estimate(partials, reps: int, seed: int) -> McEstimate:
    total = math.fsum(p[0] for p in partials)
    total_sq = math.fsum(p[1] for p in partials)
    return McEstimate.from_moments(total, total_sq, reps, seed)


# --------------------------------------------------------------------------
# Experiment description and verification

@dataclass(frozen=True)
class ExperimentSpec:
    sampler: SamplerConfig
    procedure: str
    alpha: float = 0.05
    reps: int = 10_000
    seed: RngSeed = RngSeed(0)
    null_mask: Optional[NullMask] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.procedure not in PROCEDURES:
            raise InputError(f"unknown procedure {self.procedure!r}")
        check_alpha(self.alpha)
        if self.reps < 100:
            raise DomainError("an experiment needs at least 100 replications")
        if not isinstance(self.seed, RngSeed):
            object.__setattr__(self, "seed", RngSeed(int(self.seed)))
        if self.null_mask is not None and self.null_mask.K != self.sampler.K:
            raise InputError("null mask length differs from the sampler's K")

    @property
    def mask(self) -> np.ndarray:
        if self.null_mask is not None:
            return self.null_mask.is_null
        return self.sampler.null_mask()


@dataclass(frozen=True)
class VerificationResult:
    """Outcome of one Monte Carlo check.

    One-sided checks pass iff ``estimate <= bound + margin * SE``. When
    ``lower`` is set the check is two-sided and also needs
    ``estimate >= lower - margin * SE``.
    """

    estimate: McEstimate
    bound: float
    bound_name: str
    margin_sigmas: float
    passed: bool
    lower: Optional[float] = None
    name: str = ""

    @property
    def sigmas_over(self) -> float:
        """Excess of the estimate over the bound in standard errors."""
        gap = self.estimate.estimate - self.bound
        se = self.estimate.std_error
        if se > 0:
            return gap / se
        return 0.0 if gap == 0 else math.copysign(math.inf, gap)

    def as_dict(self) -> dict:
        return {
            "check": self.name,
            "estimate": self.estimate.estimate,
            "std_error": self.estimate.std_error,
            "reps": self.estimate.reps,
            "seed": self.estimate.seed,
            "bound": self.bound,
            "lower": self.lower,
            "bound_name": self.bound_name,
            "margin_sigmas": self.margin_sigmas,
            "sigmas_over": self.sigmas_over,
            "pass": self.passed,
        }


def verify(est: McEstimate, bound: float, margin_sigmas: float = DEFAULT_MARGIN,
           bound_name: str = "", name: str = "") -> VerificationResult:
    if not math.isfinite(est.std_error):
        raise DomainError("standard error must be finite")
    ok = est.estimate <= bound + margin_sigmas * est.std_error
    return VerificationResult(est, float(bound), bound_name, margin_sigmas, bool(ok), None, name)


def verify_close(est: McEstimate, target: float, margin_sigmas: float = DEFAULT_MARGIN,
                 bound_name: str = "", name: str = "") -> VerificationResult:
    """Two-sided check ``|estimate - target| <= margin * SE``."""
    slack = margin_sigmas * est.std_error
    ok = target - slack <= est.estimate <= target + slack
    return VerificationResult(est, float(target), bound_name, margin_sigmas, bool(ok),
                              float(target), name)


# --------------------------------------------------------------------------
# Statistics of one batch

def _group_matrix(P: np.ndarray, groups) -> np.ndarray:
    return np.column_stack([kernels.simes_rows(P[:, [i - 1 for i in g]]) for g in groups.groups])


def _weighted_q(P: np.ndarray, w: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        q = P / w
    return np.where(w == 0, np.where(P == 0, 0.0, np.inf), q)


def _statistic_rows(spec: ExperimentSpec, P: np.ndarray) -> np.ndarray:
    proc = spec.procedure
    if proc == "simes":
        return kernels.simes_rows(P)
    if proc == "weighted_simes":
        w = as_weights(spec.params["weights"]).weights
        return kernels.simes_rows(_weighted_q(P, w))
    if proc == "simes_of_simes":
        groups = as_groups(spec.params["groups"])
        return kernels.simes_rows(_group_matrix(P, groups))
    raise InputError(f"procedure {proc!r} is not a global-null test")


def estimate_type1(spec: ExperimentSpec, threads: int | None = None) -> McEstimate:
    """Fraction of replications in which the global-null test rejects."""
    if not spec.mask.all():
        raise DomainError("type-1 error needs an all-null sampler")
    prepared = spec.sampler.prepare()

    def work(gen, size):
        P = spec.sampler.draw(size, gen, prepared)
        return int((_statistic_rows(spec, P) <= spec.alpha).sum())

    hits = sum(run_blocks(spec.reps, spec.seed, work, threads))
    return McEstimate.from_count(hits, spec.reps, spec.seed.seed)


def estimate_simes_type1(spec: ExperimentSpec, threads: int | None = None) -> McEstimate:
    if spec.procedure != "simes":
        raise InputError("estimate_simes_type1 needs procedure 'simes'")
    return estimate_type1(spec, threads)


@dataclass(frozen=True)
class BhRun:
    """FDR estimate plus the all-null pathwise check FDP == 1{Simes <= alpha}."""

    estimate: McEstimate
    identity_checked: int
    identity_mismatches: int


def run_bh_fdr(spec: ExperimentSpec, threads: int | None = None) -> BhRun:
    proc = spec.procedure
    if proc not in ("bh", "by", "group_simes_bh"):
        raise InputError(f"procedure {proc!r} is not an FDR procedure")
    mask = spec.mask
    K = spec.sampler.K
    level = spec.alpha / harmonic_ell(K) if proc == "by" else spec.alpha
    groups = as_groups(spec.params["groups"]) if proc == "group_simes_bh" else None
    if groups is not None:
        groups.check_within(K)
        mask = np.array([all(mask[i - 1] for i in g) for g in groups.groups])
    all_null = bool(mask.all())
    prepared = spec.sampler.prepare()

    def work(gen, size):
        P = spec.sampler.draw(size, gen, prepared)
        if groups is not None:
            P = _group_matrix(P, groups)
        kstar, false = kernels.bh_rows(P, mask, level)
        fdp = false / np.maximum(kstar, 1)
        mismatches = 0
        if all_null:
            mismatches = int(((fdp == 1.0) != (kernels.simes_rows(P) <= level)).sum()
                             + ((fdp != 0.0) & (fdp != 1.0)).sum())
        return math.fsum(fdp), math.fsum(fdp * fdp), mismatches

    parts = run_blocks(spec.reps, spec.seed, work, threads)
    est = _mean_estimate(parts, spec.reps, spec.seed.seed)
    return BhRun(est, spec.reps if all_null else 0, sum(p[2] for p in parts))


def estimate_bh_fdr(spec: ExperimentSpec, threads: int | None = None) -> McEstimate:
    """Mean false discovery proportion with the standard error of the mean."""
    return run_bh_fdr(spec, threads).estimate


# --------------------------------------------------------------------------
# E-values

def _merge_rows(E: np.ndarray, params: dict) -> np.ndarray:
    method = params.get("merge", "product")
    if method == "product":
        return _safe_prod_rows(E)
    if method == "lambda":
        lam = np.broadcast_to(np.asarray(params["lambdas"], dtype=float), (E.shape[1],))
        return _safe_prod_rows(np.where(lam == 0, 1.0, 1.0 - lam + lam * E))
    if method == "ustat":
        return kernels.esym_rows(E, int(params["k"]))
    if method == "average":
        return E.mean(axis=1)
    if method == "convex":
        out = np.zeros(E.shape[0])
        for subset, weight in params["terms"]:
            idx = [i - 1 for i in subset]
            out += weight * _safe_prod_rows(E[:, idx])
        return out
    raise InputError(f"unknown merge method {method!r}")


def _safe_prod_rows(E: np.ndarray) -> np.ndarray:
    if E.shape[1] == 0:
        return np.ones(E.shape[0])
    with np.errstate(invalid="ignore"):
        out = np.prod(E, axis=1)
    return np.where((E == 0).any(axis=1), 0.0, out)


def _chernoff_rows(X: np.ndarray, params: dict) -> np.ndarray:
    spec = params.get("psi", SubPsiSpec(v=params.get("v", 1.0), mu=params.get("mu", 0.0)))
    lam = np.broadcast_to(np.asarray(params["lambdas"], dtype=float), (X.shape[1],))
    expo = (lam * (X - spec.mu)).sum(axis=1) - spec.v * (0.5 * lam * lam).sum()
    return np.exp(expo)


def evalue_rows(spec: ExperimentSpec, gen, size: int, prepared: dict) -> np.ndarray:
    params = spec.params
    if params.get("source", "calibrate") == "chernoff":
        return _chernoff_rows(spec.sampler.draw_latent(size, gen, prepared), params)
    P = spec.sampler.draw(size, gen, prepared)
    E = CalibratorSpec(params.get("kappa", 0.5))(P)
    return _merge_rows(E, params)


def estimate_evalue_mean(spec: ExperimentSpec, threads: int | None = None) -> McEstimate:
    """Null mean of a merged e-value (should be at most 1)."""
    if spec.procedure != "evalue_pipeline":
        raise InputError("estimate_evalue_mean needs procedure 'evalue_pipeline'")
    prepared = spec.sampler.prepare()

    def work(gen, size):
        vals = evalue_rows(spec, gen, size, prepared)
        return math.fsum(vals), math.fsum(vals * vals)

    return _mean_estimate(run_blocks(spec.reps, spec.seed, work, threads),
                          spec.reps, spec.seed.seed)


def tournament_evalues(K: int, games: int, epsilon: float, n: int, gen,
                       draw_prob: float = 0.0) -> np.ndarray:
    """Player e-values ``E_i = prod_j prod_m E_ij^(m)`` for ``n`` null tournaments.

    Each game pays ``1 + eps`` to the bet on i if i wins, ``1 - eps`` if it
    loses and 1 on a draw; the bet on j is the mirror image.
    """
    I, J = np.triu_indices(K, 1)
    win = (1.0 - draw_prob) / 2.0
    counts = gen.multinomial(games, [win, win, draw_prob], size=(n, I.size))
    up, down = 1.0 + epsilon, 1.0 - epsilon
    e_ij = np.power(up, counts[:, :, 0]) * np.power(down, counts[:, :, 1])
    e_ji = np.power(up, counts[:, :, 1]) * np.power(down, counts[:, :, 0])
    E = np.ones((n, K))
    for p, (i, j) in enumerate(zip(I, J)):
        E[:, i] *= e_ij[:, p]
        E[:, j] *= e_ji[:, p]
    return E


def tournament_pipeline(K: int, games: int, epsilon: float, reps: int, seed,
                        draw_prob: float = 0.0, threads: int | None = None) -> McEstimate:
    """Null mean of the order-2 U-statistic of the player e-values."""
    if not 0.0 <= epsilon <= 1.0:
        raise DomainError(f"epsilon must lie in [0, 1], got {epsilon!r}")
    if not 0.0 <= draw_prob <= 1.0:
        raise DomainError("draw probability must lie in [0, 1]")
    if K < 2 or games < 0:
        raise DomainError("need K >= 2 players and a nonnegative number of games")
    seed = _as_seed(seed)

    def work(gen, size):
        u = kernels.esym_rows(tournament_evalues(K, games, epsilon, size, gen, draw_prob), 2)
        return math.fsum(u), math.fsum(u * u)

    return _mean_estimate(run_blocks(reps, seed, work, threads), reps, seed.seed)


# --------------------------------------------------------------------------
# Bivariate Gaussian scan

def scan_bivariate_gaussian(alphas: Sequence[float], rhos: Sequence[float], reps: int,
                            seed, threads: int | None = None,
                            allow_positive: bool = False) -> list[list[McEstimate]]:
    """Type-1 error of the two-dimensional Simes test, indexed ``[alpha][rho]``.

    All alphas for one rho share the same draws; rho ``j`` uses stream ``j``.
    """
    if not alphas or not rhos:
        raise DomainError("alpha and rho grids must be nonempty")
    alphas = [check_alpha(a) for a in alphas]
    base = _as_seed(seed)
    table = [[None] * len(rhos) for _ in alphas]
    for j, rho in enumerate(rhos):
        if not -1.0 <= rho <= 1.0 or (rho > 0 and not allow_positive):
            raise DomainError(f"rho must lie in [-1, 0], got {rho!r}")
        sampler = SamplerConfig("neg_gaussian", 2, {
            "sigma": CorrMatrix.equicorrelated(2, rho), "allow_positive": allow_positive})
        prepared = sampler.prepare()

        def work(gen, size):
            s = kernels.simes_rows(sampler.draw(size, gen, prepared))
            return [int((s <= a).sum()) for a in alphas]

        parts = run_blocks(reps, RngSeed(base.seed, j), work, threads)
        for i in range(len(alphas)):
            hits = sum(p[i] for p in parts)
            table[i][j] = McEstimate.from_count(hits, reps, base.seed)
    return table


# --------------------------------------------------------------------------
# Closed-form tables

TABLE1_ALPHAS = (0.0098, 0.01, 0.0454, 0.05, 0.0830, 0.1)
TABLE2_ALPHAS = (0.01, 0.05, 0.1)


def reproduce_table1() -> list[dict]:
    """One dict per alpha column of the Simes bound table.

    ``ratio`` divides the 4-decimal ``tilde_s`` by alpha, so the printed
    table is self-consistent; ``ratio_exact`` uses the unrounded value.
    """
    rows = []
    for a in TABLE1_ALPHAS:
        t = simes_bound_tilde(a)
        rows.append({
            "alpha": a,
            "tilde_s": t,
            "cubic": simes_bound_cubic(a),
            "ratio": round(t, 4) / a,
            "ratio_exact": t / a,
        })
    return rows


def tilde_preimages(targets=(0.01, 0.05, 0.1)) -> dict:
    """Exact alpha with tilde bound equal to each target."""
    return {t: tilde_inverse(t) for t in targets}


def reproduce_table2() -> list[dict]:
    rows = []
    for a in TABLE2_ALPHAS:
        b = su_neg_bound(a)
        rows.append({"alpha": a, "fdr_bound": b, "ratio": b / a})
    return rows


def format_table1(rows=None) -> str:
    rows = reproduce_table1() if rows is None else rows
    lines = ["alpha," + ",".join(f"{r['alpha']:.4f}" for r in rows)]
    lines.append("tilde_s," + ",".join(f"{r['tilde_s']:.4f}" for r in rows))
    lines.append("cubic," + ",".join(f"{r['cubic']:.4f}" for r in rows))
    lines.append("tilde_s/alpha," + ",".join(f"{r['ratio']:.3f}" for r in rows))
    return "\n".join(lines) + "\n"


def format_table2(rows=None) -> str:
    rows = reproduce_table2() if rows is None else rows
    lines = ["alpha," + ",".join(f"{r['alpha']:.2f}" for r in rows)]
    lines.append("fdr_bound," + ",".join(f"{r['fdr_bound']:.6f}" for r in rows))
    lines.append("fdr_bound/alpha," + ",".join(f"{r['ratio']:.3f}" for r in rows))
    return "\n".join(lines) + "\n"


def bound_for_negdep_simes(alpha: float, K: int) -> float:
    """Tightest available type-1 bound: tilde bound vs. ``l_K alpha``."""
    return min(simes_bound_tilde(alpha), harmonic_ell(K) * alpha, 1.0)


def bound_for_negdep_bh(alpha: float, K: int) -> float:
    return bh_fdr_bound_negdep(alpha, K).combined
