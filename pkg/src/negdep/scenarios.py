"""Named verification scenarios, each runnable from ``negdep simulate``.

A scenario takes ``(reps, seed, threads)`` and returns a list of
:class:`~negdep.mc.VerificationResult`. ``reps=None`` uses the scenario's
default. Streams are derived from the seed and a per-check stream id, so
adding checks to one scenario never changes another scenario's numbers.
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .core import CorrMatrix, McEstimate, NullMask
from .emerge import SubPsiSpec, hoeffding_lambda
from .fdr import bh_fdr_bound_negdep, group_na_bound
from .gendep import (
    MIN_DIAGNOSTIC_SAMPLES,
    RngSeed,
    SamplerConfig,
    random_nonpositive_corr,
    wnd_diagnostic,
)
from .mc import (
    DEFAULT_MARGIN,
    ExperimentSpec,
    VerificationResult,
    bound_for_negdep_simes,
    estimate_evalue_mean,
    estimate_type1,
    run_bh_fdr,
    scan_bivariate_gaussian,
    tournament_pipeline,
    verify,
    verify_close,
)
from .pmerge import (
    SIMES_OF_SIMES_SMALL_ALPHA,
    correction_factor,
    simes_bound_additive,
)

ALPHAS = (0.01, 0.05, 0.1)
SCENARIOS: dict[str, Callable] = {}
DESCRIPTIONS: dict[str, str] = {}


def scenario(name: str, description: str):
    def register(fn):
        SCENARIOS[name] = fn
        DESCRIPTIONS[name] = description
        return fn
    return register


def _seed(seed: int, stream: int) -> RngSeed:
    return RngSeed(seed, stream)


def _equicorr_edge(K: int) -> CorrMatrix:
    return CorrMatrix.equicorrelated(K, -1.0 / (K - 1) + 1e-6)


# --------------------------------------------------------------------------
# Simes type-1 error

def _independent_simes(Ks, reps, seed, threads):
    out = []
    for K in Ks:
        for j, a in enumerate(ALPHAS):
            spec = ExperimentSpec(SamplerConfig("independent", K), "simes", a,
                                  reps or 100_000, _seed(seed, 1000 * K + j))
            out.append(verify_close(estimate_type1(spec, threads), a,
                                    bound_name="alpha (exact under independence)",
                                    name=f"independent K={K} alpha={a}"))
    return out


for _K in (2, 10, 100):
    scenario(f"independent-simes-k{_K}",
             f"Simes type-1 error equals alpha for {_K} independent uniforms")(
        lambda reps, seed, threads, _K=_K: _independent_simes((_K,), reps, seed, threads))


@scenario("independent-simes", "Simes exactness under independence, K in {2, 10, 100}")
def independent_simes(reps, seed, threads):
    return _independent_simes((2, 10, 100), reps, seed, threads)


@scenario("counter-monotonic-simes-k2", "Simes type-1 error equals alpha for (U, 1-U)")
def counter_monotonic(reps, seed, threads):
    out = []
    for j, a in enumerate(ALPHAS):
        spec = ExperimentSpec(SamplerConfig("counter_monotonic_pairs", 2), "simes", a,
                              reps or 100_000, _seed(seed, 20 + j))
        out.append(verify_close(estimate_type1(spec, threads), a,
                                bound_name="alpha (closed form)",
                                name=f"counter-monotonic alpha={a}"))
    return out


@scenario("comonotonic-simes", "Simes type-1 error equals alpha for identical p-values")
def comonotonic(reps, seed, threads):
    out = []
    for K in (2, 10):
        for j, a in enumerate(ALPHAS):
            spec = ExperimentSpec(SamplerConfig("comonotonic", K), "simes", a,
                                  reps or 100_000, _seed(seed, 40 + 10 * K + j))
            out.append(verify_close(estimate_type1(spec, threads), a,
                                    bound_name="alpha (exact when comonotonic)",
                                    name=f"comonotonic K={K} alpha={a}"))
    return out


SCAN_RHOS = tuple(round(-0.1 * i, 1) for i in range(9, 0, -1))
SCAN_ALPHA = 0.05
SCAN_BAND = (0.0498, 0.0525)


@scenario("bivariate-gaussian-scan",
          "Two-dimensional Simes under negative Gaussian correlation, rho in -0.9..-0.1")
def bivariate_scan(reps, seed, threads):
    reps = reps or 1_000_000
    table = scan_bivariate_gaussian([SCAN_ALPHA], list(SCAN_RHOS), reps,
                                    _seed(seed, 100), threads)
    bound = simes_bound_additive(SCAN_ALPHA, 2)
    out = [verify(est, bound, bound_name="alpha + alpha^2",
                  name=f"bivariate rho={rho} alpha={SCAN_ALPHA}")
           for rho, est in zip(SCAN_RHOS, table[0])]
    best = max(table[0], key=lambda e: e.estimate)
    lo, hi = SCAN_BAND
    ok = lo <= best.estimate <= hi
    out.append(VerificationResult(best, hi, "max over rho in [0.0498, 0.0525]",
                                  DEFAULT_MARGIN, ok, lo, "bivariate max over rho"))
    return out


def _neg_gaussian_corpus(seed: int):
    """(label, sigma) pairs: edge-of-PSD equicorrelation and random nonpositive."""
    corpus = []
    for K in (5, 50):
        corpus.append((f"equicorr K={K}", _equicorr_edge(K)))
        corpus.append((f"random K={K}", random_nonpositive_corr(K, _seed(seed, 900 + K))))
    return corpus


@scenario("neg-gaussian-tilde",
          "Simes type-1 error under negative Gaussian dependence stays below the tilde bound")
def neg_gaussian_tilde(reps, seed, threads):
    out = []
    for c, (label, sigma) in enumerate(_neg_gaussian_corpus(seed)):
        sampler = SamplerConfig("neg_gaussian", sigma.K, {"sigma": sigma})
        for j, a in enumerate(ALPHAS):
            spec = ExperimentSpec(sampler, "simes", a, reps or 100_000,
                                  _seed(seed, 200 + 10 * c + j))
            est = estimate_type1(spec, threads)
            out.append(verify(est, bound_for_negdep_simes(a, sigma.K),
                              bound_name="min(tilde_s, l_K alpha)",
                              name=f"neg-gaussian {label} alpha={a}"))
    return out


@scenario("weighted-simes-neg-gaussian",
          "Weighted Simes under negative Gaussian dependence stays below the tilde bound")
def weighted_simes_neg(reps, seed, threads):
    out = []
    K = 10
    w = np.linspace(0.2, 1.8, K)
    w = w * K / w.sum()
    sampler = SamplerConfig("neg_gaussian", K, {"sigma": _equicorr_edge(K)})
    for j, a in enumerate(ALPHAS):
        spec = ExperimentSpec(sampler, "weighted_simes", a, reps or 100_000,
                              _seed(seed, 300 + j), params={"weights": w})
        out.append(verify(estimate_type1(spec, threads), bound_for_negdep_simes(a, K),
                          bound_name="min(tilde_s, l_K alpha)",
                          name=f"weighted simes K={K} alpha={a}"))
    return out


@scenario("simes-of-simes", "Simes of group Simes values under negative association")
def simes_of_simes_scenario(reps, seed, threads):
    out = []
    K = 12
    groups = ((1, 2, 3), (4, 5, 6, 7), (8, 9), (10, 11, 12))
    sampler = SamplerConfig("neg_gaussian", K, {"sigma": _equicorr_edge(K)})
    for j, a in enumerate((0.01, 0.05, 0.08)):
        spec = ExperimentSpec(sampler, "simes_of_simes", a, reps or 100_000,
                              _seed(seed, 350 + j), params={"groups": groups})
        est = estimate_type1(spec, threads)
        out.append(verify(est, SIMES_OF_SIMES_SMALL_ALPHA * a, bound_name="1.52 alpha",
                          name=f"simes-of-simes alpha={a}"))
        out.append(verify(est, min(correction_factor(K) ** 2 * a, 1.0),
                          bound_name="min(3.4, l_K)^2 alpha",
                          name=f"simes-of-simes squared factor alpha={a}"))
    return out


# --------------------------------------------------------------------------
# BH

def _bh_check(spec, bound, bound_name, name, threads, two_sided=False):
    run = run_bh_fdr(spec, threads)
    if two_sided:
        res = [verify_close(run.estimate, bound, bound_name=bound_name, name=name)]
    else:
        res = [verify(run.estimate, bound, bound_name=bound_name, name=name)]
    if run.identity_checked:
        res.append(VerificationResult(
            McEstimate(float(run.identity_mismatches), 0.0, run.identity_checked, spec.seed.seed),
            0.0, "FDP == 1{simes <= alpha} on every draw", 0.0,
            run.identity_mismatches == 0, None, name + " pathwise identity"))
    return res


@scenario("bh-independent", "BH FDR equals K0/K alpha under independence (K=50, K0=25)")
def bh_independent(reps, seed, threads):
    out = []
    K, K0 = 50, 25
    shift = [0.0] * K0 + [3.0] * (K - K0)
    sampler = SamplerConfig("independent", K, {"shift": shift})
    for j, a in enumerate((0.05, 0.1)):
        spec = ExperimentSpec(sampler, "bh", a, reps or 10_000, _seed(seed, 400 + j))
        out += _bh_check(spec, K0 / K * a, "K0/K alpha", f"bh independent alpha={a}",
                         threads, two_sided=True)
    return out


@scenario("bh-all-null-independent", "All-null BH FDR equals alpha for K in {2, 10, 100}")
def bh_all_null(reps, seed, threads):
    out = []
    for K in (2, 10, 100):
        for j, a in enumerate(ALPHAS):
            spec = ExperimentSpec(SamplerConfig("independent", K), "bh", a,
                                  reps or 100_000, _seed(seed, 450 + 10 * K + j))
            out += _bh_check(spec, a, "alpha", f"bh all-null K={K} alpha={a}",
                             threads, two_sided=True)
    return out


def _bh_negdep_corpus(seed):
    corpus = []
    K = 50
    shift = [0.0] * 40 + [2.5] * 10
    corpus.append(("equicorr K=50 K0=40", SamplerConfig(
        "neg_gaussian", K, {"sigma": _equicorr_edge(K), "shift": shift})))
    corpus.append(("equicorr K=50 all-null", SamplerConfig(
        "neg_gaussian", K, {"sigma": _equicorr_edge(K)})))
    corpus.append(("random K=20 all-null", SamplerConfig(
        "neg_gaussian", 20, {"sigma": random_nonpositive_corr(20, _seed(seed, 920))})))
    corpus.append(("counter-monotonic pairs K=10", SamplerConfig("counter_monotonic_pairs", 10)))
    corpus.append(("cyclical K=20", SamplerConfig("cyclical", 20)))
    corpus.append(("permutation K=10", SamplerConfig("permutation", 10)))
    return corpus


@scenario("bh-neg-gaussian",
          "BH FDR under negatively dependent nulls stays below min(alpha(-log alpha + 3.1792), l_K alpha)")
def bh_negdep(reps, seed, threads):
    out = []
    for c, (label, sampler) in enumerate(_bh_negdep_corpus(seed)):
        for j, a in enumerate(ALPHAS):
            spec = ExperimentSpec(sampler, "bh", a, reps or 10_000, _seed(seed, 500 + 10 * c + j))
            bound = bh_fdr_bound_negdep(a, sampler.K).combined
            out += _bh_check(spec, bound, "min(alpha(-log alpha + 3.1792), l_K alpha, 1)",
                             f"bh {label} alpha={a}", threads)
    return out


@scenario("group-simes-bh", "Simes+BH group-level FDR under negative association")
def group_simes_bh_scenario(reps, seed, threads):
    out = []
    K = 20
    groups = tuple(tuple(range(5 * g + 1, 5 * g + 6)) for g in range(4))
    shift = [0.0] * 15 + [3.0] * 5
    sampler = SamplerConfig("neg_gaussian", K, {"sigma": _equicorr_edge(K), "shift": shift})
    for j, a in enumerate((0.05, 0.1)):
        spec = ExperimentSpec(sampler, "group_simes_bh", a, reps or 10_000,
                              _seed(seed, 600 + j), params={"groups": groups})
        out += _bh_check(spec, group_na_bound(a), "3.4 alpha(-log(3.4 alpha) + 3.18)",
                         f"group simes+bh alpha={a}", threads)
    return out


# --------------------------------------------------------------------------
# E-values

def _evalue_specs(seed, reps):
    K = 10
    sigma = _equicorr_edge(K)
    neg = SamplerConfig("neg_gaussian", K, {"sigma": sigma})
    bag = np.linspace(0.0, 1.0, 30)
    n_draw = 10
    v_bag = 0.25
    specs = [
        ("average of calibrated independent p (kappa=0.5)", "equal",
         SamplerConfig("independent", K), {"kappa": 0.5, "merge": "average"}),
        ("product of calibrated cyclical p", "upper",
         SamplerConfig("cyclical", 5), {"kappa": 0.75, "merge": "product"}),
        ("product of calibrated negative-Gaussian p", "upper",
         SamplerConfig("neg_gaussian", 5, {"sigma": _equicorr_edge(5)}),
         {"kappa": 0.75, "merge": "product"}),
        ("lambda-product (lambda=0.5)", "upper", neg,
         {"kappa": 0.5, "merge": "lambda", "lambdas": 0.5}),
        ("U-statistic k=2", "upper", neg, {"kappa": 0.75, "merge": "ustat", "k": 2}),
        ("U-statistic k=3", "upper", neg, {"kappa": 0.75, "merge": "ustat", "k": 3}),
        ("convex combination", "upper", neg, {
            "kappa": 0.75, "merge": "convex",
            "terms": [((), 0.2), ((1, 2), 0.3), ((3, 4, 5), 0.3), ((6,), 0.2)]}),
        ("Chernoff, negative-Gaussian scores", "upper", neg,
         {"source": "chernoff", "psi": SubPsiSpec(v=1.0, mu=0.0), "lambdas": 0.3}),
        ("Chernoff, sampling without replacement (Hoeffding bet)", "upper",
         SamplerConfig("without_replacement", n_draw, {"bag": bag}),
         {"source": "chernoff", "psi": SubPsiSpec(v=v_bag, mu=float(bag.mean())),
          "lambdas": hoeffding_lambda(0.05, n_draw, v_bag)}),
    ]
    return [(label, mode, ExperimentSpec(s, "evalue_pipeline", 0.05, reps or 100_000,
                                         _seed(seed, 700 + i), params=p))
            for i, (label, mode, s, p) in enumerate(specs)]


@scenario("evalue-validity", "Merged e-values have null mean at most 1")
def evalue_validity(reps, seed, threads):
    out = []
    for label, mode, spec in _evalue_specs(seed, reps):
        est = estimate_evalue_mean(spec, threads)
        if mode == "equal":
            out.append(verify_close(est, 1.0, bound_name="1 (exact calibrator)", name=label))
        else:
            out.append(verify(est, 1.0, bound_name="1", name=label))
    for i, (K, M, eps) in enumerate(((8, 2, 0.3), (6, 3, 0.5), (2, 1, 0.5))):
        est = tournament_pipeline(K, M, eps, reps or 10_000, _seed(seed, 780 + i), threads=threads)
        out.append(verify(est, 1.0, bound_name="1",
                          name=f"tournament U2 K={K} M={M} eps={eps}"))
    return out


# --------------------------------------------------------------------------
# Dependence diagnostics

@scenario("wnd-diagnostics",
          "Empirical weak-negative-dependence check of every p-value sampler")
def wnd_scenario(reps, seed, threads):
    # the diagnostic refuses fewer samples than this
    reps = max(reps or 100_000, MIN_DIAGNOSTIC_SAMPLES)
    out = []
    corpus = [
        ("cyclical K=6", SamplerConfig("cyclical", 6)),
        ("neg-gaussian K=6", SamplerConfig("neg_gaussian", 6, {"sigma": _equicorr_edge(6)})),
        ("counter-monotonic pairs K=4", SamplerConfig("counter_monotonic_pairs", 4)),
        ("permutation K=6", SamplerConfig("permutation", 6)),
    ]
    thresholds = (0.05, 0.1, 0.3, 0.5)
    for c, (label, sampler) in enumerate(corpus):
        X = sampler.draw(reps, _seed(seed, 800 + c).generator())
        K = sampler.K
        subsets = [(1, 2), (1, 3), tuple(range(1, min(K, 3) + 1)), tuple(range(1, K + 1))]
        report = wnd_diagnostic(X, thresholds, subsets)
        worst = max(report.cells, key=lambda cell: cell.sigmas)
        est = McEstimate(worst.gap, worst.std_error, reps, seed)
        out.append(verify(est, 0.0, bound_name="joint - product <= 0",
                          name=f"wnd {label} worst cell A={worst.subset} x={worst.x}"))
    return out


ALL_ORDER = (
    "independent-simes",
    "counter-monotonic-simes-k2",
    "comonotonic-simes",
    "bivariate-gaussian-scan",
    "neg-gaussian-tilde",
    "weighted-simes-neg-gaussian",
    "simes-of-simes",
    "bh-independent",
    "bh-all-null-independent",
    "bh-neg-gaussian",
    "group-simes-bh",
    "evalue-validity",
    "wnd-diagnostics",
)


def run_scenario(name: str, reps: int | None = None, seed: int = 0,
                 threads: int | None = None) -> list[tuple[str, VerificationResult]]:
    names = ALL_ORDER if name == "all" else (name,)
    results = []
    for n in names:
        if n not in SCENARIOS:
            raise KeyError(n)
        results += [(n, r) for r in SCENARIOS[n](reps, seed, threads)]
    return results
