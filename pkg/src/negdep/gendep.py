"""Samplers of negatively dependent random vectors and empirical checks of
weak negative dependence.

Every sampler takes either an :class:`RngSeed` or a ready
``numpy.random.Generator``. Batch samplers return one draw per row.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from .core import PSD_TOL, CorrMatrix, DomainError, InputError, PVector

SAMPLER_KINDS = (
    "independent",
    "neg_gaussian",
    "comonotonic",
    "counter_monotonic_pairs",
    "permutation",
    "without_replacement",
    "multinomial_indicator",
    "tournament_binary",
    "knockout_random",
    "cyclical",
)
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngSeed:
    """A reproducible random stream; distinct ``stream_id`` values are independent."""

    seed: int
    stream_id: int = 0

    def generator(self, block: int | None = None) -> np.random.Generator:
        """Generator for this stream, or for one numbered block inside it."""
        key = (self.stream_id & _MASK64,) if block is None else (self.stream_id & _MASK64, block)
        ss = np.random.SeedSequence(self.seed & _MASK64, spawn_key=key)
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, stream_id: int) -> RngSeed:
        return RngSeed(self.seed, stream_id)


def _gen(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngSeed):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngSeed(int(rng)).generator()
    raise TypeError(f"expected RngSeed or Generator, got {type(rng).__name__}")


# --------------------------------------------------------------------------
# Gaussian dependence

def gaussian_factor(sigma: CorrMatrix) -> np.ndarray:
    """Matrix ``L`` with ``L @ L.T == sigma``.

    Cholesky when it succeeds; for singular matrices (e.g. a pair with
    correlation -1) the eigendecomposition with eigenvalues clipped at zero.
    """
    S = sigma.entries
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        pass
    vals, vecs = np.linalg.eigh(S)
    if vals.min() < -PSD_TOL:
        raise DomainError("correlation matrix is not positive semidefinite")
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def _check_sign(sigma: CorrMatrix, allow_positive: bool) -> None:
    if not allow_positive and not sigma.all_offdiag_nonpositive:
        raise DomainError(
            "correlation matrix has positive off-diagonal entries; "
            "pass allow_positive=True to sample it anyway"
        )


def neg_gaussian_latent_batch(sigma: CorrMatrix, n: int, rng, shift=None,
                              allow_positive: bool = False, factor=None) -> np.ndarray:
    """``n`` draws of ``Y ~ N(shift, sigma)``."""
    _check_sign(sigma, allow_positive)
    L = gaussian_factor(sigma) if factor is None else factor
    Z = _gen(rng).standard_normal((n, sigma.K))
    Y = Z @ L.T
    if shift is not None:
        Y += np.asarray(shift, dtype=float)
    return Y


def neg_gaussian_p_batch(sigma: CorrMatrix, n: int, rng, shift=None,
                         allow_positive: bool = False, factor=None) -> np.ndarray:
    """One-sided p-values ``P = Phi(-Y)``; null coordinates are uniform."""
    return ndtr(-neg_gaussian_latent_batch(sigma, n, rng, shift, allow_positive, factor))


def sample_neg_gaussian_p(sigma: CorrMatrix, shift=None, rng=None,
                          allow_positive: bool = False) -> PVector:
    if shift is not None and len(shift) != sigma.K:
        raise InputError("shift length differs from the matrix size")
    return PVector(neg_gaussian_p_batch(sigma, 1, rng, shift, allow_positive)[0])


def random_nonpositive_corr(K: int, rng, strength: float = 0.95) -> CorrMatrix:
    """Random correlation matrix with nonpositive off-diagonals.

    Off-diagonal magnitudes are uniform and rescaled so that every row is
    diagonally dominant (hence positive definite).
    """
    gen = _gen(rng)
    A = gen.uniform(0.0, 1.0, size=(K, K))
    A = np.triu(A, 1)
    A = A + A.T
    row = A.sum(axis=1).max()
    S = -strength * A / row if row > 0 else np.zeros((K, K))
    np.fill_diagonal(S, 1.0)
    return CorrMatrix(S)


# --------------------------------------------------------------------------
# Combinatorial samplers

def permutation_batch(values: Sequence[float], n: int, rng) -> np.ndarray:
    base = np.broadcast_to(np.asarray(values, dtype=float), (n, len(values)))
    return _gen(rng).permuted(base, axis=1)


def sample_permutation(values: Sequence[float], rng) -> np.ndarray:
    """Uniform (Fisher-Yates) shuffle of ``values``."""
    out = np.array(values, dtype=float)
    _gen(rng).shuffle(out)
    return out


def without_replacement_batch(bag: Sequence[float], K: int, n: int, rng) -> np.ndarray:
    bag = np.asarray(bag, dtype=float)
    if K > bag.size:
        raise DomainError(f"cannot draw {K} items from a bag of {bag.size}")
    return permutation_batch(bag, n, rng)[:, :K]


def sample_without_replacement(bag: Sequence[float], K: int, rng) -> np.ndarray:
    bag = np.asarray(bag, dtype=float)
    if not 1 <= K <= bag.size:
        raise DomainError(f"cannot draw {K} items from a bag of {bag.size}")
    return _gen(rng).choice(bag, size=K, replace=False, shuffle=True)


def multinomial_indicator_batch(m: int, K: int, n: int, rng) -> np.ndarray:
    if not 0 <= m <= K:
        raise DomainError(f"need 0 <= m <= K, got m={m}, K={K}")
    base = (np.arange(K) < m).astype(np.int64)
    return permutation_batch(base, n, rng).astype(np.int64)


def sample_multinomial_indicator(m: int, K: int, rng) -> np.ndarray:
    """Binary vector with exactly ``m`` ones, each placement equally likely."""
    return multinomial_indicator_batch(m, K, 1, rng)[0]


# --------------------------------------------------------------------------
# Tournaments

def _check_tournament(n_games, win_prob):
    n_games = np.asarray(n_games, dtype=np.int64)
    win_prob = np.asarray(win_prob, dtype=float)
    K = n_games.shape[0]
    if n_games.shape != (K, K) or win_prob.shape != (K, K):
        raise InputError("game and probability matrices must be K x K")
    if (n_games != n_games.T).any() or (n_games < 0).any() or np.diag(n_games).any():
        raise DomainError("games matrix must be symmetric, nonnegative, zero diagonal")
    iu = np.triu_indices(K, 1)
    pij, pji = win_prob[iu], win_prob.T[iu]
    if (pij < 0).any() or (pji < 0).any() or (pij + pji > 1 + 1e-12).any():
        raise DomainError("win probabilities need p_ij, p_ji >= 0 and p_ij + p_ji <= 1")
    return n_games, win_prob, iu


def tournament_scores_batch(n_games, win_prob, n: int, rng) -> np.ndarray:
    """Round-robin scores ``S_i = sum_j X_ij``; unplayed probability mass is draws."""
    n_games, win_prob, (I, J) = _check_tournament(n_games, win_prob)
    K = n_games.shape[0]
    gen = _gen(rng)
    pij, pji = win_prob[I, J], win_prob[J, I]
    probs = np.stack([pij, pji, np.clip(1.0 - pij - pji, 0.0, None)], axis=1)
    probs /= probs.sum(axis=1, keepdims=True)
    counts = gen.multinomial(n_games[I, J], probs, size=(n, I.size))
    scores = np.zeros((n, K), dtype=np.int64)
    np.add.at(scores.T, I, counts[:, :, 0].T)
    np.add.at(scores.T, J, counts[:, :, 1].T)
    return scores


def sample_tournament_scores(n_games, win_prob, rng) -> np.ndarray:
    return tournament_scores_batch(n_games, win_prob, 1, rng)[0]


def knockout_scores_batch(rounds: int, n: int, rng) -> np.ndarray:
    """Win counts in a knockout bracket with a uniformly random draw and fair games."""
    if rounds < 1:
        raise DomainError("need at least one round")
    gen = _gen(rng)
    size = 2 ** rounds
    alive = gen.permuted(np.broadcast_to(np.arange(size), (n, size)), axis=1)
    wins = np.zeros((n, size), dtype=np.int64)
    rows = np.arange(n)[:, None]
    while alive.shape[1] > 1:
        left, right = alive[:, 0::2], alive[:, 1::2]
        left_wins = gen.random(left.shape) < 0.5
        winners = np.where(left_wins, left, right)
        wins[rows, winners] += 1
        alive = winners
    return wins


def sample_knockout_scores(rounds: int, rng) -> np.ndarray:
    return knockout_scores_batch(rounds, 1, rng)[0]


# --------------------------------------------------------------------------
# Cyclical comparisons

def cyclical_p_batch(K: int, n: int, rng) -> np.ndarray:
    """``P_i = Phi((X_i - X_{i+1}) / sqrt(2))`` with ``X_{K+1} = X_1``."""
    if K < 2:
        raise DomainError("cyclical comparisons need K >= 2")
    X = _gen(rng).standard_normal((n, K))
    return ndtr((X - np.roll(X, -1, axis=1)) / math.sqrt(2.0))


def sample_cyclical_pvalues(K: int, rng) -> PVector:
    return PVector(cyclical_p_batch(K, 1, rng)[0])


# --------------------------------------------------------------------------
# Configured sampling

@dataclass(frozen=True)
class SamplerConfig:
    kind: str
    K: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in SAMPLER_KINDS:
            raise InputError(f"unknown sampler kind {self.kind!r}")
        if self.K < 1:
            raise DomainError("K must be positive")
        if self.kind == "neg_gaussian":
            sigma = self.sigma
            if sigma.K != self.K:
                raise InputError("correlation matrix size differs from K")
            _check_sign(sigma, self.params.get("allow_positive", False))
        if self.kind == "counter_monotonic_pairs" and self.K % 2:
            raise DomainError("counter-monotonic pairs need an even K")
        if self.kind == "knockout_random" and (self.K < 2 or self.K & (self.K - 1)):
            raise DomainError("knockout brackets need K a power of two")
        shift = self.params.get("shift")
        if shift is not None and len(shift) != self.K:
            raise InputError("shift length differs from K")

    @property
    def sigma(self) -> CorrMatrix:
        s = self.params["sigma"]
        return s if isinstance(s, CorrMatrix) else CorrMatrix(np.asarray(s, dtype=float))

    @property
    def shift(self):
        return self.params.get("shift")

    def null_mask(self) -> np.ndarray:
        """Coordinates that are null, i.e. carry no shift."""
        if self.shift is None:
            return np.ones(self.K, dtype=bool)
        return np.asarray(self.shift, dtype=float) == 0

    def prepare(self) -> dict:
        """Per-config precomputation (matrix factors) shared by all batches."""
        if self.kind == "neg_gaussian":
            return {"factor": gaussian_factor(self.sigma)}
        return {}

    def draw(self, n: int, rng, prepared: dict | None = None) -> np.ndarray:
        """``n`` raw draws, one per row."""
        gen = _gen(rng)
        prepared = self.prepare() if prepared is None else prepared
        K, prm = self.K, self.params
        if self.kind == "independent":
            Y = gen.standard_normal((n, K))
            if self.shift is not None:
                Y += np.asarray(self.shift, dtype=float)
            return ndtr(-Y)
        if self.kind == "neg_gaussian":
            return neg_gaussian_p_batch(self.sigma, n, gen, self.shift,
                                        allow_positive=prm.get("allow_positive", False),
                                        factor=prepared["factor"])
        if self.kind == "comonotonic":
            return np.repeat(gen.random((n, 1)), K, axis=1)
        if self.kind == "counter_monotonic_pairs":
            U = gen.random((n, K // 2))
            out = np.empty((n, K))
            out[:, 0::2] = U
            out[:, 1::2] = 1.0 - U
            return out
        if self.kind == "permutation":
            values = prm.get("values", np.arange(1, K + 1) / K)
            return permutation_batch(values, n, gen)
        if self.kind == "without_replacement":
            return without_replacement_batch(prm["bag"], K, n, gen)
        if self.kind == "multinomial_indicator":
            return multinomial_indicator_batch(prm["m"], K, n, gen)
        if self.kind == "tournament_binary":
            return tournament_scores_batch(prm["n_games"], prm["win_prob"], n, gen)
        if self.kind == "knockout_random":
            return knockout_scores_batch(int(round(math.log2(K))), n, gen)
        if self.kind == "cyclical":
            return cyclical_p_batch(K, n, gen)
        raise AssertionError(self.kind)

    def draw_latent(self, n: int, rng, prepared: dict | None = None) -> np.ndarray:
        """Like :meth:`draw`, but Gaussian kinds return the normal scores themselves."""
        gen = _gen(rng)
        if self.kind == "neg_gaussian":
            prepared = self.prepare() if prepared is None else prepared
            return neg_gaussian_latent_batch(
                self.sigma, n, gen, self.shift,
                allow_positive=self.params.get("allow_positive", False),
                factor=prepared["factor"])
        if self.kind == "independent":
            Y = gen.standard_normal((n, self.K))
            if self.shift is not None:
                Y += np.asarray(self.shift, dtype=float)
            return Y
        return self.draw(n, gen, prepared)


# --------------------------------------------------------------------------
# Diagnostics

@dataclass(frozen=True)
class WndCell:
    subset: tuple
    x: float
    joint: float
    product: float
    gap: float
    std_error: float

    @property
    def sigmas(self) -> float:
        return self.gap / self.std_error if self.std_error > 0 else (
            0.0 if self.gap == 0 else math.copysign(math.inf, self.gap))

    def violates(self, margin_sigmas: float) -> bool:
        return self.gap > margin_sigmas * self.std_error


@dataclass(frozen=True)
class WndReport:
    cells: tuple
    n: int
    margin_sigmas: float

    @property
    def violations(self) -> list[WndCell]:
        return [c for c in self.cells if c.violates(self.margin_sigmas)]

    @property
    def passed(self) -> bool:
        return not self.violations


MIN_DIAGNOSTIC_SAMPLES = 10_000


def wnd_diagnostic(samples, thresholds: Sequence[float], subsets: Sequence[Sequence[int]],
                   margin_sigmas: float = 3.0, strict: bool = False) -> WndReport:
    """Estimate ``P(all X_k <= x, k in A) - prod_k P(X_k <= x)`` per (A, x).

    Standard errors come from the delta method applied to the joint and
    marginal indicator means. Subsets use 1-based indices. With
    ``strict=True`` a gap above ``margin_sigmas`` standard errors raises.
    """
    X = np.asarray(samples, dtype=float)
    if X.ndim != 2:
        raise InputError("samples must be a 2-D array, one draw per row")
    n, K = X.shape
    if n < MIN_DIAGNOSTIC_SAMPLES:
        raise DomainError(f"need at least {MIN_DIAGNOSTIC_SAMPLES} samples, got {n}")
    if len(thresholds) == 0 or len(subsets) == 0:
        raise DomainError("thresholds and subsets must be nonempty")
    cells = []
    for A in subsets:
        idx = [int(i) - 1 for i in A]
        if not idx or min(idx) < 0 or max(idx) >= K or len(set(idx)) != len(idx):
            raise DomainError(f"invalid subset {tuple(A)!r} for K={K}")
        for x in thresholds:
            below = X[:, idx] <= x
            joint_ind = below.all(axis=1)
            marg = below.mean(axis=0)
            joint = joint_ind.mean()
            prod = float(np.prod(marg))
            # influence function of joint - prod(marginals)
            infl = joint_ind.astype(float)
            for j in range(len(idx)):
                others = float(np.prod(np.delete(marg, j)))
                infl = infl - others * below[:, j]
            se = float(infl.std(ddof=1) / math.sqrt(n))
            cells.append(WndCell(tuple(int(i) for i in A), float(x), float(joint),
                                 prod, float(joint) - prod, se))
    report = WndReport(tuple(cells), n, margin_sigmas)
    if strict and not report.passed:
        worst = max(report.violations, key=lambda c: c.sigmas)
        raise DomainError(
            f"weak negative dependence violated at subset {worst.subset}, "
            f"x={worst.x}: gap {worst.gap:.4g} ({worst.sigmas:.1f} sigma)"
        )
    return report
