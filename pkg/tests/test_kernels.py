"""The compiled and numpy kernels must agree bit for bit."""
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from negdep import kernels
from negdep.emerge import u_statistic
from negdep.fdr import bh
from negdep.pmerge import simes

BACKENDS = kernels.backends()
needs_both = pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernels not built")


def matrices(max_k=12):
    return st.integers(1, max_k).flatmap(lambda k: arrays(
        np.float64, st.tuples(st.integers(1, 20), st.just(k)),
        elements=st.one_of(st.floats(0.0, 1.0), st.sampled_from([0.0, 0.05, 0.5, 1.0]))))


@pytest.mark.parametrize("name", sorted(BACKENDS))
class TestEachBackend:
    @given(P=matrices())
    def test_simes_rows(self, name, P):
        got = BACKENDS[name].simes_rows(P)
        assert np.array_equal(got, [simes(row) for row in P])

    @given(P=matrices(), alpha=st.floats(0.001, 0.5))
    def test_bh_rows(self, name, P, alpha):
        mask = np.arange(P.shape[1]) % 2 == 0
        kstar, false = BACKENDS[name].bh_rows(P, mask, alpha)
        for i, row in enumerate(P):
            r = bh(row, alpha)
            assert kstar[i] == r.k_star
            assert false[i] == sum(mask[j - 1] for j in r.rejected)

    @given(E=st.integers(1, 10).flatmap(lambda k: arrays(
        np.float64, st.tuples(st.integers(1, 10), st.just(k)), elements=st.floats(0.0, 10.0))),
        data=st.data())
    def test_esym_rows(self, name, E, data):
        k = data.draw(st.integers(1, E.shape[1]))
        got = BACKENDS[name].esym_rows(E, k)
        expect = [u_statistic(row, k) for row in E]
        assert np.allclose(got, expect, rtol=1e-12, atol=0)


@needs_both
@given(P=matrices(30), alpha=st.floats(0.001, 0.5))
def test_bitwise_agreement(P, alpha):
    cy, py = BACKENDS["cython"], BACKENDS["numpy"]
    mask = np.arange(P.shape[1]) < P.shape[1] // 2
    assert np.array_equal(cy.simes_rows(P), py.simes_rows(P))
    a, b = cy.bh_rows(P, mask, alpha), py.bh_rows(P, mask, alpha)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    E = P * 7.0
    for k in range(1, min(P.shape[1], 4) + 1):
        assert np.array_equal(cy.esym_rows(E, k), py.esym_rows(E, k))


def test_fallback_selected_by_env():
    env = dict(os.environ, NEGDEP_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import negdep.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


@needs_both
def test_compiled_is_default():
    if os.environ.get("NEGDEP_PURE_PYTHON"):
        pytest.skip("fallback forced")
    assert kernels.BACKEND == "cython"


@needs_both
def test_simulation_backend_invariant(tmp_path):
    outs = []
    for flag in ("", "1"):
        env = dict(os.environ, NEGDEP_PURE_PYTHON=flag)
        if not flag:
            env.pop("NEGDEP_PURE_PYTHON")
        path = tmp_path / f"out{flag}.jsonl"
        subprocess.run([sys.executable, "-m", "negdep", "simulate", "--scenario", "bh-neg-gaussian",
                        "--reps", "3000", "--seed", "11", "--out", str(path)],
                       env=env, capture_output=True, check=True)
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_pruning_edges(name):
    m = BACKENDS[name]
    rng = np.random.default_rng(5)
    for K in (1, 2, 3, 7, 10, 33):
        for alpha in (0.05, 0.1, 1 / 3):
            edges = np.array([alpha * k / K for k in range(1, K + 1)])
            pool = np.concatenate([edges, np.nextafter(edges, 0), np.nextafter(edges, 1),
                                   np.arange(K + 1) / K, [0.0, 1.0, 2.0, np.inf]])
            P = rng.choice(pool, size=(400, K))
            simes_ref = [min(1.0, min(float(K) * q / k for k, q in enumerate(sorted(row), 1)))
                         for row in P]
            assert np.array_equal(m.simes_rows(P), simes_ref)
            kstar, _ = m.bh_rows(np.minimum(P, 1.0), np.ones(K, bool), alpha)
            assert list(kstar) == [bh(row, alpha).k_star for row in np.minimum(P, 1.0)]
