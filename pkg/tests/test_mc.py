import math
from pathlib import Path

import numpy as np
import pytest

from negdep.core import CorrMatrix, DomainError, GroupPartition, InputError, McEstimate, NullMask
from negdep.gendep import RngSeed, SamplerConfig
from negdep.mc import (
    BLOCK_SIZE,
    ExperimentSpec,
    estimate_bh_fdr,
    estimate_evalue_mean,
    estimate_type1,
    format_table1,
    format_table2,
    reproduce_table1,
    reproduce_table2,
    run_bh_fdr,
    run_blocks,
    scan_bivariate_gaussian,
    tilde_preimages,
    tournament_evalues,
    tournament_pipeline,
    verify,
    verify_close,
)

GOLDEN = Path(__file__).parent / "golden"


class TestRunBlocks:
    def test_block_sizes(self):
        sizes = run_blocks(2 * BLOCK_SIZE + 7, 1, lambda g, n: n)
        assert sizes == [BLOCK_SIZE, BLOCK_SIZE, 7]

    @pytest.mark.parametrize("threads", [2, 4, 8])
    def test_thread_invariant(self, threads):
        work = lambda g, n: g.random(n).sum()
        assert run_blocks(55_000, 3, work, 1) == run_blocks(55_000, 3, work, threads)

    def test_seed_matters(self):
        work = lambda g, n: g.random()
        assert run_blocks(10, 1, work) != run_blocks(10, 2, work)

    def test_positive(self):
        with pytest.raises(DomainError):
            run_blocks(0, 1, lambda g, n: n)


class TestVerify:
    def test_one_sided(self):
        est = McEstimate(0.052, 0.001, 1000, 0)
        assert verify(est, 0.05).passed
        assert not verify(est, 0.048).passed
        assert verify(est, 0.05).sigmas_over == pytest.approx(2.0)

    def test_two_sided(self):
        est = McEstimate(0.046, 0.001, 1000, 0)
        r = verify_close(est, 0.05)
        assert not r.passed and r.lower == 0.05
        assert verify_close(McEstimate(0.053, 0.001, 1000, 0), 0.05).passed

    def test_zero_se(self):
        assert verify(McEstimate(0.0, 0.0, 100, 0), 0.0).passed
        assert not verify(McEstimate(0.1, 0.0, 100, 0), 0.0).passed

    def test_as_dict_keys(self):
        d = verify(McEstimate(0.05, 0.001, 100, 0), 0.06, name="x").as_dict()
        assert d["check"] == "x" and d["pass"] is True


class TestSpec:
    def test_validation(self):
        s = SamplerConfig("independent", 3)
        with pytest.raises(DomainError):
            ExperimentSpec(s, "simes", reps=99)
        with pytest.raises(InputError):
            ExperimentSpec(s, "holm")
        with pytest.raises(InputError):
            ExperimentSpec(s, "bh", null_mask=NullMask.all_null(4))
        assert ExperimentSpec(s, "simes", seed=5).seed == RngSeed(5)

    def test_type1_needs_all_null(self):
        s = SamplerConfig("independent", 2, {"shift": [0.0, 1.0]})
        with pytest.raises(DomainError):
            estimate_type1(ExperimentSpec(s, "simes"))


class TestEstimators:
    def test_comonotonic_exact(self):
        # identical p-values: S_K = p, so the rejection rate is alpha
        spec = ExperimentSpec(SamplerConfig("comonotonic", 5), "simes", 0.1, 50_000, 1)
        est = estimate_type1(spec)
        assert abs(est.estimate - 0.1) < 4 * est.std_error

    def test_permutation_grid_zero(self):
        # values 1/K..1 give S_K = 1 on every draw
        spec = ExperimentSpec(SamplerConfig("permutation", 6), "simes", 0.5, 1000, 1)
        assert estimate_type1(spec).estimate == 0.0

    def test_weighted_unit_equals_simes(self):
        s = SamplerConfig("cyclical", 6)
        a = estimate_type1(ExperimentSpec(s, "simes", 0.05, 20_000, 4))
        b = estimate_type1(ExperimentSpec(s, "weighted_simes", 0.05, 20_000, 4,
                                          params={"weights": np.ones(6)}))
        assert a == b

    def test_simes_of_simes_singletons(self):
        s = SamplerConfig("cyclical", 6)
        a = estimate_type1(ExperimentSpec(s, "simes", 0.05, 20_000, 4))
        b = estimate_type1(ExperimentSpec(s, "simes_of_simes", 0.05, 20_000, 4,
                                          params={"groups": GroupPartition.singletons(6)}))
        assert a == b

    def test_bh_all_null_identity(self):
        sigma = CorrMatrix.equicorrelated(8, -1 / 7 + 1e-6)
        spec = ExperimentSpec(SamplerConfig("neg_gaussian", 8, {"sigma": sigma}),
                              "bh", 0.1, 20_000, 2)
        run = run_bh_fdr(spec)
        assert run.identity_checked == 20_000 and run.identity_mismatches == 0
        simes_rate = estimate_type1(ExperimentSpec(spec.sampler, "simes", 0.1, 20_000, 2))
        assert run.estimate.estimate == simes_rate.estimate

    def test_by_below_bh(self):
        s = SamplerConfig("independent", 10, {"shift": [0.0] * 5 + [2.0] * 5})
        fdr_bh = estimate_bh_fdr(ExperimentSpec(s, "bh", 0.2, 20_000, 3)).estimate
        fdr_by = estimate_bh_fdr(ExperimentSpec(s, "by", 0.2, 20_000, 3)).estimate
        assert fdr_by < fdr_bh

    def test_calibrated_average_mean_one(self):
        spec = ExperimentSpec(SamplerConfig("independent", 4), "evalue_pipeline", 0.05, 50_000, 9,
                              params={"kappa": 0.5, "merge": "average"})
        est = estimate_evalue_mean(spec)
        assert abs(est.estimate - 1.0) < 4 * est.std_error

    def test_tournament_evalues(self):
        E = tournament_evalues(4, 2, 0.3, 2000, RngSeed(1).generator())
        assert E.shape[0] == 2000 and (E >= 0).all()
        est = tournament_pipeline(4, 2, 0.3, 20_000, 5)
        assert est.estimate <= 1 + 3 * est.std_error

    def test_scan_shape(self):
        out = scan_bivariate_gaussian([0.05, 0.1], [-0.5, -0.2], 2000, 1)
        assert len(out) == 2 and len(out[0]) == 2
        assert all(isinstance(e, McEstimate) for row in out for e in row)


class TestTables:
    def test_table1_closed_form(self):
        rows = {r["alpha"]: r for r in reproduce_table1()}
        assert rows[0.05]["tilde_s"] == pytest.approx(0.0556413, abs=5e-8)
        assert rows[0.05]["cubic"] == pytest.approx(0.05575)
        assert rows[0.083]["cubic"] == pytest.approx(0.1002087, abs=5e-8)
        assert rows[0.1]["tilde_s"] == pytest.approx(0.1259956, abs=5e-8)

    def test_ratio_uses_rounded_tilde(self):
        r = {r["alpha"]: r for r in reproduce_table1()}[0.05]
        assert r["ratio"] == pytest.approx(0.0556 / 0.05)
        assert r["ratio_exact"] == pytest.approx(1.11283, abs=1e-5)

    def test_preimages_match_alpha_row(self):
        pre = tilde_preimages()
        assert [round(pre[t], 4) for t in (0.01, 0.05, 0.1)] == [0.0098, 0.0454, 0.0830]

    def test_table2(self):
        vals = [r["fdr_bound"] for r in reproduce_table2()]
        assert vals == pytest.approx([0.0778437, 0.3087466, 0.5481785], abs=5e-8)

    def test_golden_bytes(self):
        text = "# table 1\n" + format_table1() + "# table 2\n" + format_table2()
        assert text == (GOLDEN / "bound_tables.csv").read_text()
