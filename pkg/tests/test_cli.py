import json
import math

import pytest

from negdep.cli import main, parse_csv, parse_json
from negdep.core import InputError
from negdep.pmerge import simes


@pytest.fixture
def pfile(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("p,group,is_null\n0.01,a,1\n0.2,a,1\n0.03,b,0\n0.5,b,1\n")
    return path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv, "--json")
    assert code == 0
    return json.loads(out)


class TestParsing:
    def test_csv(self):
        t = parse_csv("p,weight\n0.1,1.5\n0.2,0.5\n")
        assert t.K == 2 and t["weight"] == [1.5, 0.5]

    def test_csv_line_numbers(self):
        with pytest.raises(InputError, match="line 3"):
            parse_csv("p\n0.1\nfoo\n")
        with pytest.raises(InputError, match="line 2"):
            parse_csv("p,weight\n0.1\n")
        with pytest.raises(InputError, match="line 1"):
            parse_csv("p,color\n0.1,red\n")

    def test_json_forms(self):
        a = parse_json('{"p": [0.1, 0.2], "is_null": [true, false]}')
        b = parse_json('[{"p": 0.1, "is_null": true}, {"p": 0.2, "is_null": false}]')
        assert a == b

    def test_json_errors(self):
        with pytest.raises(InputError, match="line 2"):
            parse_json('{"p": [0.1,\n oops]}')
        with pytest.raises(InputError):
            parse_json('{"p": [0.1], "weight": [1, 1]}')


class TestMerge:
    def test_simes(self, capsys, pfile):
        rec = run_json(capsys, "merge", "simes", pfile)
        assert rec["value"] == pytest.approx(0.04)
        assert rec["factor"] == pytest.approx(25 / 12)
        assert rec["schema_version"] == 1

    def test_weighted_unit_matches(self, capsys, pfile):
        a = run_json(capsys, "merge", "simes", pfile)
        b = run_json(capsys, "merge", "weighted-simes", pfile, "--weights", "1,1,1,1")
        assert a["value"] == b["value"]

    def test_weighted_needs_weights(self, capsys, pfile):
        code, _, err = run(capsys, "merge", "weighted-simes", pfile)
        assert code == 2 and "weight" in err

    def test_weights_off_simplex(self, capsys, pfile):
        code, _, _ = run(capsys, "merge", "weighted-simes", pfile, "--weights", "1,1,1,2")
        assert code == 3

    def test_simes_of_simes(self, capsys, pfile):
        rec = run_json(capsys, "merge", "simes-of-simes", pfile)
        assert rec["group_values"] == pytest.approx([0.02, 0.06])

    def test_human_output(self, capsys, pfile):
        code, out, _ = run(capsys, "merge", "simes", pfile)
        assert code == 0 and out.startswith("simes: 0.04\n")

    def test_round_trip_floats(self, capsys, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("p\n0.1\n0.3\n0.7\n")
        rec = run_json(capsys, "merge", "simes", path)
        # 3 * 0.1 is 0.30000000000000004; JSON must carry every bit
        assert rec["value"] == simes([0.1, 0.3, 0.7]) == 3 * 0.1

    def test_out_file(self, capsys, pfile, tmp_path):
        out = tmp_path / "r.json"
        code, _, _ = run(capsys, "merge", "simes", pfile, "--out", out)
        assert code == 0 and json.loads(out.read_text())["command"] == "merge"

    def test_bad_p(self, capsys, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("p\n0.1\n1.5\n")
        code, _, err = run(capsys, "merge", "simes", path)
        assert code == 3 and "[0, 1]" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "merge", "simes", tmp_path / "nope.csv")
        assert code == 2

    def test_stdin(self, capsys, monkeypatch):
        import io
        monkeypatch.setattr("sys.stdin", io.StringIO("p\n0.02\n0.04\n"))
        code, out, _ = run(capsys, "merge", "simes", "-", "--json")
        assert code == 0 and json.loads(out)["value"] == pytest.approx(0.04)


class TestBH:
    def test_plain(self, capsys, pfile):
        rec = run_json(capsys, "bh", pfile, "--alpha", "0.1")
        assert rec["rejected"] == [1, 3] and rec["k_star"] == 2
        assert rec["bounds"]["hommel_null_bound"] == pytest.approx(0.1 * 25 / 12 * 3 / 4)

    def test_by(self, capsys, pfile):
        rec = run_json(capsys, "bh", pfile, "--alpha", "0.1", "--correction", "by")
        assert rec["rejected"] == [1]

    def test_groups(self, capsys, pfile):
        rec = run_json(capsys, "bh", pfile, "--alpha", "0.1", "--groups")
        assert rec["rejected_groups"] == ["a", "b"]
        assert rec["group_pvalues"] == pytest.approx([0.02, 0.06])

    def test_groups_need_column(self, capsys, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("p\n0.1\n")
        code, _, _ = run(capsys, "bh", path, "--groups")
        assert code == 2

    def test_no_discoveries_message(self, capsys, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("p\n0.5\n0.9\n")
        code, out, _ = run(capsys, "bh", path)
        assert code == 0 and "no discoveries" in out

    def test_bad_alpha(self, capsys, pfile):
        code, _, _ = run(capsys, "bh", pfile, "--alpha", "0")
        assert code == 3


class TestMergeE:
    @pytest.fixture
    def efile(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("e\n2\n3\n0.5\n")
        return path

    @pytest.mark.parametrize("method,expect", [
        ("product", 3.0), ("average", 5.5 / 3), ("ustat:2", 8.5 / 3), ("ustat:3", 3.0)])
    def test_methods(self, capsys, efile, method, expect):
        rec = run_json(capsys, "merge-e", efile, "--method", method)
        assert rec["value"] == pytest.approx(expect)
        assert rec["implied_p"] == pytest.approx(min(1.0, 1 / expect))

    def test_lambda(self, capsys, efile):
        rec = run_json(capsys, "merge-e", efile, "--method", "lambda", "--lambdas", "0.5")
        assert rec["value"] == pytest.approx(1.5 * 2.0 * 0.75)

    def test_convex(self, capsys, efile):
        rec = run_json(capsys, "merge-e", efile, "--method", "convex",
                       "--terms", "[[[1, 2], 0.5], [[], 0.5]]")
        assert rec["value"] == pytest.approx(3.5)

    def test_errors(self, capsys, efile):
        assert run(capsys, "merge-e", efile, "--method", "median")[0] == 2
        assert run(capsys, "merge-e", efile, "--method", "ustat:9")[0] == 3
        assert run(capsys, "merge-e", efile, "--method", "lambda")[0] == 2


class TestBounds:
    def test_values(self, capsys):
        rec = run_json(capsys, "bounds", "--alpha", "0.05", "--K", "2")
        assert rec["simes"]["additive_general"] == pytest.approx(0.0525)
        assert rec["fdr"]["su_neg_bound"] == pytest.approx(0.05 * (-math.log(0.05) + 3.1792))

    def test_which(self, capsys):
        rec = run_json(capsys, "bounds", "--which", "fdr")
        assert "simes" not in rec and "fdr" in rec

    def test_bound_tables_stable(self, capsys):
        first = run(capsys, "bounds", "--paper-tables")[1]
        second = run(capsys, "bounds", "--paper-tables")[1]
        assert first == second and first.startswith("# table 1\nalpha,0.0098")

    def test_bad_K(self, capsys):
        assert run(capsys, "bounds", "--K", "0")[0] == 3


class TestSimulate:
    def test_list(self, capsys):
        code, out, _ = run(capsys, "simulate", "--list")
        assert code == 0 and "bivariate-gaussian-scan" in out

    def test_unknown(self, capsys):
        assert run(capsys, "simulate", "--scenario", "nope")[0] == 2

    def test_small_reps(self, capsys):
        assert run(capsys, "simulate", "--scenario", "comonotonic-simes", "--reps", "10")[0] == 3

    def test_jsonl(self, capsys, tmp_path):
        out = tmp_path / "r.jsonl"
        code, text, _ = run(capsys, "simulate", "--scenario", "counter-monotonic-simes-k2",
                            "--reps", "5000", "--out", out)
        recs = [json.loads(line) for line in out.read_text().splitlines()]
        assert code == 0 and len(recs) == 3
        assert all(r["schema_version"] == 1 and r["pass"] for r in recs)
        assert "3/3 checks passed" in text

    def test_spec_file(self, capsys, tmp_path):
        spec = tmp_path / "exp.json"
        spec.write_text(json.dumps({
            "name": "neg-gauss-bh",
            "sampler": {"kind": "neg_gaussian", "K": 4,
                        "params": {"sigma": {"equicorrelated": -0.3}}},
            "procedure": "bh", "alpha": 0.1, "reps": 2000, "seed": 3}))
        out = tmp_path / "r.jsonl"
        code, _, _ = run(capsys, "simulate", "--spec", spec, "--out", out)
        rec = json.loads(out.read_text())
        assert code == 0 and rec["scenario"] == "neg-gauss-bh" and rec["reps"] == 2000

    def test_spec_failure_exit(self, capsys, tmp_path):
        spec = tmp_path / "exp.json"
        spec.write_text(json.dumps({
            "sampler": {"kind": "comonotonic", "K": 3}, "procedure": "simes",
            "alpha": 0.2, "reps": 5000, "bound": 0.1}))
        assert run(capsys, "simulate", "--spec", spec)[0] == 1

    def test_spec_malformed(self, capsys, tmp_path):
        spec = tmp_path / "exp.json"
        spec.write_text('{"procedure": "simes"}')
        assert run(capsys, "simulate", "--spec", spec)[0] == 2


def test_module_entry_point():
    import subprocess
    import sys
    out = subprocess.run([sys.executable, "-m", "negdep", "--version"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and "negdep" in out.stdout
