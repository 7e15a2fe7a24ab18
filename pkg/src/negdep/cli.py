"""Command-line interface.

Exit codes: 0 success (all checks pass), 1 verification failure, 2 input
error, 3 domain error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import (
    CorrMatrix,
    DomainError,
    GroupPartition,
    InputError,
    NegdepError,
    NullMask,
    PVector,
    EVector,
    WeightVector,
    check_alpha,
)
from .emerge import average_e, convex_combo, lambda_product, product_e, u_statistic
from .fdr import bh, bh_fdr_bound_negdep, by, group_simes_bh
from .pmerge import bound_report, correction_factor, simes, simes_of_simes, weighted_simes

SCHEMA_VERSION = 1
EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_DOMAIN = 0, 1, 2, 3
COLUMNS = ("p", "e", "weight", "group", "is_null")


# --------------------------------------------------------------------------
# Input tables

class InputTable(dict):
    """Column name -> list of raw values, plus the row count."""

    @property
    def K(self) -> int:
        return len(next(iter(self.values()))) if self else 0

    def floats(self, name: str) -> np.ndarray:
        if name not in self:
            raise InputError(f"input has no {name!r} column")
        return np.array(self[name], dtype=float)


def _parse_float(text, where: str) -> float:
    try:
        return float(text)
    except (TypeError, ValueError):
        raise InputError(f"{where}: cannot parse {text!r} as a number") from None


def _parse_bool(text, where: str) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "t", "yes", "y"):
        return True
    if t in ("0", "false", "f", "no", "n"):
        return False
    raise InputError(f"{where}: cannot parse {text!r} as a boolean")


def _convert(table: dict, where) -> InputTable:
    out = InputTable()
    for name, values in table.items():
        if name == "group":
            out[name] = [str(v) for v in values]
        elif name == "is_null":
            out[name] = [_parse_bool(v, where(i)) for i, v in enumerate(values)]
        else:
            out[name] = [_parse_float(v, where(i)) for i, v in enumerate(values)]
    if out.K == 0:
        raise InputError("input contains no rows")
    return out


def parse_csv(text: str) -> InputTable:
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise InputError("line 1: input is empty")
    header = [h.strip() for h in rows[0]]
    unknown = [h for h in header if h not in COLUMNS]
    if unknown:
        raise InputError(f"line 1: unknown column(s) {', '.join(unknown)}")
    if len(set(header)) != len(header):
        raise InputError("line 1: duplicate column names")
    cols: dict = {h: [] for h in header}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise InputError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        for h, cell in zip(header, row):
            cols[h].append(cell.strip())
    if not rows[1:]:
        raise InputError("line 2: input has a header but no data rows")
    return _convert(cols, lambda i: f"line {i + 2}")


def parse_json(text: str) -> InputTable:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"line {exc.lineno}: invalid JSON ({exc.msg})") from None
    if isinstance(data, list):
        if not data or not all(isinstance(r, dict) for r in data):
            raise InputError("JSON input must be a nonempty list of records")
        keys = list(data[0])
        cols = {k: [] for k in keys}
        for i, rec in enumerate(data):
            if set(rec) != set(keys):
                raise InputError(f"record {i + 1}: fields differ from the first record")
            for k in keys:
                cols[k].append(rec[k])
    elif isinstance(data, dict):
        cols = {k: v for k, v in data.items() if k != "schema_version"}
        lengths = {len(v) if isinstance(v, list) else -1 for v in cols.values()}
        if not cols or -1 in lengths or len(lengths) != 1:
            raise InputError("JSON columns must be lists of equal length")
    else:
        raise InputError("JSON input must be an object of columns or a list of records")
    unknown = [k for k in cols if k not in COLUMNS]
    if unknown:
        raise InputError(f"unknown column(s) {', '.join(unknown)}")
    return _convert(cols, lambda i: f"record {i + 1}")


def read_table(path: str) -> InputTable:
    if path == "-":
        text = sys.stdin.read()
    else:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise InputError(f"cannot read {path}: {exc.strerror}") from None
    stripped = text.lstrip()
    if path.endswith(".json") or stripped.startswith(("{", "[")):
        return parse_json(text)
    return parse_csv(text)


# --------------------------------------------------------------------------
# Output helpers

def fmt(x) -> str:
    if x is None:
        return "-"
    return repr(float(x))


def _emit(args, record: dict, lines: list[str]) -> None:
    record = {"schema_version": SCHEMA_VERSION, **record}
    text = json.dumps(record, sort_keys=True)
    if getattr(args, "json", False):
        print(text)
    else:
        print("\n".join(lines))
    if getattr(args, "out", None):
        Path(args.out).write_text(text + "\n", encoding="utf-8")


def _groups_from(table: InputTable) -> GroupPartition:
    if "group" not in table:
        raise InputError("input has no 'group' column")
    return GroupPartition.from_labels(table["group"])


def _parse_list(text: str) -> list[float]:
    return [_parse_float(t, "--weights/--lambdas") for t in text.split(",") if t.strip()]


# --------------------------------------------------------------------------
# Commands

def cmd_merge(args) -> int:
    table = read_table(args.input)
    p = PVector(table.floats("p"))
    alpha = check_alpha(args.alpha)
    record = {"command": "merge", "method": args.method, "K": p.K, "alpha": alpha}
    if args.method == "simes":
        value = simes(p)
        factor = correction_factor(p.K)
    elif args.method == "weighted-simes":
        if args.weights:
            w = WeightVector(_parse_list(args.weights))
        elif "weight" in table:
            w = WeightVector(table.floats("weight"))
        else:
            raise InputError("weighted-simes needs a 'weight' column or --weights")
        value = weighted_simes(p, w)
        factor = correction_factor(p.K)
        record["weights"] = [float(x) for x in w.weights]
    else:
        res = simes_of_simes(p, _groups_from(table))
        value = res.value
        factor = res.factor_total
        record.update(group_values=list(res.group_values),
                      factor_groups=res.factor_groups,
                      small_alpha_factor=res.small_alpha_factor)
    corrected = min(factor * value, 1.0)
    report = bound_report(alpha, p.K)
    record.update(value=value, factor=factor, corrected=corrected, bounds=report.as_dict())
    lines = [
        f"{args.method}: {fmt(value)}",
        f"corrected p-value: {fmt(corrected)} (factor {fmt(factor)})",
        f"type-1 bounds at alpha={fmt(alpha)}, K={p.K}:",
        f"  tilde_s: {fmt(report.tilde_s)}",
        f"  additive: {fmt(report.additive_general)}",
        f"  cubic: {fmt(report.cubic)}",
        f"  hommel (l_K alpha): {fmt(report.hommel)}",
        f"  combined: {fmt(report.combined)}",
    ]
    _emit(args, record, lines)
    return EXIT_OK


def cmd_bh(args) -> int:
    table = read_table(args.input)
    p = PVector(table.floats("p"))
    alpha = check_alpha(args.alpha)
    record = {"command": "bh", "K": p.K, "alpha": alpha, "correction": args.correction}
    lines = []
    if args.groups:
        if args.correction != "none":
            raise InputError("--groups runs Simes+BH and takes no correction")
        groups = _groups_from(table)
        res = group_simes_bh(p, groups, alpha)
        labels = list(dict.fromkeys(table["group"]))
        rejected = res.sorted()
        record.update(k_star=res.k_star, rejected_groups=[labels[g - 1] for g in rejected],
                      rejected_group_positions=rejected, group_pvalues=list(res.group_pvalues),
                      na_bound=res.na_bound, na_bound_tight=res.na_bound_tight,
                      prd_bound=res.prd_bound)
        lines.append(f"k*: {res.k_star}")
        lines.append("rejected groups: " + (", ".join(labels[g - 1] for g in rejected)
                                            if rejected else "no discoveries"))
        lines.append(f"group FDR guarantee: {fmt(res.na_bound)} (negative association), "
                     f"{fmt(res.prd_bound)} (PRDS)")
    else:
        r = by(p, alpha) if args.correction == "by" else bh(p, alpha)
        mask = NullMask(table["is_null"]) if "is_null" in table else None
        report = bh_fdr_bound_negdep(alpha, p.K, mask)
        record.update(k_star=r.k_star, rejected=r.sorted(), bounds=report.as_dict())
        lines.append(f"k*: {r.k_star}")
        lines.append("rejected: " + (", ".join(map(str, r.sorted())) if r.k_star
                                     else "no discoveries"))
        lines.append(f"FDR bound under weak negative dependence: {fmt(report.combined)} "
                     f"(su_neg {fmt(report.su_neg_bound)}, l_K alpha {fmt(report.hommel_bound)})")
    _emit(args, record, lines)
    return EXIT_OK


def cmd_merge_e(args) -> int:
    table = read_table(args.input)
    e = EVector(table.floats("e"))
    method = args.method
    record = {"command": "merge-e", "method": method, "K": e.K}
    if method == "product":
        value = product_e(e)
    elif method == "average":
        value = average_e(e)
    elif method == "lambda":
        if not args.lambdas:
            raise InputError("--method lambda needs --lambdas")
        lam = _parse_list(args.lambdas)
        if len(lam) == 1:
            lam = lam * e.K
        value = lambda_product(e, lam)
        record["lambdas"] = lam
    elif method.startswith("ustat"):
        _, _, k = method.partition(":")
        try:
            k = int(k or 2)
        except ValueError:
            raise InputError(f"bad U-statistic order in {method!r}") from None
        value = u_statistic(e, k)
        record["k"] = k
    elif method == "convex":
        if not args.terms:
            raise InputError("--method convex needs --terms")
        try:
            terms = [(tuple(t[0]), float(t[1])) for t in json.loads(args.terms)]
        except (json.JSONDecodeError, TypeError, IndexError, ValueError):
            raise InputError("--terms must be JSON like [[[1,2],0.5],[[],0.5]]") from None
        value = convex_combo(e, terms)
    else:
        raise InputError(f"unknown method {method!r}")
    implied_p = min(1.0, 1.0 / value) if value > 0 else 1.0
    record.update(value=value, implied_p=implied_p)
    _emit(args, record, [f"merged e-value: {fmt(value)}",
                         f"implied p-value (1/e): {fmt(implied_p)}"])
    return EXIT_OK


def cmd_bounds(args) -> int:
    from .mc import format_table1, format_table2

    if args.paper_tables:
        sys.stdout.write("# table 1\n" + format_table1() + "# table 2\n" + format_table2())
        return EXIT_OK
    alpha = check_alpha(args.alpha)
    record = {"command": "bounds", "alpha": alpha, "K": args.K}
    lines = []
    if args.which in ("simes", "all"):
        r = bound_report(alpha, args.K)
        record["simes"] = r.as_dict()
        lines += [f"tilde_s: {fmt(r.tilde_s)}", f"cubic: {fmt(r.cubic)}",
                  f"additive (K={args.K}): {fmt(r.additive_general)}",
                  f"hommel: {fmt(r.hommel)}", f"simes combined: {fmt(r.combined)}"]
    if args.which in ("fdr", "all"):
        f = bh_fdr_bound_negdep(alpha, args.K)
        record["fdr"] = f.as_dict()
        lines += [f"su_neg: {fmt(f.su_neg_bound)}", f"su_neg (3.18): {fmt(f.su_neg_headline)}",
                  f"fdr hommel: {fmt(f.hommel_bound)}", f"fdr combined: {fmt(f.combined)}"]
    _emit(args, record, lines)
    return EXIT_OK


def _spec_from_file(path: str):
    from .gendep import SamplerConfig
    from .mc import ExperimentSpec

    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"line {exc.lineno}: invalid JSON ({exc.msg})") from None
    try:
        s = data["sampler"]
        params = dict(s.get("params", {}))
        if "sigma" in params and isinstance(params["sigma"], dict):
            params["sigma"] = CorrMatrix.equicorrelated(s["K"], params["sigma"]["equicorrelated"])
        elif "sigma" in params:
            params["sigma"] = CorrMatrix(np.asarray(params["sigma"], dtype=float))
        sampler = SamplerConfig(s["kind"], int(s["K"]), params)
        mask = NullMask(data["null_mask"]) if data.get("null_mask") is not None else None
        spec = ExperimentSpec(sampler, data["procedure"], float(data.get("alpha", 0.05)),
                              int(data.get("reps", 10_000)), int(data.get("seed", 0)),
                              mask, dict(data.get("params", {})))
    except (KeyError, TypeError) as exc:
        raise InputError(f"{path}: malformed experiment spec ({exc})") from None
    return spec, data.get("bound"), data.get("name", Path(path).stem)


def _run_spec(path, reps, seed, threads):
    from dataclasses import replace

    from .gendep import RngSeed
    from .mc import (bound_for_negdep_bh, bound_for_negdep_simes, estimate_evalue_mean,
                     estimate_type1, run_bh_fdr, verify)
    from .fdr import group_na_bound

    spec, bound, name = _spec_from_file(path)
    if reps is not None:
        spec = replace(spec, reps=reps)
    if seed is not None:
        spec = replace(spec, seed=RngSeed(seed))
    K = spec.sampler.K
    proc = spec.procedure
    if proc in ("simes", "weighted_simes"):
        est = estimate_type1(spec, threads)
        default = bound_for_negdep_simes(spec.alpha, K)
    elif proc == "simes_of_simes":
        est = estimate_type1(spec, threads)
        default = min(correction_factor(K) ** 2 * spec.alpha, 1.0)
    elif proc in ("bh", "by"):
        est = run_bh_fdr(spec, threads).estimate
        default = bound_for_negdep_bh(spec.alpha, K)
    elif proc == "group_simes_bh":
        est = run_bh_fdr(spec, threads).estimate
        default = group_na_bound(spec.alpha)
    else:
        est = estimate_evalue_mean(spec, threads)
        default = 1.0
    bound = default if bound is None else float(bound)
    return [(name, verify(est, bound, bound_name="spec file bound", name=name))]


def cmd_simulate(args) -> int:
    from .scenarios import DESCRIPTIONS, run_scenario

    if args.list:
        for name in sorted(DESCRIPTIONS):
            print(f"{name}: {DESCRIPTIONS[name]}")
        print("all: every scenario above")
        return EXIT_OK
    if args.reps is not None and args.reps < 100:
        raise DomainError("--reps must be at least 100")
    if args.spec:
        results = _run_spec(args.spec, args.reps, args.seed, args.threads)
    else:
        try:
            results = run_scenario(args.scenario, args.reps,
                                   0 if args.seed is None else args.seed, args.threads)
        except KeyError as exc:
            print(f"error: unknown scenario {exc.args[0]!r} (see --list)", file=sys.stderr)
            return EXIT_INPUT
    lines = []
    for scen, r in results:
        rec = {"schema_version": SCHEMA_VERSION, "scenario": scen, **r.as_dict()}
        lines.append(json.dumps(rec, sort_keys=True))
        tag = "PASS" if r.passed else "FAIL"
        print(f"{tag}  {scen}: {r.name}  estimate={r.estimate.estimate:.6g} "
              f"se={r.estimate.std_error:.3g} bound={r.bound:.6g} ({r.bound_name})")
    n_pass = sum(r.passed for _, r in results)
    print(f"{n_pass}/{len(results)} checks passed")
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return EXIT_OK if n_pass == len(results) else EXIT_FAIL


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="negdep",
        description="Multiple testing under negative dependence: p-value and e-value merging, BH.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def output_flags(p):
        p.add_argument("--json", action="store_true", help="print the JSON record")
        p.add_argument("--out", help="also write the JSON record to this file")

    m = sub.add_parser("merge", help="merge p-values with Simes-type functions")
    m.add_argument("method", choices=["simes", "weighted-simes", "simes-of-simes"])
    m.add_argument("input", help="CSV or JSON file with a 'p' column ('-' for stdin)")
    m.add_argument("--alpha", type=float, default=0.05, help="level for the bound report")
    m.add_argument("--weights", help="comma-separated weights (else the 'weight' column)")
    output_flags(m)
    m.set_defaults(func=cmd_merge)

    b = sub.add_parser("bh", help="Benjamini-Hochberg procedure")
    b.add_argument("input")
    b.add_argument("--alpha", type=float, default=0.05)
    b.add_argument("--correction", choices=["none", "by"], default="none")
    b.add_argument("--groups", action="store_true",
                   help="run Simes+BH on the groups given by the 'group' column")
    output_flags(b)
    b.set_defaults(func=cmd_bh)

    e = sub.add_parser("merge-e", help="merge e-values")
    e.add_argument("input", help="CSV or JSON file with an 'e' column")
    e.add_argument("--method", default="product",
                   help="product, lambda, ustat:k, average or convex")
    e.add_argument("--lambdas", help="comma-separated bets in [0,1] (one value broadcasts)")
    e.add_argument("--terms", help="JSON list of [subset, weight] pairs for convex")
    output_flags(e)
    e.set_defaults(func=cmd_merge_e)

    bd = sub.add_parser("bounds", help="closed-form Simes and FDR bounds")
    bd.add_argument("--alpha", type=float, default=0.05)
    bd.add_argument("--K", type=int, default=1000)
    bd.add_argument("--which", choices=["simes", "fdr", "all"], default="all")
    bd.add_argument("--paper-tables", action="store_true",
                    help="print both bound tables as CSV")
    output_flags(bd)
    bd.set_defaults(func=cmd_bounds)

    s = sub.add_parser("simulate", help="run Monte Carlo verification scenarios")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--scenario", help="scenario name, or 'all'")
    g.add_argument("--spec", help="JSON experiment spec file")
    g.add_argument("--list", action="store_true", help="list scenarios")
    s.add_argument("--reps", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--threads", type=int,
                   help="worker threads (default: $NEGDEP_THREADS or 1)")
    s.add_argument("--out", help="write one JSON record per check to this file")
    s.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "K", 1) is not None and getattr(args, "K", 1) < 1:
        print("error: --K must be positive", file=sys.stderr)
        return EXIT_DOMAIN
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except NegdepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
