"""Batch command-line interface.

Subcommands wrap the library one-to-one and emit a deterministic JSON
report.  Exit codes: 0 success, 1 malformed input, 2 substantive
model-rejection finding (crossed bounds or an infeasible identified
set), so scripts can tell rejection from malfunction.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import binary, generalized, functional, inference, oracle
from .errors import (
    Infeasible,
    InputError,
    OutcomeInstrumentDependence,
    RoyBoundsError,
)
from .functional import OutcomeSample, build_subcdf
from .probability import CellProbs, InstrumentTable, validate_cells

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_REJECTED = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


def _add_common(p):
    p.add_argument("--data", help="CSV file with header row")
    p.add_argument("--cells", help="JSON cell probabilities")
    p.add_argument("--outcome", default="y")
    p.add_argument("--sector", default="d")
    p.add_argument("--instrument")
    p.add_argument("--weight")
    p.add_argument("--filter", action="append", default=[], metavar="COL=VALUE")
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--bootstrap", type=int, default=0)
    p.add_argument("--quantiles", default="0.25,0.75")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def _make_parser() -> _Parser:
    parser = _Parser(prog="roybounds", description=__doc__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("binary", help="binary Roy model bounds")
    _add_common(p)
    p.add_argument("--tau-y", type=float, default=0.0, dest="tau_y")

    p = sub.add_parser("generalized", help="generalized binary model bounds")
    _add_common(p)

    p = sub.add_parser("functional", help="continuous-outcome envelope report")
    _add_common(p)

    p = sub.add_parser("iqr", help="interquantile-range bounds")
    _add_common(p)
    p.add_argument("--d", type=int, default=1, choices=(0, 1))

    p = sub.add_parser("infer", help="intersection-bounds confidence intervals")
    _add_common(p)

    p = sub.add_parser("simulate", help="draw a seeded sample from a design")
    _add_common(p)
    p.add_argument("--design", required=True)
    p.add_argument("--n", type=int, default=1000)

    p = sub.add_parser("oracle", help="brute-force oracle computations")
    _add_common(p)
    p.add_argument("--variant", choices=(oracle.ROY, oracle.GENERALIZED), default=oracle.ROY)
    p.add_argument("--objective", choices=("ey0", "ey1", "p00", "p01", "p10", "p11"))
    return parser


def _read_rows(path: str) -> list[dict]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise InputError(f"{path}: missing header row")
            return list(reader)
    except OSError as exc:
        raise InputError(str(exc)) from exc


def _apply_filters(rows: list[dict], filters: list[str]) -> list[dict]:
    for f in filters:
        if "=" not in f:
            raise InputError(f"bad --filter {f!r}, expected COL=VALUE")
        col, val = f.split("=", 1)
        rows = [r for r in rows if str(r.get(col, "")) == val]
    return rows


def _load_sample(args) -> OutcomeSample:
    rows = _apply_filters(_read_rows(args.data), args.filter)
    if not rows:
        raise InputError("no rows after filtering")
    y, d, w, z = [], [], [], []
    for i, r in enumerate(rows, start=2):
        try:
            y.append(float(r[args.outcome]))
            d.append(int(r[args.sector]))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"row {i}: bad outcome/sector field ({exc})") from exc
        if args.weight:
            try:
                w.append(float(r[args.weight]))
            except (KeyError, TypeError, ValueError) as exc:
                raise InputError(f"row {i}: bad weight ({exc})") from exc
        if args.instrument:
            if r.get(args.instrument) in (None, ""):
                raise InputError(f"row {i}: missing instrument value")
            z.append(r[args.instrument])
    try:
        return OutcomeSample.from_arrays(
            np.array(y),
            np.array(d),
            np.array(w) if w else None,
            z=np.array(z, dtype=object) if z else None,
        )
    except RoyBoundsError as exc:
        raise InputError(str(exc)) from exc


def _cells_from_json(text: str) -> CellProbs:
    try:
        obj = json.loads(text)
        return validate_cells(obj["q00"], obj["q01"], obj["q10"], obj["q11"])
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InputError(f"bad --cells payload: {exc}") from exc


def _table_from_sample(s: OutcomeSample) -> InstrumentTable:
    if s.z is None:
        raise InputError("--instrument column required")
    cells, weights = {}, {}
    for z in sorted(set(s.z.tolist()), key=str):
        mask = s.z == z
        w = s.w[mask]
        y = s.y[mask].astype(int)
        d = s.d[mask]
        tot = w.sum()
        q = [w[(y == yy) & (d == dd)].sum() / tot for yy, dd in ((0, 0), (0, 1), (1, 0), (1, 1))]
        cells[z] = validate_cells(*q)
        weights[z] = float(tot)
    return InstrumentTable.from_cells(cells, weights)


def _cells_from_sample(s: OutcomeSample) -> CellProbs:
    y = s.y.astype(int)
    q = [s.w[(y == yy) & (s.d == dd)].sum() for yy, dd in ((0, 0), (0, 1), (1, 0), (1, 1))]
    return validate_cells(*q)


def _digest(args, sample=None) -> dict:
    if sample is not None:
        return {"rows": int(sample.n), "weight_total": float(sample.w.sum())}
    return {"rows": 0, "weight_total": 1.0}


def _quantile_pair(args):
    try:
        q1, q2 = (float(x) for x in args.quantiles.split(","))
        return q1, q2
    except ValueError as exc:
        raise InputError(f"bad --quantiles {args.quantiles!r}") from exc


def _cmd_binary(args, report):
    if args.cells:
        q = _cells_from_json(args.cells)
        res = binary.sharp_bounds(q)
    else:
        sample = _load_sample(args)
        report["digest"] = _digest(args, sample)
        if args.instrument:
            res = binary.sharp_bounds_with_instrument(_table_from_sample(sample), tau_y=args.tau_y)
        else:
            res = binary.sharp_bounds(_cells_from_sample(sample))
    report["bounds"] = res.to_dict()
    return EXIT_OK


def _cmd_generalized(args, report):
    if args.cells:
        obj = json.loads(args.cells)
        if "q00" in obj:
            table = InstrumentTable.from_cells({"z0": _cells_from_json(args.cells)})
        else:
            table = InstrumentTable.from_cells(
                {z: validate_cells(c["q00"], c["q01"], c["q10"], c["q11"]) for z, c in obj.items()}
            )
    else:
        sample = _load_sample(args)
        report["digest"] = _digest(args, sample)
        table = _table_from_sample(sample)
        if args.bootstrap:
            ci = inference.infer_bounds(sample, level=args.level, b=args.bootstrap, seed=args.seed)
            report["confidence"] = ci.to_dict()
    res = generalized.compute_all(table)
    report["bounds"] = res.to_dict()
    if res.crossed:
        report["findings"] = {"model_rejected": True, "reasons": ["marginal bounds crossed"]}
        return EXIT_REJECTED
    return EXIT_OK


def _cmd_functional(args, report):
    sample = _load_sample(args)
    report["digest"] = _digest(args, sample)
    c = build_subcdf(sample)
    deciles = [round(q, 2) for q in np.linspace(0.1, 0.9, 9)]
    grid = sorted({c.inv_cdf(q) for q in deciles})
    out = {"p_d1": c.p_d1, "envelopes": []}
    for y in grid:
        out["envelopes"].append(
            {
                "y": y,
                "f0": functional.peterson_bounds(c, 0, y).to_dict(),
                "f1": functional.peterson_bounds(c, 1, y).to_dict(),
                "mobility_upper": functional.mobility_upper(c, y) if c.bar(0, y) > 0 else None,
            }
        )
    report["bounds"] = out
    return EXIT_OK


def _cmd_iqr(args, report):
    sample = _load_sample(args)
    report["digest"] = _digest(args, sample)
    q1, q2 = _quantile_pair(args)
    c = build_subcdf(sample)
    res = functional.iqr_bounds(c, args.d, q1, q2)
    report["bounds"] = {"iqr": res.to_dict(), "d": args.d, "q1": q1, "q2": q2}
    if args.bootstrap:
        ci = inference.iqr_ci(
            sample, args.d, q1, q2, level=args.level, b=args.bootstrap, seed=args.seed
        )
        report["confidence"] = {"iqr": ci.to_dict()}
    return EXIT_OK


def _cmd_infer(args, report):
    sample = _load_sample(args)
    report["digest"] = _digest(args, sample)
    b = args.bootstrap or 999
    ci = inference.infer_bounds(sample, level=args.level, b=b, seed=args.seed)
    report["bounds"] = ci.to_dict()
    att1 = inference.att_ci(sample, level=args.level, b=b, seed=args.seed, which=1)
    att0 = inference.att_ci(sample, level=args.level, b=b, seed=args.seed, which=0)
    report["bounds"]["att1_bootstrap"] = att1.to_dict()
    report["bounds"]["att0_bootstrap"] = att0.to_dict()
    if ci.ey0.lo > ci.ey0.hi or ci.ey1.lo > ci.ey1.hi:
        report["findings"] = {"model_rejected": True, "reasons": ["empty confidence interval"]}
        return EXIT_REJECTED
    return EXIT_OK


def _joint_from_spec(spec: dict):
    kind = spec.get("type", "discrete")
    if kind == "discrete":
        return oracle.DiscreteJoint(
            support=tuple(tuple(p) for p in spec["support"]),
            probs=tuple(spec["probs"]),
        )
    if kind == "gaussian":
        return oracle.GaussianCopulaJoint(
            mu0=spec.get("mu0", 0.0),
            sd0=spec.get("sd0", 1.0),
            mu1=spec.get("mu1", 0.0),
            sd1=spec.get("sd1", 1.0),
            rho=spec.get("rho", 0.0),
        )
    raise InputError(f"unknown joint type {kind!r}")


def _cmd_simulate(args, report):
    try:
        with open(args.design, encoding="utf-8") as fh:
            spec = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"bad design file: {exc}") from exc
    design = oracle.SimDesign(
        joint=_joint_from_spec(spec.get("joint", spec)),
        n=args.n,
        seed=args.seed,
        pi=spec.get("pi", 0.5),
        z_labels=tuple(spec.get("z_labels", ())),
        z_weights=tuple(spec.get("z_weights", ())),
    )
    sample, _truth = oracle.simulate(design)
    if not args.out:
        raise InputError("simulate requires --out for the CSV sample")
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["y", "d"] + (["z"] if sample.z is not None else [])
        writer.writerow(header)
        for i in range(sample.n):
            row = [repr(float(sample.y[i])), int(sample.d[i])]
            if sample.z is not None:
                row.append(sample.z[i])
            writer.writerow(row)
    with open(args.out + ".truth.json", "w", encoding="utf-8") as fh:
        json.dump(
            {"design": spec, "n": args.n, "seed": args.seed},
            fh,
            sort_keys=True,
            indent=2,
        )
        fh.write("\n")
    report["bounds"] = {"written": args.out, "rows": args.n}
    report["digest"] = {"rows": args.n, "weight_total": 1.0}
    return EXIT_OK


_OBJECTIVES = {
    "p00": (1, 0, 0, 0),
    "p01": (0, 1, 0, 0),
    "p10": (0, 0, 1, 0),
    "p11": (0, 0, 0, 1),
    "ey0": (0, 0, 1, 1),
    "ey1": (0, 1, 0, 1),
}


def _cmd_oracle(args, report):
    if args.objective:
        if args.cells:
            obj = json.loads(args.cells)
            if "q00" in obj:
                table = InstrumentTable.from_cells({"z0": _cells_from_json(args.cells)})
            else:
                table = InstrumentTable.from_cells(
                    {
                        z: validate_cells(c["q00"], c["q01"], c["q10"], c["q11"])
                        for z, c in obj.items()
                    }
                )
        else:
            sample = _load_sample(args)
            report["digest"] = _digest(args, sample)
            table = _table_from_sample(sample)
        res = oracle.response_type_lp(table, _OBJECTIVES[args.objective])
        report["bounds"] = {args.objective: res.to_dict()}
        return EXIT_OK
    if not args.cells:
        raise InputError("oracle needs --cells or --objective with a data source")
    q = _cells_from_json(args.cells)
    poly = oracle.artstein_set(q, variant=args.variant)
    report["bounds"] = {
        "variant": args.variant,
        "halfspaces": [{"a": list(a), "b": b} for a, b in poly.halfspaces],
        "feasible": poly.is_feasible(),
    }
    return EXIT_OK


_DISPATCH = {
    "binary": _cmd_binary,
    "generalized": _cmd_generalized,
    "functional": _cmd_functional,
    "iqr": _cmd_iqr,
    "infer": _cmd_infer,
    "simulate": _cmd_simulate,
    "oracle": _cmd_oracle,
}


def _emit(report: dict, args) -> None:
    if getattr(args, "format", "json") == "csv" and "bounds" in report:
        lines = ["name,lo,hi"]
        for name, val in sorted(report["bounds"].items()):
            if isinstance(val, dict) and "lo" in val:
                lines.append(f"{name},{val['lo']},{val['hi']}")
        text = "\n".join(lines) + "\n"
    else:
        text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if getattr(args, "out", None) and args.cmd != "simulate":
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run(argv) -> int:
    parser = _make_parser()
    try:
        args = parser.parse_args(argv)
    except InputError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    report = {
        "command": list(argv),
        "digest": {"rows": 0, "weight_total": 1.0},
        "seed": args.seed,
        "bounds": {},
        "findings": {"model_rejected": False, "reasons": []},
    }
    try:
        code = _DISPATCH[args.cmd](args, report)
    except InputError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    except (Infeasible, OutcomeInstrumentDependence) as exc:
        report["findings"] = {"model_rejected": True, "reasons": [str(exc)]}
        _emit(report, args)
        return EXIT_REJECTED
    except RoyBoundsError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    _emit(report, args)
    return code


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
