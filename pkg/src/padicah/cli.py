"""Command-line front end for grid dumps, recovery runs, and the example.

Subcommands: systems, recover, check-family, counterexample, decompose.
Shared flags on every subcommand: --grid (grid JSON file), --out (output
path, default stdout), --format {json,csv}, --threads (falls back to the
PADIC_THREADS variable, then 1), --tolerance (verdict tolerance where a
command has one).

Exit codes: 0 when the command's verdicts pass, 1 for unusable input
(missing files, parse errors, empty windows), 2 when a requested verdict
fails; failed-verdict reports are still written.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from .errors import ConfigMismatch
from .grid import Cell, GridConfig, cell_from_json_dict, decompose_box, full_cube
from .parallel import ENV_THREADS, resolve_threads
from .reports import SCHEMA_VERSION, canonical_json, cell_json, encode_value, rational_pair


def _load_json(path: str):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _emit(text: str, out_path) -> None:
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def _parse_indices(raw: str, dim: int) -> list[tuple[int, ...]]:
    """Index lists: "3", "0,2,5", "0..7" (1-D), or "1:2,0:3" for d >= 2."""
    out = []
    for part in raw.split(","):
        part = part.strip()
        if ".." in part:
            if dim != 1:
                raise ValueError("index ranges like 0..7 need a one-dimensional grid")
            lo, hi = part.split("..", 1)
            out.extend((n,) for n in range(int(lo), int(hi) + 1))
        elif ":" in part:
            vec = tuple(int(x) for x in part.split(":"))
            if len(vec) != dim:
                raise ValueError(f"index {part!r} has {len(vec)} entries, grid has {dim}")
            out.append(vec)
        else:
            if dim != 1:
                raise ValueError(f"index {part!r} has 1 entry, grid has {dim}; use a:b form")
            out.append((int(part),))
    if not out:
        raise ValueError("empty index list")
    return out


def _parse_box(raw: str, cfg: GridConfig) -> Cell:
    """Box syntax: "rank:index" per dimension, comma-separated; "full" works."""
    if raw.strip() == "full":
        return full_cube(cfg.dim)
    ranks, indices = [], []
    parts = raw.split(",")
    if len(parts) != cfg.dim:
        raise ValueError(f"box {raw!r} has {len(parts)} dimensions, grid has {cfg.dim}")
    for part in parts:
        bits = part.strip().split(":")
        if len(bits) != 2:
            raise ValueError(f"box component {part!r} is not rank:index")
        ranks.append(int(bits[0]))
        indices.append(int(bits[1]))
    cell = Cell(tuple(ranks), tuple(indices))
    cell.validate(cfg)
    return cell


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _re_im_strings(v) -> tuple[str, str]:
    if isinstance(v, complex):
        return repr(v.real), repr(v.imag)
    if isinstance(v, float):
        return repr(v), repr(0.0)
    return str(v), "0"


# ---------------------------------------------------------------------------
# systems


def cmd_systems(args) -> int:
    from .systems import price_haar_matrix, tensor_haar_step, tensor_price_step

    if args.grid is None:
        return _fail("systems needs --grid")
    cfg = GridConfig.from_json_dict(_load_json(args.grid))
    wants_tables = args.haar is not None or args.price is not None
    if not wants_tables and args.gamma_block is None:
        return _fail("systems needs --haar, --price, or --gamma-block")
    if args.format == "csv" and wants_tables and args.gamma_block is not None:
        return _fail("csv output covers either tables or a gamma block, not both")

    tables = []
    if args.haar is not None:
        for nvec in _parse_indices(args.haar, cfg.dim):
            tables.append(("haar", nvec, tensor_haar_step(cfg, nvec)))
    if args.price is not None:
        for kvec in _parse_indices(args.price, cfg.dim):
            tables.append(("price", kvec, tensor_price_step(cfg, kvec)))

    blocks = []
    if args.gamma_block is not None:
        for j in range(cfg.dim):
            blocks.append((j, args.gamma_block, price_haar_matrix(cfg.seqs[j], args.gamma_block)))

    if args.format == "csv":
        if wants_tables:
            if cfg.dim == 1:
                header = ["flat_index", "cell_lo", "cell_hi", "re", "im"]
            else:
                header = (
                    ["flat_index"]
                    + [f"cell_lo_{j}" for j in range(cfg.dim)]
                    + [f"cell_hi_{j}" for j in range(cfg.dim)]
                    + ["re", "im"]
                )
            rows = []
            for _, nvec, sf in tables:
                label = str(nvec[0]) if cfg.dim == 1 else ":".join(map(str, nvec))
                for cell, value in zip(sf.cells, sf.values):
                    lo = [str(cell.start(cfg, j)) for j in range(cfg.dim)]
                    hi = [str(cell.end(cfg, j)) for j in range(cfg.dim)]
                    re, im = _re_im_strings(value)
                    rows.append([label, *lo, *hi, re, im])
            _emit(_csv_text(header, rows), args.out)
        else:
            rows = []
            for j, t, mat in blocks:
                for r in range(mat.shape[0]):
                    for c in range(mat.shape[1]):
                        rows.append([j, t, r, c, repr(float(mat[r, c].real)), repr(float(mat[r, c].imag))])
            _emit(_csv_text(["dim", "block", "row", "col", "re", "im"], rows), args.out)
        return 0

    doc = {"grid": cfg.to_json_dict(), "schema_version": SCHEMA_VERSION}
    if tables:
        doc["tables"] = [
            {
                "cells": [cell_json(c) for c in sf.cells],
                "index": list(nvec),
                "system": system,
                "values": [encode_value(v) for v in sf.values],
            }
            for system, nvec, sf in tables
        ]
    if blocks:
        doc["gamma_blocks"] = [
            {
                "block": t,
                "dim": j,
                "matrix": [
                    [{"im": mat[r, c].imag, "re": mat[r, c].real} for c in range(mat.shape[1])]
                    for r in range(mat.shape[0])
                ],
            }
            for j, t, mat in blocks
        ]
    _emit(canonical_json(doc), args.out)
    return 0


# ---------------------------------------------------------------------------
# recover


def cmd_recover(args) -> int:
    from .integration import check_family, family_from_json_dict
    from .recovery import (
        gamma_path_reference,
        recover_additive,
        recover_haar_coeff,
        recover_price_coeff,
    )
    from .series import (
        AdditiveFn,
        coeffs_from_json_dict,
        haar_coeffs_from_price,
        price_coeffs_from_haar,
    )
    from .systems import UnitValue

    if args.format == "csv":
        return _fail("recovery reports are JSON only")
    if args.series is None or args.family is None:
        return _fail("recover needs --series and --family")
    coeffs = coeffs_from_json_dict(_load_json(args.series))
    fam = family_from_json_dict(_load_json(args.family))
    if coeffs.cfg != fam.cfg:
        raise ConfigMismatch("series and family files use different grids")
    if args.grid is not None:
        cfg = GridConfig.from_json_dict(_load_json(args.grid))
        if cfg != coeffs.cfg:
            raise ConfigMismatch("--grid disagrees with the series file")
    threads = resolve_threads(args.threads)
    family_report = check_family(fam)

    def as_value(coeff):
        return coeff.as_number() if isinstance(coeff, UnitValue) else coeff

    if args.mode == "additive":
        box = _parse_box(args.box, coeffs.cfg) if args.box else full_cube(coeffs.cfg.dim)
        tol = args.tolerance if args.tolerance is not None else 1e-9
        report = recover_additive(
            AdditiveFn.from_series(coeffs), fam, box=box, tol=tol, threads=threads
        )
        doc = report.to_json_dict()
        doc["family"] = family_report.to_json_dict()
        _emit(canonical_json(doc), args.out)
        return 0 if report.passes and family_report.passes else 2

    if args.index is None:
        return _fail(f"mode {args.mode} needs --index")
    index = _parse_indices(args.index, coeffs.cfg.dim)
    if len(index) != 1:
        return _fail("recover takes exactly one --index")
    index = index[0]
    tol = args.tolerance if args.tolerance is not None else 1e-8
    f = AdditiveFn.from_series(coeffs).derivative()

    if args.mode == "haar":
        if coeffs.mode == "haar":
            reference = as_value(coeffs.get(index, 0))
        else:
            reference = gamma_path_reference(coeffs, index)
        report = recover_haar_coeff(f, index, fam, reference=reference, tol=tol, threads=threads)
        doc = report.to_json_dict()
    else:
        if coeffs.mode == "price":
            reference = as_value(coeffs.get(index, 0))
            haar_side = haar_coeffs_from_price(coeffs)
        else:
            reference = gamma_path_reference(coeffs, index)
            haar_side = coeffs
        report = recover_price_coeff(f, index, fam, reference=reference, tol=tol, threads=threads)
        gamma_ref = as_value(price_coeffs_from_haar(haar_side).get(index, 0))
        doc = report.to_json_dict()
        doc["gamma_reference"] = encode_value(gamma_ref)
        doc["gamma_error"] = abs(complex(report.estimates[-1]) - complex(gamma_ref))
    doc["family"] = family_report.to_json_dict()
    _emit(canonical_json(doc), args.out)
    return 0 if report.passes and family_report.passes else 2


# ---------------------------------------------------------------------------
# check-family


def cmd_check_family(args) -> int:
    from .integration import check_family, family_from_json_dict

    if args.format == "csv":
        return _fail("family reports are JSON only")
    if args.family is None:
        return _fail("check-family needs --family")
    fam = family_from_json_dict(_load_json(args.family))
    report = check_family(fam)
    _emit(canonical_json(report.to_json_dict()), args.out)
    return 0 if report.passes else 2


# ---------------------------------------------------------------------------
# counterexample


def cmd_counterexample(args) -> int:
    from .counterexample import ExampleSpec, end_to_end

    if args.format == "csv":
        return _fail("the counterexample report is JSON only")
    j_values = None
    if args.j is not None:
        j_values = tuple(int(p) for p in args.j.split(",") if p.strip())
    spec = ExampleSpec(n_max=args.nmax, j_values=j_values)
    report = end_to_end(spec, threads=resolve_threads(args.threads))
    _emit(canonical_json(report.to_json_dict()), args.out)
    return 0 if report.overall_pass else 2


# ---------------------------------------------------------------------------
# decompose


def cmd_decompose(args) -> int:
    if args.grid is None:
        return _fail("decompose needs --grid")
    if args.box is None:
        return _fail("decompose needs --box")
    cfg = GridConfig.from_json_dict(_load_json(args.grid))
    box = (
        cell_from_json_dict(_load_json(args.box))
        if args.box.endswith(".json")
        else _parse_box(args.box, cfg)
    )
    box.validate(cfg)
    parts = decompose_box(cfg, box)
    if args.format == "csv":
        if cfg.dim == 1:
            header = ["rank", "index", "lo", "hi"]
        else:
            header = (
                [f"rank_{j}" for j in range(cfg.dim)]
                + [f"index_{j}" for j in range(cfg.dim)]
                + [f"lo_{j}" for j in range(cfg.dim)]
                + [f"hi_{j}" for j in range(cfg.dim)]
            )
        rows = []
        for cell in parts:
            lo = [str(cell.start(cfg, j)) for j in range(cfg.dim)]
            hi = [str(cell.end(cfg, j)) for j in range(cfg.dim)]
            rows.append([*cell.ranks, *cell.indices, *lo, *hi])
        _emit(_csv_text(header, rows), args.out)
        return 0
    doc = {
        "box": cell_json(box),
        "cells": [cell_json(c) for c in parts],
        "count": len(parts),
        "grid": cfg.to_json_dict(),
        "measure": rational_pair(box.measure(cfg)),
        "rank": max(box.ranks),
        "schema_version": SCHEMA_VERSION,
    }
    _emit(canonical_json(doc), args.out)
    return 0


# ---------------------------------------------------------------------------
# wiring


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--grid", help="grid JSON file")
    sub.add_argument("--out", help="output file (default: stdout)")
    sub.add_argument("--format", choices=("json", "csv"), default="json")
    sub.add_argument(
        "--threads", type=int, default=None,
        help=f"worker threads (default: ${ENV_THREADS} or 1)",
    )
    sub.add_argument(
        "--tolerance", type=float, default=None,
        help="verdict tolerance for recover (coefficients 1e-8, cells 1e-9)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="padicah",
        description="exact multiresolution grids, orthonormal systems, truncated integrals",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("systems", help="dump basis functions or a gamma block")
    _add_common(p)
    p.add_argument("--haar", help='indices: "3", "0,2,5", "0..7", or "1:2" per dim')
    p.add_argument("--price", help="indices, same syntax as --haar")
    p.add_argument("--gamma-block", type=int, help="dump the change-of-basis block t")
    p.set_defaults(func=cmd_systems)

    p = subs.add_parser("recover", help="recover a coefficient or cell value")
    _add_common(p)
    p.add_argument("--series", help="coefficient JSON file")
    p.add_argument("--family", help="cutoff family JSON file")
    p.add_argument("--mode", choices=("haar", "price", "additive"), required=True)
    p.add_argument("--index", help="target index for coefficient modes")
    p.add_argument("--box", help='target cell "rank:index[,rank:index...]" or "full"')
    p.set_defaults(func=cmd_recover)

    p = subs.add_parser("check-family", help="validate a cutoff family file")
    _add_common(p)
    p.add_argument("--family", help="cutoff family JSON file")
    p.set_defaults(func=cmd_check_family)

    p = subs.add_parser("counterexample", help="run the packaged example end to end")
    _add_common(p)
    p.add_argument("--nmax", type=int, default=5, help="rows of the construction (1..8)")
    p.add_argument("--j", help='right-edge exponents, e.g. "1,2,3"')
    p.set_defaults(func=cmd_counterexample)

    p = subs.add_parser("decompose", help="split a box into uniform cells")
    _add_common(p)
    p.add_argument("--box", help='cell "rank:index[,rank:index...]" or a JSON file')
    p.set_defaults(func=cmd_decompose)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        return _fail(f"missing file: {exc.filename}")
    except OSError as exc:
        return _fail(f"cannot read or write {exc.filename}: {exc.strerror}")
    except ValueError as exc:  # includes the package's own error types
        return _fail(str(exc))


if __name__ == "__main__":
    raise SystemExit(main())
