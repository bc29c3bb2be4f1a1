"""Command-line front end.

Input documents are JSON:

* tuple document: ``{"n": 2, "d": 3, "matrices": [M_1, ..., M_n]}`` with each
  M_i a list of rows of ``[re, im]`` pairs; optional ``"tolerances"``
  (``rank_tol``, ``eq_tol``), ``"labels"`` and, for invariant-to-factor,
  ``"subspace"`` (d rows of k ``[re, im]`` pairs spanning the subspace).
* operator document: ``{"n", "dim_in", "dim_out", "deg", "coeffs"}`` where
  ``coeffs`` is a coefficient dump (see ``MultiAnalyticOp.dump``).
* factorization document: ``{"theta1": <operator>, "theta2": <operator>}``
  with optional ``"N_w"``.

Exit codes: 0 computed, 1 input error, 2 undetermined or not converged.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time

import numpy as np

from . import __version__
from . import numerics as nm
from .errors import (FockModelError, IllConditioned, NotConverged, RankUnstable,
                     TruncationUnstable, Undetermined)
from .multianalytic import MultiAnalyticOp
from .words import Word

SCHEMA = "fockmodel-report/1"
EXIT_OK, EXIT_INPUT, EXIT_UNDETERMINED = 0, 1, 2
UNDETERMINED_ERRORS = (NotConverged, Undetermined, TruncationUnstable, RankUnstable, IllConditioned)


class InputError(ValueError):
    """Malformed input document; the message names the offending field."""


# ---------------------------------------------------------------- parsing

def _load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    try:
        return json.loads(text), text
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _matrix(rows, where, shape=None):
    if not isinstance(rows, list) or not rows and shape is None:
        raise InputError(f"{where}: expected a list of rows")
    out = []
    for i, row in enumerate(rows):
        if not isinstance(row, list):
            raise InputError(f"{where}[{i}]: expected a row of [re, im] pairs")
        vals = []
        for j, z in enumerate(row):
            if (not isinstance(z, list) or len(z) != 2
                    or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in z)):
                raise InputError(f"{where}[{i}][{j}]: expected [re, im]")
            if not all(math.isfinite(x) for x in z):
                raise InputError(f"{where}[{i}][{j}]: non-finite entry")
            vals.append(complex(z[0], z[1]))
        out.append(vals)
    if len({len(r) for r in out}) > 1:
        raise InputError(f"{where}: ragged rows")
    a = np.array(out, dtype=complex).reshape(len(out), len(out[0]) if out else 0)
    if shape is not None and a.shape != shape:
        raise InputError(f"{where}: shape {a.shape}, expected {shape}")
    return a


def _tolerance(doc, where):
    given = doc.get("tolerances") or {}
    if not isinstance(given, dict):
        raise InputError(f"{where}.tolerances: expected an object")
    base = nm.Tolerance()
    try:
        return nm.Tolerance(rank_tol=float(given.get("rank_tol", base.rank_tol)),
                            eq_tol=float(given.get("eq_tol", base.eq_tol)))
    except (TypeError, ValueError) as exc:
        raise InputError(f"{where}.tolerances: {exc}") from None


def parse_tuple(doc, where="document"):
    """TupleDocument -> (matrices, Tolerance, labels)."""
    if not isinstance(doc, dict):
        raise InputError(f"{where}: expected an object")
    for key in ("n", "d", "matrices"):
        if key not in doc:
            raise InputError(f"{where}.{key}: missing")
    n, d = doc["n"], doc["d"]
    if not isinstance(n, int) or n < 1:
        raise InputError(f"{where}.n: expected a positive integer")
    if not isinstance(d, int) or d < 1:
        raise InputError(f"{where}.d: expected a positive integer")
    mats = doc["matrices"]
    if not isinstance(mats, list) or len(mats) != n:
        raise InputError(f"{where}.matrices: expected {n} matrices")
    T = [_matrix(m, f"{where}.matrices[{i}]", (d, d)) for i, m in enumerate(mats)]
    return T, _tolerance(doc, where), doc.get("labels")


def dump_tuple(T, tol=None, labels=None) -> dict:
    doc = {"n": len(T), "d": int(T[0].shape[0]), "matrices": [nm.to_pairs(t) for t in T]}
    if tol is not None:
        doc["tolerances"] = tol.as_dict()
    if labels is not None:
        doc["labels"] = labels
    return doc


def parse_operator(doc, where="operator") -> MultiAnalyticOp:
    if not isinstance(doc, dict):
        raise InputError(f"{where}: expected an object")
    for key in ("n", "dim_in", "dim_out", "coeffs"):
        if key not in doc:
            raise InputError(f"{where}.{key}: missing")
    try:
        n, di, do = int(doc["n"]), int(doc["dim_in"]), int(doc["dim_out"])
        coeffs = {}
        for k, rec in enumerate(doc["coeffs"]):
            key = Word.parse(rec["word"], n).letters
            ent = rec["entries"]
            if len(ent) != di * do:
                raise InputError(f"{where}.coeffs[{k}].entries: expected {di * do} pairs")
            coeffs[key] = _matrix([ent], f"{where}.coeffs[{k}].entries").reshape(do, di)
        return MultiAnalyticOp(n, di, do, coeffs, deg=doc.get("deg"))
    except InputError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{where}: {exc}") from None


def dump_operator(op: MultiAnalyticOp) -> dict:
    return {"n": op.n, "dim_in": op.dim_in, "dim_out": op.dim_out, "deg": op.deg,
            "coeffs": op.dump()}


# ---------------------------------------------------------------- reports

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        v = float(x)
        return v if math.isfinite(v) else repr(v)
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, np.ndarray):
        if np.iscomplexobj(x):
            return nm.to_pairs(x) if x.ndim == 2 else [_jsonable(v) for v in x]
        return _jsonable(x.tolist())
    if isinstance(x, nm.Subspace):
        return {"dim": x.dim, "basis": nm.to_pairs(x.basis) if x.dim else []}
    if isinstance(x, MultiAnalyticOp):
        return dump_operator(x)
    if hasattr(x, "as_dict"):
        return _jsonable(x.as_dict())
    return x if x is None or isinstance(x, str) else str(x)


def _human(obj, indent=0) -> str:
    pad = "  " * indent
    lines = []
    if isinstance(obj, dict):
        width = max((len(str(k)) for k in obj), default=0)
        for k in sorted(obj):
            v = obj[k]
            if isinstance(v, (dict, list)) and v and not _is_flat(v):
                lines.append(f"{pad}{k}:")
                lines.append(_human(v, indent + 1))
            else:
                lines.append(f"{pad}{str(k).ljust(width)}  {_fmt(v)}")
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            if isinstance(v, (dict, list)) and not _is_flat(v):
                lines.append(f"{pad}[{i}]")
                lines.append(_human(v, indent + 1))
            else:
                lines.append(f"{pad}[{i}] {_fmt(v)}")
    else:
        lines.append(pad + _fmt(obj))
    return "\n".join(lines)


def _is_flat(v):
    if isinstance(v, dict):
        return False
    return all(not isinstance(x, (dict, list)) for x in v) and len(v) <= 8


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, list):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return json.dumps(v) if isinstance(v, str) else str(v)


def render(report: dict, fmt: str) -> str:
    if fmt == "machine":
        return json.dumps(report, sort_keys=True, indent=2) + "\n"
    return _human(report) + "\n"


# ---------------------------------------------------------------- commands

def _tuple_input(args):
    doc, _ = _load_json(args.input)
    T, tol, labels = parse_tuple(doc, args.input)
    if args.tol is not None:
        tol = nm.Tolerance(rank_tol=tol.rank_tol, eq_tol=args.tol)
    return doc, T, tol


def _factor_input(path, args):
    doc, _ = _load_json(path)
    if not isinstance(doc, dict) or "theta1" not in doc or "theta2" not in doc:
        raise InputError(f"{path}: expected theta1 and theta2")
    t1 = parse_operator(doc["theta1"], f"{path}.theta1")
    t2 = parse_operator(doc["theta2"], f"{path}.theta2")
    N_w = args.deg if args.deg is not None else doc.get("N_w")
    tol = _tolerance(doc, path)
    if args.tol is not None:
        tol = nm.Tolerance(rank_tol=tol.rank_tol, eq_tol=args.tol)
    return doc, t1, t2, N_w, tol


def cmd_validate(args):
    from .rowcontraction import RowContraction, phi
    doc, T, tol = _tuple_input(args)
    d = T[0].shape[0]
    gap = np.linalg.eigvalsh(nm.hermitize(np.eye(d) - phi(T, np.eye(d))))
    ok = True
    try:
        RowContraction(T, tol)
    except FockModelError:
        ok = False
    return doc, tol, {}, {"row_contraction": ok, "min_defect_eigenvalue": float(gap.min()),
                          "row_norm": nm.opnorm(np.hstack(T)), "n": len(T), "d": d,
                          "roundtrip_lossless": all(
                              np.array_equal(a, b) for a, b in zip(parse_tuple(dump_tuple(T))[0], T))}


def cmd_classify(args):
    from .rowcontraction import classify_tuple
    doc, T, tol = _tuple_input(args)
    cls = classify_tuple(T, args.horizon, tol)
    return doc, tol, {"horizon": args.horizon}, cls.as_dict()


def cmd_charfn(args):
    from .charfn import char_fn
    from .multianalytic import classify, intertwining_defect
    doc, T, tol = _tuple_input(args)
    deg = 6 if args.deg is None else args.deg
    th = char_fn(T, deg, tol)
    c = classify(th, tol=tol)
    return doc, tol, {"deg": deg}, {"theta": dump_operator(th), "classification": c.as_dict(),
                                    "intertwining_defect": intertwining_defect(th, deg + 1)}


def cmd_dilate(args):
    from .charfn import char_fn, char_fn_geometric
    from .dilation import build_dilation
    from .multianalytic import coefficient_distance
    doc, T, tol = _tuple_input(args)
    N = 4 if args.deg is None else args.deg
    ds = build_dilation(T, N, tol)
    geo = char_fn_geometric(ds, N - 1, tol)
    alg = char_fn(T, N - 1, tol)
    return doc, tol, {"N": N}, {"checks": ds.checks, "exact": ds.exact,
                                "dim_L": ds.L_basis.shape[1], "dim_L_star": ds.L_star_basis.shape[1],
                                "charfn_geometric_vs_algebraic": coefficient_distance(geo, alg)}


def cmd_wold(args):
    from .dilation import build_dilation, wold
    doc, T, tol = _tuple_input(args)
    N = 4 if args.deg is None else args.deg
    ds = build_dilation(T, N, tol, verify=False)
    res = wold(ds.V, tol, args.horizon)
    return doc, tol, {"N": N, "horizon": args.horizon}, {
        "dim_K": ds.dim, "cuntz_part_dim": res.residual.dim, "wandering_dim": res.wandering.dim,
        "iterations": res.iterations, "leakage": res.leakage}


def cmd_model(args):
    from .model import model_of_T
    doc, T, tol = _tuple_input(args)
    mo = model_of_T(T, N_w=args.deg, tol=tol)
    mdl = mo.model
    return doc, tol, {"N_w": mdl.space.N_w, "deg": mo.theta.deg, "moment_margin": mo.margin}, {
        "dim_H_bold": mdl.H_bold.dim, "checks": mdl.checks, "moment_residual": mo.moment_residual,
        "embedding_residual": mo.embedding_residual, "T_bold": [nm.to_pairs(t) for t in mdl.T]}


def cmd_factorize_check(args):
    from .factorization import build_X, regularity_shortcuts
    doc, t1, t2, N_w, tol = _factor_input(args.input, args)
    f = build_X(t1, t2, N_w, tol)
    sc = regularity_shortcuts(f, tol)
    return doc, tol, {"N_w": f.N_w, "probe_deg": f.probe_deg}, {
        "regular": f.regular, "regular_residual": f.regular_residual,
        "isometry_residual": f.isometry_residual, "ranks": list(f.ranks), "shortcuts": sc}


def cmd_invariant_to_factor(args):
    from .factorization import subspace_round_trip
    doc, T, tol = _tuple_input(args)
    if "subspace" not in doc:
        raise InputError(f"{args.input}.subspace: missing")
    d = T[0].shape[0]
    B = _matrix(doc["subspace"], f"{args.input}.subspace") if doc["subspace"] else np.zeros((d, 0))
    if B.shape[0] != d:
        raise InputError(f"{args.input}.subspace: expected {d} rows")
    H1 = nm.orthonormalize(B, tol) if B.shape[1] else nm.Subspace.zero(d)
    rt = subspace_round_trip(T, H1, args.deg, tol)
    f = rt.built.factorization
    return doc, tol, {"N": rt.built.dilation.N, "N_w": f.N_w, "valid_degree": rt.built.valid_degree}, {
        "theta1": dump_operator(f.theta1), "theta2": dump_operator(f.theta2), "regular": f.regular,
        "product_residual": rt.product_residual, "round_trip_distance": rt.distance,
        "nontrivial_subspace": rt.nontrivial_subspace,
        "nontrivial_factorization": rt.nontrivial_factorization}


def cmd_factor_to_invariant(args):
    from .factorization import build_X, subspaces_from_factorization
    doc, t1, t2, N_w, tol = _factor_input(args.input, args)
    f = build_X(t1, t2, N_w, tol)
    sp = subspaces_from_factorization(f, tol)
    return doc, tol, {"N_w": f.N_w}, {
        "dim_H_bold": sp.model.H_bold.dim, "dim_H1": sp.H1.dim, "dim_H2": sp.H2.dim,
        "checks": sp.checks, "H1_in_model": sp.in_model(sp.H1)}


def cmd_compare_factors(args):
    from .factorization import build_X, compare_factorizations
    doc, t1, t2, N_w, tol = _factor_input(args.input, args)
    doc2, s1, s2, N_w2, _ = _factor_input(args.other, args)
    N = N_w if N_w is not None else N_w2
    if N is None:
        N = max(t1.deg + t2.deg, s1.deg + s2.deg) + 2
    c = compare_factorizations(build_X(t1, t2, N, tol), build_X(s1, s2, N, tol), tol)
    return {"first": doc, "second": doc2}, tol, {"N_w": N}, {
        "relation": c.relation, "psi": dump_operator(c.psi), "residual": c.residual,
        "psi_unitary_constant": c.psi_unitary_constant}


def cmd_inner_outer(args):
    from .charfn import char_fn, charfn_degree
    from .multianalytic import inner_outer_factorize
    doc, _ = _load_json(args.input)
    if isinstance(doc, dict) and "coeffs" in doc:
        op = parse_operator(doc, args.input)
        tol = _tolerance(doc, args.input)
        if args.tol is not None:
            tol = nm.Tolerance(rank_tol=tol.rank_tol, eq_tol=args.tol)
    else:
        doc, T, tol = _tuple_input(args)
        deg = charfn_degree(T, tol=tol)
        op = char_fn(T, max(deg, 1) if deg is not None else 8, tol)
    io = inner_outer_factorize(op, args.deg, tol)
    return doc, tol, {"N_w": io.N_w}, {
        "inner": dump_operator(io.inner), "outer": dump_operator(io.outer),
        "wandering_dim": io.wandering_dim, "product_residual": io.product_residual,
        "inner_defect": io.inner_defect, "outer_residual": io.outer_residual}


def cmd_similarity(args):
    from .similarity import similarity_to_cuntz
    doc, T, tol = _tuple_input(args)
    rep = similarity_to_cuntz(T, args.horizon, tol)
    return doc, tol, {"horizon": args.horizon}, rep.as_dict()


COMMANDS = {
    "validate": (cmd_validate, "check a tuple document and the row-contraction condition"),
    "classify": (cmd_classify, "pure / C1 / coisometric / c.n.c. flags"),
    "charfn": (cmd_charfn, "characteristic function coefficients up to --deg"),
    "dilate": (cmd_dilate, "truncated minimal isometric dilation at --deg N"),
    "wold": (cmd_wold, "Wold decomposition of the truncated dilation"),
    "model": (cmd_model, "functional model of a c.n.c. tuple"),
    "factorize-check": (cmd_factorize_check, "X isometry and regularity of theta2 * theta1"),
    "invariant-to-factor": (cmd_invariant_to_factor, "factorization from a joint invariant subspace"),
    "factor-to-invariant": (cmd_factor_to_invariant, "model subspaces of a regular factorization"),
    "compare-factors": (cmd_compare_factors, "compare two factorizations of the same operator"),
    "inner-outer": (cmd_inner_outer, "inner-outer factorization of an operator or char. function"),
    "similarity": (cmd_similarity, "similarity to a Cuntz row isometry"),
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fockmodel", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, (_, helptext) in COMMANDS.items():
        s = sub.add_parser(name, help=helptext)
        s.add_argument("input", help="input JSON document")
        if name == "compare-factors":
            s.add_argument("other", help="second factorization document")
        s.add_argument("--deg", "-N", type=int, default=None, help="truncation degree")
        s.add_argument("--tol", type=float, default=None, help="eq_tol override")
        s.add_argument("--horizon", type=int, default=200, help="iteration horizon")
        s.add_argument("--out", default=None, help="write the report here instead of stdout")
        s.add_argument("--format", choices=("human", "machine"), default="human")
    return p


def _digest(doc) -> str:
    blob = json.dumps(_jsonable(doc), sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def run(argv) -> tuple:
    """Parse arguments and execute; returns (exit code, report dict, format, out path)."""
    args = build_parser().parse_args(argv)
    fn = COMMANDS[args.command][0]
    start = time.perf_counter()
    report = {"schema": SCHEMA, "command": args.command, "version": __version__}
    code = EXIT_OK
    try:
        doc, tol, margins, result = fn(args)
        report.update({"inputs_digest": _digest(doc), "tolerances": tol.as_dict(),
                       "margins": margins, "result": result, "status": "computed"})
    except InputError as exc:
        code = EXIT_INPUT
        report.update({"status": "input error", "error": str(exc)})
    except UNDETERMINED_ERRORS as exc:
        code = EXIT_UNDETERMINED
        report.update({"status": "undetermined", "error": f"{type(exc).__name__}: {exc}"})
    except (FockModelError, ValueError) as exc:
        code = EXIT_INPUT
        report.update({"status": "precondition failed", "error": f"{type(exc).__name__}: {exc}"})
    if code == EXIT_OK and isinstance(report["result"], dict) and report["result"].get("similar") is None \
            and args.command == "similarity":
        code = EXIT_UNDETERMINED
    if "tolerances" not in report:
        try:
            report["tolerances"] = nm.Tolerance(**({} if args.tol is None else {"eq_tol": args.tol})).as_dict()
        except ValueError:
            report["tolerances"] = None
    report["wall_time"] = round(time.perf_counter() - start, 6)
    return code, _jsonable(report), args.format, args.out


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        code, report, fmt, out = run(argv)
    except SystemExit as exc:       # argparse usage errors
        return EXIT_INPUT if exc.code else 0
    text = render(report, fmt)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
