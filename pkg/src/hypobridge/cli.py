"""Command-line front end: ``hypobridge {analyze,bridge,converge,export}``.

A model comes from ``--preset NAME[:d]`` or ``--model FILE``.  Model files are
JSON objects (TOML is read when the suffix is ``.toml``) with the schema::

    {"A": [[...], ...], "B": [[...], ...], "labels": [...], "rank_tol": 1e-10}

``labels`` and ``rank_tol`` are optional.  Exit codes: 0 success, 1 usage or
I/O problem, 2 invalid model, 3 numerical failure.
"""

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .bridge import bridge_law, sample_bridge
from .errors import (BadGrid, ModelError, ModelFileError, NumericError, UnknownPreset,
                     UnsupportedDimension)
from .fluct import convergence_report, fluctuation_law
from .matcore import DEFAULT_RANK_TOL
from .model import build_model, controllability_matrix, principal_part, u_blocks
from .presets import preset

EXIT_OK, EXIT_USAGE, EXIT_MODEL, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- model files

def _parse_matrix(raw, name):
    if not isinstance(raw, list) or not raw:
        raise ModelFileError(f"{name}: expected a non-empty list of rows")
    if not isinstance(raw[0], list):
        raw = [[v] for v in raw]  # a flat list is read as a column
    width = len(raw[0]) if isinstance(raw[0], list) else None
    out = []
    for i, row in enumerate(raw):
        if not isinstance(row, list):
            raise ModelFileError(f"{name}[{i}]: expected a list of numbers")
        if len(row) != width:
            raise ModelFileError(f"{name}[{i}]: row has {len(row)} entries, expected {width}")
        for j, v in enumerate(row):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ModelFileError(f"{name}[{i}][{j}]: {v!r} is not a number")
            if not math.isfinite(v):
                raise ModelFileError(f"{name}[{i}][{j}]: {v!r} is not finite")
        out.append([float(v) for v in row])
    return out


def _read_document(path):
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        try:
            return tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ModelFileError(f"{path}: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def load_model_file(path, rank_tol=None):
    """Parse a model file into a validated spec; ``rank_tol`` overrides the file."""
    doc = _read_document(path)
    if not isinstance(doc, dict):
        raise ModelFileError(f"{path}: top level must be an object")
    missing = [k for k in ("A", "B") if k not in doc]
    if missing:
        raise ModelFileError(f"{path}: missing key(s) {', '.join(missing)}")
    A = _parse_matrix(doc["A"], "A")
    B = _parse_matrix(doc["B"], "B")
    tol = rank_tol if rank_tol is not None else doc.get("rank_tol", DEFAULT_RANK_TOL)
    if isinstance(tol, bool) or not isinstance(tol, (int, float)) or not 0 < tol < 1:
        raise ModelFileError(f"{path}: rank_tol must be a number in (0, 1)")
    labels = doc.get("labels", [])
    if not isinstance(labels, list) or not all(isinstance(s, str) for s in labels):
        raise ModelFileError(f"{path}: labels must be a list of strings")
    if labels and len(labels) != len(A):
        raise ModelFileError(f"{path}: {len(labels)} labels for d = {len(A)}")
    return build_model(A, B, float(tol), labels)


def model_document(spec):
    doc = {"A": spec.A.tolist(), "B": spec.B.tolist()}
    if spec.labels:
        doc["labels"] = list(spec.labels)
    doc["rank_tol"] = spec.rel_tol
    return doc


def write_model_file(spec, path):
    """Write ``spec`` as JSON; floats use shortest round-trip repr."""
    Path(path).write_text(json.dumps(model_document(spec), indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- arguments

def parse_vector(text, d, name):
    if text is None:
        return np.zeros(d)
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"--{name}: expected comma-separated numbers, got {text!r}") from None
    if len(vals) != d or not all(math.isfinite(v) for v in vals):
        raise UsageError(f"--{name}: expected {d} finite numbers, got {text!r}")
    return np.array(vals)


def parse_grid(text):
    """``uniform:N`` (N points on [0, 1]) or an explicit comma list."""
    text = text.strip()
    if text.startswith("uniform:"):
        try:
            n = int(text.partition(":")[2])
        except ValueError:
            raise UsageError(f"--grid: bad point count in {text!r}") from None
        if n < 2:
            raise UsageError("--grid: uniform needs at least 2 points")
        return np.linspace(0.0, 1.0, n)
    try:
        g = np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise UsageError(f"--grid: expected 'uniform:N' or a comma list, got {text!r}") from None
    if g.size == 0 or np.any(g < 0) or np.any(g > 1) or np.any(np.diff(g) <= 0):
        raise UsageError("--grid: times must be strictly increasing in [0, 1]")
    return g


def parse_eps_list(text):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"--eps-list: expected comma-separated numbers, got {text!r}") from None
    if len(vals) < 3 or any(not v > 0 for v in vals) or np.any(np.diff(vals) >= 0):
        raise UsageError("--eps-list: need at least 3 positive, strictly decreasing values")
    return vals


def _positive(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be positive, got {text!r}")
    return v


def _count(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {text!r}")
    return v


def resolve_model(args):
    if args.model is not None:
        return load_model_file(args.model, args.rank_tol)
    spec = preset(args.preset).spec
    if args.rank_tol is not None:
        spec = build_model(spec.A, spec.B, args.rank_tol, spec.labels)
    return spec


def _columns(spec):
    return list(spec.labels) if spec.labels else [f"x{i + 1}" for i in range(spec.d)]


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _num(v):
    return repr(float(v))


# ---------------------------------------------------------------- commands

def _cond(M):
    return float(np.linalg.cond(M))


def cmd_analyze(args):
    spec = resolve_model(args)
    filt = spec.filt
    ub = u_blocks(spec, filt)
    law = fluctuation_law(ub)
    doc = {
        "d": spec.d,
        "m": spec.m,
        "n": filt.n,
        "dims": list(filt.dims),
        "labels": list(spec.labels),
        "rank_tol": spec.rel_tol,
        "basis": filt.basis.tolist(),
        "u_blocks": [u.tolist() for u in ub.blocks],
        "principal_part": principal_part(spec, filt).tolist(),
        "V": law.V.tolist(),
        "Vinv": law.Vinv.tolist(),
        "condition": {
            "V": _cond(law.V),
            "controllability": _cond(controllability_matrix(spec.A, spec.B, filt.n)),
        },
    }
    text = json.dumps(doc, indent=2)
    if args.out is None:
        print(text)
    else:
        (_out_dir(args) / "analysis.json").write_text(text + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_bridge(args):
    spec = resolve_model(args)
    d = spec.d
    x = parse_vector(args.x, d, "x")
    y = parse_vector(args.y, d, "y")
    grid = parse_grid(args.grid)
    # t = 0 is deterministic (the start point); the law lives on (0, 1]
    inner = grid[grid > 0]
    if inner.size == 0:
        raise UsageError("--grid: needs at least one time in (0, 1]")
    law = bridge_law(spec, args.eps, x, y, inner)
    paths = sample_bridge(law, args.paths, args.seed)
    mean = law.mean_path
    if grid[0] == 0:
        mean = np.vstack([x, mean])
        paths = np.concatenate([np.broadcast_to(x, (args.paths, 1, d)), paths], axis=1)

    out = _out_dir(args)
    cols = _columns(spec)
    _write_csv(out / "mean.csv", ["t"] + cols,
               ([_num(t)] + [_num(v) for v in row] for t, row in zip(grid, mean)))
    N = len(inner)
    cov_rows = (
        [_num(inner[a]), _num(inner[b]), cols[i], cols[j], _num(law.joint_cov[a * d + i, b * d + j])]
        for a in range(N) for b in range(N) for i in range(d) for j in range(d)
    )
    _write_csv(out / "cov.csv", ["t1", "t2", "row", "col", "value"], cov_rows)
    path_rows = ([str(p), _num(t)] + [_num(v) for v in paths[p, k]]
                 for p in range(args.paths) for k, t in enumerate(grid))
    _write_csv(out / "paths.csv", ["path", "t"] + cols, path_rows)
    return EXIT_OK


def cmd_converge(args):
    spec = resolve_model(args)
    eps_list = parse_eps_list(args.eps_list)
    grid = parse_grid(args.grid)
    x = parse_vector(args.x, spec.d, "x") if args.x is not None else None
    y = parse_vector(args.y, spec.d, "y") if args.y is not None else None
    report = convergence_report(spec, eps_list, grid, x, y)
    out = _out_dir(args)
    (out / "report.json").write_text(report.to_json(indent=2) + "\n", encoding="utf-8")
    _write_csv(out / "errors.csv", ["eps", "t1", "t2", "error"],
               ([_num(v) for v in row] for row in report.table_rows()))
    return EXIT_OK


def cmd_export(args):
    spec = resolve_model(args)
    if args.out is None:
        print(json.dumps(model_document(spec), indent=2))
    else:
        write_model_file(spec, args.out)
    return EXIT_OK


# ---------------------------------------------------------------- entry point

def build_parser():
    parser = _Parser(prog="hypobridge",
                     description="Bridges and small-time fluctuations of linear hypoelliptic diffusions.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add_model_args(p):
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--model", metavar="FILE", help="JSON or TOML model file")
        src.add_argument("--preset", metavar="NAME[:d]",
                         help="kolmogorov, ou_area, sec43 or iterated_kolmogorov[:d]")
        p.add_argument("--rank-tol", type=_positive, default=None,
                       help="relative rank tolerance (default 1e-10)")

    p = sub.add_parser("analyze", help="filtration, u-blocks, principal part and V")
    add_model_args(p)
    p.add_argument("--out", metavar="DIR", help="write analysis.json here instead of stdout")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("bridge", help="bridge mean, covariance and sampled paths as CSV")
    add_model_args(p)
    p.add_argument("--eps", type=_positive, required=True)
    p.add_argument("--x", metavar="V1,V2,...", help="start point (default 0)")
    p.add_argument("--y", metavar="V1,V2,...", help="end point (default 0)")
    p.add_argument("--grid", default="uniform:21", help="'uniform:N' or comma list")
    p.add_argument("--paths", type=_count, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", metavar="DIR", required=True)
    p.set_defaults(func=cmd_bridge)

    p = sub.add_parser("converge", help="rescaled-to-limit covariance errors over eps")
    add_model_args(p)
    p.add_argument("--eps-list", default="0.1,0.05,0.025,0.0125")
    p.add_argument("--grid", default="uniform:21")
    p.add_argument("--x", metavar="V1,V2,...", help="start point for the mean check (default 1)")
    p.add_argument("--y", metavar="V1,V2,...", help="end point for the mean check (default 1)")
    p.add_argument("--out", metavar="DIR", required=True)
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("export", help="write the model as a JSON model file")
    add_model_args(p)
    p.add_argument("--out", metavar="FILE", help="destination (default stdout)")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, BadGrid) as exc:
        print(f"hypobridge: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ModelError, UnknownPreset, UnsupportedDimension) as exc:
        print(f"hypobridge: invalid model: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except NumericError as exc:
        print(f"hypobridge: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"hypobridge: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
