"""Command-line interface.

Exit codes: 0 success, 1 I/O error, 2 usage/domain/validation error,
3 statistical failure (``verify`` only).  Data goes to stdout or ``--out``;
diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from typing import Any

import numpy as np

from . import __version__
from .canonical import CanonicalSequence, canonical_to_moments, moments_to_canonical
from .ensembles import (
    BetaParams,
    RngState,
    sample_batch,
    sample_goe,
    sample_gue,
    sample_matrix_beta,
    sample_uniform_moment_space,
    sample_wishart,
)
from .errors import MatMomentsError
from .io import dumps, matrix_to_json, read_ndjson, sequence_from_json, sequence_to_json, write_atomic, write_ndjson
from .lab import ExperimentConfig, run_experiment, write_coordinates_csv
from .linalg import Field, Tolerance
from .moments import MomentSequence, arcsine_moments, clt_matrix_A, is_interior, log_volume

log = logging.getLogger("matmoments")

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_STAT = 0, 1, 2, 3

SAMPLE_KINDS = ("goe", "gue", "beta", "wishart", "uniform-moments")


class UsageError(Exception):
    pass


def _emit(obj: Any, out: str | None) -> None:
    text = dumps(obj) + "\n"
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def _tol(args) -> Tolerance:
    return Tolerance(rel=args.tol) if args.tol is not None else Tolerance()


def _load_json(path: str) -> Any:
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: invalid JSON ({exc})") from None


def cmd_volume(args) -> int:
    lv = log_volume(args.n, args.p, args.field)
    vol = math.exp(lv)
    _emit({"log_volume": lv, "volume": vol if vol >= sys.float_info.min else "underflow"}, args.out)
    return EXIT_OK


def cmd_arcsine(args) -> int:
    _emit({"k": args.k, "moments": arcsine_moments(args.k).tolist()}, args.out)
    return EXIT_OK


def cmd_clt_matrix(args) -> int:
    _emit({"k": args.k, "A": clt_matrix_A(args.k).tolist()}, args.out)
    return EXIT_OK


def _read_sequence(path: str, expected: type):
    try:
        seq = sequence_from_json(_load_json(path))
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None
    if not isinstance(seq, expected):
        want = "moment (\"S\")" if expected is MomentSequence else "canonical (\"U\")"
        raise UsageError(f"{path}: expected a {want} sequence")
    return seq


def cmd_map(args) -> int:
    S = _read_sequence(args.input, MomentSequence)
    _emit(sequence_to_json(moments_to_canonical(S, _tol(args))), args.out)
    return EXIT_OK


def cmd_unmap(args) -> int:
    U = _read_sequence(args.input, CanonicalSequence)
    _emit(sequence_to_json(canonical_to_moments(U)), args.out)
    return EXIT_OK


def cmd_check_interior(args) -> int:
    tol = _tol(args)
    with open(args.input) as fh:
        text = fh.read()
    try:
        obj = json.loads(text)
        records = [obj]
    except json.JSONDecodeError:
        header, rows = read_ndjson(args.input)
        records = list(rows)
        if not records:
            raise UsageError(f"{args.input}: no records after the header")
    flags = []
    for rec in records:
        try:
            seq = sequence_from_json(rec)
        except ValueError as exc:
            raise UsageError(f"{args.input}: {exc}") from None
        if not isinstance(seq, MomentSequence):
            raise UsageError(f"{args.input}: records must be moment sequences")
        flags.append(is_interior(seq, tol))
    if len(flags) == 1:
        result = {"interior": flags[0]}
    else:
        result = {"count": len(flags), "interior_count": sum(flags), "all_interior": all(flags)}
    _emit(result, args.out)
    return EXIT_OK


def _require(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"sample --kind {args.kind} requires {', '.join(missing)}")


def cmd_sample(args) -> int:
    kind, field, p = args.kind, Field.coerce(args.field), args.p
    params: dict[str, Any] = {"p": p}
    if kind == "goe":
        field = Field.REAL
        draw = lambda gen, size: sample_goe(p, gen, size)  # noqa: E731
    elif kind == "gue":
        field = Field.COMPLEX
        draw = lambda gen, size: sample_gue(p, gen, size)  # noqa: E731
    elif kind == "wishart":
        _require(args, "dof")
        params.update(field=field.value, dof=args.dof)
        sample_wishart(p, args.dof, field, np.random.default_rng(0))  # validate before any output
        draw = lambda gen, size: sample_wishart(p, args.dof, field, gen, size)  # noqa: E731
    elif kind == "beta":
        _require(args, "a", "b")
        bp = BetaParams(field, p, args.a, args.b)
        params.update(field=field.value, a=args.a, b=args.b)
        draw = lambda gen, size: sample_matrix_beta(bp, gen, size)  # noqa: E731
    else:
        _require(args, "n")
        params.update(field=field.value, n=args.n)
        draw = lambda gen, size: sample_uniform_moment_space(args.n, p, field, gen, size)  # noqa: E731
    if kind != "uniform-moments":
        params.setdefault("field", field.value)

    batch = sample_batch(draw, args.count, RngState(args.seed), f"sample/{kind}")
    header = {"kind": kind, "params": params, "seed": args.seed, "count": args.count}
    if kind == "uniform-moments":
        records = (sequence_to_json(MomentSequence(field, S)) for S in batch)
    else:
        records = (matrix_to_json(M, field) for M in batch)
    if args.out:
        write_ndjson(args.out, header, records)
    else:
        sys.stdout.write(dumps(header) + "\n")
        for r in records:
            sys.stdout.write(dumps(r) + "\n")
    log.info("wrote %d %s draws", args.count, kind)
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        config = ExperimentConfig.from_dict(_load_json(args.input))
    except MatMomentsError as exc:
        raise UsageError(f"{args.input}: {exc}") from None
    report = run_experiment(config)
    _emit(report.to_dict(include_timing=args.timing), args.out)
    if args.csv:
        write_coordinates_csv(args.csv, report)
    for name, ok in report.verdicts.items():
        log.log(logging.INFO if ok else logging.WARNING, "%-16s %s", name, "pass" if ok else "FAIL")
    log.info("wall time %.2fs", report.wall_time)
    return EXIT_OK if report.passed else EXIT_STAT


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="matmoments", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=func)
        sp.add_argument("--out", help="output file (default: stdout)")
        return sp

    sp = add("volume", cmd_volume, "log-volume of the moment space M_n")
    sp.add_argument("--n", type=_positive_int, required=True)
    sp.add_argument("--p", type=_positive_int, required=True)
    sp.add_argument("--field", choices=["real", "complex"], default="real")

    sp = add("arcsine", cmd_arcsine, "arcsine moments s_1..s_k")
    sp.add_argument("--k", type=_positive_int, required=True)

    sp = add("clt-matrix", cmd_clt_matrix, "lower-triangular matrix A of size k")
    sp.add_argument("--k", type=_positive_int, required=True)

    for name, func, help_ in (
        ("map", cmd_map, "moments -> canonical moments"),
        ("unmap", cmd_unmap, "canonical moments -> moments"),
        ("check-interior", cmd_check_interior, "interiority of moment sequence(s)"),
    ):
        sp = add(name, func, help_)
        sp.add_argument("--in", dest="input", required=True)
        sp.add_argument("--tol", type=float, help="relative eigenvalue floor (default 1e-10)")

    sp = add("sample", cmd_sample, "seeded draws as NDJSON")
    sp.add_argument("--kind", choices=SAMPLE_KINDS, required=True)
    sp.add_argument("--p", type=_positive_int, default=1)
    sp.add_argument("--n", type=_positive_int)
    sp.add_argument("--a", type=float)
    sp.add_argument("--b", type=float)
    sp.add_argument("--dof", type=float)
    sp.add_argument("--field", choices=["real", "complex"], default="real")
    sp.add_argument("--seed", type=_nonneg_int, default=0)
    sp.add_argument("--count", type=_nonneg_int, default=1)

    sp = add("verify", cmd_verify, "run a Monte Carlo experiment from a JSON config")
    sp.add_argument("--in", dest="input", required=True, help="experiment config (JSON)")
    sp.add_argument("--csv", help="also dump standardized coordinates as CSV")
    sp.add_argument("--timing", action="store_true", help="include wall time in the report")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (UsageError, MatMomentsError, ValueError) as exc:
        print(f"matmoments {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"matmoments {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
