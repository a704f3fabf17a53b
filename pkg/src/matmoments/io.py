"""JSON encodings for matrices, moment/canonical sequences and NDJSON batches.

Matrix: ``{"field": "real"|"complex", "p": int, "re": [...], "im": [...]}`` with
row-major ``p*p`` arrays; ``"im"`` is omitted for the real field.
"""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Iterator

import numpy as np

from .canonical import CanonicalSequence
from .linalg import Field, as_symherm
from .moments import MomentSequence

__all__ = [
    "matrix_to_json",
    "matrix_from_json",
    "sequence_to_json",
    "sequence_from_json",
    "dumps",
    "write_atomic",
    "write_ndjson",
    "read_ndjson",
]


def matrix_to_json(M: np.ndarray, field: Field | str) -> dict[str, Any]:
    field = Field.coerce(field)
    M = np.asarray(M)
    out: dict[str, Any] = {"field": field.value, "p": int(M.shape[0]), "re": M.real.ravel().tolist()}
    if field is Field.COMPLEX:
        out["im"] = M.imag.ravel().tolist()
    return out


def matrix_from_json(obj: dict[str, Any]) -> np.ndarray:
    try:
        field = Field.coerce(obj["field"])
        p = int(obj["p"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", np.zeros(p * p)), dtype=float)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed matrix object: {exc}") from None
    if re.size != p * p or im.size != p * p:
        raise ValueError(f"matrix arrays must have p*p = {p * p} entries")
    if field is Field.REAL and "im" in obj and np.any(im != 0):
        raise ValueError("real matrix carries imaginary parts")
    M = re.reshape(p, p) if field is Field.REAL else (re + 1j * im).reshape(p, p)
    return as_symherm(M, field)


def sequence_to_json(seq: MomentSequence | CanonicalSequence) -> dict[str, Any]:
    key, arr = ("S", seq.S) if isinstance(seq, MomentSequence) else ("U", seq.U)
    return {
        "field": seq.field.value,
        "p": seq.p,
        "n": seq.n,
        key: [matrix_to_json(M, seq.field) for M in arr],
    }


def sequence_from_json(obj: dict[str, Any]) -> MomentSequence | CanonicalSequence:
    """Decode a moment (key ``"S"``) or canonical (key ``"U"``) sequence."""
    if "S" in obj:
        key, cls = "S", MomentSequence
    elif "U" in obj:
        key, cls = "U", CanonicalSequence
    else:
        raise ValueError('sequence object needs an "S" or "U" key')
    field = Field.coerce(obj.get("field", "real"))
    mats = [matrix_from_json(m) for m in obj[key]]
    if not mats:
        raise ValueError("empty sequence")
    if any(Field.coerce(m["field"]) is not field for m in obj[key]):
        raise ValueError("matrix fields disagree with the sequence field")
    arr = np.stack(mats)
    if "n" in obj and int(obj["n"]) != len(mats):
        raise ValueError(f'"n" = {obj["n"]} but {len(mats)} matrices given')
    if "p" in obj and int(obj["p"]) != arr.shape[-1]:
        raise ValueError(f'"p" = {obj["p"]} disagrees with matrix size {arr.shape[-1]}')
    return cls(field, arr)


def dumps(obj: Any) -> str:
    """Deterministic JSON text (sorted keys, shortest round-trip float repr)."""
    return json.dumps(obj, sort_keys=True, allow_nan=False)


def write_atomic(path: str | os.PathLike, text: str) -> None:
    """Write via a temporary file and rename, so no partial file is ever left behind."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_ndjson(path: str | os.PathLike, header: dict[str, Any], records: Iterable[dict[str, Any]]) -> None:
    lines = [dumps(header)] + [dumps(r) for r in records]
    write_atomic(path, "\n".join(lines) + "\n")


def read_ndjson(path: str | os.PathLike) -> tuple[dict[str, Any], Iterator[dict[str, Any]]]:
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty NDJSON file")
    return json.loads(lines[0]), (json.loads(ln) for ln in lines[1:])
