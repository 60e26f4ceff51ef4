"""The JSON matrix exchange format.

    {"states": N, "matrices": [[[...], ...], ...], "homogeneous": bool}

A homogeneous document lists exactly one matrix; otherwise one matrix per
time step, P(1) first.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .errors import InputFormatError, NegativeEntry, RowSumViolation
from .markov import MatrixSequence, StochasticMatrix, validate_stochastic

BUILTIN_PREFIX = "builtin:"


def builtin_names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("dilatron.data").iterdir() if p.name.endswith(".json"))


def read_text(source: str) -> str:
    if source.startswith(BUILTIN_PREFIX):
        name = source[len(BUILTIN_PREFIX):]
        try:
            return resources.files("dilatron.data").joinpath(f"{name}.json").read_text()
        except FileNotFoundError:
            raise InputFormatError(f"no bundled input {name!r}; have {builtin_names()}") from None
    return Path(source).read_text()


def parse_document(text: str) -> tuple[list[StochasticMatrix], bool]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise InputFormatError("top level must be an object")
    for key in ("states", "matrices", "homogeneous"):
        if key not in doc:
            raise InputFormatError(f"missing field {key!r}")
    n = doc["states"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise InputFormatError(f"field 'states': expected a positive integer, got {n!r}")
    homogeneous = doc["homogeneous"]
    if not isinstance(homogeneous, bool):
        raise InputFormatError(f"field 'homogeneous': expected a boolean, got {homogeneous!r}")
    mats = doc["matrices"]
    if not isinstance(mats, list) or not mats:
        raise InputFormatError("field 'matrices': expected a nonempty list")
    if homogeneous and len(mats) != 1:
        raise InputFormatError(f"field 'matrices': homogeneous input takes one matrix, got {len(mats)}")
    out = []
    for t, m in enumerate(mats):
        where = f"matrices[{t}]"
        if not isinstance(m, list) or len(m) != n:
            raise InputFormatError(f"{where}: expected {n} rows")
        for i, row in enumerate(m):
            if not isinstance(row, list) or len(row) != n:
                raise InputFormatError(f"{where}[{i}]: expected {n} entries")
            for j, v in enumerate(row):
                if not isinstance(v, (int, float)) or isinstance(v, bool):
                    raise InputFormatError(f"{where}[{i}][{j}]: expected a number, got {v!r}")
        try:
            out.append(validate_stochastic(m))
        except NegativeEntry as exc:
            raise NegativeEntry(exc.i, exc.j, exc.value, where) from None
        except RowSumViolation as exc:
            raise RowSumViolation(exc.i, exc.total, where) from None
    return out, homogeneous


def load_sequence(source: str, horizon: int | None = None) -> MatrixSequence:
    """Read a document into a MatrixSequence.

    ``horizon`` defaults to the matrix count for inhomogeneous input and to
    2 for homogeneous input.
    """
    mats, homogeneous = parse_document(read_text(source))
    if homogeneous:
        return MatrixSequence.constant(mats[0], 2 if horizon is None else horizon)
    seq = MatrixSequence.of(mats)
    return seq if horizon is None else seq.truncate(horizon)


def dump_sequence(seq: MatrixSequence) -> str:
    doc = {
        "states": seq.n,
        "matrices": [m.entries.tolist() for m in seq.matrices],
        "homogeneous": seq.homogeneous,
    }
    return json.dumps(doc, indent=2) + "\n"
