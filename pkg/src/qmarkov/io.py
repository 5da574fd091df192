"""Self-describing JSON files for operators, distributions, testers and manifests.

Every file is an object with ``format_version`` "1" and a ``kind``. Matrices
are flat lists of ``[re, im]`` pairs, row-major over the big index (first
factor most significant).
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .classical_process import BlockPartition, JointDistribution
from .quantum_maps import InstrumentSequence
from .tensor_core import FactorError, FactorLabel, LabeledOperator

FORMAT_VERSION = "1"


class ParseError(ValueError):
    pass


def _num(x: float) -> float:
    # 17 significant digits round-trips every double
    return float(format(float(x), ".17g"))


def operator_to_dict(op: LabeledOperator) -> dict:
    flat = op.matrix.reshape(-1)
    return {
        "format_version": FORMAT_VERSION,
        "kind": "operator",
        "factors": [{"name": f.name, "dim": f.dim} for f in op.factors],
        "matrix": [[_num(z.real), _num(z.imag)] for z in flat],
    }


def _require(d: dict, key: str, kind: str):
    if key not in d:
        raise ParseError(f"{kind} file is missing {key!r}")
    return d[key]


def _check_header(d, kind: str) -> None:
    if not isinstance(d, dict):
        raise ParseError("top-level JSON value must be an object")
    version = _require(d, "format_version", kind)
    if str(version) != FORMAT_VERSION:
        raise ParseError(f"unsupported format_version {version!r}")
    if d.get("kind", kind) != kind:
        raise ParseError(f"expected a {kind!r} file, got {d.get('kind')!r}")


def operator_from_dict(d: dict) -> LabeledOperator:
    _check_header(d, "operator")
    try:
        factors = tuple(FactorLabel(str(f["name"]), int(f["dim"])) for f in _require(d, "factors", "operator"))
        entries = np.array(_require(d, "matrix", "operator"), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed operator: {exc}") from exc
    dim = int(np.prod([f.dim for f in factors], dtype=np.int64))
    if entries.shape != (dim * dim, 2):
        raise ParseError(f"matrix needs {dim * dim} [re, im] pairs, got array of shape {entries.shape}")
    try:
        return LabeledOperator(factors, (entries[:, 0] + 1j * entries[:, 1]).reshape(dim, dim))
    except FactorError as exc:
        raise ParseError(str(exc)) from exc


def distribution_to_dict(dist: JointDistribution) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": "distribution",
        "alphabet_sizes": list(dist.alphabet_sizes),
        "table": [_num(x) for x in dist.table.reshape(-1)],
    }


def distribution_from_dict(d: dict) -> JointDistribution:
    _check_header(d, "distribution")
    sizes = [int(s) for s in _require(d, "alphabet_sizes", "distribution")]
    table = np.array(_require(d, "table", "distribution"), dtype=float)
    if table.size != int(np.prod(sizes)):
        raise ParseError(f"table has {table.size} entries, alphabet sizes {sizes} need {int(np.prod(sizes))}")
    try:
        return JointDistribution(table.reshape(sizes))
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def tester_to_dict(seq: InstrumentSequence) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": "tester",
        "name": seq.name,
        "elements": [
            {"label": label, **{k: v for k, v in operator_to_dict(e).items() if k in ("factors", "matrix")}}
            for label, e in seq
        ],
    }


def tester_from_dict(d: dict) -> InstrumentSequence:
    _check_header(d, "tester")
    elements, labels = [], []
    for k, e in enumerate(_require(d, "elements", "tester")):
        elements.append(operator_from_dict({"format_version": FORMAT_VERSION, **e, "kind": "operator"}))
        labels.append(str(e.get("label", k)))
    try:
        return InstrumentSequence(tuple(elements), tuple(labels), str(d.get("name", "")))
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def partition_to_dict(part: BlockPartition) -> dict:
    return {"history": list(part.history), "memory": list(part.memory), "future": list(part.future)}


def dumps(d: dict) -> str:
    return json.dumps(d, indent=1, sort_keys=True) + "\n"


def write_json(path, d: dict) -> None:
    Path(path).write_text(dumps(d))


def read_json(path) -> dict:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc


def load(path):
    """Read any supported file and return the parsed object."""
    d = read_json(path)
    kind = d.get("kind", "operator") if isinstance(d, dict) else None
    readers = {
        "operator": operator_from_dict,
        "distribution": distribution_from_dict,
        "tester": tester_from_dict,
    }
    if kind not in readers:
        raise ParseError(f"{path}: unsupported kind {kind!r}")
    return readers[kind](d)


def digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
