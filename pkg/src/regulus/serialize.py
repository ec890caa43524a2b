"""File formats: matrix literals, sequence files, JSON reports and CSV tables.

A matrix literal is a JSON array of rows. Sequence files hold one record per
line, either a bare matrix literal or an object ``{"matrix": ..., "inverse":
..., "s": ...}`` where the optional inverse is trusted as exact and ``s`` is a
path parameter.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from regulus.errors import ParseError
from regulus.matrixcore import GroupElement, as_element, normalize


def fmt(x) -> str:
    """17 significant digits; ``inf``/``nan`` spelled out."""
    x = float(x)
    if not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return f"{x:.17g}"


def matrix_literal(m) -> str:
    """JSON array-of-rows with 17-digit entries."""
    m = np.asarray(m, dtype=float)
    return "[" + ",".join("[" + ",".join(fmt(v) for v in row) + "]" for row in m) + "]"


def _as_matrix(obj, line: int) -> np.ndarray:
    try:
        m = np.array(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(line, f"not a numeric matrix ({exc})") from None
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 2:
        raise ParseError(line, f"expected a square matrix of size >= 2, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ParseError(line, "matrix has non-finite entries")
    return m


def parse_record(text: str, line: int) -> dict:
    """One sequence-file line as ``{"matrix", "inverse", "s"}`` (missing keys are None)."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(line, f"invalid JSON: {exc.msg}") from None
    if isinstance(obj, dict):
        if "matrix" not in obj:
            raise ParseError(line, "record has no 'matrix' key")
        rec = {"matrix": _as_matrix(obj["matrix"], line), "inverse": None, "s": obj.get("s")}
        if obj.get("inverse") is not None:
            rec["inverse"] = _as_matrix(obj["inverse"], line)
        if rec["s"] is not None and not isinstance(rec["s"], (int, float)):
            raise ParseError(line, "'s' must be a number")
        return rec
    return {"matrix": _as_matrix(obj, line), "inverse": None, "s": None}


def read_records(path) -> list:
    """All records of a sequence file; blank lines are skipped.

    A file whose first non-blank character is ``[`` and that parses as one
    JSON array of matrices is also accepted.

    Raises
    ------
    ParseError
        With the 1-based line of the first bad record.
    """
    text = Path(path).read_text()
    stripped = text.strip()
    if stripped.startswith("[["):
        try:
            whole = json.loads(stripped)
        except json.JSONDecodeError:
            whole = None
        if isinstance(whole, list) and whole and isinstance(whole[0], list) \
                and whole[0] and isinstance(whole[0][0], list):
            return [{"matrix": _as_matrix(m, k + 1), "inverse": None, "s": None}
                    for k, m in enumerate(whole)]
    out = []
    for k, raw in enumerate(text.splitlines(), start=1):
        if raw.strip():
            out.append(parse_record(raw, k))
    return out


def read_sequence(path, normalize_raw: bool = True) -> list:
    """Group elements of a sequence file.

    Matrices are rescaled to ``|det| = 1`` unless ``normalize_raw`` is False;
    supplied inverses are scaled to match.
    """
    out = []
    for rec in read_records(path):
        m = rec["matrix"]
        if normalize_raw:
            g = normalize(m)
            # normalize divides by |det|^(1/d); the inverse scales the other way
            scale = float(np.exp(np.linalg.slogdet(m)[1] / m.shape[0]))
            inv = None if rec["inverse"] is None else rec["inverse"] * scale
            out.append(GroupElement(g.matrix, inverse=inv))
        else:
            out.append(GroupElement(m, inverse=rec["inverse"]))
    return out


def read_path_samples(path) -> list:
    """``(s, element)`` pairs; ``s`` defaults to the record index."""
    recs = read_records(path)
    els = read_sequence(path)
    return [(float(k if r["s"] is None else r["s"]), g) for k, (r, g) in enumerate(zip(recs, els))]


def sequence_lines(elements: Iterable, params: Sequence | None = None) -> str:
    """Sequence file text; exact inverses are written when known."""
    lines = []
    for k, g in enumerate(elements):
        g = as_element(g)
        rec = '{"matrix":' + matrix_literal(g.matrix)
        if g.inverse_trusted:
            rec += ',"inverse":' + matrix_literal(g.inverse_matrix())
        if params is not None:
            rec += ',"s":' + fmt(params[k])
        lines.append(rec + "}")
    return "\n".join(lines) + ("\n" if lines else "")


def write_sequence(path, elements: Iterable, params: Sequence | None = None) -> None:
    Path(path).write_text(sequence_lines(elements, params))


def _plain(obj):
    """Recursively convert numpy values; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else fmt(x)
    return obj


def json_text(obj) -> str:
    """Deterministic JSON (insertion-ordered keys, two-space indent, trailing newline)."""
    return json.dumps(_plain(obj), indent=2, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(json_text(obj))


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    Path(path).write_text(csv_text(header, rows))
