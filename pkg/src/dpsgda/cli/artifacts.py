"""Result rows, CSV/JSON-lines writers and schema-checked CSV reading."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

SCHEMA_VERSION = 1
COORDINATES = ("n", "T", "m", "epsilon", "delta", "hidden_units")
_INT_COLUMNS = ("schema_version", "n", "T", "m", "hidden_units", "seed")
_FLOAT_COLUMNS = ("epsilon", "delta", "value", "tolerance", "wall_time")


class SchemaError(ValueError):
    """A CSV does not match the ResultRow schema; the message names the column."""


@dataclass(frozen=True)
class ResultRow:
    """One (coordinate, seed, metric) measurement."""

    schema_version: int
    command: str
    problem: str
    n: int
    T: int
    m: int
    epsilon: float
    delta: float | None
    hidden_units: int | None
    seed: int
    metric: str
    value: float | None
    tolerance: float | None
    status: str
    wall_time: float | None = None

    def sort_key(self):
        # None sorts before numbers; inf (non-private) sorts last
        def k(x):
            return (0, 0.0) if x is None else (1, x)

        return (self.command, self.problem, *(k(getattr(self, c)) for c in COORDINATES), self.seed, self.metric)

    def coordinate(self) -> tuple:
        return (self.command, self.problem, *(getattr(self, c) for c in COORDINATES), self.metric)


COLUMNS = tuple(f.name for f in fields(ResultRow))


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


def rows_to_csv(rows) -> str:
    """RFC-4180 text (CRLF line ends, header row) of rows in sorted order."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(COLUMNS)
    for row in sorted(rows, key=ResultRow.sort_key):
        writer.writerow([_fmt(getattr(row, c)) for c in COLUMNS])
    return buf.getvalue()


def write_csv(path: Path, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(rows_to_csv(rows))


def _parse_cell(column: str, text: str, where: str):
    if text == "":
        if column in ("schema_version", "n", "T", "m", "seed", "epsilon"):
            raise SchemaError(f"{where}: column {column!r} must not be empty")
        return None
    try:
        if column in _INT_COLUMNS:
            return int(text)
        if column in _FLOAT_COLUMNS:
            return float(text)
    except ValueError:
        raise SchemaError(f"{where}: column {column!r} has invalid value {text!r}") from None
    return text


def read_rows(path) -> list[ResultRow]:
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected header row") from None
        missing = [c for c in COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column {missing[0]!r}")
        extra = [c for c in header if c not in COLUMNS]
        if extra:
            raise SchemaError(f"{path}: unexpected column {extra[0]!r}")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(header):
                raise SchemaError(f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
            where = f"{path}:{lineno}"
            cells = {c: _parse_cell(c, t, where) for c, t in zip(header, rec)}
            if cells["schema_version"] != SCHEMA_VERSION:
                raise SchemaError(f"{where}: column 'schema_version' is {cells['schema_version']}, "
                                  f"this build reads {SCHEMA_VERSION}")
            if cells["status"] not in ("ok", "aborted"):
                raise SchemaError(f"{where}: column 'status' must be 'ok' or 'aborted'")
            rows.append(ResultRow(**cells))
    return rows


def write_jsonl(path: Path, records) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True, default=_json_default) + "\n")


def _json_default(x):
    if hasattr(x, "tolist"):
        return x.tolist()
    if hasattr(x, "__dataclass_fields__"):
        return asdict(x)
    raise TypeError(f"not serialisable: {type(x).__name__}")


def json_safe(x):
    """Replace non-finite floats by strings so output is strict JSON."""
    if isinstance(x, float) and not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, dict):
        return {k: json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [json_safe(v) for v in x]
    return x
