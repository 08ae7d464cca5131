"""Delimited input files with a header row.

The header decides what the rows are:

=====================  ==========================
header                 rows become
=====================  ==========================
``value``              individual Observations
``subgroup,value``     Subgroups (grouped by id, in order of first appearance)
``x...,y``             LabeledPoints (``x`` or ``x1..xd`` columns, then ``y``)
``v1..vd``             ProcessVectors
=====================  ==========================

Comma or tab delimited; the delimiter is taken from the header line.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass

from .core import LabeledPoint, Observation, ProcessVector, Subgroup

INDIVIDUALS = "individuals"
SUBGROUPS = "subgroups"
LABELED = "labeled"
VECTORS = "vectors"


class DataFileError(ValueError):
    pass


@dataclass(frozen=True)
class Table:
    kind: str
    items: list
    columns: tuple


def infer_kind(columns) -> str:
    cols = [c.strip().lower() for c in columns]
    if cols == ["value"]:
        return INDIVIDUALS
    if cols == ["subgroup", "value"]:
        return SUBGROUPS
    if len(cols) >= 2 and cols[-1] == "y" and all(re.fullmatch(r"x\d*", c) for c in cols[:-1]):
        return LABELED
    if cols and all(re.fullmatch(r"v\d+", c) for c in cols):
        return VECTORS
    raise DataFileError(f"unrecognized header: {','.join(columns)}")


def _number(text: str, lineno: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise DataFileError(f"line {lineno}: cannot parse {text!r} as a number") from None
    if not math.isfinite(v):
        raise DataFileError(f"line {lineno}: non-finite value {text!r}")
    return v


def parse_lines(lines) -> Table:
    lines = list(lines)
    if not lines:
        raise DataFileError("empty file")
    delim = "\t" if "\t" in lines[0] else ","
    reader = csv.reader(lines, delimiter=delim)
    header = next(reader)
    kind = infer_kind(header)
    width = len(header)
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != width:
            raise DataFileError(f"line {lineno}: expected {width} fields, got {len(row)}")
        rows.append((lineno, row))

    if kind == INDIVIDUALS:
        items = [Observation(i, _number(r[0], ln)) for i, (ln, r) in enumerate(rows)]
    elif kind == SUBGROUPS:
        groups: dict = {}
        for ln, r in rows:
            groups.setdefault(r[0].strip(), []).append(_number(r[1], ln))
        items = []
        for i, (gid, vals) in enumerate(groups.items()):
            if len(vals) < 2:
                raise DataFileError(f"subgroup {gid!r}: subgroup too small")
            items.append(Subgroup(i, tuple(vals)))
    elif kind == LABELED:
        items = [LabeledPoint(tuple(_number(c, ln) for c in r[:-1]), _number(r[-1], ln))
                 for ln, r in rows]
    else:
        items = [ProcessVector(i, tuple(_number(c, ln) for c in r)) for i, (ln, r) in enumerate(rows)]
    return Table(kind, items, tuple(header))


def read_table(path) -> Table:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return parse_lines(fh.read().splitlines())


def write_individuals(path, values) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("value\n")
        for v in values:
            fh.write(f"{float(v)!r}\n")


def write_vectors(path, rows) -> None:
    rows = [list(map(float, r)) for r in rows]
    d = len(rows[0]) if rows else 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(f"v{i + 1}" for i in range(d)) + "\n")
        for r in rows:
            fh.write(",".join(repr(v) for v in r) + "\n")


def write_labeled(path, points) -> None:
    d = len(points[0].x) if points else 1
    cols = ["x"] if d == 1 else [f"x{i + 1}" for i in range(d)]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols + ["y"]) + "\n")
        for p in points:
            fh.write(",".join(repr(v) for v in (*p.x, p.y)) + "\n")
