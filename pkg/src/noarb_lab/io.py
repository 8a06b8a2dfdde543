"""File formats: path-set CSV, tree JSON-lines, and '#'-headed report CSVs."""

from __future__ import annotations

import csv
import io
import json
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, Mapping, Sequence

from .errors import InvalidInput
from .finite_market import MarketTree
from .market import PricePath, to_exact

TIMESTAMP_PREFIX = "# generated="


def fmt_number(x, exact: bool = False) -> str:
    """Exact decimal when it is short, else ``a/b`` for rationals, repr for floats."""
    if isinstance(x, bool) or x is None:
        return "" if x is None else str(x).lower()
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, int):
        return str(x)
    if isinstance(x, Fraction):
        if x.denominator == 1:
            return str(x.numerator)
        for k in range(1, 21):
            scaled = x * 10**k
            if scaled.denominator == 1:
                sign = "-" if x < 0 else ""
                digits = str(abs(scaled.numerator)).rjust(k + 1, "0")
                return f"{sign}{digits[:-k]}.{digits[-k:]}"
        text = f"{x.numerator}/{x.denominator}"
        return text if exact or len(text) <= 40 else repr(float(x))
    return str(x)


# --- price paths --------------------------------------------------------------


def read_paths(file) -> Dict[str, PricePath]:
    """Read ``path_id,t,price`` rows; a ``# tick_size=...`` comment sets the tick."""
    tick = None
    lines = []
    with open(Path(file), newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("tick_size="):
                    tick = to_exact(body.split("=", 1)[1])
                continue
            lines.append(line)
    grouped: Dict[str, list] = {}
    for row in csv.DictReader(lines):
        try:
            pid, t, price = row["path_id"].strip(), int(row["t"]), row["price"].strip()
        except (KeyError, ValueError, AttributeError) as exc:
            raise InvalidInput(f"bad path row {row}: {exc}", "paths") from None
        grouped.setdefault(pid, []).append((t, to_exact(price)))
    out = {}
    for pid, points in grouped.items():
        points.sort()
        if [t for t, _ in points] != list(range(len(points))):
            raise InvalidInput(f"path {pid} has missing or duplicate time indices", "paths")
        out[pid] = PricePath([p for _, p in points], tick)
    return out


def write_paths(file, paths: Mapping[str, PricePath]):
    ticks = {p.tick_size for p in paths.values()}
    with open(Path(file), "w", newline="") as fh:
        if len(ticks) == 1 and None not in ticks:
            fh.write(f"# tick_size={fmt_number(ticks.pop())}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path_id", "t", "price"])
        for pid, path in paths.items():
            for t, p in enumerate(path.prices):
                w.writerow([pid, t, fmt_number(p, True)])


# --- trees ----------------------------------------------------------------------


def read_tree(file) -> MarketTree:
    records = []
    with open(Path(file)) as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise InvalidInput(f"{file}:{n}: not JSON: {exc}", "tree") from None
    return MarketTree.from_records(records)


def write_tree(file, tree: MarketTree):
    with open(Path(file), "w") as fh:
        for rec in tree.to_records():
            rec = {"id": rec["id"], "parent": rec["parent"], "price": fmt_number(rec["price"], True),
                   "weight": None if rec["weight"] is None else fmt_number(rec["weight"], True)}
            fh.write(json.dumps(rec) + "\n")


# --- reports --------------------------------------------------------------------


def render_report(header: Sequence[str], columns: Sequence[str], rows: Iterable[Sequence],
                  timestamp: str = None) -> str:
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    if timestamp is not None:
        buf.write(f"{TIMESTAMP_PREFIX}{timestamp}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt_number(v) for v in row])
    return buf.getvalue()


def write_report(file, header, columns, rows, timestamp=None):
    Path(file).write_text(render_report(header, columns, rows, timestamp))


def strip_timestamp(text: str) -> str:
    return "".join(l for l in text.splitlines(keepends=True) if not l.startswith(TIMESTAMP_PREFIX))
