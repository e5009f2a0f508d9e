"""Order statistics for clarification times.

Quartiles follow the median-of-halves rule: the sorted sample is split at its
median (the middle element, when n is odd, belongs to neither half) and q1/q3
are the medians of the lower and upper halves. A single sample is its own q1
and q3.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from statistics import fmean, median
from typing import Iterable

COLUMNS = ("protocol", "count", "n", "mean", "min", "q1", "median", "q3", "max")


def quartiles(values: Iterable[float]) -> tuple[float, float, float]:
    xs = sorted(values)
    if not xs:
        raise ValueError("quartiles of an empty sample")
    n = len(xs)
    if n == 1:
        return xs[0], xs[0], xs[0]
    lower, upper = xs[: n // 2], xs[(n + 1) // 2:]
    return median(lower), median(xs), median(upper)


@dataclass(frozen=True)
class StatsSummary:
    protocol: int
    count: int
    n: int
    mean: float
    min: float
    q1: float
    median: float
    q3: float
    max: float

    @classmethod
    def of(cls, protocol: int, count: int, values: Iterable[float]) -> StatsSummary:
        xs = sorted(values)
        q1, med, q3 = quartiles(xs)
        return cls(protocol, count, len(xs), fmean(xs), xs[0], q1, med, q3, xs[-1])

    def row(self) -> list[str]:
        return [str(self.protocol), str(self.count), str(self.n)] + [
            _fmt(v) for v in (self.mean, self.min, self.q1, self.median, self.q3, self.max)]


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def to_csv(summaries: Iterable[StatsSummary]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for s in summaries:
        w.writerow(s.row())
    return buf.getvalue()


def read_csv(text: str) -> list[StatsSummary]:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [StatsSummary(int(r["protocol"]), int(r["count"]), int(r["n"]),
                         *(float(r[k]) for k in COLUMNS[3:])) for r in rows]
