"""Share of the end-to-end reaction time spent on clarification."""

from __future__ import annotations


class DivisionDomain(ZeroDivisionError):
    pass


def delay_budget(detect_s: float, clarify_s: float, timeout_s: float, interdict_s: float,
                 tolerated: bool) -> float:
    parts = (detect_s, clarify_s, timeout_s, interdict_s)
    if any(p < 0 for p in parts):
        raise ValueError("time inputs must be >= 0")
    if tolerated:
        return 0.0
    total = sum(parts)
    if total == 0:
        raise DivisionDomain("all time inputs are zero")
    return clarify_s / total
