"""Scenarios, the clarification-time sweep, statistics and the delay budget."""

from ..netsim import ClarificationSample
from .budget import DivisionDomain, delay_budget
from .scenario import Expect, Group, Profile, Scenario, ScenarioInvalid, builtin, schema
from .stats import StatsSummary, quartiles, read_csv, to_csv
from .sweep import RunRecord, SweepResult, check_expectations, run_once, run_sweep, summarize

__all__ = [
    "ClarificationSample", "DivisionDomain", "Expect", "Group", "Profile", "RunRecord",
    "Scenario", "ScenarioInvalid", "StatsSummary", "SweepResult", "builtin",
    "check_expectations", "delay_budget", "quartiles", "read_csv", "run_once", "run_sweep",
    "schema", "summarize", "to_csv",
]
