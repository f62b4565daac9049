"""Deterministic movement simulation: traces, scripted scenarios, replay."""

from .replay import pursuer_step, replay, task5_pathcheck  # noqa: F401
from .scenario import BUILTIN_SCENARIOS, Scenario, builtin_scenario  # noqa: F401
from .trace import TraceRecord, read_trace, write_trace  # noqa: F401
