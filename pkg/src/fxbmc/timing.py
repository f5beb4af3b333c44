"""Worst-case cycle count of one filter step and the per-sample deadline check.

The cost model is linear in the number of coefficient taps: every tap costs one
multiply-accumulate, plus a fixed per-sample overhead. Cycle tables are JSON
files; ``msp430g2231`` ships with the package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path

from .filter_model import FilterSpec
from .fixedpoint import RealLike, to_fraction
from .verifier import VerificationResult, Verified, Violation

BUNDLED_TABLES = ("msp430g2231",)


@dataclass(frozen=True)
class CycleTable:
    name: str
    mac_cycles: int
    per_sample_overhead: int = 0

    def __post_init__(self):
        if self.mac_cycles < 0 or self.per_sample_overhead < 0:
            raise ValueError("cycle counts must be >= 0")


@dataclass(frozen=True)
class TimingSpec:
    clock_hz: Fraction
    sample_rate_hz: Fraction

    def __post_init__(self):
        clock = to_fraction(self.clock_hz)
        rate = to_fraction(self.sample_rate_hz)
        if clock <= 0 or rate <= 0:
            raise ValueError("clock and sample rate must be > 0")
        object.__setattr__(self, "clock_hz", clock)
        object.__setattr__(self, "sample_rate_hz", rate)

    @classmethod
    def of(cls, clock_hz: RealLike, sample_rate_hz: RealLike) -> "TimingSpec":
        return cls(to_fraction(clock_hz), to_fraction(sample_rate_hz))

    @property
    def cycle_time(self) -> Fraction:
        return 1 / self.clock_hz

    @property
    def deadline(self) -> Fraction:
        return 1 / self.sample_rate_hz


@dataclass(frozen=True)
class TimingViolation:
    cycles: int
    elapsed: Fraction  # seconds
    deadline: Fraction  # seconds

    @property
    def slack(self) -> Fraction:
        return self.deadline - self.elapsed

    def describe(self) -> str:
        return (f"{self.cycles} cycles take {float(self.elapsed) * 1e6:.6g} us, "
                f"deadline {float(self.deadline) * 1e6:.6g} us "
                f"(slack {float(self.slack) * 1e6:.6g} us)")


def load_cycle_table(source: str | Path) -> CycleTable:
    """Load a bundled table by name, or a JSON file with ``name``, ``mac_cycles``, ``per_sample_overhead``."""
    if str(source) in BUNDLED_TABLES:
        text = resources.files("fxbmc").joinpath("data", f"{source}.json").read_text()
    else:
        text = Path(source).read_text()
    data = json.loads(text)
    try:
        return CycleTable(str(data["name"]), int(data["mac_cycles"]),
                          int(data.get("per_sample_overhead", 0)))
    except KeyError as exc:
        raise ValueError(f"cycle table {source}: missing field {exc}") from None


def estimate_cycles(spec: FilterSpec, table: CycleTable) -> int:
    return spec.taps * table.mac_cycles + table.per_sample_overhead


def verify_timing(cycles: int, t: TimingSpec) -> VerificationResult:
    """``cycles * T <= D`` in exact rational arithmetic."""
    if cycles < 0:
        raise ValueError("cycles must be >= 0")
    outcome = TimingViolation(cycles, cycles * t.cycle_time, t.deadline)
    info = {"elapsed": outcome.elapsed, "deadline": outcome.deadline, "slack": outcome.slack}
    if outcome.elapsed <= outcome.deadline:
        return Verified(None, info)
    return Violation(outcome, info)
