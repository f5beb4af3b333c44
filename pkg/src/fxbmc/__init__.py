"""Bit-exact fixed-point Direct Form I filters and bounded verification."""

from .filter_model import (
    FilterSpec,
    FilterState,
    NotConverged,
    OpId,
    SpecError,
    df1_step,
    impulse_response,
    l1_norm,
    output_bound,
    suggest_format,
)
from .fixedpoint import (
    FixedFormat,
    FxNum,
    OverflowMode,
    OverflowViolation,
    format_range,
    fx_add,
    fx_mul,
    fx_sub,
    quantize,
)
from .timing import CycleTable, TimingSpec, estimate_cycles, load_cycle_table, verify_timing
from .verifier import (
    Counterexample,
    Engine,
    Property,
    Unknown,
    Verified,
    Violation,
    exhaustive_engine,
    simulate_trace,
    verify_limit_cycle,
    verify_overflow,
)

__version__ = "0.1.0"
