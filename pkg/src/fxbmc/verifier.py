"""Bounded verification of overflow and zero-input limit cycles.

Two engines answer the same question. The exhaustive engine enumerates the
bounded search space explicitly and is the ground truth on small instances; the
SMT engine (see :mod:`fxbmc.smt_backend`) hands the unrolled problem to an
external solver. Every violation, whichever engine found it, is replayed
through :func:`simulate_trace` before it is reported.

``Verified(k)`` only means that no violation exists within ``k`` steps.
"""

from __future__ import annotations

import enum
import itertools
import time
from dataclasses import dataclass, field
from typing import Sequence, Union

from .filter_model import (
    FilterSpec,
    FilterState,
    StepRecord,
    df1_step,
    shift_state,
    step_mantissas,
)
from .fixedpoint import FxNum, OverflowMode, OverflowViolation

DEFAULT_BUDGET = 20_000_000


def full_scale_first(m: int) -> tuple[int, bool]:
    """Sort key for input mantissas: largest magnitude first, positive before negative."""
    return -abs(m), m < 0


def small_first(m: int) -> tuple[int, bool]:
    """Sort key for initial-state mantissas: 0, 1, -1, 2, -2, ..."""
    return abs(m), m < 0


class Property(enum.Enum):
    OVERFLOW = "overflow"
    LIMIT_CYCLE = "limitcycle"
    TIMING = "timing"


class Engine(enum.Enum):
    EXHAUSTIVE = "exhaustive"
    SMT = "smt"


@dataclass(frozen=True)
class CycleInfo:
    """States ``s_start .. s_{start+period-1}`` repeat; ``states`` lists them."""

    start: int
    period: int
    states: tuple[tuple[int, ...], ...]


@dataclass
class Counterexample:
    spec: FilterSpec
    inputs: list[FxNum]
    initial_state: FilterState
    trace: list[StepRecord]
    overflow: OverflowViolation | None = None
    cycle: CycleInfo | None = None

    def describe(self) -> str:
        if self.overflow is not None:
            return str(self.overflow)
        if self.cycle is not None:
            kind = "nonzero fixed point" if self.cycle.period == 1 else "oscillation"
            return (f"limit cycle ({kind}) of period {self.cycle.period} "
                    f"entered at step {self.cycle.start}")
        return "no violation recorded"


@dataclass(frozen=True)
class Verified:
    bound: int | None
    info: dict = field(default_factory=dict, compare=False)

    def __str__(self) -> str:
        return "VERIFIED" if self.bound is None else f"VERIFIED (bound {self.bound})"


@dataclass(frozen=True)
class Violation:
    witness: object  # Counterexample, or TimingViolation for the deadline check
    info: dict = field(default_factory=dict, compare=False)

    def __str__(self) -> str:
        return "VIOLATION"


@dataclass(frozen=True)
class Unknown:
    reason: str
    info: dict = field(default_factory=dict, compare=False)

    def __str__(self) -> str:
        return f"UNKNOWN ({self.reason})"


VerificationResult = Union[Verified, Violation, Unknown]


class ReplayMismatch(RuntimeError):
    """A reported witness did not reproduce its violation."""


def simulate_trace(spec: FilterSpec, inputs: Sequence[FxNum],
                   initial_state: FilterState | None = None) -> list[StepRecord]:
    """Replay ``inputs`` through :func:`df1_step` and return the per-step records.

    In ERROR mode an overflow propagates as :class:`OverflowViolation` whose
    ``trace`` holds every step up to and including the failing one.
    """
    state = initial_state if initial_state is not None else FilterState.zero(spec)
    trace: list[StepRecord] = []
    for n, x in enumerate(inputs):
        try:
            _, state, record = df1_step(spec, state, x, n)
        except OverflowViolation as exc:
            exc.trace = trace + exc.trace
            raise
        trace.append(record)
    return trace


def state_after(record: StepRecord, prev: tuple[int, ...], n_y: int) -> tuple[int, ...]:
    ys, xs = prev[:n_y], prev[n_y:]
    ys, xs = shift_state(ys, xs, record.x.mantissa, record.y.mantissa)
    return ys + xs


def find_cycle(states: Sequence[tuple[int, ...]]) -> CycleInfo | None:
    """First repetition ``s_i == s_j`` (``i < j``) of a nonzero state vector."""
    seen: dict[tuple[int, ...], int] = {}
    for j, s in enumerate(states):
        i = seen.get(s)
        if i is not None:
            if any(s):
                return CycleInfo(i, j - i, tuple(states[i:j]))
            return None
        seen[s] = j
    return None


def replay_overflow(spec: FilterSpec, inputs: Sequence[FxNum]) -> Counterexample:
    """Confirm an overflow witness; the inputs are cut after the failing step."""
    spec = spec.with_mode(OverflowMode.ERROR)
    init = FilterState.zero(spec)
    try:
        simulate_trace(spec, inputs, init)
    except OverflowViolation as exc:
        used = list(inputs[: exc.step + 1])
        return Counterexample(spec, used, init, exc.trace, overflow=exc)
    raise ReplayMismatch("input sequence does not overflow")


def replay_limit_cycle(spec: FilterSpec, initial_state: FilterState, bound: int) -> Counterexample:
    """Confirm a limit-cycle witness by driving ``bound`` zero samples."""
    spec = spec.with_mode(OverflowMode.WRAP)
    zero = FxNum(0, spec.fmt)
    inputs = [zero] * bound
    trace = simulate_trace(spec, inputs, initial_state)
    states = [initial_state.mantissas()]
    for record in trace:
        states.append(state_after(record, states[-1], spec.order_a))
    cycle = find_cycle(states)
    if cycle is None:
        raise ReplayMismatch("initial state does not enter a nonzero cycle within the bound")
    steps = cycle.start + cycle.period
    return Counterexample(spec, inputs[:steps], initial_state, trace[:steps], cycle=cycle)


def overflow_search_size(spec: FilterSpec, bound: int) -> int:
    """Upper bound on step evaluations for the overflow search (with state merging)."""
    grid = len(spec.input_grid())
    states = (1 << spec.fmt.width) ** spec.state_size
    total = 0
    frontier = 1
    for _ in range(bound):
        total += frontier * grid
        frontier = min(frontier * grid, states)
    return total


def limit_cycle_search_size(spec: FilterSpec, bound: int) -> int:
    return (1 << spec.fmt.width) ** spec.state_size * bound


class _Deadline:
    def __init__(self, timeout: float | None):
        self.end = None if timeout is None else time.monotonic() + timeout

    def expired(self) -> bool:
        return self.end is not None and time.monotonic() > self.end


def _exhaustive_overflow(spec: FilterSpec, bound: int, timeout: float | None) -> VerificationResult:
    # Breadth-first over input length so the first hit is the shortest witness.
    # Within one length, prefixes are expanded in lexicographic order (inputs
    # ranked by full_scale_first) and each state keeps only its first prefix:
    # equal states have equal futures, so the first prefix also yields the
    # first extension. A state already
    # reached at a shorter length is dropped, since anything it could still
    # reach was already covered with fewer inputs.
    spec = spec.with_mode(OverflowMode.ERROR)
    grid = sorted(spec.input_grid(), key=full_scale_first)
    n_y = spec.order_a
    deadline = _Deadline(timeout)
    start = tuple([0] * spec.state_size)
    frontier: dict[tuple[int, ...], tuple[int, ...]] = {start: ()}
    seen = {start}
    explored = 0
    for depth in range(1, bound + 1):
        nxt: dict[tuple[int, ...], tuple[int, ...]] = {}
        for state, prefix in frontier.items():
            if deadline.expired():
                return Unknown("timeout", {"explored": explored})
            ys, xs = state[:n_y], state[n_y:]
            for x in grid:
                explored += 1
                try:
                    y = step_mantissas(spec, ys, xs, x, OverflowMode.ERROR)
                except OverflowViolation:
                    inputs = [FxNum(m, spec.fmt) for m in prefix + (x,)]
                    cex = replay_overflow(spec, inputs)
                    return Violation(cex, {"explored": explored, "depth": depth})
                ys2, xs2 = shift_state(ys, xs, x, y)
                s2 = ys2 + xs2
                if s2 not in seen:
                    seen.add(s2)
                    nxt[s2] = prefix + (x,)
        frontier = nxt
        if not frontier:
            break
    return Verified(bound, {"explored": explored, "states": len(seen)})


def _exhaustive_limit_cycle(spec: FilterSpec, bound: int, timeout: float | None) -> VerificationResult:
    spec = spec.with_mode(OverflowMode.WRAP)
    fmt = spec.fmt
    n_y = spec.order_a
    deadline = _Deadline(timeout)
    values = sorted(range(fmt.min_mantissa, fmt.max_mantissa + 1), key=small_first)
    explored = 0
    for init in itertools.product(values, repeat=spec.state_size):
        if deadline.expired():
            return Unknown("timeout", {"explored": explored})
        if not any(init):
            continue
        states = [init]
        ys, xs = init[:n_y], init[n_y:]
        seen = {init: 0}
        for j in range(1, bound + 1):
            explored += 1
            y = step_mantissas(spec, ys, xs, 0, OverflowMode.WRAP)
            ys, xs = shift_state(ys, xs, 0, y)
            s = ys + xs
            i = seen.get(s)
            if i is not None:
                if any(s):
                    state0 = FilterState.from_mantissas(spec, init[:n_y], init[n_y:])
                    cex = replay_limit_cycle(spec, state0, bound)
                    return Violation(cex, {"explored": explored})
                break
            seen[s] = j
            states.append(s)
    return Verified(bound, {"explored": explored})


def exhaustive_engine(spec: FilterSpec, prop: Property, bound: int,
                      budget: int = DEFAULT_BUDGET, timeout: float | None = None) -> VerificationResult:
    """Decide ``prop`` up to ``bound`` by explicit enumeration.

    Overflow witnesses are the shortest input sequence, lexicographically
    smallest by mantissa among those. Limit-cycle witnesses are the
    lexicographically smallest initial state vector (outputs first). Returns
    ``Unknown`` without searching if the space exceeds ``budget`` step
    evaluations.
    """
    if bound < 1:
        raise ValueError("bound must be >= 1")
    if prop is Property.OVERFLOW:
        size = overflow_search_size(spec, bound)
        run = _exhaustive_overflow
    elif prop is Property.LIMIT_CYCLE:
        size = limit_cycle_search_size(spec, bound)
        run = _exhaustive_limit_cycle
    else:
        raise ValueError(f"exhaustive engine does not handle {prop.value}")
    if size > budget:
        return Unknown(f"budget exceeded: search space {size} step evaluations > budget {budget}",
                       {"search_space": size})
    result = run(spec, bound, timeout)
    result.info["search_space"] = size
    return result


def _smt_engine(spec: FilterSpec, prop: Property, bound: int, solver_cmd, timeout,
                emit_smt) -> VerificationResult:
    from . import smt_backend

    try:
        script = smt_backend.encode(spec, prop, bound)
    except smt_backend.EncodingUnsupported as exc:
        return Unknown(f"encoding unsupported: {exc}")
    if emit_smt is not None:
        with open(emit_smt, "w") as fh:
            fh.write(script.text)
    outcome = smt_backend.solve(script, solver_cmd, timeout)
    if isinstance(outcome, smt_backend.Unsat):
        return Verified(bound, {"solver_seconds": outcome.seconds})
    if isinstance(outcome, smt_backend.SolverUnknown):
        return Unknown(outcome.reason)
    result = smt_backend.extract_counterexample(outcome, script, spec, bound)
    if isinstance(result, Counterexample):
        return Violation(result, {"solver_seconds": outcome.seconds})
    return result


def _verify(spec: FilterSpec, prop: Property, bound: int, engine: Engine, *, budget: int,
            solver_cmd, timeout, emit_smt) -> VerificationResult:
    if bound < 1:
        raise ValueError("bound must be >= 1")
    if engine is Engine.EXHAUSTIVE:
        return exhaustive_engine(spec, prop, bound, budget, timeout)
    return _smt_engine(spec, prop, bound, solver_cmd, timeout, emit_smt)


def verify_overflow(spec: FilterSpec, bound: int, engine: Engine = Engine.EXHAUSTIVE, *,
                    budget: int = DEFAULT_BUDGET, solver_cmd=None, timeout: float | None = None,
                    emit_smt=None) -> VerificationResult:
    """Search every input sequence of length <= ``bound`` from the all-zero state.

    Inputs range over the representable values inside ``spec.input_range``;
    arithmetic runs in ERROR mode whatever ``spec.overflow_mode`` says.
    """
    return _verify(spec.with_mode(OverflowMode.ERROR), Property.OVERFLOW, bound, engine,
                   budget=budget, solver_cmd=solver_cmd, timeout=timeout, emit_smt=emit_smt)


def verify_limit_cycle(spec: FilterSpec, bound: int, engine: Engine = Engine.EXHAUSTIVE, *,
                       budget: int = DEFAULT_BUDGET, solver_cmd=None, timeout: float | None = None,
                       emit_smt=None) -> VerificationResult:
    """Look for an initial state whose zero-input response repeats a nonzero state.

    Arithmetic wraps on overflow. Only cycles closed within ``bound`` steps are
    found; a longer cycle yields ``Verified(bound)``.
    """
    return _verify(spec.with_mode(OverflowMode.WRAP), Property.LIMIT_CYCLE, bound, engine,
                   budget=budget, solver_cmd=solver_cmd, timeout=timeout, emit_smt=emit_smt)
