"""Direct Form I filters with every intermediate quantized.

The realized difference equation is::

    y(n) = b_0 x(n) + sum_{k=1..M} b_k x(n-k) - sum_{k=1..N} a_k y(n-k)

evaluated as a chain of two-operand operations, each one rounded back onto the
filter's format: ``acc = b_0*x(n)``, then the feedforward taps in ascending
``k``, then the feedback taps in ascending ``k``. The order is fixed because it
decides which operator overflows first.

Ideal-arithmetic helpers (impulse response, l1 norm, output bound) use the
design coefficients in double precision and only guide the choice of format.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

from .fixedpoint import (
    FixedFormat,
    FxNum,
    OverflowMode,
    OverflowViolation,
    RealLike,
    add_mantissa,
    mul_mantissa,
    quantize_mantissa,
    sub_mantissa,
    to_decimal,
    to_fraction,
)


class SpecError(ValueError):
    """Invalid filter configuration. ``problems`` lists one line per defect."""

    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class NotConverged(ArithmeticError):
    """The impulse-response sum did not settle within the horizon."""

    def __init__(self, horizon: int, partial: float):
        self.horizon = horizon
        self.partial = partial
        super().__init__(f"impulse response l1 sum not converged after {horizon} terms "
                         f"(partial sum {partial:g}); filter may be unstable")


@dataclass(frozen=True)
class OpId:
    """One operator of the per-sample chain, e.g. multiplier on ``b[1]``."""

    kind: str  # "mul", "add" or "sub"
    coeff: str  # "a" or "b"
    tap: int

    def __str__(self) -> str:
        name = "multiplier" if self.kind == "mul" else "adder"
        return f"{name} {self.coeff}[{self.tap}]"

    @property
    def slug(self) -> str:
        return f"{self.kind}_{self.coeff}{self.tap}"


def operator_chain(n_a: int, n_b: int) -> list[OpId]:
    """Operators of one step in evaluation order, for ``n_a`` feedback and ``n_b`` feedforward taps."""
    ops = [OpId("mul", "b", 0)]
    for k in range(1, n_b):
        ops += [OpId("mul", "b", k), OpId("add", "b", k)]
    for k in range(1, n_a + 1):
        ops += [OpId("mul", "a", k), OpId("sub", "a", k)]
    return ops


def _coefficient_problems(label: str, values: Sequence[Fraction], fmt: FixedFormat,
                          first: int) -> list[str]:
    problems = []
    lo, hi = fmt.range()
    step = fmt.resolution
    for i, c in enumerate(values, start=first):
        try:
            quantize_mantissa(c, fmt, OverflowMode.ERROR)
        except OverflowViolation:
            below = math.floor(c / step) * step
            above = math.ceil(c / step) * step
            neighbors = sorted({min(max(v, lo), hi) for v in (below, above)})
            shown = ", ".join(to_decimal(v) for v in neighbors)
            problems.append(f"coefficient {label}[{i}] = {to_decimal(c)} not representable in {fmt} "
                            f"(range [{to_decimal(lo)}, {to_decimal(hi)}]; nearest representable: {shown})")
    return problems


@dataclass(frozen=True)
class FilterSpec:
    """Filter coefficients, number format and admissible input range.

    ``a`` holds the feedback coefficients ``a_1..a_N`` and ``b`` the feedforward
    ``b_0..b_M``, both as the exact design values. Their quantized mantissas are
    computed once at construction; a coefficient outside the format range is a
    :class:`SpecError`.
    """

    a: tuple[Fraction, ...]
    b: tuple[Fraction, ...]
    fmt: FixedFormat
    input_range: tuple[Fraction, Fraction] = (Fraction(-1), Fraction(1))
    overflow_mode: OverflowMode = OverflowMode.ERROR
    name: str = ""
    a_q: tuple[int, ...] = field(init=False, repr=False, compare=False)
    b_q: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        a = tuple(to_fraction(c) for c in self.a)
        b = tuple(to_fraction(c) for c in self.b)
        lo, hi = (to_fraction(v) for v in self.input_range)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "input_range", (lo, hi))
        problems = []
        if not b:
            problems.append("feedforward list b is empty; b_0 is required")
        if lo > hi:
            problems.append(f"input range [{to_decimal(lo)}, {to_decimal(hi)}] is empty")
        problems += _coefficient_problems("a", a, self.fmt, first=1)
        problems += _coefficient_problems("b", b, self.fmt, first=0)
        if problems:
            raise SpecError(problems)
        mode = OverflowMode.ERROR
        object.__setattr__(self, "a_q", tuple(quantize_mantissa(c, self.fmt, mode) for c in a))
        object.__setattr__(self, "b_q", tuple(quantize_mantissa(c, self.fmt, mode) for c in b))

    @classmethod
    def create(cls, a: Sequence[RealLike], b: Sequence[RealLike], fmt: FixedFormat,
               input_range: Sequence[RealLike] = (-1, 1),
               overflow_mode: OverflowMode = OverflowMode.ERROR, name: str = "") -> "FilterSpec":
        lo, hi = input_range
        return cls(tuple(a), tuple(b), fmt, (lo, hi), overflow_mode, name)

    @property
    def order_a(self) -> int:
        """N, the number of feedback taps."""
        return len(self.a)

    @property
    def order_b(self) -> int:
        """M, the feedforward order (``len(b) - 1``)."""
        return len(self.b) - 1

    @property
    def taps(self) -> int:
        return len(self.a) + len(self.b)

    @property
    def state_size(self) -> int:
        return self.order_a + self.order_b

    def with_mode(self, mode: OverflowMode) -> "FilterSpec":
        if mode is self.overflow_mode:
            return self
        return replace(self, overflow_mode=mode)

    def quantized_a(self) -> tuple[FxNum, ...]:
        return tuple(FxNum(m, self.fmt) for m in self.a_q)

    def quantized_b(self) -> tuple[FxNum, ...]:
        return tuple(FxNum(m, self.fmt) for m in self.b_q)

    def operators(self) -> list[OpId]:
        return operator_chain(len(self.a), len(self.b))

    def input_grid(self) -> range:
        """Mantissas of every representable input inside ``input_range``.

        Endpoints off the grid are tightened inward; the grid is also clipped to
        the format range.
        """
        lo, hi = self.input_range
        scale = 1 << self.fmt.frac_bits
        m_lo = max(math.ceil(lo * scale), self.fmt.min_mantissa)
        m_hi = min(math.floor(hi * scale), self.fmt.max_mantissa)
        return range(m_lo, m_hi + 1)


@dataclass(frozen=True)
class FilterState:
    """Delay lines: ``y_hist = (y(n-1)..y(n-N))`` and ``x_hist = (x(n-1)..x(n-M))``."""

    y_hist: tuple[FxNum, ...]
    x_hist: tuple[FxNum, ...]

    @classmethod
    def zero(cls, spec: FilterSpec) -> "FilterState":
        z = FxNum(0, spec.fmt)
        return cls((z,) * spec.order_a, (z,) * spec.order_b)

    @classmethod
    def from_mantissas(cls, spec: FilterSpec, y_hist: Sequence[int],
                       x_hist: Sequence[int] = ()) -> "FilterState":
        if len(y_hist) != spec.order_a or len(x_hist) != spec.order_b:
            raise ValueError(f"state needs {spec.order_a} outputs and {spec.order_b} inputs, "
                             f"got {len(y_hist)} and {len(x_hist)}")
        return cls(tuple(FxNum(m, spec.fmt) for m in y_hist),
                   tuple(FxNum(m, spec.fmt) for m in x_hist))

    @classmethod
    def from_reals(cls, spec: FilterSpec, y_hist: Sequence[RealLike],
                   x_hist: Sequence[RealLike] = ()) -> "FilterState":
        q = [quantize_mantissa(to_fraction(v), spec.fmt, OverflowMode.ERROR) for v in y_hist]
        r = [quantize_mantissa(to_fraction(v), spec.fmt, OverflowMode.ERROR) for v in x_hist]
        return cls.from_mantissas(spec, q, r)

    def mantissas(self) -> tuple[int, ...]:
        """Full state vector, outputs first, as used for ordering and cycle checks."""
        return tuple(v.mantissa for v in self.y_hist) + tuple(v.mantissa for v in self.x_hist)

    def is_zero(self) -> bool:
        return not any(self.mantissas())


@dataclass(frozen=True)
class OpRecord:
    op: OpId
    mantissa: int


@dataclass
class StepRecord:
    """Everything computed for one sample. ``y`` is None if the step overflowed."""

    n: int
    x: FxNum
    ops: list[OpRecord]
    y: FxNum | None
    violation: OverflowViolation | None = None


def step_mantissas(spec: FilterSpec, y_hist: Sequence[int], x_hist: Sequence[int], x: int,
                   mode: OverflowMode, record: list | None = None) -> int:
    """One Direct Form I step on raw mantissas; returns ``y(n)``.

    If ``record`` is given, every operator result is appended to it as
    ``(OpId, mantissa)`` in evaluation order. Raises :class:`OverflowViolation`
    located at the offending operator when ``mode`` is ERROR.
    """
    fmt = spec.fmt
    a_q, b_q = spec.a_q, spec.b_q
    op = OpId("mul", "b", 0)
    try:
        acc = mul_mantissa(b_q[0], x, fmt, mode)
        if record is not None:
            record.append((op, acc))
        for k in range(1, len(b_q)):
            op = OpId("mul", "b", k)
            p = mul_mantissa(b_q[k], x_hist[k - 1], fmt, mode)
            if record is not None:
                record.append((op, p))
            op = OpId("add", "b", k)
            acc = add_mantissa(acc, p, fmt, mode)
            if record is not None:
                record.append((op, acc))
        for k in range(1, len(a_q) + 1):
            op = OpId("mul", "a", k)
            p = mul_mantissa(a_q[k - 1], y_hist[k - 1], fmt, mode)
            if record is not None:
                record.append((op, p))
            op = OpId("sub", "a", k)
            acc = sub_mantissa(acc, p, fmt, mode)
            if record is not None:
                record.append((op, acc))
    except OverflowViolation as exc:
        raise exc.located(op=op)
    return acc


def shift_state(y_hist: tuple[int, ...], x_hist: tuple[int, ...], x: int, y: int):
    if y_hist:
        y_hist = (y,) + y_hist[:-1]
    if x_hist:
        x_hist = (x,) + x_hist[:-1]
    return y_hist, x_hist


def df1_step(spec: FilterSpec, state: FilterState, x_n: FxNum,
             n: int = 0) -> tuple[FxNum, FilterState, StepRecord]:
    """Advance the filter by one sample under ``spec.overflow_mode``.

    Returns the output, the shifted state and the per-operator record. On
    overflow (ERROR mode) the raised :class:`OverflowViolation` names the
    operator and carries step ``n``.
    """
    if x_n.fmt != spec.fmt:
        raise ValueError(f"input format {x_n.fmt} differs from filter format {spec.fmt}")
    y_m = [v.mantissa for v in state.y_hist]
    x_m = [v.mantissa for v in state.x_hist]
    ops: list = []
    try:
        y = step_mantissas(spec, y_m, x_m, x_n.mantissa, spec.overflow_mode, ops)
    except OverflowViolation as exc:
        exc.located(step=n)
        exc.exact = exact_step_value(spec, state, x_n)
        exc.trace = [StepRecord(n, x_n, [OpRecord(o, m) for o, m in ops], None, exc)]
        raise
    y_hist, x_hist = shift_state(tuple(state.y_hist), tuple(state.x_hist), x_n, FxNum(y, spec.fmt))
    record = StepRecord(n, x_n, [OpRecord(o, m) for o, m in ops], FxNum(y, spec.fmt))
    return FxNum(y, spec.fmt), FilterState(y_hist, x_hist), record


def exact_step_value(spec: FilterSpec, state: FilterState, x_n: FxNum) -> Fraction:
    """The step's output with quantized operands but no intermediate rounding."""
    qa, qb = spec.quantized_a(), spec.quantized_b()
    xs = (x_n,) + tuple(state.x_hist)
    acc = sum((c.value * v.value for c, v in zip(qb, xs)), Fraction(0))
    acc -= sum((c.value * v.value for c, v in zip(qa, state.y_hist)), Fraction(0))
    return acc


def impulse_response(spec: FilterSpec, horizon: int) -> list[float]:
    """``h_0..h_{horizon-1}`` in ideal arithmetic from rest."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    return _impulse([float(c) for c in spec.a], [float(c) for c in spec.b], horizon)


def _impulse(a: list[float], b: list[float], horizon: int) -> list[float]:
    h: list[float] = []
    for n in range(horizon):
        acc = b[n] if n < len(b) else 0.0
        for k, ak in enumerate(a, start=1):
            if n - k >= 0:
                acc -= ak * h[n - k]
        h.append(acc)
    return h


def l1_norm(spec: FilterSpec, tol: float = 1e-12, max_horizon: int = 1_000_000) -> float:
    """Sum of ``|h_k|``, truncated once the response has settled.

    Stops at the first ``K`` past the feedforward part (``K > M``) where the last
    ``N+1`` terms together add less than ``tol``. Raises :class:`NotConverged`
    if that never happens within ``max_horizon`` terms.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    a = [float(c) for c in spec.a]
    b = [float(c) for c in spec.b]
    window = len(a) + 1
    h: list[float] = []
    total = 0.0
    tail = 0.0
    for n in range(max_horizon):
        acc = b[n] if n < len(b) else 0.0
        for k, ak in enumerate(a, start=1):
            if n - k >= 0:
                acc -= ak * h[n - k]
        h.append(acc)
        total += abs(acc)
        tail += abs(acc)
        if n >= window:
            tail -= abs(h[n - window])
        if n > spec.order_b and tail < tol:
            return total
        if not math.isfinite(total):
            break
    raise NotConverged(len(h), total)


def output_bound(spec: FilterSpec, tol: float = 1e-12, max_horizon: int = 1_000_000) -> float:
    """BIBO bound ``x_max * sum|h_k|`` with ``x_max = max(|x_lo|, |x_hi|)``."""
    x_max = max(abs(v) for v in spec.input_range)
    return float(x_max) * l1_norm(spec, tol, max_horizon)


def suggest_format(bound: float, frac_bits: int) -> FixedFormat:
    """Smallest ``<k, frac_bits>`` with ``2**(k-1) >= bound``."""
    if not bound > 0:
        raise ValueError("bound must be > 0")
    k = 1
    while 2.0 ** (k - 1) < bound:
        k += 1
    return FixedFormat(k, frac_bits)
