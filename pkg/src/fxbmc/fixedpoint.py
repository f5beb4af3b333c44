"""Two's-complement fixed-point numbers with round-off quantization.

A format ``<k,l>`` has ``k`` integer bits (sign included) and ``l`` fractional
bits. Values are stored as an integer mantissa scaled by ``2**-l``. Rounding is
to nearest with ties away from zero; overflow either raises
:class:`OverflowViolation` or wraps modulo ``2**(k+l)``.

The ``*_mantissa`` functions work on bare integers and are what the search
engines call in their inner loops; :class:`FxNum` and the ``fx_*`` functions are
thin typed wrappers over them.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Union

RealLike = Union[Fraction, int, str, Rational]

MAX_WIDTH = 64


class OverflowMode(enum.Enum):
    ERROR = "error"
    WRAP = "wrap"


@dataclass(frozen=True, order=True)
class FixedFormat:
    int_bits: int
    frac_bits: int

    def __post_init__(self):
        if self.int_bits < 1:
            raise ValueError(f"int_bits must be >= 1 (sign bit), got {self.int_bits}")
        if self.frac_bits < 0:
            raise ValueError(f"frac_bits must be >= 0, got {self.frac_bits}")
        if self.width > MAX_WIDTH:
            raise ValueError(f"word length {self.width} exceeds {MAX_WIDTH} bits")

    @property
    def width(self) -> int:
        return self.int_bits + self.frac_bits

    @property
    def min_mantissa(self) -> int:
        return -(1 << (self.width - 1))

    @property
    def max_mantissa(self) -> int:
        return (1 << (self.width - 1)) - 1

    @property
    def resolution(self) -> Fraction:
        return Fraction(1, 1 << self.frac_bits)

    def min_value(self) -> Fraction:
        return Fraction(self.min_mantissa, 1 << self.frac_bits)

    def max_value(self) -> Fraction:
        return Fraction(self.max_mantissa, 1 << self.frac_bits)

    def range(self) -> tuple[Fraction, Fraction]:
        return self.min_value(), self.max_value()

    def contains(self, mantissa: int) -> bool:
        return self.min_mantissa <= mantissa <= self.max_mantissa

    def __str__(self) -> str:
        return f"<{self.int_bits},{self.frac_bits}>"


def format_range(fmt: FixedFormat) -> tuple[Fraction, Fraction]:
    """Return ``(MIN, MAX) = (-2**(k-1), 2**(k-1) - 2**-l)``."""
    return fmt.range()


class OverflowViolation(ArithmeticError):
    """A quantized result left ``[MIN, MAX]`` while overflow mode was ERROR.

    ``value`` is the real value that did not fit (after rounding to the grid).
    The filter model fills in ``op`` and ``step`` to locate the operator; the
    replay functions attach the partial ``trace``.
    """

    def __init__(self, value: Fraction, fmt: FixedFormat, op=None, step=None, exact=None):
        self.value = Fraction(value)
        self.fmt = fmt
        self.op = op
        self.step = step
        self.exact = exact
        self.trace = None
        super().__init__(value, fmt)

    def __str__(self) -> str:
        # built on demand: the search engines raise and discard these by the thousand
        return self._message()

    def _message(self) -> str:
        lo, hi = self.fmt.range()
        where = ""
        if self.op is not None:
            where = f" at {self.op}"
        if self.step is not None:
            where += f" (step {self.step})"
        return (f"value {to_decimal(self.value)} out of range "
                f"[{to_decimal(lo)}, {to_decimal(hi)}] of {self.fmt}{where}")

    def located(self, op=None, step=None) -> "OverflowViolation":
        if op is not None:
            self.op = op
        if step is not None:
            self.step = step
        return self


def to_fraction(x: RealLike) -> Fraction:
    """Exact conversion; decimal strings never pass through binary floats."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x.strip())
    return Fraction(x)


def round_half_away(num: int, den: int) -> int:
    """Round ``num/den`` to the nearest integer, ties away from zero."""
    if den <= 0:
        raise ValueError("denominator must be positive")
    mag = (2 * abs(num) + den) // (2 * den)
    return -mag if num < 0 else mag


def wrap_mantissa(m: int, width: int) -> int:
    half = 1 << (width - 1)
    return ((m + half) % (1 << width)) - half


def fit_mantissa(m: int, fmt: FixedFormat, mode: OverflowMode, exact=None) -> int:
    if fmt.min_mantissa <= m <= fmt.max_mantissa:
        return m
    if mode is OverflowMode.WRAP:
        return wrap_mantissa(m, fmt.width)
    raise OverflowViolation(Fraction(m, 1 << fmt.frac_bits), fmt, exact=exact)


def quantize_mantissa(x: Fraction, fmt: FixedFormat, mode: OverflowMode) -> int:
    m = round_half_away(x.numerator << fmt.frac_bits, x.denominator)
    return fit_mantissa(m, fmt, mode, exact=x)


def add_mantissa(a: int, b: int, fmt: FixedFormat, mode: OverflowMode) -> int:
    return fit_mantissa(a + b, fmt, mode)


def sub_mantissa(a: int, b: int, fmt: FixedFormat, mode: OverflowMode) -> int:
    return fit_mantissa(a - b, fmt, mode)


def rescale_product(p: int, frac_bits: int) -> int:
    """Round a product carrying ``2*frac_bits`` fractional bits back to ``frac_bits``."""
    if frac_bits == 0:
        return p
    half = 1 << (frac_bits - 1)
    if p >= 0:
        return (p + half) >> frac_bits
    return -((-p + half) >> frac_bits)


def mul_mantissa(a: int, b: int, fmt: FixedFormat, mode: OverflowMode) -> int:
    p = a * b
    m = rescale_product(p, fmt.frac_bits)
    if fmt.min_mantissa <= m <= fmt.max_mantissa:
        return m
    return fit_mantissa(m, fmt, mode, exact=Fraction(p, 1 << (2 * fmt.frac_bits)))


@dataclass(frozen=True)
class FxNum:
    mantissa: int
    fmt: FixedFormat

    def __post_init__(self):
        if not self.fmt.contains(self.mantissa):
            raise ValueError(f"mantissa {self.mantissa} does not fit {self.fmt}")

    @classmethod
    def from_real(cls, x: RealLike, fmt: FixedFormat,
                  mode: OverflowMode = OverflowMode.ERROR) -> "FxNum":
        return quantize(x, fmt, mode)

    @property
    def value(self) -> Fraction:
        return Fraction(self.mantissa, 1 << self.fmt.frac_bits)

    def to_real(self) -> Fraction:
        return self.value

    def __float__(self) -> float:
        return float(self.value)

    def bits(self) -> str:
        """Two's-complement bit string with a point between integer and fraction."""
        return to_binary(self.mantissa, self.fmt)

    def __str__(self) -> str:
        return to_decimal(self.value, self.fmt.frac_bits)

    def __repr__(self) -> str:
        return f"FxNum({self}, {self.fmt})"


def quantize(x: RealLike, fmt: FixedFormat, mode: OverflowMode = OverflowMode.ERROR) -> FxNum:
    """Round an exact real onto the ``fmt`` grid and apply the overflow mode."""
    return FxNum(quantize_mantissa(to_fraction(x), fmt, mode), fmt)


def _same_format(a: FxNum, b: FxNum) -> FixedFormat:
    if a.fmt != b.fmt:
        raise ValueError(f"format mismatch: {a.fmt} vs {b.fmt}")
    return a.fmt


def fx_add(a: FxNum, b: FxNum, mode: OverflowMode = OverflowMode.ERROR) -> FxNum:
    fmt = _same_format(a, b)
    return FxNum(add_mantissa(a.mantissa, b.mantissa, fmt, mode), fmt)


def fx_sub(a: FxNum, b: FxNum, mode: OverflowMode = OverflowMode.ERROR) -> FxNum:
    fmt = _same_format(a, b)
    return FxNum(sub_mantissa(a.mantissa, b.mantissa, fmt, mode), fmt)


def fx_mul(a: FxNum, b: FxNum, mode: OverflowMode = OverflowMode.ERROR) -> FxNum:
    """Exact double-width product, then one rounding back to the operand format."""
    fmt = _same_format(a, b)
    return FxNum(mul_mantissa(a.mantissa, b.mantissa, fmt, mode), fmt)


def to_decimal(x: Fraction, places: int | None = None) -> str:
    """Exact decimal rendering of a dyadic (or any 2^a*5^b denominator) rational.

    With ``places`` the result is padded to that many fractional digits, which is
    exact whenever the denominator divides ``10**places``. Other rationals fall
    back to ``p/q``, which :class:`~fractions.Fraction` parses back unchanged.
    """
    x = Fraction(x)
    den = x.denominator
    digits = 0
    while den % 10 == 0:
        den //= 10
        digits += 1
    while den % 2 == 0 or den % 5 == 0:
        den = den // 2 if den % 2 == 0 else den // 5
        digits += 1
    if den != 1:
        return f"{x.numerator}/{x.denominator}"
    if places is not None:
        digits = max(digits, places)
    scaled = x * 10 ** digits
    assert scaled.denominator == 1
    n = scaled.numerator
    sign = "-" if n < 0 else ""
    s = str(abs(n)).rjust(digits + 1, "0")
    if digits == 0:
        return sign + s
    return f"{sign}{s[:-digits]}.{s[-digits:]}"


def to_binary(mantissa: int, fmt: FixedFormat) -> str:
    bits = format(mantissa & ((1 << fmt.width) - 1), f"0{fmt.width}b")
    if fmt.frac_bits == 0:
        return bits
    return f"{bits[:fmt.int_bits]}.{bits[fmt.int_bits:]}"
