"""QF_BV encoding of the bounded filter checks, driven through an external solver.

The script unrolls the filter ``bound`` steps. Every operator result gets its
own ``w``-bit constant; multiplies are formed exactly at ``2w`` bits and
rounded to nearest, ties away from zero, with the same add-half-then-shift rule
as :func:`fxbmc.fixedpoint.rescale_product`. Additions are formed at ``w+1``
bits. The range test of each operator is made on that widened, pre-wrap value;
the stored result is the low ``w`` bits, i.e. the wrapped value.

Any SMT-LIB v2 solver that reads a script on stdin and answers ``check-sat``
and ``get-value`` will do; ``z3 -in`` is the default.
"""

from __future__ import annotations

import os
import shlex
import subprocess
import time
from dataclasses import dataclass, field

from .filter_model import FilterSpec, FilterState
from .fixedpoint import FxNum, OverflowMode
from .verifier import (
    Counterexample,
    Property,
    ReplayMismatch,
    Unknown,
    replay_limit_cycle,
    replay_overflow,
)

DEFAULT_SOLVER = "z3 -in"
DEFAULT_TIMEOUT = 3600.0
MAX_OPERATORS = 200_000


class EncodingUnsupported(ValueError):
    pass


@dataclass(frozen=True)
class VarInfo:
    role: str  # "input", "init_state", "op_result" or "output"
    step: int
    detail: str = ""  # operator slug, or "y"/"x" for state elements


@dataclass
class SmtScript:
    text: str
    var_map: dict[str, VarInfo]
    prop: Property
    bound: int
    width: int


@dataclass
class Sat:
    model: dict[str, int]  # symbol -> unsigned bit pattern
    seconds: float = 0.0


@dataclass
class Unsat:
    seconds: float = 0.0


@dataclass
class SolverUnknown:
    reason: str
    raw: str = field(default="", repr=False)


SolverOutcome = Sat | Unsat | SolverUnknown


def _bv(value: int, width: int) -> str:
    return f"(_ bv{value % (1 << width)} {width})"


def _sext(term: str, extra: int) -> str:
    return term if extra == 0 else f"((_ sign_extend {extra}) {term})"


def rounding_term(prod: str, frac_bits: int, width: int) -> str:
    """Round ``prod`` (``2*frac_bits`` fractional bits) to ``frac_bits``, ties away from zero.

    Non-negative: ``(p + half) >> l``. Negative: ``(p + half - 1) >> l`` with an
    arithmetic shift, which equals ``-((-p + half) >> l)``.
    """
    half = 1 << (frac_bits - 1)
    shift = _bv(frac_bits, width)
    return (f"(ite (bvslt {prod} {_bv(0, width)}) "
            f"(bvashr (bvadd {prod} {_bv(half - 1, width)}) {shift}) "
            f"(bvashr (bvadd {prod} {_bv(half, width)}) {shift}))")


class _Writer:
    def __init__(self, spec: FilterSpec, prop: Property, bound: int):
        self.spec = spec
        self.fmt = spec.fmt
        self.w = spec.fmt.width
        self.prop = prop
        self.bound = bound
        self.lines: list[str] = []
        self.var_map: dict[str, VarInfo] = {}
        self.range_checks: list[str] = []

    def declare(self, name: str, info: VarInfo) -> str:
        self.lines.append(f"(declare-fun {name} () (_ BitVec {self.w}))")
        self.var_map[name] = info
        return name

    def define(self, name: str, sort: str, body: str) -> str:
        self.lines.append(f"(define-fun {name} () {sort} {body})")
        return name

    def assert_(self, term: str) -> None:
        self.lines.append(f"(assert {term})")

    def out_of_range(self, name: str, term: str, width: int) -> str:
        lo = _bv(self.fmt.min_mantissa, width)
        hi = _bv(self.fmt.max_mantissa, width)
        return self.define(name, "Bool", f"(or (bvslt {term} {lo}) (bvsgt {term} {hi}))")

    def wrapped(self, name: str, info: VarInfo, term: str) -> str:
        self.declare(name, info)
        self.assert_(f"(= {name} ((_ extract {self.w - 1} 0) {term}))")
        return name

    def mul(self, t: int, slug: str, coeff: int, operand: str) -> str:
        w, lb = self.w, self.fmt.frac_bits
        ww = 2 * w
        prod = self.define(f"p_{t}_{slug}", f"(_ BitVec {ww})",
                           f"(bvmul {_bv(coeff, ww)} {_sext(operand, w)})")
        if lb == 0:
            rounded = prod
        else:
            rounded = self.define(f"r_{t}_{slug}", f"(_ BitVec {ww})", rounding_term(prod, lb, ww))
        self.range_checks.append(self.out_of_range(f"v_{t}_{slug}", rounded, ww))
        return self.wrapped(f"op_{t}_{slug}", VarInfo("op_result", t, slug), rounded)

    def addsub(self, t: int, slug: str, fn: str, left: str, right: str) -> str:
        ws = self.w + 1
        total = self.define(f"s_{t}_{slug}", f"(_ BitVec {ws})",
                            f"({fn} {_sext(left, 1)} {_sext(right, 1)})")
        self.range_checks.append(self.out_of_range(f"v_{t}_{slug}", total, ws))
        return self.wrapped(f"op_{t}_{slug}", VarInfo("op_result", t, slug), total)


def encode(spec: FilterSpec, prop: Property, bound: int) -> SmtScript:
    """Build the flat SMT-LIB script whose satisfiability means a violation within ``bound``."""
    if prop not in (Property.OVERFLOW, Property.LIMIT_CYCLE):
        raise EncodingUnsupported(f"property {prop.value} has no bit-vector encoding")
    if bound < 1:
        raise ValueError("bound must be >= 1")
    n_ops = len(spec.operators()) * bound
    if n_ops > MAX_OPERATORS:
        raise EncodingUnsupported(f"{n_ops} operator instances exceed the limit of {MAX_OPERATORS}")
    mode = OverflowMode.ERROR if prop is Property.OVERFLOW else OverflowMode.WRAP
    spec = spec.with_mode(mode)
    wr = _Writer(spec, prop, bound)
    w = wr.w
    n_a, m_b = spec.order_a, spec.order_b
    wr.lines += [
        f"; {prop.value} check, bound {bound}, format {spec.fmt}",
        "(set-option :produce-models true)",
        "(set-logic QF_BV)",
    ]

    y_init = [wr.declare(f"yi_{j}", VarInfo("init_state", -j, "y")) for j in range(1, n_a + 1)]
    x_init = [wr.declare(f"xi_{j}", VarInfo("init_state", -j, "x")) for j in range(1, m_b + 1)]
    if prop is Property.OVERFLOW:
        for name in y_init + x_init:
            wr.assert_(f"(= {name} {_bv(0, w)})")

    grid = spec.input_grid()
    xs: list[str] = []
    ys: list[str] = []

    def x_at(n: int) -> str:
        return xs[n] if n >= 0 else x_init[-n - 1]

    def y_at(n: int) -> str:
        return ys[n] if n >= 0 else y_init[-n - 1]

    for t in range(bound):
        x = wr.declare(f"x_{t}", VarInfo("input", t))
        xs.append(x)
        if prop is Property.LIMIT_CYCLE:
            wr.assert_(f"(= {x} {_bv(0, w)})")
        elif len(grid) == 0:
            wr.assert_("false")
        else:
            wr.assert_(f"(and (bvsle {_bv(grid.start, w)} {x}) (bvsle {x} {_bv(grid.stop - 1, w)}))")
        acc = wr.mul(t, "mul_b0", spec.b_q[0], x)
        for k in range(1, m_b + 1):
            p = wr.mul(t, f"mul_b{k}", spec.b_q[k], x_at(t - k))
            acc = wr.addsub(t, f"add_b{k}", "bvadd", acc, p)
        for k in range(1, n_a + 1):
            p = wr.mul(t, f"mul_a{k}", spec.a_q[k - 1], y_at(t - k))
            acc = wr.addsub(t, f"sub_a{k}", "bvsub", acc, p)
        y = wr.declare(f"y_{t}", VarInfo("output", t))
        wr.assert_(f"(= {y} {acc})")
        ys.append(y)

    if prop is Property.OVERFLOW:
        checks = wr.range_checks
        wr.assert_(f"(or {' '.join(checks)})" if len(checks) > 1 else checks[0])
    else:
        def state(t: int) -> list[str]:
            return [y_at(t - k) for k in range(1, n_a + 1)] + [x_at(t - k) for k in range(1, m_b + 1)]

        zero = _bv(0, w)
        pairs = []
        if n_a + m_b:
            for i in range(bound + 1):
                si = state(i)
                nonzero = " ".join(f"(distinct {e} {zero})" for e in si)
                nonzero = f"(or {nonzero})" if len(si) > 1 else nonzero
                for j in range(i + 1, bound + 1):
                    sj = state(j)
                    same = " ".join(f"(= {a} {b})" for a, b in zip(si, sj))
                    same = f"(and {same})" if len(si) > 1 else same
                    pairs.append(f"(and {same} {nonzero})")
        if not pairs:
            wr.assert_("false")
        elif len(pairs) == 1:
            wr.assert_(pairs[0])
        else:
            wr.assert_("(or " + " ".join(pairs) + ")")

    wr.lines.append("(check-sat)")
    wr.lines.append(f"(get-value ({' '.join(wr.var_map)}))")
    wr.lines.append("(exit)")
    return SmtScript("\n".join(wr.lines) + "\n", wr.var_map, prop, bound, w)


def parse_sexprs(text: str) -> list:
    """Parse whitespace-separated s-expressions into nested lists of atoms."""
    out: list = []
    stack: list[list] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c == "(":
            stack.append([])
            i += 1
        elif c == ")":
            if not stack:
                raise ValueError(f"unbalanced ')' at offset {i}")
            done = stack.pop()
            (stack[-1] if stack else out).append(done)
            i += 1
        else:
            j = i
            if c == '"':
                j = text.index('"', i + 1) + 1
            elif c == "|":
                j = text.index("|", i + 1) + 1
            else:
                while j < n and not text[j].isspace() and text[j] not in "();":
                    j += 1
            (stack[-1] if stack else out).append(text[i:j])
            i = j
    if stack:
        raise ValueError("unbalanced '(' in solver output")
    return out


def bv_value(term) -> int:
    """Unsigned value of a bit-vector literal: ``#b..``, ``#x..`` or ``(_ bvN w)``."""
    if isinstance(term, list) and len(term) == 3 and term[0] == "_" and term[1].startswith("bv"):
        return int(term[1][2:])
    if isinstance(term, str) and term.startswith("#b"):
        return int(term[2:], 2)
    if isinstance(term, str) and term.startswith("#x"):
        return int(term[2:], 16)
    raise ValueError(f"not a bit-vector literal: {term!r}")


def to_signed(bits: int, width: int) -> int:
    return bits - (1 << width) if bits >> (width - 1) else bits


def parse_response(raw: str, var_map) -> SolverOutcome:
    try:
        exprs = parse_sexprs(raw)
    except ValueError as exc:
        return SolverUnknown(f"malformed solver output ({exc}): {raw.strip()[:2000]}", raw)
    if not exprs:
        return SolverUnknown("malformed solver output: empty response", raw)
    head = exprs[0]
    if head == "unsat":
        return Unsat()
    if head == "unknown":
        return SolverUnknown("solver answered unknown", raw)
    if head != "sat":
        return SolverUnknown(f"malformed solver output: {raw.strip()[:2000]}", raw)
    model: dict[str, int] = {}
    try:
        for binding_list in exprs[1:]:
            if not isinstance(binding_list, list):
                continue
            for binding in binding_list:
                name, value = binding
                model[name.strip("|")] = bv_value(value)
    except (ValueError, TypeError) as exc:
        return SolverUnknown(f"malformed solver output ({exc}): {raw.strip()[:2000]}", raw)
    missing = [name for name in var_map if name not in model]
    if missing:
        return SolverUnknown(f"malformed solver output: no value for {', '.join(missing[:5])}", raw)
    return Sat(model)


def solve(script: SmtScript, solver_cmd: str | list[str] | None = None,
          timeout: float | None = DEFAULT_TIMEOUT) -> SolverOutcome:
    """Run one solver process on ``script`` and parse its verdict and model."""
    if solver_cmd is None:
        solver_cmd = os.environ.get("FXBMC_SOLVER", DEFAULT_SOLVER)
    argv = shlex.split(solver_cmd) if isinstance(solver_cmd, str) else list(solver_cmd)
    start = time.perf_counter()
    try:
        proc = subprocess.run(argv, input=script.text, capture_output=True, text=True,
                              timeout=timeout)
    except subprocess.TimeoutExpired:
        return SolverUnknown(f"timeout after {timeout} s")
    except OSError as exc:
        return SolverUnknown(f"solver failure: cannot run {argv[0]!r}: {exc}")
    outcome = parse_response(proc.stdout, script.var_map)
    if isinstance(outcome, SolverUnknown) and proc.returncode != 0 and not proc.stdout.strip():
        return SolverUnknown(f"solver failure: exit {proc.returncode}: {proc.stderr.strip()[:2000]}",
                             proc.stderr)
    if isinstance(outcome, (Sat, Unsat)):
        outcome.seconds = time.perf_counter() - start
    return outcome


def _check_ops(cex: Counterexample, decoded: dict[tuple[int, str], int]) -> str | None:
    for record in cex.trace:
        for op in record.ops:
            got = decoded.get((record.n, op.op.slug))
            if got is not None and got != op.mantissa:
                return (f"step {record.n} {op.op}: model has {got}, replay has {op.mantissa}")
        if record.y is not None:
            got = decoded.get((record.n, "y"))
            if got is not None and got != record.y.mantissa:
                return f"step {record.n} output: model has {got}, replay has {record.y.mantissa}"
    return None


def extract_counterexample(outcome: Sat, script: SmtScript, spec: FilterSpec,
                           bound: int) -> Counterexample | Unknown:
    """Decode a model and replay it; a witness that fails to replay is reported Unknown."""
    fmt = spec.fmt
    values: dict[str, int] = {name: to_signed(outcome.model[name], script.width)
                              for name in script.var_map}
    decoded: dict[tuple[int, str], int] = {}
    inputs: dict[int, int] = {}
    y_init: dict[int, int] = {}
    x_init: dict[int, int] = {}
    for name, info in script.var_map.items():
        v = values[name]
        if info.role == "input":
            inputs[info.step] = v
        elif info.role == "init_state":
            (y_init if info.detail == "y" else x_init)[-info.step] = v
        elif info.role == "op_result":
            decoded[(info.step, info.detail)] = v
        elif info.role == "output":
            decoded[(info.step, "y")] = v
    try:
        if script.prop is Property.OVERFLOW:
            xs = [FxNum(inputs[t], fmt) for t in range(bound)]
            cex = replay_overflow(spec, xs)
        else:
            state = FilterState.from_mantissas(
                spec, [y_init[j] for j in range(1, spec.order_a + 1)],
                [x_init[j] for j in range(1, spec.order_b + 1)])
            cex = replay_limit_cycle(spec, state, bound)
    except ReplayMismatch as exc:
        return Unknown(f"encoding mismatch: {exc}")
    problem = _check_ops(cex, decoded)
    if problem is not None:
        return Unknown(f"encoding mismatch: {problem}")
    return cex
