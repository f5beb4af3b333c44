"""Command line front end.

Exit codes: 0 verified, 1 violation, 2 unknown (timeout, budget, solver
trouble), 3 usage or spec-file error.

Spec files are JSON::

    {"name": "single-pole", "a": ["-0.5"], "b": ["1"],
     "format": {"int_bits": 2, "frac_bits": 4}, "input_range": ["-1", "1"]}

Numbers may be JSON strings or literals; both are read as exact rationals.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from fractions import Fraction
from pathlib import Path

from .filter_model import FilterSpec, NotConverged, SpecError, output_bound, l1_norm, suggest_format
from .fixedpoint import FixedFormat, OverflowMode, to_decimal
from .report import Report, render, trace_csv
from .smt_backend import DEFAULT_TIMEOUT, EncodingUnsupported, encode
from .timing import TimingSpec, estimate_cycles, load_cycle_table, verify_timing
from .verifier import (
    DEFAULT_BUDGET,
    Engine,
    Property,
    Unknown,
    Verified,
    Violation,
    verify_limit_cycle,
    verify_overflow,
)

EXIT_VERIFIED, EXIT_VIOLATION, EXIT_UNKNOWN, EXIT_USAGE = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _parse_number(value, what: str) -> Fraction:
    if isinstance(value, bool) or not isinstance(value, (str, int, Fraction)):
        raise SpecError([f"{what}: expected a decimal string, got {value!r}"])
    try:
        return Fraction(value.strip() if isinstance(value, str) else value)
    except (ValueError, ZeroDivisionError):
        raise SpecError([f"{what}: cannot parse {value!r} as a number"]) from None


def spec_from_dict(data: dict) -> FilterSpec:
    problems = []
    if not isinstance(data, dict):
        raise SpecError(["spec file must contain a JSON object"])
    for key in ("a", "b", "format", "input_range"):
        if key not in data:
            problems.append(f"missing field {key!r}")
    if problems:
        raise SpecError(problems)
    fmt_data = data["format"]
    try:
        fmt = FixedFormat(int(fmt_data["int_bits"]), int(fmt_data["frac_bits"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecError([f"bad format {fmt_data!r}: {exc}"]) from None
    a = [_parse_number(v, f"a[{i + 1}]") for i, v in enumerate(data["a"])]
    b = [_parse_number(v, f"b[{i}]") for i, v in enumerate(data["b"])]
    rng = data["input_range"]
    if not isinstance(rng, list) or len(rng) != 2:
        raise SpecError([f"input_range must be [lo, hi], got {rng!r}"])
    lo, hi = (_parse_number(v, "input_range") for v in rng)
    try:
        mode = OverflowMode(data.get("overflow_mode", "error"))
    except ValueError:
        raise SpecError([f"unknown overflow_mode {data.get('overflow_mode')!r}"]) from None
    return FilterSpec(tuple(a), tuple(b), fmt, (lo, hi), mode, str(data.get("name", "")))


def load_filter_spec(path) -> FilterSpec:
    """Read a JSON spec file; decimal literals are parsed exactly, never via float."""
    text = Path(path).read_text()
    try:
        data = json.loads(text, parse_float=Fraction, parse_int=Fraction)
    except json.JSONDecodeError as exc:
        raise SpecError([f"{path}: invalid JSON: {exc}"]) from None
    return spec_from_dict(data)


def spec_to_dict(spec: FilterSpec, notes: str | None = None) -> dict:
    data = {
        "name": spec.name,
        "a": [to_decimal(c) for c in spec.a],
        "b": [to_decimal(c) for c in spec.b],
        "format": {"int_bits": spec.fmt.int_bits, "frac_bits": spec.fmt.frac_bits},
        "input_range": [to_decimal(v) for v in spec.input_range],
        "overflow_mode": spec.overflow_mode.value,
    }
    if notes:
        data["notes"] = notes
    return data


def dump_filter_spec(spec: FilterSpec, path, notes: str | None = None) -> None:
    Path(path).write_text(json.dumps(spec_to_dict(spec, notes), indent=2) + "\n")


def _exit_code(result) -> int:
    if isinstance(result, Verified):
        return EXIT_VERIFIED
    if isinstance(result, Violation):
        return EXIT_VIOLATION
    return EXIT_UNKNOWN


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fxbmc", description="Bounded verification of fixed-point Direct Form I filters.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def bmc_options(p):
        p.add_argument("spec", help="filter spec file (JSON)")
        p.add_argument("--bound", type=int, default=6, help="number of unrolled samples (default 6)")
        p.add_argument("--engine", choices=[e.value for e in Engine], default=Engine.EXHAUSTIVE.value)
        p.add_argument("--solver-cmd", default=None,
                       help="SMT-LIB v2 solver reading stdin (default $FXBMC_SOLVER or 'z3 -in')")
        p.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT, help="seconds (default 3600)")
        p.add_argument("--budget", type=int, default=DEFAULT_BUDGET,
                       help="max step evaluations for the exhaustive engine")
        p.add_argument("--emit-smt", metavar="PATH", help="also write the SMT-LIB script here")
        p.add_argument("--trace-out", metavar="PATH", help="write the counterexample trace as CSV")

    bmc_options(sub.add_parser("overflow", help="search input sequences for arithmetic overflow"))
    bmc_options(sub.add_parser("limitcycle", help="search initial states for zero-input limit cycles"))

    p = sub.add_parser("timing", help="check the per-sample cycle budget against the sample period")
    p.add_argument("spec")
    p.add_argument("--clock-hz", required=True)
    p.add_argument("--sample-rate-hz", required=True)
    p.add_argument("--cycle-table", default="msp430g2231", help="bundled table name or JSON file")

    p = sub.add_parser("bibo", help="ideal output bound and suggested word length")
    p.add_argument("spec")
    p.add_argument("--frac-bits", type=int, default=None, help="default: the filter's fractional bits")
    p.add_argument("--tol", type=float, default=1e-12)
    return parser


def _run_bmc(args, prop: Property) -> tuple[int, str]:
    spec = load_filter_spec(args.spec)
    if args.bound < 1:
        raise UsageError("--bound must be >= 1")
    engine = Engine(args.engine)
    if args.emit_smt:
        try:
            Path(args.emit_smt).write_text(encode(spec, prop, args.bound).text)
        except EncodingUnsupported as exc:
            print(f"fxbmc: cannot emit SMT script: {exc}", file=sys.stderr)
    verify = verify_overflow if prop is Property.OVERFLOW else verify_limit_cycle
    start = time.perf_counter()
    result = verify(spec, args.bound, engine, budget=args.budget, solver_cmd=args.solver_cmd,
                    timeout=args.timeout)
    elapsed = time.perf_counter() - start
    report = Report(str(result), prop.value, result, spec, args.bound, engine.value, elapsed)
    if args.trace_out and report.counterexample is not None:
        Path(args.trace_out).write_text(trace_csv(report.counterexample))
    return _exit_code(result), render(report)


def _run_timing(args) -> tuple[int, str]:
    spec = load_filter_spec(args.spec)
    try:
        t = TimingSpec.of(args.clock_hz, args.sample_rate_hz)
        table = load_cycle_table(args.cycle_table)
    except (ValueError, OSError) as exc:
        raise UsageError(str(exc)) from None
    start = time.perf_counter()
    cycles = estimate_cycles(spec, table)
    result = verify_timing(cycles, t)
    extra = [f"cycles   : {cycles} ({spec.taps} taps x {table.mac_cycles} + "
             f"{table.per_sample_overhead} overhead, table {table.name})"]
    report = Report(str(result), Property.TIMING.value, result, spec,
                    elapsed=time.perf_counter() - start, extra=extra)
    return _exit_code(result), render(report)


def _run_bibo(args) -> tuple[int, str]:
    spec = load_filter_spec(args.spec)
    frac = spec.fmt.frac_bits if args.frac_bits is None else args.frac_bits
    try:
        norm = l1_norm(spec, args.tol)
        bound = output_bound(spec, args.tol)
    except NotConverged as exc:
        return EXIT_UNKNOWN, f"verdict  : UNKNOWN ({exc})\n"
    lines = [f"sum|h_k| : {norm:.9g}", f"|y| max  : {bound:.9g}"]
    if bound > 0:
        fmt = suggest_format(bound, frac)
        lo, hi = fmt.range()
        lines.append(f"suggested: {fmt} range [{to_decimal(lo)}, {to_decimal(hi)}]")
        lines.append(f"current  : {spec.fmt}" + ("" if spec.fmt.int_bits >= fmt.int_bits
                                                  else " (narrower than the bound)"))
    return EXIT_VERIFIED, "\n".join(lines) + "\n"


def run(argv: list[str] | None = None) -> tuple[int, str]:
    """Parse ``argv`` and execute; returns ``(exit code, report text)``."""
    try:
        args = build_parser().parse_args(argv)
        if args.command == "overflow":
            return _run_bmc(args, Property.OVERFLOW)
        if args.command == "limitcycle":
            return _run_bmc(args, Property.LIMIT_CYCLE)
        if args.command == "timing":
            return _run_timing(args)
        return _run_bibo(args)
    except UsageError as exc:
        return EXIT_USAGE, f"{exc}\n"
    except SpecError as exc:
        return EXIT_USAGE, "spec error:\n" + "".join(f"  {p}\n" for p in exc.problems)
    except OSError as exc:
        return EXIT_USAGE, f"fxbmc: {exc}\n"


def main(argv: list[str] | None = None) -> int:
    code, text = run(argv)
    stream = sys.stderr if code == EXIT_USAGE else sys.stdout
    stream.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
