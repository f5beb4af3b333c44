"""Text reports and delimited trace export for verification results."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

from .filter_model import FilterSpec, StepRecord
from .fixedpoint import FxNum, to_decimal
from .timing import TimingViolation
from .verifier import Counterexample, Unknown, VerificationResult, Verified, Violation

TRACE_HEADER = ["n", "x", "y_bin", "y_dec", "op_violation"]


@dataclass
class Report:
    verdict: str
    prop: str
    result: VerificationResult
    spec: FilterSpec | None = None
    bound: int | None = None
    engine: str | None = None
    elapsed: float = 0.0
    extra: list[str] = field(default_factory=list)

    @property
    def counterexample(self) -> Counterexample | None:
        if isinstance(self.result, Violation) and isinstance(self.result.witness, Counterexample):
            return self.result.witness
        return None


def _num(v: FxNum | None) -> str:
    return "" if v is None else str(v)


def _violation_text(record: StepRecord) -> str:
    exc = record.violation
    if exc is None:
        return ""
    lo, hi = exc.fmt.range()
    text = (f"{exc.op}: {to_decimal(exc.value)} out of range "
            f"[{to_decimal(lo)}, {to_decimal(hi)}]")
    if exc.exact is not None:
        text += f"; exact step value {to_decimal(exc.exact)}"
    return text


def trace_rows(cex: Counterexample) -> list[list[str]]:
    """Rows of the trace table; initial-state entries get negative ``n``."""
    rows = []
    ys, xs = cex.initial_state.y_hist, cex.initial_state.x_hist
    depth = max(len(ys), len(xs))
    if not cex.initial_state.is_zero():
        for j in range(depth, 0, -1):
            y = ys[j - 1] if j <= len(ys) else None
            x = xs[j - 1] if j <= len(xs) else None
            rows.append([str(-j), _num(x), "" if y is None else y.bits(), _num(y), ""])
    for record in cex.trace:
        y = record.y
        rows.append([str(record.n), _num(record.x), "" if y is None else y.bits(), _num(y),
                     _violation_text(record)])
    return rows


def trace_csv(cex: Counterexample) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    writer.writerows(trace_rows(cex))
    return buf.getvalue()


def _table(rows: list[list[str]]) -> list[str]:
    header = ["n", "x(n)", "y(n) bin", "y(n) dec", "violation"]
    widths = [max(len(r[i]) for r in rows + [header]) for i in range(4)]
    out = []
    for r in [header] + rows:
        cells = [r[i].rjust(widths[i]) for i in range(4)]
        line = "  ".join(cells)
        if r[4]:
            line += "  " + r[4]
        out.append(line.rstrip())
    return out


def render(report: Report) -> str:
    lines = [f"property : {report.prop}"]
    if report.spec is not None:
        spec = report.spec
        name = f" ({spec.name})" if spec.name else ""
        lines.append(f"filter   : N={spec.order_a} M={spec.order_b} format {spec.fmt}{name}")
    if report.engine:
        lines.append(f"engine   : {report.engine}")
    if report.bound is not None:
        lines.append(f"bound    : {report.bound}")
    lines.append(f"verdict  : {report.verdict}")
    lines.append(f"elapsed  : {report.elapsed:.3f} s")
    result = report.result
    if isinstance(result, Unknown):
        lines.append(f"reason   : {result.reason}")
    elif isinstance(result, Violation) and isinstance(result.witness, TimingViolation):
        lines.append(f"violation: {result.witness.describe()}")
    elif isinstance(result, Verified) and "elapsed" in result.info:
        tv = TimingViolation(0, result.info["elapsed"], result.info["deadline"])
        lines.append(f"timing   : {float(tv.elapsed) * 1e6:.6g} us <= deadline "
                     f"{float(tv.deadline) * 1e6:.6g} us (slack {float(tv.slack) * 1e6:.6g} us)")
    lines += report.extra
    cex = report.counterexample
    if cex is not None:
        lines.append(f"violation: {cex.describe()}")
        if cex.cycle is not None:
            states = " -> ".join("(" + ", ".join(to_decimal(v * cex.spec.fmt.resolution) for v in s) + ")"
                                 for s in cex.cycle.states)
            lines.append(f"cycle    : {states}")
        lines.append("")
        lines += _table(trace_rows(cex))
    return "\n".join(lines) + "\n"
