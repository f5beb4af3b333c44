import json
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from fxbmc.filter_model import FilterSpec
from fxbmc.timing import (
    CycleTable,
    TimingSpec,
    TimingViolation,
    estimate_cycles,
    load_cycle_table,
    verify_timing,
)
from fxbmc.verifier import Verified, Violation

from conftest import Q24

MSP = CycleTable("msp430g2231", 35)
CLOCK_48K = TimingSpec.of(16_000_000, 48_000)


def fir(taps: int) -> FilterSpec:
    return FilterSpec.create([], ["0.0625"] * taps, Q24)


def test_bundled_table():
    assert load_cycle_table("msp430g2231") == MSP


def test_table_from_file(tmp_path):
    path = tmp_path / "dsp.json"
    path.write_text(json.dumps({"name": "dsp", "mac_cycles": 1, "per_sample_overhead": 12}))
    table = load_cycle_table(path)
    assert table == CycleTable("dsp", 1, 12)
    assert estimate_cycles(fir(4), table) == 16


def test_table_missing_field(tmp_path):
    path = tmp_path / "t.json"
    path.write_text(json.dumps({"name": "x"}))
    with pytest.raises(ValueError, match="mac_cycles"):
        load_cycle_table(path)


def test_negative_cycles_rejected():
    with pytest.raises(ValueError):
        CycleTable("x", -1)
    with pytest.raises(ValueError):
        TimingSpec.of(0, 1)


@pytest.mark.parametrize("taps, cycles", [(1, 35), (2, 70), (32, 1120)])
def test_estimate_fir(taps, cycles):
    assert estimate_cycles(fir(taps), MSP) == cycles


def test_estimate_counts_feedback_taps():
    spec = FilterSpec.create(["0.5", "-0.25"], ["1", "0.5", "0.25"], Q24)
    assert estimate_cycles(spec, MSP) == 5 * 35
    assert estimate_cycles(spec, CycleTable("t", 35, 120)) == 295


def test_100_cycles_fit():
    result = verify_timing(100, CLOCK_48K)
    assert isinstance(result, Verified)
    assert result.info["elapsed"] == Fraction(100, 16_000_000)


def test_32_tap_fir_misses_deadline():
    result = verify_timing(estimate_cycles(fir(32), MSP), CLOCK_48K)
    assert isinstance(result, Violation)
    tv = result.witness
    assert tv.elapsed == Fraction(70, 1_000_000)
    assert tv.deadline == Fraction(1, 48_000)
    assert "70 us" in tv.describe() and "20.8333 us" in tv.describe()


def test_exact_boundary():
    # 1/3 s sample period against a 3 Hz clock: one cycle hits the deadline exactly,
    # which floating point cannot represent
    t = TimingSpec.of(3, 3)
    assert isinstance(verify_timing(1, t), Verified)
    assert isinstance(verify_timing(2, t), Violation)
    t = TimingSpec.of("16000000", "48000")
    assert isinstance(verify_timing(333, t), Verified)  # 333/16e6 = 20.8125 us
    assert isinstance(verify_timing(334, t), Violation)  # 20.875 us


def test_zero_cycles_always_fit():
    assert isinstance(verify_timing(0, TimingSpec.of(1, 10**9)), Verified)


@given(st.integers(0, 10**6), st.integers(1, 10**8), st.integers(1, 10**6))
def test_verdict_is_exact_comparison(cycles, clock, rate):
    result = verify_timing(cycles, TimingSpec.of(clock, rate))
    assert isinstance(result, Verified) == (cycles * rate <= clock)


@given(st.integers(0, 10**5), st.integers(0, 10**5), st.integers(1, 10**8), st.integers(1, 10**6))
def test_monotone_in_cycles(c1, c2, clock, rate):
    t = TimingSpec.of(clock, rate)
    lo, hi = sorted((c1, c2))
    if isinstance(verify_timing(hi, t), Verified):
        assert isinstance(verify_timing(lo, t), Verified)


@given(st.integers(1, 64))
def test_slack_sign_matches_verdict(taps):
    result = verify_timing(estimate_cycles(fir(taps), MSP), CLOCK_48K)
    slack = result.info["slack"]
    assert (slack >= 0) == isinstance(result, Verified)
    assert TimingViolation(0, result.info["elapsed"], result.info["deadline"]).slack == slack
