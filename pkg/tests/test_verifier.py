import random
from fractions import Fraction

import pytest

from fxbmc.filter_model import FilterSpec, FilterState
from fxbmc.fixedpoint import FixedFormat, FxNum, OverflowMode, OverflowViolation, quantize
from fxbmc.verifier import (
    Counterexample,
    Engine,
    Property,
    Unknown,
    Verified,
    Violation,
    exhaustive_engine,
    find_cycle,
    replay_limit_cycle,
    simulate_trace,
    verify_limit_cycle,
    verify_overflow,
)

from naive import naive_limit_cycle_witness, naive_overflow_witness

Q24 = FixedFormat(2, 4)


def random_tiny_spec(rng, max_width=5, max_taps=2):
    w = rng.randint(2, max_width)
    l = rng.randint(0, w - 1)
    fmt = FixedFormat(w - l, l)
    n_a = rng.randint(0, max_taps)
    m_b = rng.randint(0, max_taps - n_a)
    coeff = lambda: FxNum(rng.randint(fmt.min_mantissa, fmt.max_mantissa), fmt).value  # noqa: E731
    lo = rng.randint(fmt.min_mantissa, fmt.max_mantissa)
    hi = min(lo + rng.randint(0, 4), fmt.max_mantissa)
    return FilterSpec.create([coeff() for _ in range(n_a)], [coeff() for _ in range(m_b + 1)], fmt,
                             (lo * fmt.resolution, hi * fmt.resolution))


def test_single_pole_overflow_found(single_pole):
    result = verify_overflow(single_pole, 6)
    assert isinstance(result, Violation)
    cex = result.witness
    assert len(cex.inputs) == 6
    assert cex.overflow.step == 5
    # the all-ones sequence is also a witness
    with pytest.raises(OverflowViolation):
        simulate_trace(single_pole, [quantize(1, Q24)] * 6)
    # and nothing shorter overflows
    assert isinstance(verify_overflow(single_pole, 5), Verified)


def test_single_pole_witness_is_canonical(single_pole):
    # full-scale inputs are tried first, so the witness is the all-ones sequence
    cex = verify_overflow(single_pole, 6).witness
    assert [x.mantissa for x in cex.inputs] == [16] * 6
    assert [r.y.value for r in cex.trace[:5]] == [1, Fraction(3, 2), Fraction(7, 4),
                                                   Fraction(15, 8), Fraction(31, 16)]


def test_wider_integer_part_verifies():
    spec = FilterSpec.create(["-0.5"], ["1"], FixedFormat(3, 4), ("-1", "1"))
    assert verify_overflow(spec, 6) == Verified(6)


def test_zero_filter_verifies():
    for fmt in (Q24, FixedFormat(1, 0), FixedFormat(4, 7)):
        spec = FilterSpec.create([], ["0"], fmt, ("-1", "0"))
        assert verify_overflow(spec, 4) == Verified(4)


def test_overflow_ignores_spec_wrap_mode(single_pole):
    wrapping = single_pole.with_mode(OverflowMode.WRAP)
    assert isinstance(verify_overflow(wrapping, 6), Violation)


def test_exhaustive_counts_simulations():
    spec = FilterSpec.create([], ["1"], Q24, ("-0.0625", "0.0625"))
    result = exhaustive_engine(spec, Property.OVERFLOW, 1)
    assert result == Verified(1)
    assert result.info["explored"] == 3


def test_limit_cycle_alternating(alternating):
    result = verify_limit_cycle(alternating, 6)
    assert isinstance(result, Violation)
    assert result.witness.cycle.period == 2
    assert result.witness.initial_state.mantissas() == (1,)
    cex = replay_limit_cycle(alternating, FilterState.from_reals(alternating, ["0.125"]), 6)
    assert [r.y.value for r in cex.trace] == [Fraction(v) for v in ("-0.0625", "0.0625", "-0.0625")]
    assert cex.cycle.period == 2
    assert cex.cycle.states == ((-1,), (1,))


def test_limit_cycle_fixed_point(single_pole):
    result = verify_limit_cycle(single_pole, 6)
    assert isinstance(result, Violation)
    cycle = result.witness.cycle
    # smallest initial state first: y(-1) = 0.0625 is already the fixed point
    assert cycle.period == 1 and cycle.states == ((1,),)
    cex = replay_limit_cycle(single_pole, FilterState.from_reals(single_pole, ["0.125"]), 6)
    assert [r.y.value for r in cex.trace] == [Fraction("0.0625")] * 2
    assert cex.cycle.states == ((1,),)


def test_limit_cycle_search_covers_64_states(alternating):
    result = exhaustive_engine(alternating, Property.LIMIT_CYCLE, 6)
    assert result.info["search_space"] == 64 * 6


def test_fir_has_no_limit_cycle():
    spec = FilterSpec.create([], ["0.5", "-1", "1.5"], Q24)
    for bound in (1, 3, 8):
        assert verify_limit_cycle(spec, bound) == Verified(bound)


def test_long_cycle_beyond_bound_is_verified(alternating):
    # every initial state needs at least 2 steps to close its cycle
    assert verify_limit_cycle(alternating, 1) == Verified(1)


def test_find_cycle():
    assert find_cycle([(3,), (1,), (2,), (1,)]).period == 2
    assert find_cycle([(1,), (0,), (0,)]) is None
    assert find_cycle([(1,), (2,)]) is None


def test_budget_exceeded_is_unknown(single_pole):
    result = exhaustive_engine(single_pole, Property.OVERFLOW, 6, budget=100)
    assert isinstance(result, Unknown)
    assert "budget" in result.reason and result.info["search_space"] > 100


def test_timeout_is_unknown(single_pole):
    result = exhaustive_engine(single_pole, Property.LIMIT_CYCLE, 6, timeout=-1)
    assert isinstance(result, Unknown) and result.reason == "timeout"


def test_bad_bound(single_pole):
    with pytest.raises(ValueError):
        verify_overflow(single_pole, 0)
    with pytest.raises(ValueError):
        exhaustive_engine(single_pole, Property.TIMING, 3)


def test_simulate_empty(single_pole):
    assert simulate_trace(single_pole, []) == []


def test_limit_cycle_never_raises_overflow():
    spec = FilterSpec.create(["-1.75", "0.9375"], ["1.5"], Q24)
    result = verify_limit_cycle(spec, 5)
    assert not isinstance(result, Unknown)


@pytest.mark.parametrize("seed", range(40))
def test_exhaustive_matches_naive_enumeration(seed):
    rng = random.Random(seed)
    spec = random_tiny_spec(rng)
    bound = rng.randint(1, 4)
    expected = naive_overflow_witness(spec, bound)
    result = verify_overflow(spec, bound)
    if expected is None:
        assert result == Verified(bound)
    else:
        assert [x.mantissa for x in result.witness.inputs] == expected

    expected = naive_limit_cycle_witness(spec, bound)
    result = verify_limit_cycle(spec, bound)
    if expected is None:
        assert result == Verified(bound)
    else:
        assert list(result.witness.initial_state.mantissas()) == expected


@pytest.mark.parametrize("seed", range(15))
def test_monotone_in_bound(seed):
    rng = random.Random(1000 + seed)
    spec = random_tiny_spec(rng)
    for verify in (verify_overflow, verify_limit_cycle):
        verdicts = [isinstance(verify(spec, k), Violation) for k in range(1, 7)]
        assert verdicts == sorted(verdicts)


def test_violations_replay(single_pole, alternating):
    for result in (verify_overflow(single_pole, 6), verify_limit_cycle(alternating, 6)):
        cex = result.witness
        assert isinstance(cex, Counterexample)
        spec = cex.spec
        if cex.overflow is not None:
            with pytest.raises(OverflowViolation):
                simulate_trace(spec, cex.inputs, cex.initial_state)
        else:
            trace = simulate_trace(spec, cex.inputs, cex.initial_state)
            assert [r.y for r in trace] == [r.y for r in cex.trace]
