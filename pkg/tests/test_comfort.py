import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cabinrl.comfort import ComfortParams, equivalent_temperature, is_comfortable, occupant_air_velocity

T = st.floats(-20, 80, allow_nan=False)


def test_air_velocity():
    assert occupant_air_velocity(0) == 0
    assert occupant_air_velocity(1) == pytest.approx(0.1)
    assert occupant_air_velocity(100) == 10


def test_et_examples():
    assert equivalent_temperature(24, 24, 0.05) == 24
    expected = 0.55 * 30 + 0.45 * 20 + (0.24 - 0.75 * math.sqrt(10)) / 1.7 * 6.5
    assert equivalent_temperature(30, 20, 10) == pytest.approx(expected)
    assert equivalent_temperature(30, 20, 10) == pytest.approx(17.35, abs=5e-3)
    for v in (0.11, 1, 10):
        assert equivalent_temperature(36.5, 36.5, v) == pytest.approx(36.5)


def test_branch_point_uses_low_flow():
    # v = 0.1 exactly belongs to the averaging branch; just above it does not
    assert equivalent_temperature(30, 20, 0.1) == 25.0
    above = equivalent_temperature(30, 20, math.nextafter(0.1, 1))
    gap = 0.05 * 10 + (0.24 - 0.75 * math.sqrt(0.1)) / 1.7 * 6.5
    assert above - 25.0 == pytest.approx(gap, abs=1e-9)


@given(T, T, st.floats(0, 0.1))
def test_low_flow_symmetric(a, b, v):
    assert equivalent_temperature(a, b, v) == equivalent_temperature(b, a, v)


@given(st.floats(-20, 36.4), T, st.floats(0.1025, 20), st.floats(0.1025, 20))
def test_draft_cooling(T_c, T_r, v1, v2):
    lo, hi = sorted((v1, v2))
    if hi - lo < 1e-6:
        return
    assert equivalent_temperature(T_c, T_r, hi) < equivalent_temperature(T_c, T_r, lo)


def test_comfort_band():
    assert is_comfortable(24)
    assert is_comfortable(25) and is_comfortable(23)
    assert not is_comfortable(25.01)
    assert not is_comfortable(22.99)
    assert is_comfortable(21, ComfortParams(comfort_target=20, comfort_band=1))


def test_params_validation():
    with pytest.raises(ValueError):
        ComfortParams(air_velocity_divisor=0)
