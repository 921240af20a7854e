import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nesc.calibration import IsotonicCalibrator, calibrate, fit_pav
from nesc.errors import DataError, UsageError

from oracles import brute_isotonic


def test_hand_example():
    cal = fit_pav([0.1, 0.35, 0.4, 0.8], [0, 1, 0, 1])
    np.testing.assert_allclose(cal([0.1, 0.35, 0.4, 0.8]), [0, 0.5, 0.5, 1])


def test_already_monotone():
    cal = fit_pav([0.2, 0.7], [0, 1])
    np.testing.assert_array_equal(cal.values, [0, 1])


def test_all_positive_constant():
    cal = fit_pav([0.1, 0.5, 0.9], [1, 1, 1])
    assert cal(0.0) == cal(0.3) == cal(1.0) == 1.0


def test_ties_share_value():
    cal = fit_pav([0.5, 0.5, 0.5, 0.9], [1, 0, 0, 1])
    assert cal(0.5) == pytest.approx(1 / 3)


def test_interpolation_midpoint():
    assert calibrate(0.4, IsotonicCalibrator(np.array([0.2, 0.6]), np.array([0.1, 0.5]))) == pytest.approx(0.3)


def test_clamp_and_knots():
    cal = IsotonicCalibrator(np.array([0.2, 0.6]), np.array([0.1, 0.5]))
    assert cal(-5.0) == 0.1 and cal(0.0) == 0.1 and cal(3.0) == 0.5
    assert cal(0.2) == 0.1 and cal(0.6) == 0.5


def test_vector_input():
    cal = fit_pav([0.1, 0.9], [0, 1])
    out = calibrate(np.array([0.1, 0.5, 0.9]), cal)
    assert isinstance(out, np.ndarray) and out.shape == (3,)
    assert isinstance(calibrate(0.5, cal), float)


def test_errors():
    with pytest.raises(UsageError):
        fit_pav([], [])
    with pytest.raises(UsageError):
        fit_pav([0.1, 0.2], [0, 2])
    with pytest.raises(UsageError):
        fit_pav([0.1, 0.2], [0])
    with pytest.raises(DataError):
        IsotonicCalibrator(np.array([0.5, 0.2]), np.array([0.1, 0.2]))
    with pytest.raises(DataError):
        IsotonicCalibrator(np.array([0.2, 0.5]), np.array([0.3, 0.2]))


scores_labels = st.integers(1, 8).flatmap(lambda n: st.tuples(
    st.lists(st.sampled_from([0.0, 0.1, 0.25, 0.3, 0.5, 0.7, 0.75, 0.9, 1.0]), min_size=n, max_size=n),
    st.lists(st.integers(0, 1), min_size=n, max_size=n),
))


@settings(max_examples=300, deadline=None)
@given(scores_labels)
def test_matches_brute_force(case):
    x, y = case
    np.testing.assert_allclose(fit_pav(x, y)(np.array(x)), brute_isotonic(x, y), atol=1e-6)


@settings(max_examples=100, deadline=None)
@given(scores_labels)
def test_calibrated_mse_not_worse(case):
    x, y = np.array(case[0]), np.array(case[1])
    cal = fit_pav(x, y)
    assert np.mean((cal(x) - y) ** 2) <= np.mean((x - y) ** 2) + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=30), st.data())
def test_monotone(scores, data):
    labels = data.draw(st.lists(st.integers(0, 1), min_size=len(scores), max_size=len(scores)))
    cal = fit_pav(scores, labels)
    a, b = sorted(data.draw(st.tuples(st.floats(-1, 2), st.floats(-1, 2))))
    assert cal(a) <= cal(b)
    assert 0.0 <= cal(a) <= 1.0
