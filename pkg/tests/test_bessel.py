import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ddshaper.bessel import SERIES_LIMIT, bessel_j0

# 50-digit mpmath values, frozen
FROZEN = [
    (0.0, 1.0),
    (1.0, 0.7651976865579666),
    (5.0, -0.1775967713143383),
    (12.0, 0.047689310796833535),
    (12.5, 0.1468840547004211),
    (30.0, -0.08636798358104021),
    (100.0, 0.019985850304223122),
    (1e4, -0.0070961603533888015),
]


@pytest.mark.parametrize("x, expected", FROZEN)
def test_frozen_values(x, expected):
    assert bessel_j0(x) == pytest.approx(expected, abs=1e-12)


def test_first_zero():
    assert abs(bessel_j0(2.404825557695773)) < 1e-14


def test_dense_grid_against_mpmath():
    mpmath.mp.dps = 30
    x = np.concatenate([np.linspace(0, 40, 2001), np.geomspace(40, 1e4, 400)])
    ref = np.array([float(mpmath.besselj(0, v)) for v in x])
    assert np.max(np.abs(bessel_j0(x) - ref)) < 1e-11


def test_continuity_at_switch():
    lo = bessel_j0(np.nextafter(SERIES_LIMIT, 0))
    hi = bessel_j0(np.nextafter(SERIES_LIMIT, 20))
    assert abs(lo - hi) < 1e-12


@given(st.floats(-1e4, 1e4))
def test_even_and_bounded(x):
    assert bessel_j0(x) == bessel_j0(-x)
    assert abs(bessel_j0(x)) <= 1.0 + 1e-15


def test_array_shape_preserved():
    out = bessel_j0(np.zeros((3, 2)))
    assert out.shape == (3, 2)
    assert np.all(out == 1.0)


@pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
def test_non_finite_rejected(bad):
    with pytest.raises(ValueError):
        bessel_j0(bad)
