import numpy as np
import pytest

from gossipage.analytic import harmonic
from gossipage.fitting import fit_exponent


def test_exact_power_law():
    fit = fit_exponent((n, 2 * n**0.5) for n in (16, 64, 256, 1024))
    assert fit.slope == pytest.approx(0.5) and fit.r2 == pytest.approx(1.0)
    assert fit.predict(4) == pytest.approx(4.0)


def test_harmonic_growth_is_not_a_power():
    # every integer in 16..4096; a power-of-two grid weights large n more and gives 0.171
    fit = fit_exponent((n, harmonic(n)) for n in range(16, 4097))
    assert fit.slope == pytest.approx(0.14317847085869634, rel=1e-9)
    assert fit.slope < 0.15


def test_constant_values():
    assert fit_exponent([(1, 3), (2, 3), (4, 3)]).slope == pytest.approx(0.0, abs=1e-12)


def test_bad_input():
    with pytest.raises(ValueError):
        fit_exponent([(1, 1), (2, 2)])
    with pytest.raises(ValueError):
        fit_exponent([(1, 1), (2, 0), (3, 1)])
