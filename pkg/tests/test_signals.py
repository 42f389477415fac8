import math

import numpy as np
import pytest

from trialoffer.errors import DomainError
from trialoffer.signals import Affine, Power, eval_signal


def test_sqrt_signal():
    ev = eval_signal(Power(0.5), 1.0, 0.25)
    assert ev.value == pytest.approx(0.5, abs=1e-15)
    assert ev.derivative == pytest.approx(1.0, abs=1e-15)


def test_square_signal():
    ev = eval_signal(Power(2.0), 1.0, 0.5)
    assert ev.value == 0.25
    assert ev.derivative == 1.0


def test_affine_musiclab_form():
    # beta = total purchases, x = d_i / total  ->  alpha * a_i + d_i
    d = np.array([12.0, 30.0, 8.0])
    total = d.sum()
    a = [0.2, 0.5, 0.9]
    for i in range(3):
        ev = eval_signal(Affine(alpha=200.0, beta=total), a[i], d[i] / total)
        assert ev.value == pytest.approx(200 * a[i] + d[i], rel=1e-14)
        assert ev.derivative == total


def test_singular_derivative_at_zero_for_sublinear():
    ev = eval_signal(Power(0.5), 1.0, 0.0)
    assert ev.value == 0.0 and ev.singular and math.isnan(ev.derivative)
    ev = eval_signal(Power(2.0), 1.0, 0.0)
    assert ev.value == 0.0 and not ev.singular and ev.derivative == 0.0


@pytest.mark.parametrize("x", [-0.1, 1.5])
def test_domain(x):
    with pytest.raises(DomainError):
        eval_signal(Power(1.0), 1.0, x)


SIGNALS = [Power(r) for r in (0.1, 0.5, 1.0, 1.25, 2.0, 3.0)] + [Affine(1.0, 0.0), Affine(0.5, 2.0)]


@pytest.mark.parametrize("sig", SIGNALS)
def test_nondecreasing_on_grid(sig):
    xs = np.linspace(0, 1, 1000)
    vals = [eval_signal(sig, 0.7, x).value for x in xs]
    assert np.all(np.diff(vals) >= 0)


@pytest.mark.parametrize("sig", SIGNALS)
def test_derivative_matches_central_difference(sig):
    h = 1e-6
    for x in np.linspace(0.01, 0.99, 50):
        fd = (eval_signal(sig, 0.7, x + h).value - eval_signal(sig, 0.7, x - h).value) / (2 * h)
        d = eval_signal(sig, 0.7, x).derivative
        assert abs(fd - d) <= 1e-5 * max(abs(d), 1e-12) + 1e-9
