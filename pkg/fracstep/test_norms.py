import numpy as np
import pytest

from fracstep.analysis import error_norms
from fracstep.exceptions import ArgumentError
from fracstep.norms import l2_norm, max_norm


def test_l2_norm_values():
    assert l2_norm(np.zeros(9), 0.1) == 0.0
    assert l2_norm(np.ones(9), 0.1) == pytest.approx(0.9486833, rel=1e-7)
    y = np.linspace(-1.0, 2.0, 7)
    assert l2_norm(2 * y, 0.2) == pytest.approx(2 * l2_norm(y, 0.2))
    with pytest.raises(ArgumentError):
        l2_norm(y, 0.0)


def test_max_norm_values():
    z = np.zeros((3, 5))
    assert max_norm(z) == 0.0
    z[1, 2] = -3.0
    assert max_norm(z) == 3.0
    assert max_norm(z) >= max_norm(z[-1])
    with pytest.raises(ArgumentError):
        max_norm(np.zeros((0, 4)))


def test_error_norms_take_interior_l2_and_global_max():
    rng = np.random.default_rng(2)
    z = np.zeros((6, 11))
    z[:, 1:-1] = rng.uniform(-1.0, 1.0, (6, 9))
    err_l2, err_max = error_norms(z, 0.1)
    assert err_l2 == pytest.approx(max(np.sqrt(np.sum(layer ** 2) * 0.1) for layer in z))
    assert err_max == pytest.approx(np.max(np.abs(z[:, 1:-1])))
    assert error_norms(np.zeros((2, 5)), 0.25) == (0.0, 0.0)
