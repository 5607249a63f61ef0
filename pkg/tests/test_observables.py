import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from core.errors import InvalidParameterError, NonConvergentSeriesError
from core.fock import FockSpace, Ket, expectation
from core.observables import (
    JzConfig,
    double_factorial,
    is_converged,
    j_plus_minus,
    log_double_factorial,
    logical_x,
    logical_y,
    logical_z,
    minimal_q_max,
    parity_jx,
)
from core.rates import working_space
from core.states import CodeParams, logical_basis, squeezed_cat


@pytest.mark.parametrize("n, expected", [(5, 15), (6, 48), (0, 1), (-1, 1), (1, 1)])
def test_double_factorial(n, expected):
    assert double_factorial(n) == expected
    assert math.exp(log_double_factorial(np.array([n]))[0]) == pytest.approx(expected)


def test_double_factorial_rejects_below_minus_one():
    with pytest.raises(InvalidParameterError):
        double_factorial(-3)


def test_parity_jx_on_cats(cat_space, cat_code):
    jx = parity_jx(cat_space)
    assert_allclose((jx @ jx).entries, np.eye(40))
    plus = squeezed_cat(cat_space, cat_code, 1).ket
    minus = squeezed_cat(cat_space, cat_code, -1).ket
    assert expectation(plus, jx) == pytest.approx(1.0, abs=1e-12)
    assert expectation(minus, jx) == pytest.approx(-1.0, abs=1e-12)
    zero, _ = logical_basis(cat_space, cat_code)
    assert expectation(zero, logical_x(cat_space)) == pytest.approx(0.0, abs=1e-12)


def test_jz_config_validation():
    with pytest.raises(InvalidParameterError):
        JzConfig(beta_sq=0.0)
    with pytest.raises(InvalidParameterError):
        JzConfig(beta_sq=1.0, q_max=0)


def test_truncated_series_is_rejected(space40):
    assert not is_converged(4.0, 1)
    with pytest.raises(NonConvergentSeriesError):
        j_plus_minus(space40, JzConfig(beta_sq=4.0, q_max=1))


def test_large_beta_stays_finite():
    space = FockSpace(100)
    cfg = JzConfig(beta_sq=40.0, q_max=minimal_q_max(40.0))
    assert np.all(np.isfinite(j_plus_minus(space, cfg).entries))


@pytest.mark.parametrize("alpha_sq, r", [(4.0, 0.0), (2.0, 0.35)])
def test_logical_z_on_basis(alpha_sq, r):
    space = FockSpace(50)
    code = CodeParams.from_alpha_sq(alpha_sq, r)
    jz = logical_z(space, code)
    zero, one = logical_basis(space, code)
    value = expectation(zero, jz)
    assert value > 0.99
    assert expectation(one, jz) == pytest.approx(-value, abs=1e-8)
    assert jz.is_hermitian(1e-12)


def test_logical_z_insensitive_to_extra_terms():
    space = FockSpace(50)
    code = CodeParams.from_alpha_sq(4.0)
    q_min = minimal_q_max(code.beta_sq)
    base = logical_z(space, code, q_min).entries
    extended = logical_z(space, code, q_min + 2).entries
    assert np.max(np.abs(base - extended)) < 1e-10


def test_logical_y_on_cat_superposition():
    space = FockSpace(50)
    code = CodeParams.from_alpha_sq(4.0)
    jy = logical_y(space, code)
    assert jy.is_hermitian(1e-12)
    zero, _ = logical_basis(space, code)
    assert expectation(zero, jy) == pytest.approx(0.0, abs=1e-12)
    plus = squeezed_cat(space, code, 1).ket.amplitudes
    minus = squeezed_cat(space, code, -1).ket.amplitudes
    plus_i = Ket(space, (plus + 1j * minus) / math.sqrt(2))
    assert abs(expectation(plus_i, jy)) > 0.99


@pytest.mark.parametrize("alpha_sq, r", [(4.0, 0.0), (2.0, 0.35)])
def test_logical_z_stays_bounded(alpha_sq, r):
    code = CodeParams.from_alpha_sq(alpha_sq, r)
    space = working_space(code)
    jz = logical_z(space, code)
    zero, one = logical_basis(space, code)
    for theta in np.linspace(0.0, math.pi, 9):
        for phase in (0.0, math.pi / 2, math.pi):
            amplitudes = (math.cos(theta / 2) * zero.amplitudes
                          + np.exp(1j * phase) * math.sin(theta / 2) * one.amplitudes)
            assert abs(expectation(Ket(space, amplitudes), jz)) <= 1.0 + 1e-6
    # J_z 只連接相反宇稱，對角元為零
    assert np.max(np.abs(np.diag(jz.entries))) < 1e-12
