import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

import config
from core.errors import InvalidParameterError, NonFiniteInputError
from core.fock import FockSpace, fock_state, ket_to_dm, squeeze, thermal_state
from core.lindblad import EvolutionConfig
from core.state_prep import (
    DarkOpParams,
    candidate_targets,
    dark_operator,
    dark_state_residual,
    expansion_terms,
    squeezed_dark_operator,
    unconditional_convergence,
)


def test_params_validation():
    with pytest.raises(NonFiniteInputError):
        DarkOpParams(mu0=float("nan"), mu1=1.0, nu=1.0)
    with pytest.raises(InvalidParameterError):
        DarkOpParams(mu0=1.0, mu1=1.0, nu=1.0, r=-0.2)
    with pytest.raises(InvalidParameterError):
        DarkOpParams(mu0=1.0, mu1=0.0, nu=1.0).cat_amplitude
    assert DarkOpParams(mu0=1.0, mu1=100.0, nu=200.0).cat_amplitude == pytest.approx(1j * math.sqrt(2.0))


def test_linear_dark_state_is_squeezed_vacuum(space40):
    p = DarkOpParams(mu0=1.0, mu1=0.0, nu=0.3)
    vacuum = squeeze(space40, math.atanh(0.3)).entries[:, 0]
    assert np.linalg.norm(dark_operator(space40, p).entries @ vacuum) < 1e-7


def test_vacuum_is_dark_without_pump(space40):
    p = DarkOpParams(mu0=1.0, mu1=1.0, nu=0.0)
    residual = dark_operator(space40, p).entries @ fock_state(space40, 0).amplitudes
    assert np.linalg.norm(residual) < 1e-15


def test_residual_shrinks_with_linear_term(space40):
    residuals = [dark_state_residual(space40, DarkOpParams(mu0=ratio, mu1=1.0, nu=2.0))
                 for ratio in (1e-1, 1e-2, 1e-3)]
    assert residuals[0] > residuals[1] > residuals[2]
    assert residuals[1] == pytest.approx(10.0 * residuals[2], rel=1e-6)


def test_expansion_reduces_to_dark_operator_without_squeezing(space40):
    p = DarkOpParams(mu0=0.1, mu1=1.0, nu=2.0)
    assert_allclose(squeezed_dark_operator(space40, p).entries, dark_operator(space40, p).entries, atol=1e-14)


def test_expansion_has_six_terms(space40):
    terms = expansion_terms(space40, DarkOpParams(mu0=0.1, mu1=1.0, nu=2.0, r=0.2))
    assert len(terms) == 6
    assert all(op.space == space40 for _, op in terms)


def test_expansion_matches_conjugation():
    space = FockSpace(60)
    p = DarkOpParams(mu0=0.1, mu1=1.0, nu=2.0, r=0.4, phi=math.pi / 3)
    expanded = squeezed_dark_operator(space, p).entries
    big = FockSpace(120)
    s = squeeze(big, p.r, p.phi).entries
    conjugated = (s @ dark_operator(big, p.unsqueezed()).entries @ s.conj().T)[:30, :30]
    assert np.max(np.abs(expanded[:30, :30] - conjugated)) < 1e-9


def test_squeezed_residual_tracks_unsqueezed():
    space = FockSpace(50)
    p = DarkOpParams(mu0=0.01, mu1=1.0, nu=2.0, r=0.2)
    plain = dark_state_residual(space, p)
    squeezed = dark_state_residual(space, p, squeezed=True)
    assert squeezed == pytest.approx(plain, rel=1e-6)


def test_candidate_targets_are_distinct():
    space = FockSpace(50)
    candidates = candidate_targets(space, DarkOpParams(mu0=0.01, mu1=1.0, nu=2.0, r=0.2))
    assert set(candidates) == {1, -1}
    assert abs(candidates[1].inner(candidates[-1])) < 0.999


def _prep_params() -> DarkOpParams:
    defaults = config.PREP_DEFAULTS
    return DarkOpParams(mu0=defaults["mu0"], mu1=defaults["mu1"], nu=defaults["nu"], r=defaults["r"])


def test_convergence_rejects_bad_rate(space40):
    cfg = EvolutionConfig(t_final=1.0, sample_count=3, method="propagator")
    with pytest.raises(InvalidParameterError):
        unconditional_convergence(space40, _prep_params(), ket_to_dm(fock_state(space40, 0)), cfg, kappa=0.0)


@pytest.mark.slow
@pytest.mark.parametrize("initial, floor", [("vacuum", 0.99), ("fock1", 0.98), ("thermal", 0.98)])
def test_unconditional_convergence(space40, initial, floor):
    states = {
        "vacuum": ket_to_dm(fock_state(space40, 0)),
        "fock1": ket_to_dm(fock_state(space40, 1)),
        "thermal": thermal_state(space40, config.PREP_DEFAULTS["n_th"]),
    }
    cfg = EvolutionConfig(t_final=config.PREP_DEFAULTS["t_final"], sample_count=26, method="propagator")
    result = unconditional_convergence(space40, _prep_params(), states[initial], cfg)
    assert result.final_fidelity > floor
    assert result.final_purity > 0.98
    assert result.target_sign == -1
