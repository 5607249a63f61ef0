import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

import config
from core.errors import DimensionMismatchError, InvalidParameterError, InvariantViolationError
from core.fock import (
    DensityMatrix,
    FockSpace,
    Operator,
    annihilation,
    fidelity,
    fock_state,
    identity,
    ket_to_dm,
    number_operator,
    parity_operator,
    required_dim,
)
from core.lindblad import (
    EvolutionConfig,
    MasterEquation,
    NoiseParams,
    build_master_equation,
    build_propagator,
    dissipator_apply,
    evolve,
    resolve_method,
    steady_state_residual,
)
from core.states import CodeParams, squeezed_cat


def _loss_equation(space: FockSpace, kappa: float) -> MasterEquation:
    return MasterEquation(Operator(space, np.zeros((space.dim, space.dim))), [(annihilation(space), kappa)])


def test_dissipator_of_identity_vanishes(space40):
    rho = ket_to_dm(fock_state(space40, 3))
    assert np.max(np.abs(dissipator_apply(identity(space40), rho))) < 1e-15


def test_dissipator_moves_photon_down():
    space = FockSpace(4)
    out = dissipator_apply(annihilation(space), ket_to_dm(fock_state(space, 1)))
    assert_allclose(out, np.diag([1.0, -1.0, 0.0, 0.0]), atol=1e-15)
    with pytest.raises(DimensionMismatchError):
        dissipator_apply(annihilation(space), np.eye(3))


def test_noise_params_validation():
    noise = NoiseParams(kappa1=1e-3, n_th=0.5)
    assert noise.kappa_minus == pytest.approx(1.5e-3)
    assert noise.kappa_plus == pytest.approx(0.5e-3)
    with pytest.raises(InvalidParameterError):
        NoiseParams(kappa1=-1.0)
    with pytest.raises(InvalidParameterError):
        NoiseParams(kerr=math.inf)


def test_evolution_config_validation():
    assert EvolutionConfig(t_final=2.0, sample_count=5).times.tolist() == [0.0, 0.5, 1.0, 1.5, 2.0]
    with pytest.raises(InvalidParameterError):
        EvolutionConfig(t_final=0.0)
    with pytest.raises(InvalidParameterError):
        EvolutionConfig(t_final=1.0, rel_tol=0.1)
    with pytest.raises(InvalidParameterError):
        EvolutionConfig(t_final=1.0, method="euler")


def test_master_equation_rejects_negative_rate(space40):
    with pytest.raises(InvalidParameterError):
        MasterEquation(identity(space40) * 0.0, [(annihilation(space40), -1.0)])


def test_kerr_hamiltonian_diagonal(space40):
    me = build_master_equation(space40, CodeParams(alpha=1.0), NoiseParams(kerr=1e-2))
    assert me.hamiltonian.entries[2, 2].real == pytest.approx(0.02)


def _noisy_equation(space: FockSpace) -> MasterEquation:
    a = annihilation(space)
    kerr = 0.05 * (a.dag() @ a.dag() @ a @ a)
    return MasterEquation(kerr, [(a @ a, 1.0), (a, 0.3), (number_operator(space), 0.1), (a.dag(), 0.06)])


def test_liouvillian_matches_rhs():
    space = FockSpace(6)
    me = _noisy_equation(space)
    rng = np.random.default_rng(7)
    x = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    rho = x @ x.conj().T
    rho /= np.trace(rho)
    vec = me.liouvillian() @ rho.reshape(-1)
    assert_allclose(vec.reshape(6, 6), me.rhs(rho), atol=1e-12)


def test_rhs_is_traceless_and_hermitian():
    space = FockSpace(10)
    me = _noisy_equation(space)
    out = me.rhs(ket_to_dm(fock_state(space, 3)).entries.astype(complex))
    assert abs(np.trace(out)) < 1e-12
    assert np.max(np.abs(out - out.conj().T)) < 1e-12


@pytest.mark.parametrize("method", ["dopri5", "propagator"])
def test_pure_loss_photon_number(method):
    space = FockSpace(5)
    kappa = 0.1
    cfg = EvolutionConfig(t_final=10.0, sample_count=21, rel_tol=1e-8, abs_tol=1e-10, method=method)
    traj = evolve(_loss_equation(space, kappa), ket_to_dm(fock_state(space, 1)), cfg,
                  {"n": number_operator(space)})
    assert_allclose(traj.observables["n"], np.exp(-kappa * traj.times), atol=1e-6)
    assert traj.stats["method"] == method
    assert traj.stats["max_trace_drift"] < 1e-8


def test_cats_are_steady_states(cat_space, cat_code):
    me = build_master_equation(cat_space, cat_code, NoiseParams())
    plus = ket_to_dm(squeezed_cat(cat_space, cat_code, 1).ket)
    minus = ket_to_dm(squeezed_cat(cat_space, cat_code, -1).ket)
    mixture = DensityMatrix(cat_space, 0.5 * (plus.entries + minus.entries))
    assert steady_state_residual(me, plus) < 1e-7
    assert steady_state_residual(me, mixture) < 1e-7
    assert steady_state_residual(me, ket_to_dm(fock_state(cat_space, 1))) > 1e-3


def test_stabilization_from_vacuum():
    code = CodeParams.from_alpha_sq(2.0)
    space = FockSpace(required_dim(code.alpha_sq))
    me = build_master_equation(space, code, NoiseParams())
    cfg = EvolutionConfig(t_final=10.0, sample_count=11, method="propagator")
    traj = evolve(me, ket_to_dm(fock_state(space, 0)), cfg, {"parity": parity_operator(space)})
    target = squeezed_cat(space, code, 1).ket
    assert fidelity(traj.final_state, target) > 0.999
    assert_allclose(traj.observables["parity"], 1.0, atol=1e-8)


def test_propagator_size_limit():
    space = FockSpace(65)
    with pytest.raises(InvalidParameterError):
        build_propagator(_loss_equation(space, 0.1), 0.1)


def test_auto_method_falls_back_above_propagator_limit():
    assert resolve_method("auto", config.PROPAGATOR_MAX_DIM) == "propagator"
    assert resolve_method("auto", 74) == "dopri5"
    assert resolve_method("propagator", 74) == "propagator"
    space = FockSpace(5)
    traj = evolve(_loss_equation(space, 0.1), ket_to_dm(fock_state(space, 1)),
                  EvolutionConfig(t_final=1.0, sample_count=3, method="auto"))
    assert traj.stats["method"] == "propagator"


def test_propagator_trace_drift_is_not_hidden():
    space = FockSpace(4)
    me = _loss_equation(space, 0.1)
    # 每步漏失 5e-7 低於單步上限，累積後必須被偵測
    leaky = (1.0 - 5e-7) * np.eye(16)
    cfg = EvolutionConfig(t_final=1.0, sample_count=11, method="propagator")
    with pytest.raises(InvariantViolationError):
        evolve(me, ket_to_dm(fock_state(space, 1)), cfg, propagator=leaky)


def test_evolve_rejects_unphysical_initial_state():
    space = FockSpace(4)
    bad = DensityMatrix(space, np.diag([1.5, -0.5, 0.0, 0.0]).astype(complex))
    with pytest.raises(InvalidParameterError):
        evolve(_loss_equation(space, 0.1), bad, EvolutionConfig(t_final=1.0, sample_count=3))


def test_evolve_rejects_foreign_observable():
    space = FockSpace(4)
    with pytest.raises(DimensionMismatchError):
        evolve(_loss_equation(space, 0.1), ket_to_dm(fock_state(space, 0)),
               EvolutionConfig(t_final=1.0, sample_count=3), {"n": number_operator(FockSpace(5))})


def test_on_sample_sees_every_point():
    space = FockSpace(4)
    seen = []
    cfg = EvolutionConfig(t_final=1.0, sample_count=6)
    evolve(_loss_equation(space, 0.5), ket_to_dm(fock_state(space, 2)), cfg,
           on_sample=lambda index, rho: seen.append(index))
    assert seen == list(range(6))


@pytest.mark.slow
def test_dopri5_agrees_with_propagator():
    code = CodeParams.from_alpha_sq(1.0)
    space = FockSpace(required_dim(code.alpha_sq))
    me = build_master_equation(space, code, NoiseParams(kappa1=0.01))
    rho0 = ket_to_dm(fock_state(space, 0))
    observables = {"n": number_operator(space)}
    fine = evolve(me, rho0, EvolutionConfig(t_final=2.0, sample_count=11, rel_tol=1e-8, abs_tol=1e-10),
                  observables)
    exact = evolve(me, rho0, EvolutionConfig(t_final=2.0, sample_count=11, method="propagator"), observables)
    assert_allclose(fine.observables["n"], exact.observables["n"], atol=1e-6)


@pytest.mark.slow
def test_tolerance_halving_changes_result_little():
    code = CodeParams.from_alpha_sq(1.0)
    space = FockSpace(required_dim(code.alpha_sq))
    me = build_master_equation(space, code, NoiseParams(kappa1=0.01))
    rho0 = ket_to_dm(fock_state(space, 0))
    observables = {"n": number_operator(space)}
    coarse = evolve(me, rho0, EvolutionConfig(t_final=2.0, sample_count=11, rel_tol=1e-6), observables)
    fine = evolve(me, rho0, EvolutionConfig(t_final=2.0, sample_count=11, rel_tol=5e-7), observables)
    assert np.max(np.abs(coarse.observables["n"] - fine.observables["n"])) < 5 * 1e-6
