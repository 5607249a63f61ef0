import math

import numpy as np
import pandas as pd
import pytest

import config
from core import rates
from core.errors import InsufficientPointsError, InvalidParameterError, RateFitError
from core.fock import FockSpace, annihilation, fock_state, ket_to_dm
from core.lindblad import NoiseParams, Trajectory
from core.rates import (
    RATE_COLUMNS,
    RateFit,
    RateGrid,
    confinement_time,
    extract_rate,
    fit_suppression,
    gamma_dephasing_model,
    gamma_gain_model,
    gamma_phase_model,
    gamma_vs_r,
    kerr_crossover,
    knob_rate_ratio,
    measure_rates,
    phase_flip_matrix_element,
    scenario_noise,
    simulation_horizon,
    study,
)
from core.states import CodeParams, squeezed_cat


def _trajectory(times, values, name="o") -> Trajectory:
    final = ket_to_dm(fock_state(FockSpace(2), 0))
    return Trajectory(times=np.asarray(times, dtype=float), observables={name: np.asarray(values, dtype=float)},
                      final_state=final)


def _fit(rate: float) -> RateFit:
    return RateFit(rate=rate, stderr=0.0, window=(0.0, 1.0), n_points=10, floor_clipped=False, raw_rate=rate)


# --- Fitting ---
def test_extract_rate_exponential():
    times = np.linspace(0.0, 400.0, 401)
    fit = extract_rate(_trajectory(times, np.exp(-0.01 * times)), "o")
    assert fit.rate == pytest.approx(0.01, rel=1e-6)
    assert not fit.floor_clipped
    assert fit.window[1] < 300.0


def test_extract_rate_skips_transient():
    times = np.linspace(0.0, 400.0, 401)
    values = np.where(times < 5.0, 1.0, 0.9 * np.exp(-0.01 * times))
    fit = extract_rate(_trajectory(times, values), "o", t_conf=1.0)
    assert fit.rate == pytest.approx(0.01, rel=1e-6)
    assert fit.window[0] == pytest.approx(10.0)


@pytest.mark.parametrize("scale", [0.5, 1.0, 1.5])
def test_extract_rate_insensitive_to_transient_window(scale):
    times = np.linspace(0.0, 400.0, 401)
    values = 0.9 * np.exp(-0.01 * times) + 0.1 * np.exp(-times)
    fit = extract_rate(_trajectory(times, values), "o", t_conf=1.0,
                       transient_factor=scale * config.TRANSIENT_FACTOR)
    assert fit.rate == pytest.approx(0.01, rel=1e-3)
    assert fit.window[0] == pytest.approx(scale * config.TRANSIENT_FACTOR)


def test_extract_rate_constant_clips_to_floor():
    times = np.linspace(0.0, 100.0, 51)
    fit = extract_rate(_trajectory(times, np.ones_like(times)), "o")
    assert fit.floor_clipped
    assert fit.rate == config.RATE_FLOOR
    assert abs(fit.raw_rate) <= 1e-12


def test_extract_rate_too_few_points():
    times = np.arange(0.0, 11.0)
    with pytest.raises(RateFitError) as info:
        extract_rate(_trajectory(times, np.exp(-5.0 * times)), "o")
    assert info.value.reason == "too-few-points"


def test_extract_rate_non_positive_reference():
    times = np.arange(0.0, 11.0)
    with pytest.raises(RateFitError) as info:
        extract_rate(_trajectory(times, -np.ones_like(times)), "o")
    assert info.value.reason == "non-positive"


def test_extract_rate_missing_observable():
    with pytest.raises(RateFitError):
        extract_rate(_trajectory([0.0, 1.0], [1.0, 1.0]), "sigma_z")


def test_fit_suppression_recovers_exponent():
    points = [(a, 10.0 * math.exp(-2.0 * a)) for a in (2.0, 3.0, 4.0, 5.0)]
    fit = fit_suppression(points)
    assert fit.gamma == pytest.approx(2.0, rel=1e-9)
    assert fit.prefactor == pytest.approx(10.0, rel=1e-9)
    assert fit.points_used == 4


def test_fit_suppression_drops_clipped_and_out_of_range():
    points = [(1.0, 1.0, False), (2.0, 1e-2, False), (3.0, 1e-3, True), (4.0, 1e-4, False), (6.0, 1e-6, False)]
    with pytest.raises(InsufficientPointsError):
        fit_suppression(points)


# --- Analytic models ---
def test_phase_flip_matrix_element_unsqueezed():
    assert phase_flip_matrix_element(CodeParams.from_alpha_sq(4.0)) == pytest.approx(4.0 * math.tanh(4.0) ** 2)
    assert phase_flip_matrix_element(CodeParams.from_alpha_sq(4.0)) == pytest.approx(3.99464, rel=1e-5)


def test_phase_flip_matrix_element_against_states():
    code = CodeParams.from_alpha_sq(3.0, 0.2)
    space = FockSpace(60)
    plus = squeezed_cat(space, code, 1).ket
    minus = squeezed_cat(space, code, -1).ket
    direct = abs(plus.inner(annihilation(space) @ minus)) ** 2
    c, s, b2 = math.cosh(code.r), math.sinh(code.r), code.beta_sq
    exact = b2 * (c * math.sqrt(1.0 / math.tanh(b2)) - s * math.sqrt(math.tanh(b2))) ** 2
    assert direct == pytest.approx(exact, rel=1e-6)
    assert phase_flip_matrix_element(code) == pytest.approx(direct, rel=5e-3)


def test_phase_flip_matrix_element_large_beta():
    code = CodeParams.from_alpha_sq(4.0, 0.35)
    assert phase_flip_matrix_element(code) == pytest.approx(4.0, rel=1e-3)


def test_dephasing_model():
    plain = CodeParams.from_alpha_sq(2.0)
    assert gamma_dephasing_model(plain, 1.0) == pytest.approx(2.0 / math.sinh(4.0), rel=1e-12)
    assert gamma_dephasing_model(CodeParams.from_alpha_sq(2.0, 0.35), 1.0) == pytest.approx(4.0293e-3, rel=1e-3)


def test_gain_model():
    assert gamma_gain_model(CodeParams.from_alpha_sq(4.0, 0.3), 1.0) == pytest.approx(1.3125e-6, rel=1e-3)
    assert gamma_gain_model(CodeParams.from_alpha_sq(2.0), 0.0) == 0.0


def test_gain_model_survives_large_beta():
    value = gamma_gain_model(CodeParams.from_alpha_sq(400.0), 1.0)
    assert math.isfinite(value)
    assert value < 1e-300


def test_phase_model_is_linear_in_loss():
    code = CodeParams.from_alpha_sq(2.0, 0.1)
    assert gamma_phase_model(code, 2e-3) == pytest.approx(2.0 * gamma_phase_model(code, 1e-3))


# --- Scenarios and grids ---
def test_scenario_noise_knobs():
    assert scenario_noise("rates-loss", 2e-3).kappa1 == pytest.approx(2e-3)
    dephasing = scenario_noise("rates-dephasing", 0.1)
    assert dephasing.kappa_phi == pytest.approx(0.1)
    assert dephasing.kappa1 == pytest.approx(5e-3)
    assert scenario_noise("rates-gain", 0.5).n_th == pytest.approx(0.5)
    assert scenario_noise("rates-kerr", 0.2, {"kappa1": 0.0}).kerr == pytest.approx(0.2)
    with pytest.raises(InvalidParameterError):
        scenario_noise("rates-unknown", 0.0)


def test_rate_grid_points_are_sorted():
    grid = RateGrid(alpha_sq=[3.0, 2.0], r=[0.2, 0.0], knob=[1e-3])
    assert grid.points()[0] == (2.0, 0.0, 1e-3)
    assert len(grid.points()) == 4
    with pytest.raises(InvalidParameterError):
        RateGrid(alpha_sq=[], r=[0.0])


def test_time_scales():
    assert confinement_time(CodeParams.from_alpha_sq(2.0)) == pytest.approx(0.125)
    assert simulation_horizon(0.01, 0.1) == pytest.approx(config.HORIZON_CAP)
    assert simulation_horizon(1.0, 0.1) == pytest.approx(20.0)
    assert simulation_horizon(0.0, 0.1) == pytest.approx(config.HORIZON_CAP)
    assert simulation_horizon(1e6, 1.0) == pytest.approx(2.0 * config.TRANSIENT_FACTOR)


# --- Study assembly ---
def _synthetic_measure(code, noise, engine=None, measure=("bit", "phase"), dim=None):
    bit = math.exp(-2.0 * code.beta_sq) * (1.0 + 10.0 * noise.kappa_phi)
    return {"bit": _fit(bit), "phase": _fit(1e-2)}


def test_study_table_layout(monkeypatch):
    monkeypatch.setattr(rates, "measure_rates", _synthetic_measure)
    grid = RateGrid(alpha_sq=[3.0, 2.0], r=[0.0], knob=[0.1, 0.0])
    table = study("rates-dephasing", grid, threads=2)
    assert list(table.columns) == RATE_COLUMNS
    assert table["alpha_sq"].tolist() == [2.0, 2.0, 3.0, 3.0]
    assert table["kappa_ratio_value"].tolist() == [0.0, 0.1, 0.0, 0.1]
    assert (table["kappa_ratio_name"] == "kappa_phi").all()
    assert table.attrs["errors"] == []

    row = table.iloc[1]
    code = CodeParams.from_alpha_sq(2.0)
    expected = gamma_dephasing_model(code, 0.1) + table.iloc[0]["gamma_bit"]
    assert row["gamma_bit_model"] == pytest.approx(expected)


def test_study_collects_point_failures(monkeypatch):
    def flaky(code, noise, engine=None, measure=("bit", "phase"), dim=None):
        if code.alpha_sq > 2.5:
            raise RuntimeError("boom")
        return _synthetic_measure(code, noise)

    monkeypatch.setattr(rates, "measure_rates", flaky)
    grid = RateGrid(alpha_sq=[2.0, 3.0], r=[0.0], knob=[1e-3])
    table = study("rates-loss", grid, raise_on_error=False)
    assert len(table) == 1
    assert table.attrs["errors"][0]["point"] == [3.0, 0.0, 1e-3]
    assert table.attrs["errors"][0]["category"] == "runtime-failure"
    with pytest.raises(RuntimeError):
        study("rates-loss", grid)


def test_gamma_vs_r_from_study(monkeypatch):
    monkeypatch.setattr(rates, "measure_rates", _synthetic_measure)
    grid = RateGrid(alpha_sq=[2.0, 3.0, 4.0, 5.0], r=[0.0, 0.2], knob=[1e-3])
    table = study("rates-loss", grid)
    summary = gamma_vs_r(table)
    assert summary["gamma"].tolist() == pytest.approx([2.0, 2.0 * math.exp(0.4)], rel=1e-9)
    assert summary["r_db"].iloc[1] == pytest.approx(20 * 0.2 / math.log(10))


def _kerr_table(squeezed_rates) -> pd.DataFrame:
    ks = [0.01, 0.1, 1.0]
    rows = [{"alpha_sq": 4.0, "r": 0.0, "kappa_ratio_value": k, "gamma_bit": g}
            for k, g in zip(ks, [1e-5, 1e-4, 1e-3])]
    rows += [{"alpha_sq": 4.0, "r": 0.3, "kappa_ratio_value": k, "gamma_bit": g}
             for k, g in zip(ks, squeezed_rates)]
    return pd.DataFrame(rows)


def test_kerr_crossover_interpolates():
    table = _kerr_table([1e-7, 1e-5, 1e-2])
    assert kerr_crossover(table, 4.0, 0.3) == pytest.approx(math.sqrt(0.1), rel=1e-9)
    assert kerr_crossover(_kerr_table([1e-7, 1e-6, 1e-5]), 4.0, 0.3) is None
    assert knob_rate_ratio(table, 4.0, 0.0, high=1.0, low=0.01) == pytest.approx(100.0)


# --- Simulation oracles ---
@pytest.mark.slow
def test_phase_flip_rate_under_loss():
    code = CodeParams.from_alpha_sq(2.0)
    noise = NoiseParams(kappa1=5e-3)
    fits = measure_rates(code, noise, measure=("phase",))
    assert fits["phase"].rate == pytest.approx(2.0 * 5e-3 * 2.0, rel=0.2)


@pytest.mark.slow
def test_bit_flip_rate_under_dephasing():
    code = CodeParams.from_alpha_sq(2.0)
    noise = NoiseParams(kappa_phi=0.1)
    fits = measure_rates(code, noise, measure=("bit",))
    assert fits["bit"].rate == pytest.approx(gamma_dephasing_model(code, 0.1), rel=0.5)


@pytest.mark.slow
def test_phase_flip_rate_is_linear_in_loss():
    code = CodeParams.from_alpha_sq(2.0, 0.2)
    single = measure_rates(code, NoiseParams(kappa1=2.5e-3), measure=("phase",))["phase"].rate
    double = measure_rates(code, NoiseParams(kappa1=5e-3), measure=("phase",))["phase"].rate
    assert double / single == pytest.approx(2.0, rel=0.1)
