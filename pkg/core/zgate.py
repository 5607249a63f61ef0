# core/zgate.py
"""
耗散式 Z(θ) 閘：模擬、解析相位錯誤模型、最佳閘時間與偏置保持掃描。
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar
from scipy.stats import linregress

import config
from core.errors import InvalidParameterError
from core.fock import DensityMatrix, annihilation, ket_to_dm
from core.lindblad import EvolutionConfig, NoiseParams, build_master_equation, evolve
from core.observables import logical_y, logical_z, parity_jx
from core.parallel import run_points
from core.rates import working_space
from core.states import CodeParams, logical_basis, r_to_db, squeezed_cat

logger = logging.getLogger(__name__)

ZGATE_COLUMNS = ["alpha_sq", "r", "r_db", "kappa_minus", "theta", "t_gate", "epsilon_z", "p_z", "p_x", "p_z_model"]
BIAS_COLUMNS = ["alpha_sq", "r", "r_db", "t_gate", "p_x", "p_z"]


@dataclass(frozen=True)
class GateResult:
    theta: float
    t_gate: float
    p_z: float
    p_x: float
    epsilon_z: float
    sigma_x: float = math.nan
    sigma_y: float = math.nan


def drive_amplitude(theta: float, alpha: float, t_gate: float) -> float:
    """ε_Z = θ/(4 Re(α) T)，與 r 無關。"""
    if not alpha > 0:
        raise InvalidParameterError(f"alpha 必須 > 0，收到 {alpha}")
    if not t_gate > 0:
        raise InvalidParameterError(f"t_gate 必須 > 0，收到 {t_gate}")
    return theta / (4.0 * alpha * t_gate)


def pz_nonadiabatic(code: CodeParams, kappa2: float, t_gate: float) -> float:
    """π²e^{−4r}/(16|α|⁴κ₂T)"""
    return math.pi ** 2 * math.exp(-4.0 * code.r) / (16.0 * code.alpha_sq ** 2 * kappa2 * t_gate)


def pz_model(code: CodeParams, kappa_minus: float, kappa2: float, t_gate: float) -> float:
    """p_Z = κ₋|α|²T + p_Z^NA"""
    if not (kappa2 > 0 and t_gate > 0 and code.alpha_sq > 0) or kappa_minus < 0:
        raise InvalidParameterError("pz_model 需要正的 κ₂、T 與 α")
    return kappa_minus * code.alpha_sq * t_gate + pz_nonadiabatic(code, kappa2, t_gate)


def t_opt(code: CodeParams, kappa_minus: float, kappa2: float = 1.0) -> float:
    """T_opt = π e^{−2r}/(4|α|³√(κ₋κ₂))"""
    if not kappa_minus > 0:
        raise InvalidParameterError("κ₋ = 0 時 p_Z 沒有有限的最佳閘時間")
    return math.pi * math.exp(-2.0 * code.r) / (4.0 * abs(code.alpha) ** 3 * math.sqrt(kappa_minus * kappa2))


def t_opt_numeric(code: CodeParams, kappa_minus: float, kappa2: float = 1.0) -> float:
    """以黃金分割搜尋 pz_model 的極小值。"""
    guess = t_opt(code, kappa_minus, kappa2)
    result = minimize_scalar(lambda t: pz_model(code, kappa_minus, kappa2, t),
                             bracket=(0.5 * guess, guess, 2.0 * guess), method="golden", tol=1e-12)
    return float(result.x)


def _gate_config(t_gate: float, engine: dict | None) -> EvolutionConfig:
    engine = dict(engine or {})
    engine.setdefault("sample_count", 11)
    engine.setdefault("rel_tol", 1e-8)
    engine.setdefault("abs_tol", 1e-10)
    engine.setdefault("method", "dopri5")
    return EvolutionConfig(t_final=t_gate, **engine)


def _drive(space, epsilon: float):
    a = annihilation(space)
    return epsilon * (a + a.dag())


def simulate_gate(code: CodeParams, noise: NoiseParams, theta: float, t_gate: float,
                  engine: dict | None = None, dim: int | None = None) -> GateResult:
    """|C+⟩ 出發量 p_Z，|0̄⟩ 出發量 p_X；兩次演化使用相同驅動。"""
    epsilon = drive_amplitude(theta, code.alpha.real, t_gate)
    if epsilon / noise.kappa2 > config.ZGATE_DRIVE_WARN:
        logger.warning(f"ε_Z/κ₂ = {epsilon / noise.kappa2:.3f} 超過 {config.ZGATE_DRIVE_WARN}，絕熱近似可能失效")
    space = working_space(code, dim)
    me = build_master_equation(space, code, noise, extra_hamiltonian=_drive(space, epsilon))
    cfg = _gate_config(t_gate, engine)

    plus = squeezed_cat(space, code, +1).ket
    phase_run = evolve(me, ket_to_dm(plus), cfg,
                       {"sigma_x": parity_jx(space), "sigma_y": logical_y(space, code)})
    sigma_x = float(phase_run.observables["sigma_x"][-1])
    sigma_y = float(phase_run.observables["sigma_y"][-1])
    p_z = 0.5 * (1.0 - math.cos(theta) * sigma_x - math.sin(theta) * sigma_y)

    zero, _ = logical_basis(space, code)
    bit_run = evolve(me, ket_to_dm(zero), cfg, {"sigma_z": logical_z(space, code)})
    sigma_z = bit_run.observables["sigma_z"]
    p_x = 0.5 * (1.0 - sigma_z[-1] / sigma_z[0])
    return GateResult(theta=theta, t_gate=t_gate, p_z=p_z, p_x=float(p_x), epsilon_z=epsilon,
                      sigma_x=sigma_x, sigma_y=sigma_y)


def run_gate_sequence(code: CodeParams, noise: NoiseParams, thetas: list[float], durations: list[float],
                      engine: dict | None = None, dim: int | None = None) -> DensityMatrix:
    """自 |C+⟩ 依序套用多個 Z 閘，回傳最終密度矩陣。"""
    if len(thetas) != len(durations):
        raise InvalidParameterError("thetas 與 durations 長度必須相同")
    space = working_space(code, dim)
    state = ket_to_dm(squeezed_cat(space, code, +1).ket)
    for theta, duration in zip(thetas, durations):
        epsilon = drive_amplitude(theta, code.alpha.real, duration)
        me = build_master_equation(space, code, noise, extra_hamiltonian=_drive(space, epsilon))
        state = evolve(me, state, _gate_config(duration, engine)).final_state
    return state


def scan_gate_times(code: CodeParams, noise: NoiseParams, t_grid: list[float], theta: float = math.pi,
                    engine: dict | None = None, threads: int = 1, dim: int | None = None) -> pd.DataFrame:
    """p_Z(T) 掃描並附上模型值。"""
    def task(t_gate):
        return simulate_gate(code, noise, theta, t_gate, engine, dim)

    outcomes = run_points(task, sorted(t_grid), threads, label=f"zgate α²={code.alpha_sq:g} r={code.r:g}")
    rows = []
    for outcome in outcomes:
        if not outcome.ok:
            raise outcome.error
        result = outcome.result
        rows.append({
            "alpha_sq": code.alpha_sq, "r": code.r, "r_db": r_to_db(code.r),
            "kappa_minus": noise.kappa_minus, "theta": theta, "t_gate": result.t_gate,
            "epsilon_z": result.epsilon_z, "p_z": result.p_z, "p_x": result.p_x,
            "p_z_model": pz_model(code, noise.kappa_minus, noise.kappa2, result.t_gate),
        })
    return pd.DataFrame(rows, columns=ZGATE_COLUMNS)


def bias_preservation_scan(alpha_sq_grid: list[float], r_grid: list[float], kappa_minus: float,
                           engine: dict | None = None, threads: int = 1) -> tuple[pd.DataFrame, pd.DataFrame]:
    """T_opt 下的 p_X、p_Z，並對每個 r 擬合 ln p_X 對 α² 的斜率。"""
    noise = NoiseParams(kappa1=kappa_minus)
    points = sorted((a, r) for a in alpha_sq_grid for r in r_grid)

    def task(point):
        code = CodeParams.from_alpha_sq(*point)
        t_gate = t_opt(code, kappa_minus)
        return t_gate, simulate_gate(code, noise, math.pi, t_gate, engine)

    rows = []
    for outcome in run_points(task, points, threads, label="bias scan"):
        if not outcome.ok:
            raise outcome.error
        (alpha_sq, r), (t_gate, result) = outcome.key, outcome.result
        rows.append({"alpha_sq": alpha_sq, "r": r, "r_db": r_to_db(r), "t_gate": t_gate,
                     "p_x": result.p_x, "p_z": result.p_z})
    table = pd.DataFrame(rows, columns=BIAS_COLUMNS)

    slopes = []
    for r, group in table.groupby("r"):
        usable = group[group["p_x"] > 0]
        if len(usable) < 2:
            logger.warning(f"r = {r}: p_X 正值點不足，略過斜率擬合")
            continue
        slopes.append({"r": r, "r_db": r_to_db(r),
                       "slope": float(linregress(usable["alpha_sq"], np.log(usable["p_x"])).slope)})
    slope_table = pd.DataFrame(slopes, columns=["r", "r_db", "slope"])
    base = slope_table.loc[np.isclose(slope_table["r"], 0.0), "slope"]
    slope_table["slope_ratio"] = slope_table["slope"] / float(base.iloc[0]) if not base.empty else math.nan
    return table, slope_table
