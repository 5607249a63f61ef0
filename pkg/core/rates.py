# core/rates.py
"""
由軌跡擷取有效位元翻轉 / 相位翻轉速率，擬合指數抑制因子，
計算解析速率模型，並驅動四種雜訊研究（損耗、退相、增益、Kerr）。
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.stats import linregress

import config
from core.errors import InsufficientPointsError, InvalidParameterError, RateFitError
from core.fock import FockSpace, ket_to_dm, required_dim
from core.lindblad import EvolutionConfig, NoiseParams, Trajectory, build_master_equation, evolve
from core.observables import logical_z, parity_jx
from core.parallel import run_points
from core.states import CodeParams, logical_basis, r_to_db, squeezed_cat

logger = logging.getLogger(__name__)

RATE_COLUMNS = [
    "alpha_sq", "r", "kappa_ratio_name", "kappa_ratio_value",
    "gamma_bit", "gamma_bit_stderr", "gamma_phase", "gamma_phase_stderr",
    "floor_clipped", "r_db", "gamma_bit_model", "gamma_phase_model",
]


@dataclass(frozen=True)
class RateFit:
    rate: float
    stderr: float
    window: tuple[float, float]
    n_points: int
    floor_clipped: bool
    raw_rate: float


@dataclass(frozen=True)
class SuppressionFit:
    gamma: float
    prefactor: float
    alpha_sq_range: tuple[float, float]
    points_used: int
    gamma_stderr: float = 0.0


@dataclass(frozen=True)
class RateGrid:
    alpha_sq: list[float]
    r: list[float]
    knob: list[float] = field(default_factory=lambda: [0.0])

    def __post_init__(self):
        if not (self.alpha_sq and self.r and self.knob):
            raise InvalidParameterError("網格的 alpha_sq / r / knob 皆不可為空")

    def points(self) -> list[tuple[float, float, float]]:
        return sorted((a, r, k) for a in self.alpha_sq for r in self.r for k in self.knob)


# --- Time scales ---
def confinement_time(code: CodeParams, kappa2: float = 1.0) -> float:
    """t_conf ≈ (4α²κ₂)⁻¹"""
    return 1.0 / (4.0 * code.alpha_sq * kappa2)


def simulation_horizon(expected_rate: float, t_conf: float) -> float:
    """min(20/Γ, 2000)，且至少涵蓋暫態後一段取樣區間。"""
    horizon = config.HORIZON_CAP
    if expected_rate > 0:
        horizon = min(config.HORIZON_DECAYS / expected_rate, config.HORIZON_CAP)
    return max(horizon, 2.0 * config.TRANSIENT_FACTOR * t_conf)


# --- Fitting ---
def extract_rate(traj: Trajectory, observable_name: str, t_conf: float = 0.0,
                 transient_factor: float = config.TRANSIENT_FACTOR) -> RateFit:
    """ln(⟨O⟩(t)/⟨O⟩(t₀)) 的最小平方斜率，t₀ = transient_factor·t_conf。"""
    if observable_name not in traj.observables:
        raise RateFitError(f"軌跡中沒有可觀測量 '{observable_name}'")
    times = np.asarray(traj.times)
    values = np.asarray(traj.observables[observable_name], dtype=float)
    t0 = transient_factor * t_conf
    if times[-1] < t0:
        raise RateFitError(f"軌跡長度 {times[-1]:.4g} 未涵蓋 t₀ = {t0:.4g}")
    if values[0] <= 0 or abs(values[0] - 1.0) > 0.02:
        logger.warning(f"{observable_name}: 初始值 {values[0]:.6f} 偏離 1 超過 2%")

    start = int(np.searchsorted(times, t0 - 1e-12 * max(1.0, t0)))
    reference = values[start]
    if reference <= 0:
        raise RateFitError(f"{observable_name} 在 t₀ 的值 {reference:.3e} 非正", reason="non-positive")

    normalized = values[start:] / reference
    low, high = config.FIT_WINDOW
    below = np.nonzero(normalized < low)[0]
    stop = below[0] if below.size else normalized.size
    segment_t = times[start:start + stop]
    segment_v = normalized[:stop]
    keep = segment_v <= high + config.FIT_WINDOW_SLACK
    fit_t, fit_v = segment_t[keep], segment_v[keep]
    if fit_t.size < config.MIN_FIT_POINTS:
        raise RateFitError(f"{observable_name}: 視窗內只有 {fit_t.size} 個有效點", reason="too-few-points")

    fit = linregress(fit_t, np.log(fit_v))
    raw_rate = -float(fit.slope)
    clipped = raw_rate < config.RATE_FLOOR
    return RateFit(
        rate=config.RATE_FLOOR if clipped else raw_rate,
        stderr=float(fit.stderr),
        window=(float(fit_t[0]), float(fit_t[-1])),
        n_points=int(fit_t.size),
        floor_clipped=bool(clipped),
        raw_rate=raw_rate,
    )


def fit_suppression(rates, alpha_sq_range: tuple[float, float] = config.SUPPRESSION_RANGE) -> SuppressionFit:
    """Γ_bit ∝ e^{−γα²} 的對數線性擬合；剪裁與範圍外的點不納入。"""
    low, high = alpha_sq_range
    xs, ys = [], []
    for item in rates:
        alpha_sq, rate = float(item[0]), float(item[1])
        clipped = bool(item[2]) if len(item) > 2 else False
        if clipped or not low <= alpha_sq <= high or not rate > config.RATE_FLOOR:
            continue
        xs.append(alpha_sq)
        ys.append(math.log(rate))
    if len(xs) < config.MIN_FIT_POINTS:
        raise InsufficientPointsError(f"α² ∈ [{low}, {high}] 內只有 {len(xs)} 個未剪裁的速率點")
    fit = linregress(xs, ys)
    return SuppressionFit(gamma=-float(fit.slope), prefactor=math.exp(fit.intercept),
                          alpha_sq_range=(low, high), points_used=len(xs),
                          gamma_stderr=float(fit.stderr))


# --- Analytic models ---
def _inv_sinh(y: float) -> float:
    return 2.0 * math.exp(-y) / -math.expm1(-2.0 * y)


def phase_flip_matrix_element(code: CodeParams) -> float:
    """|⟨C+|a|C−⟩|² ≈ β²|cosh r tanh β² − sinh r coth β²|²，β² 大時與精確值一致。"""
    b2 = code.beta_sq
    value = math.cosh(code.r) * math.tanh(b2) - math.sinh(code.r) / math.tanh(b2)
    return b2 * value ** 2


def gamma_dephasing_model(code: CodeParams, kappa_phi: float) -> float:
    """κ_φ cosh²(2r)|β|² / sinh(2|β|²)"""
    return kappa_phi * math.cosh(2 * code.r) ** 2 * code.beta_sq * _inv_sinh(2 * code.beta_sq)


def gamma_gain_model(code: CodeParams, kappa_plus: float) -> float:
    """κ₊ cosh²(2r) / sinh(2|β|²)"""
    return kappa_plus * math.cosh(2 * code.r) ** 2 * _inv_sinh(2 * code.beta_sq)


def gamma_phase_model(code: CodeParams, kappa_minus: float) -> float:
    return 2.0 * kappa_minus * phase_flip_matrix_element(code)


def expected_bit_rate(code: CodeParams, noise: NoiseParams) -> float:
    """啟發式估計，只用來決定模擬時長。

    損耗沒有封閉形式的 Γ_bit，這裡把 κ₋ 併入 κ_φ 套用退相公式；gamma_bit_model 欄不使用此值。
    """
    return (gamma_dephasing_model(code, noise.kappa_phi + noise.kappa_minus)
            + gamma_gain_model(code, noise.kappa_plus))


# --- Scenarios ---
def scenario_noise(scenario: str, knob_value: float, overrides: dict | None = None) -> NoiseParams:
    if scenario not in config.SCENARIO_DEFAULTS:
        raise InvalidParameterError(f"未知的速率情境 '{scenario}'")
    defaults = dict(config.SCENARIO_DEFAULTS[scenario])
    defaults.update(overrides or {})
    knob = defaults.pop("knob")
    defaults[{"kappa_minus": "kappa1"}.get(knob, knob)] = knob_value
    return NoiseParams(**defaults)


def knob_name(scenario: str) -> str:
    return config.SCENARIO_DEFAULTS[scenario]["knob"]


def working_space(code: CodeParams, dim: int | None = None) -> FockSpace:
    needed = required_dim(code.cutoff_photons, code.r)
    return FockSpace(max(needed, dim or 0))


def measure_rates(code: CodeParams, noise: NoiseParams, engine: dict | None = None,
                  measure: tuple[str, ...] = ("bit", "phase"), dim: int | None = None) -> dict[str, RateFit]:
    """從 |0̄⟩ 追蹤 J_z 得 Γ_bit，從 |C+⟩ 追蹤 J_x 得 Γ_phase。"""
    engine = dict(engine or {})
    engine.setdefault("method", config.DEFAULT_RATE_METHOD)
    space = working_space(code, dim)
    me = build_master_equation(space, code, noise)
    t_conf = confinement_time(code, noise.kappa2)
    fits = {}

    if "bit" in measure:
        zero, _ = logical_basis(space, code)
        cfg = EvolutionConfig(t_final=simulation_horizon(expected_bit_rate(code, noise), t_conf), **engine)
        traj = evolve(me, ket_to_dm(zero), cfg, {"sigma_z": logical_z(space, code)})
        fits["bit"] = extract_rate(traj, "sigma_z", t_conf)

    if "phase" in measure:
        plus = squeezed_cat(space, code, +1).ket
        expected = gamma_phase_model(code, noise.kappa_minus) + noise.kappa_plus * code.beta_sq
        cfg = EvolutionConfig(t_final=simulation_horizon(expected, t_conf), **engine)
        traj = evolve(me, ket_to_dm(plus), cfg, {"sigma_x": parity_jx(space)})
        fits["phase"] = extract_rate(traj, "sigma_x", t_conf)
    return fits


def _point_row(scenario: str, point: tuple[float, float, float], fits: dict[str, RateFit],
               noise: NoiseParams) -> dict:
    alpha_sq, r, knob_value = point
    code = CodeParams.from_alpha_sq(alpha_sq, r)
    bit, phase = fits.get("bit"), fits.get("phase")
    if scenario == "rates-dephasing":
        bit_model = gamma_dephasing_model(code, noise.kappa_phi)
    elif scenario == "rates-gain":
        bit_model = gamma_gain_model(code, noise.kappa_plus)
    else:
        bit_model = math.nan
    return {
        "alpha_sq": alpha_sq,
        "r": r,
        "kappa_ratio_name": knob_name(scenario),
        "kappa_ratio_value": knob_value,
        "gamma_bit": bit.rate if bit else math.nan,
        "gamma_bit_stderr": bit.stderr if bit else math.nan,
        "gamma_phase": phase.rate if phase else math.nan,
        "gamma_phase_stderr": phase.stderr if phase else math.nan,
        "floor_clipped": any(fit.floor_clipped for fit in fits.values()),
        "r_db": r_to_db(r),
        "gamma_bit_model": bit_model,
        "gamma_phase_model": gamma_phase_model(code, noise.kappa_minus),
    }


def _add_loss_baseline(scenario: str, table: pd.DataFrame) -> pd.DataFrame:
    """退相 / 增益情境：模型欄加上同一 (α², r) 在 knob = 0 的模擬損耗貢獻。"""
    if scenario not in ("rates-dephasing", "rates-gain") or table.empty:
        return table
    for (alpha_sq, r), group in table.groupby(["alpha_sq", "r"]):
        base = group[group["kappa_ratio_value"] == 0]
        if base.empty:
            continue
        loss_rate = float(base["gamma_bit"].iloc[0])
        scale = 1.0 + group["kappa_ratio_value"] if scenario == "rates-gain" else 1.0
        table.loc[group.index, "gamma_bit_model"] = group["gamma_bit_model"] + loss_rate * scale
    return table


def study(scenario: str, grid: RateGrid, engine: dict | None = None, threads: int = 1,
          measure: tuple[str, ...] = ("bit", "phase"), dim: int | None = None,
          raise_on_error: bool = True, noise_overrides: dict | None = None) -> pd.DataFrame:
    """逐點模擬並回傳依網格鍵排序的速率表；失敗點列於 table.attrs['errors']。"""
    scenario_noise(scenario, 0.0, noise_overrides)

    def task(point):
        alpha_sq, r, knob_value = point
        code = CodeParams.from_alpha_sq(alpha_sq, r)
        noise = scenario_noise(scenario, knob_value, noise_overrides)
        return _point_row(scenario, point, measure_rates(code, noise, engine, measure, dim), noise)

    outcomes = run_points(task, grid.points(), threads, label=scenario)
    errors = [{"point": list(o.key), "error": str(o.error), "category": getattr(o.error, "category", "runtime-failure")}
              for o in outcomes if not o.ok]
    if errors and raise_on_error:
        raise next(o.error for o in outcomes if not o.ok)
    table = pd.DataFrame([o.result for o in outcomes if o.ok], columns=RATE_COLUMNS)
    table = table.sort_values(["alpha_sq", "r", "kappa_ratio_value"], kind="mergesort").reset_index(drop=True)
    table = _add_loss_baseline(scenario, table)
    table.attrs["errors"] = errors
    return table


# --- Table analysis ---
def gamma_vs_r(table: pd.DataFrame) -> pd.DataFrame:
    """每個 (knob, r) 的抑制因子 γ。"""
    rows = []
    for (knob_value, r), group in table.groupby(["kappa_ratio_value", "r"]):
        try:
            fit = fit_suppression(list(zip(group["alpha_sq"], group["gamma_bit"], group["floor_clipped"])))
        except InsufficientPointsError as e:
            logger.warning(f"knob = {knob_value}, r = {r}: {e}")
            continue
        rows.append({"kappa_ratio_value": knob_value, "r": r, "r_db": r_to_db(r), "gamma": fit.gamma,
                     "gamma_stderr": fit.gamma_stderr, "prefactor": fit.prefactor,
                     "points_used": fit.points_used})
    return pd.DataFrame(rows, columns=["kappa_ratio_value", "r", "r_db", "gamma", "gamma_stderr",
                                       "prefactor", "points_used"])


def _rates_by_knob(table: pd.DataFrame, alpha_sq: float, r: float) -> pd.Series:
    rows = table[np.isclose(table["alpha_sq"], alpha_sq) & np.isclose(table["r"], r)]
    return rows.set_index("kappa_ratio_value")["gamma_bit"].sort_index()


def kerr_crossover(table: pd.DataFrame, alpha_sq: float, r: float) -> float | None:
    """Γ_bit(r, K) 首次超過 Γ_bit(0, K) 的 K，於網格點間作對數內插。"""
    squeezed = _rates_by_knob(table, alpha_sq, r)
    plain = _rates_by_knob(table, alpha_sq, 0.0)
    common = squeezed.index.intersection(plain.index)
    if common.empty:
        return None
    gap = np.log(squeezed[common].to_numpy()) - np.log(plain[common].to_numpy())
    ks = common.to_numpy(dtype=float)
    above = np.nonzero(gap > 0)[0]
    if not above.size:
        return None
    i = int(above[0])
    if i == 0:
        return float(ks[0])
    fraction = gap[i - 1] / (gap[i - 1] - gap[i])
    if ks[i - 1] > 0:
        return float(math.exp(math.log(ks[i - 1]) + fraction * (math.log(ks[i]) - math.log(ks[i - 1]))))
    return float(ks[i - 1] + fraction * (ks[i] - ks[i - 1]))


def knob_rate_ratio(table: pd.DataFrame, alpha_sq: float, r: float, high: float, low: float = 0.0) -> float:
    """Γ_bit(knob = high) / Γ_bit(knob = low)，用於增益情境的轉折點位移。"""
    rates = _rates_by_knob(table, alpha_sq, r)
    return float(rates.loc[high] / rates.loc[low])
