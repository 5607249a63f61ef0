# core/observables.py
"""
邏輯 Pauli 可觀測量：宇稱 J_x，以及以修正 Bessel 函數與雙階乘級數構成的 J_z。
所有 Bessel 前置因子與階乘比值都在對數空間中組合後才取指數。
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, ive

import config
from core.errors import InvalidParameterError, NonConvergentSeriesError
from core.fock import FockSpace, Operator, check_cutoff, dagger, parity_operator, squeeze
from core.states import CodeParams

logger = logging.getLogger(__name__)

_LOG2 = math.log(2.0)


@dataclass(frozen=True)
class JzConfig:
    beta_sq: float
    q_max: int = config.Q_MAX_DEFAULT
    squeezing_r: float = 0.0

    def __post_init__(self):
        if not self.beta_sq > 0:
            raise InvalidParameterError(f"beta_sq 必須 > 0，收到 {self.beta_sq}")
        if self.q_max < 1:
            raise InvalidParameterError(f"q_max 必須 ≥ 1，收到 {self.q_max}")


def double_factorial(n: int) -> int:
    """n!! = n·(n−2)!!，且 0!! = (−1)!! = 1。"""
    if n < -1:
        raise InvalidParameterError(f"雙階乘未定義於 {n}")
    result = 1
    while n > 1:
        result *= n
        n -= 2
    return result


def log_double_factorial(n: np.ndarray) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    half = np.floor(np.maximum(n, 0.0) / 2.0)
    even = half * _LOG2 + gammaln(half + 1.0)
    odd = gammaln(np.maximum(n, 0.0) + 1.0) - half * _LOG2 - gammaln(half + 1.0)
    out = np.where(n % 2 == 0, even, odd)
    return np.where(n <= 0, 0.0, out)


def parity_jx(space: FockSpace) -> Operator:
    """J_x = J₊₊ − J₋₋"""
    return parity_operator(space)


def _log_sinh(y: float) -> float:
    return y + math.log1p(-math.exp(-2.0 * y)) - _LOG2


def _log_bessel_i(q: int, x: float) -> float:
    with np.errstate(divide="ignore"):
        return float(np.log(ive(abs(q), x))) + x


def series_log_coefficients(beta_sq: float, q_max: int) -> dict[int, tuple[float, float]]:
    """q → (ln|c_q|, sign c_q)，c_q = √(2β²/sinh 2β²)·(−1)^q I_q(β²)/(2q+1)。"""
    log_prefactor = 0.5 * (math.log(2.0 * beta_sq) - _log_sinh(2.0 * beta_sq))
    coefficients = {}
    for q in range(-q_max, q_max + 1):
        denom = 2 * q + 1
        sign = (-1.0) ** q * math.copysign(1.0, denom)
        coefficients[q] = (log_prefactor + _log_bessel_i(q, beta_sq) - math.log(abs(denom)), sign)
    return coefficients


def is_converged(beta_sq: float, q_max: int) -> bool:
    coefficients = series_log_coefficients(beta_sq, q_max)
    threshold = coefficients[0][0] + math.log(config.SERIES_TOL)
    return coefficients[q_max][0] < threshold and coefficients[-q_max][0] < threshold


def minimal_q_max(beta_sq: float, start: int = config.Q_MAX_DEFAULT, limit: int = 1000) -> int:
    q_max = start
    while not is_converged(beta_sq, q_max):
        q_max += 1
        if q_max > limit:
            raise NonConvergentSeriesError(f"β² = {beta_sq:.4g} 在 q_max ≤ {limit} 內無法收斂")
    return q_max


def j_plus_minus(space: FockSpace, cfg: JzConfig) -> Operator:
    """把奇宇稱映到偶宇稱的 J₊₋ 級數。"""
    if not is_converged(cfg.beta_sq, cfg.q_max):
        raise NonConvergentSeriesError(
            f"q_max = {cfg.q_max} 對 β² = {cfg.beta_sq:.4g} 不足 (需 {minimal_q_max(cfg.beta_sq, 1)})")
    dim = space.dim
    matrix = np.zeros((dim, dim))
    for q, (log_coef, sign) in series_log_coefficients(cfg.beta_sq, cfg.q_max).items():
        if not math.isfinite(log_coef):
            continue
        if q >= 0:
            # J₊₊ a^{2q+1} 後乘上 (n−1)!!/(n+2q)!!（n 為偶數列）
            rows = np.arange(0, dim - 2 * q - 1, 2)
            cols = rows + 2 * q + 1
            log_elem = (log_double_factorial(rows - 1) - log_double_factorial(rows + 2 * q)
                        + 0.5 * (gammaln(cols + 1.0) - gammaln(rows + 1.0)))
        else:
            # J₊₊ a†^{2p−1} n!!/(n+2p−1)!!（n 為奇數行）
            p = -q
            cols = np.arange(1, dim - 2 * p + 1, 2)
            rows = cols + 2 * p - 1
            log_elem = (log_double_factorial(cols) - log_double_factorial(cols + 2 * p - 1)
                        + 0.5 * (gammaln(rows + 1.0) - gammaln(cols + 1.0)))
        if rows.size:
            matrix[rows, cols] += sign * np.exp(log_coef + log_elem)
    if not np.all(np.isfinite(matrix)):
        raise NonConvergentSeriesError(f"J₊₋ 出現非有限元素 (β² = {cfg.beta_sq:.4g})")
    return Operator(space, matrix)


def jz_operator(space: FockSpace, cfg: JzConfig) -> Operator:
    """J_z = J₊₋ + J₊₋†"""
    jpm = j_plus_minus(space, cfg)
    return jpm + dagger(jpm)


def jy_operator(space: FockSpace, cfg: JzConfig) -> Operator:
    """J_y = i(J₊₋ − J₊₋†)"""
    jpm = j_plus_minus(space, cfg)
    return 1j * (jpm - dagger(jpm))


def _squeezed_frame(space: FockSpace, code: CodeParams, q_max: int | None, build) -> Operator:
    check_cutoff(space, code.cutoff_photons, "logical observable", code.r)
    beta_sq = code.beta_sq
    if q_max is None:
        q_max = minimal_q_max(beta_sq)
    cfg = JzConfig(beta_sq=beta_sq, q_max=q_max, squeezing_r=code.r)
    if code.r == 0:
        return build(space, cfg)
    # 在兩倍維度中共軛 S(r)·J·S†(r)，再截回工作空間
    big = FockSpace(2 * space.dim)
    squeeze_op = squeeze(big, code.r, code.phi).entries
    conjugated = squeeze_op @ build(big, cfg).entries @ squeeze_op.conj().T
    return Operator(space, conjugated[:space.dim, :space.dim])


def logical_z(space: FockSpace, code: CodeParams, q_max: int | None = None) -> Operator:
    """壓縮座標下的 J_z，級數內以 β² = α²e^{2r} 取代 α²。"""
    return _squeezed_frame(space, code, q_max, jz_operator)


def logical_y(space: FockSpace, code: CodeParams, q_max: int | None = None) -> Operator:
    return _squeezed_frame(space, code, q_max, jy_operator)


def logical_x(space: FockSpace) -> Operator:
    return parity_jx(space)
