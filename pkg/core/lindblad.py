# core/lindblad.py
"""
Lindblad 主方程式的右端項組合與時間演化。

兩種演化方式：
- "dopri5": 不建立 Liouvillian 的 Dormand–Prince 5(4) 自適應積分，PI 步長控制。
- "propagator": 對靜態生成元建立 N²×N² Liouvillian，以 expm(LΔt) 逐取樣點推進。
- "auto": N ≤ PROPAGATOR_MAX_DIM 時用 propagator，否則用 dopri5；實際採用的方法記在 stats["method"]。
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import expm, eigvalsh

import config
from core.errors import (
    DimensionMismatchError,
    InvalidParameterError,
    InvariantViolationError,
    StepSizeUnderflowError,
)
from core.fock import (
    DensityMatrix,
    FockSpace,
    Operator,
    annihilation,
    check_cutoff,
    number_operator,
    squeezed_mode,
)
from core.states import CodeParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NoiseParams:
    """所有速率以 κ₂ 為單位。"""
    kappa2: float = 1.0
    kappa1: float = 0.0
    n_th: float = 0.0
    kappa_phi: float = 0.0
    kerr: float = 0.0

    def __post_init__(self):
        for name in ("kappa2", "kappa1", "n_th", "kappa_phi"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise InvalidParameterError(f"NoiseParams.{name} 必須是 ≥ 0 的有限值，收到 {value}")
        if not math.isfinite(self.kerr):
            raise InvalidParameterError(f"NoiseParams.kerr 必須是有限值，收到 {self.kerr}")

    @property
    def kappa_minus(self) -> float:
        return self.kappa1 * (1.0 + self.n_th)

    @property
    def kappa_plus(self) -> float:
        return self.kappa1 * self.n_th


@dataclass(eq=False)
class MasterEquation:
    hamiltonian: Operator
    dissipators: list[tuple[Operator, float]]

    def __post_init__(self):
        space = self.hamiltonian.space
        for op, rate in self.dissipators:
            space.require_same(op.space)
            if rate < 0 or not math.isfinite(rate):
                raise InvalidParameterError(f"耗散速率必須 ≥ 0，收到 {rate}")
        self._jumps = [math.sqrt(rate) * op.entries for op, rate in self.dissipators if rate > 0]
        decay = sum((jump.conj().T @ jump for jump in self._jumps), np.zeros_like(self.hamiltonian.entries))
        self._h_eff = self.hamiltonian.entries - 0.5j * decay

    @property
    def space(self) -> FockSpace:
        return self.hamiltonian.space

    def rhs(self, rho: np.ndarray) -> np.ndarray:
        """−i(H_eff ρ − ρ H_eff†) + Σ J ρ J†，輸出為 Hermitian。"""
        coherent = -1j * (self._h_eff @ rho)
        out = coherent + coherent.conj().T
        for jump in self._jumps:
            out += jump @ rho @ jump.conj().T
        return out

    def liouvillian(self) -> np.ndarray:
        """列優先向量化：vec(AXB) = (A ⊗ Bᵀ) vec(X)。"""
        n = self.space.dim
        eye = np.eye(n)
        superop = -1j * np.kron(self._h_eff, eye) + 1j * np.kron(eye, self._h_eff.conj())
        for jump in self._jumps:
            superop += np.kron(jump, jump.conj())
        return superop


@dataclass(frozen=True)
class EvolutionConfig:
    t_final: float
    sample_count: int = config.DEFAULT_SAMPLE_COUNT
    rel_tol: float = config.DEFAULT_REL_TOL
    abs_tol: float = config.DEFAULT_ABS_TOL
    method: str = config.DEFAULT_METHOD
    check_positivity: bool = True

    def __post_init__(self):
        if not (self.t_final > 0 and math.isfinite(self.t_final)):
            raise InvalidParameterError(f"t_final 必須 > 0，收到 {self.t_final}")
        if self.sample_count < 2:
            raise InvalidParameterError(f"sample_count 必須 ≥ 2，收到 {self.sample_count}")
        for name in ("rel_tol", "abs_tol"):
            value = getattr(self, name)
            if not 0 < value <= 1e-2:
                raise InvalidParameterError(f"{name} 必須在 (0, 1e-2] 之間，收到 {value}")
        if self.method not in config.EVOLUTION_METHODS:
            raise InvalidParameterError(f"未知的演化方法 '{self.method}'，可用: {config.EVOLUTION_METHODS}")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_final, self.sample_count)


@dataclass(eq=False)
class Trajectory:
    times: np.ndarray
    observables: dict[str, np.ndarray]
    final_state: DensityMatrix
    stats: dict = field(default_factory=dict)


# --- Superoperator pieces ---
def dissipator_apply(op: Operator, rho) -> np.ndarray:
    """D[A]ρ = AρA† − ½A†Aρ − ½ρA†A"""
    if isinstance(rho, DensityMatrix):
        op.space.require_same(rho.space)
        rho = rho.entries
    elif rho.shape != op.entries.shape:
        raise DimensionMismatchError(f"ρ 形狀 {rho.shape} 與算符 {op.entries.shape} 不符")
    a = op.entries
    a_dag = a.conj().T
    decay = a_dag @ a
    return a @ rho @ a_dag - 0.5 * (decay @ rho + rho @ decay)


def confinement_dissipator(space: FockSpace, params: CodeParams) -> Operator:
    """b² − β²；r = 0 時退化為 a² − α²。"""
    check_cutoff(space, params.cutoff_photons, "confinement_dissipator", params.r)
    b = squeezed_mode(space, params.r, params.phi)
    return b @ b - params.beta ** 2


def build_master_equation(space: FockSpace, code: CodeParams, noise: NoiseParams,
                          extra_hamiltonian: Operator | None = None) -> MasterEquation:
    """H = K a†²a² (+ 額外項)；耗散 κ₂D[b²−β²], κ₋D[a], κ_φD[a†a], κ₊D[a†]。"""
    a = annihilation(space)
    a_dag = a.dag()
    hamiltonian = noise.kerr * (a_dag @ a_dag @ a @ a)
    if extra_hamiltonian is not None:
        hamiltonian = hamiltonian + extra_hamiltonian
    dissipators = [
        (confinement_dissipator(space, code), noise.kappa2),
        (a, noise.kappa_minus),
        (number_operator(space), noise.kappa_phi),
        (a_dag, noise.kappa_plus),
    ]
    return MasterEquation(hamiltonian, dissipators)


def steady_state_residual(me: MasterEquation, rho) -> float:
    if isinstance(rho, DensityMatrix):
        me.space.require_same(rho.space)
        rho = rho.entries
    elif rho.shape != (me.space.dim, me.space.dim):
        raise DimensionMismatchError(f"ρ 形狀 {rho.shape} 與主方程式維度 {me.space.dim} 不符")
    return float(np.max(np.abs(me.rhs(np.asarray(rho, dtype=complex)))))


# --- Dormand–Prince 5(4) ---
_EVAL_STAGES = [0.0, 1/5, 3/10, 4/5, 8/9, 1.0, 1.0]

_BT = {
    0: [       1/5],
    1: [      3/40,        9/40],
    2: [     44/45,      -56/15,       32/9],
    3: [19372/6561, -25360/2187, 64448/6561, -212/729],
    4: [ 9017/3168,     -355/33, 46732/5247,   49/176, -5103/18656],
    5: [    35/384,           0,   500/1113,  125/192,  -2187/6784, 11/84],
}

# 五階解與嵌入四階解之差
_TR = [71/57600, 0, -71/16695, 71/1920, -17253/339200, 22/525, -1/40]

_PI_ALPHA = 0.7 / 5
_PI_BETA = 0.4 / 5


def _hermitize(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.conj().T)


def _error_norm(err: np.ndarray, y_old: np.ndarray, y_new: np.ndarray, cfg: EvolutionConfig) -> float:
    scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y_old), np.abs(y_new))
    return float(np.sqrt(np.mean(np.abs(err / scale) ** 2)))


def _initial_step(me: MasterEquation, y: np.ndarray, f0: np.ndarray, cfg: EvolutionConfig) -> float:
    scale = cfg.abs_tol + cfg.rel_tol * np.abs(y)
    d0 = np.sqrt(np.mean(np.abs(y / scale) ** 2))
    d1 = np.sqrt(np.mean(np.abs(f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    return min(h0, cfg.t_final / (cfg.sample_count - 1))


class _Monitor:
    """跡漂移與正定性監控。"""

    def __init__(self, trace0: float, cfg: EvolutionConfig):
        self.trace0 = trace0
        self.cfg = cfg
        self.max_drift = 0.0
        self.min_eig = math.inf
        self._warned_trace = False
        self._warned_positivity = False

    def trace(self, rho: np.ndarray, t: float):
        drift = abs(np.trace(rho).real - self.trace0)
        self.max_drift = max(self.max_drift, drift)
        if drift > config.TRACE_ABORT_TOL:
            raise InvariantViolationError(f"t = {t:.6g}: 跡漂移 {drift:.3e} 超過 {config.TRACE_ABORT_TOL:g}")
        if drift > config.TRACE_WARN_TOL and not self._warned_trace:
            logger.warning(f"t = {t:.6g}: 跡漂移 {drift:.3e} 超過 {config.TRACE_WARN_TOL:g}")
            self._warned_trace = True

    def positivity(self, rho: np.ndarray, t: float):
        if not self.cfg.check_positivity:
            return
        smallest = float(eigvalsh(rho)[0])
        self.min_eig = min(self.min_eig, smallest)
        if smallest < config.POSITIVITY_ABORT_TOL:
            raise InvariantViolationError(f"t = {t:.6g}: 最小特徵值 {smallest:.3e} 低於 {config.POSITIVITY_ABORT_TOL:g}")
        if smallest < config.POSITIVITY_WARN_TOL and not self._warned_positivity:
            logger.warning(f"t = {t:.6g}: 最小特徵值 {smallest:.3e}，正定性輕微破壞")
            self._warned_positivity = True


def _run_dopri5(me: MasterEquation, rho: np.ndarray, cfg: EvolutionConfig, sample, monitor: _Monitor) -> dict:
    times = cfg.times
    h_min = config.STEP_UNDERFLOW_RATIO * cfg.t_final
    t = 0.0
    k1 = me.rhs(rho)
    h = _initial_step(me, rho, k1, cfg)
    err_prev = 1e-4
    accepted = rejected = 0

    for index in range(1, len(times)):
        target = times[index]
        while t < target:
            clipped = target - t <= h
            h_try = target - t if clipped else h

            ks = [k1]
            for stage in range(5):
                y_stage = rho + h_try * sum(coef * k for coef, k in zip(_BT[stage], ks) if coef)
                ks.append(me.rhs(y_stage))
            y_new = rho + h_try * sum(coef * k for coef, k in zip(_BT[5], ks) if coef)
            k7 = me.rhs(y_new)
            ks.append(k7)
            err = _error_norm(h_try * sum(coef * k for coef, k in zip(_TR, ks) if coef), rho, y_new, cfg)

            if err <= 1.0:
                t = target if clipped else t + h_try
                rho = _hermitize(y_new)
                k1 = _hermitize(k7)
                accepted += 1
                monitor.trace(rho, t)
                factor = config.STEP_SAFETY * max(err, 1e-10) ** -_PI_ALPHA * err_prev ** _PI_BETA
                factor = min(config.STEP_MAX_FACTOR, max(config.STEP_MIN_FACTOR, factor))
                h = max(h, h_try * factor) if clipped else h_try * factor
                err_prev = max(err, 1e-4)
            else:
                rejected += 1
                factor = max(config.STEP_MIN_FACTOR, config.STEP_SAFETY * err ** -0.2)
                h = h_try * factor

            if h < h_min:
                raise StepSizeUnderflowError(
                    f"t = {t:.6g}: 步長 {h:.3e} 低於 {h_min:.3e}，系統可能過於剛性，請改用 propagator 方法")
            if accepted + rejected > config.MAX_STEPS:
                raise StepSizeUnderflowError(f"超過最大步數 {config.MAX_STEPS}，於 t = {t:.6g}")
        sample(index, rho)
    return {"accepted_steps": accepted, "rejected_steps": rejected}


def build_propagator(me: MasterEquation, dt: float) -> np.ndarray:
    """exp(L·dt)，僅限小維度。"""
    if me.space.dim > config.PROPAGATOR_MAX_DIM:
        raise InvalidParameterError(
            f"propagator 方法限 N ≤ {config.PROPAGATOR_MAX_DIM}，目前 N = {me.space.dim}")
    logger.debug(f"建立傳播子: N = {me.space.dim}, dt = {dt:.6g}")
    return expm(me.liouvillian() * dt)


def _run_propagator(me: MasterEquation, rho: np.ndarray, cfg: EvolutionConfig, sample,
                    monitor: _Monitor, propagator: np.ndarray | None) -> dict:
    times = cfg.times
    n = me.space.dim
    if propagator is None:
        propagator = build_propagator(me, times[1] - times[0])
    elif propagator.shape != (n * n, n * n):
        raise DimensionMismatchError(f"傳播子形狀 {propagator.shape} 與 N = {n} 不符")
    vec = rho.reshape(-1)
    for index in range(1, len(times)):
        rho = _hermitize((propagator @ vec).reshape(n, n))
        # 不重新正規化，累積的跡漂移由 monitor 檢查
        monitor.trace(rho, times[index])
        vec = rho.reshape(-1)
        sample(index, rho)
    return {"propagator_applications": len(times) - 1}


def resolve_method(method: str, dim: int) -> str:
    """"auto" 在 N ≤ PROPAGATOR_MAX_DIM 時用 propagator，否則改用 dopri5。"""
    if method != "auto":
        return method
    if dim <= config.PROPAGATOR_MAX_DIM:
        return "propagator"
    logger.info(f"N = {dim} 超過 propagator 上限 {config.PROPAGATOR_MAX_DIM}，改用 dopri5")
    return "dopri5"


def evolve(me: MasterEquation, rho0: DensityMatrix, cfg: EvolutionConfig,
           observables: dict[str, Operator] | None = None,
           propagator: np.ndarray | None = None,
           on_sample: Callable[[int, np.ndarray], None] | None = None) -> Trajectory:
    """自 rho0 演化至 cfg.t_final，於等距取樣點記錄可觀測量期望值。

    on_sample(index, rho) 於每個取樣點被呼叫，可用來保留完整密度矩陣。
    """
    me.space.require_same(rho0.space)
    rho0.check()
    observables = observables or {}
    for name, op in observables.items():
        me.space.require_same(op.space)

    times = cfg.times
    records = {name: np.zeros(len(times)) for name in observables}
    # tr(Oρ) = Σ O_ij ρ_ji
    transposed = {name: op.entries.T for name, op in observables.items()}
    rho = _hermitize(np.array(rho0.entries, dtype=complex))
    monitor = _Monitor(np.trace(rho).real, cfg)

    def sample(index: int, state: np.ndarray):
        for name, op_t in transposed.items():
            records[name][index] = float(np.sum(op_t * state).real)
        if index > 0:
            monitor.positivity(state, times[index])
        samples[0] = state
        if on_sample is not None:
            on_sample(index, state)

    samples = [rho]
    sample(0, rho)
    method = resolve_method(cfg.method, me.space.dim)
    if method == "dopri5":
        stats = _run_dopri5(me, rho, cfg, sample, monitor)
    else:
        stats = _run_propagator(me, rho, cfg, sample, monitor, propagator)

    stats.update({"max_trace_drift": monitor.max_drift,
                  "min_eigenvalue": monitor.min_eig if math.isfinite(monitor.min_eig) else None,
                  "method": method})
    logger.debug(f"evolve 完成: {stats}")
    return Trajectory(times=times, observables=records,
                      final_state=DensityMatrix(me.space, samples[0]), stats=stats)
