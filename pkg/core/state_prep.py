# core/state_prep.py
"""
無需初始化的壓縮貓態製備。

非線性耗散算符 L = (μ₀ + μ₁a†a)a + νa† 的暗態在 μ₀/μ₁ → 0 時趨近偶宇稱貓態；
以 S(ξ) 共軛後的 X = S L S† 則穩定壓縮貓態，且穩態唯一，與初始態無關。
"""
import cmath
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from core.errors import ExpansionMismatchError, InvalidParameterError, NonFiniteInputError
from core.fock import (
    DensityMatrix,
    FockSpace,
    Ket,
    Operator,
    annihilation,
    check_cutoff,
    number_operator,
    purity,
    squeeze,
)
from core.lindblad import EvolutionConfig, MasterEquation, evolve
from core.states import CodeParams, squeezed_cat

logger = logging.getLogger(__name__)

EXPANSION_TOL = 1e-9


@dataclass(frozen=True)
class DarkOpParams:
    mu0: complex
    mu1: complex
    nu: complex
    r: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        for name in ("mu0", "mu1", "nu"):
            value = complex(getattr(self, name))
            if not cmath.isfinite(value):
                raise NonFiniteInputError(f"DarkOpParams.{name} 必須是有限值，收到 {value}")
            object.__setattr__(self, name, value)
        if self.r < 0:
            raise InvalidParameterError(f"壓縮參數 r 必須 ≥ 0，收到 {self.r}")

    @property
    def cat_amplitude(self) -> complex:
        """μ₀ → 0 極限下 a²|ψ⟩ = −(ν/μ₁)|ψ⟩ 的振幅 i√(ν/μ₁)。"""
        if self.mu1 == 0:
            raise InvalidParameterError("μ₁ = 0 時沒有貓態極限")
        return 1j * cmath.sqrt(self.nu / self.mu1)

    def unsqueezed(self) -> "DarkOpParams":
        return DarkOpParams(self.mu0, self.mu1, self.nu)


@dataclass(eq=False)
class ConvergenceResult:
    times: np.ndarray
    fidelity: np.ndarray
    final_fidelity: float
    target: Ket = field(repr=False)
    target_sign: int
    final_purity: float
    candidate_fidelities: dict[int, float] = field(default_factory=dict)


def _mean_photons(p: DarkOpParams) -> float:
    if p.mu1 == 0:
        return math.sinh(p.r) ** 2
    return abs(p.nu / p.mu1) * math.exp(2.0 * p.r) + math.sinh(p.r) ** 2


def dark_operator(space: FockSpace, p: DarkOpParams) -> Operator:
    """L = μ₀a + νa† + μ₁a†a²（忽略 p 的壓縮參數）"""
    if p.mu1 != 0:
        check_cutoff(space, abs(p.nu / p.mu1), "dark_operator")
    a = annihilation(space)
    return p.mu0 * a + p.nu * a.dag() + p.mu1 * (number_operator(space) @ a)


def expansion_terms(space: FockSpace, p: DarkOpParams) -> list[tuple[complex, Operator]]:
    """S L S† 展開成 a, a†, a†a², a†²a, a³, a†³ 六項。"""
    a = annihilation(space)
    a_dag = a.dag()
    n = number_operator(space)
    c, s = math.cosh(p.r), math.sinh(p.r)
    tau = cmath.exp(-1j * p.phi)
    cosh2 = math.cosh(2.0 * p.r)
    return [
        (p.mu0 * c + p.nu * s * tau.conjugate() + 3.0 * p.mu1 * c * s * s, a),
        (p.mu0 * s * tau + p.nu * c + p.mu1 * s * tau * (cosh2 + s * s), a_dag),
        (p.mu1 * c * (cosh2 + s * s), n @ a),
        (p.mu1 * s * tau * (c * c + cosh2), a_dag @ n),
        (p.mu1 * c * c * s * tau.conjugate(), a @ a @ a),
        (p.mu1 * c * s * s * tau * tau, a_dag @ a_dag @ a_dag),
    ]


def _conjugated(space: FockSpace, p: DarkOpParams) -> np.ndarray:
    # 在兩倍維度中共軛，截斷誤差只影響高能階
    big = FockSpace(2 * space.dim)
    squeeze_op = squeeze(big, p.r, p.phi).entries
    inner = dark_operator(big, p.unsqueezed()).entries
    return (squeeze_op @ inner @ squeeze_op.conj().T)[:space.dim, :space.dim]


def squeezed_dark_operator(space: FockSpace, p: DarkOpParams) -> Operator:
    """X = S(ξ) L S†(ξ)，回傳六項展開式；與直接共軛在低能階區塊比對。"""
    check_cutoff(space, _mean_photons(p), "squeezed_dark_operator", p.r)
    terms = expansion_terms(space, p)
    expanded = terms[0][0] * terms[0][1]
    for coefficient, op in terms[1:]:
        expanded = expanded + coefficient * op

    block = space.dim // 2
    mismatch = float(np.max(np.abs(expanded.entries[:block, :block] - _conjugated(space, p)[:block, :block])))
    if mismatch > EXPANSION_TOL:
        raise ExpansionMismatchError(
            f"六項展開與 S L S† 不一致: ‖Δ‖_max = {mismatch:.3e} (r = {p.r}, φ = {p.phi})")
    logger.debug(f"squeezed_dark_operator: 展開與共軛差異 {mismatch:.3e}")
    return expanded


def dark_state_residual(space: FockSpace, p: DarkOpParams, squeezed: bool = False) -> float:
    """‖L|C+_α⟩‖，或 squeezed=True 時的 ‖X S|C+_α⟩‖。"""
    alpha = p.cat_amplitude
    if not squeezed:
        cat = squeezed_cat(space, CodeParams(alpha=alpha), +1).ket
        return float(np.linalg.norm(dark_operator(space, p).entries @ cat.amplitudes))
    # 位移 α cosh r − α* e^{−iφ} sinh r 的候選即 S(ξ)|C+_α⟩
    target = candidate_targets(space, p)[-1]
    return float(np.linalg.norm(squeezed_dark_operator(space, p).entries @ target.amplitudes))


def candidate_targets(space: FockSpace, p: DarkOpParams) -> dict[int, Ket]:
    """S|C+_α⟩ 的兩種重排候選：位移 α cosh r ∓ α* e^{−iφ} sinh r，鍵為 ∓ 的符號。"""
    alpha = p.cat_amplitude
    c, s = math.cosh(p.r), math.sinh(p.r)
    tau = cmath.exp(-1j * p.phi)
    candidates = {}
    for sign in (+1, -1):
        displaced = alpha * c + sign * alpha.conjugate() * tau * s
        candidates[sign] = squeezed_cat(space, CodeParams(alpha=displaced, r=p.r, phi=p.phi), +1).ket
    return candidates


def unconditional_convergence(space: FockSpace, p: DarkOpParams, initial: DensityMatrix,
                              cfg: EvolutionConfig, kappa: float = 1.0) -> ConvergenceResult:
    """以 κD[X] 自任意初始態演化，回報與目標壓縮貓態的保真度曲線。

    目標態以最終保真度較高的重排候選決定。
    """
    if not kappa > 0:
        raise InvalidParameterError(f"κ 必須 > 0，收到 {kappa}")
    jump = squeezed_dark_operator(space, p)
    me = MasterEquation(Operator(space, np.zeros((space.dim, space.dim))), [(jump, kappa)])

    candidates = candidate_targets(space, p)
    projectors = {
        str(sign): Operator(space, np.outer(ket.amplitudes, ket.amplitudes.conj()))
        for sign, ket in candidates.items()
    }
    trajectory = evolve(me, initial, cfg, projectors)
    finals = {sign: float(trajectory.observables[str(sign)][-1]) for sign in candidates}
    best = max(finals, key=finals.get)
    logger.info(f"unconditional_convergence: 候選保真度 {finals}，採用符號 {best:+d}")
    curve = trajectory.observables[str(best)]
    return ConvergenceResult(
        times=trajectory.times,
        fidelity=curve,
        final_fidelity=float(curve[-1]),
        target=candidates[best],
        target_sign=best,
        final_purity=purity(trajectory.final_state),
        candidate_fidelities=finals,
    )
