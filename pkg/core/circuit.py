# core/circuit.py
"""
ATS 電路實作的參數規劃：泵浦頻率與振幅、有效模型參數、絕熱消去的有效性，
以及雙模 → 單模化約的數值驗證與壓縮 KPO 的頻譜檢查。
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh

import config
from core.errors import InvalidParameterError, InvariantViolationError, ResonanceError
from core.fock import (
    DensityMatrix,
    FockSpace,
    Operator,
    annihilation,
    check_cutoff,
    fock_state,
    identity,
    ket_to_dm,
    partial_trace_second,
    required_dim,
    squeezed_mode,
    tensor,
    trace_distance,
)
from core.lindblad import EvolutionConfig, MasterEquation, confinement_dissipator, evolve
from core.states import CodeParams, squeezed_cat

logger = logging.getLogger(__name__)

MODES = ("a", "c", "w")


@dataclass(frozen=True)
class CircuitParams:
    """頻率與速率皆為角頻率單位；λ、φ_x、η 無因次。"""
    g3: float
    kappa_w: float
    e_j: float
    lam: float
    omega_a: float
    omega_w: float
    phi_a: float
    phi_c: float
    phi_w: float
    eta: float = 0.0
    omega_c: float | None = None
    kappa_a: float = 0.0
    kappa_c: float = 0.0

    def __post_init__(self):
        for name in ("g3", "kappa_w", "e_j", "omega_a", "omega_w"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidParameterError(f"CircuitParams.{name} 必須 > 0，收到 {value}")
        if self.omega_c is not None and not self.omega_c > 0:
            raise InvalidParameterError(f"CircuitParams.omega_c 必須 > 0，收到 {self.omega_c}")
        if not 0 < self.lam < config.LAMBDA_MAX:
            raise InvalidParameterError(f"λ 必須在 (0, {config.LAMBDA_MAX}) 之間，收到 {self.lam}")
        if not abs(self.eta) < 1:
            raise InvalidParameterError(f"|η| 必須 < 1，收到 {self.eta}")
        if self.kappa_a < 0 or self.kappa_c < 0:
            raise InvalidParameterError("κ_a、κ_c 必須 ≥ 0")

    @property
    def kappa2_eff(self) -> float:
        """κ₂ = 4g₃²/κ_w"""
        return 4.0 * self.g3 ** 2 / self.kappa_w

    def mode(self, name: str) -> tuple[float, float, float] | None:
        """(ω_x, κ_x, φ_x)；未設定耦合器頻率時 c 模回傳 None。"""
        if name == "a":
            return self.omega_a, self.kappa_a, self.phi_a
        if name == "w":
            return self.omega_w, self.kappa_w, self.phi_w
        if name == "c":
            return None if self.omega_c is None else (self.omega_c, self.kappa_c, self.phi_c)
        raise InvalidParameterError(f"未知的模 '{name}'，可用: {MODES}")


@dataclass(frozen=True)
class PumpPlan:
    omega_1: float
    omega_2: float
    omega_3: float
    eps_1: float
    eps_2: float
    eps_3: float
    kappa2_eff: float
    omega_eff: complex
    validity_ratio: float
    omega_tilde: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "omega_1": self.omega_1, "omega_2": self.omega_2, "omega_3": self.omega_3,
            "eps_1": self.eps_1, "eps_2": self.eps_2, "eps_3": self.eps_3,
            "kappa2_eff": self.kappa2_eff,
            "omega_eff": {"re": self.omega_eff.real, "im": self.omega_eff.imag},
            "validity_ratio": self.validity_ratio,
            "omega_tilde": {key: {"re": value.real, "im": value.imag, "abs": abs(value)}
                            for key, value in self.omega_tilde.items()},
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True)
class DisplacedFrame:
    pump_index: int
    amplitudes: dict[str, complex]
    resonant: list[str] = field(default_factory=list)

    @property
    def magnitudes(self) -> dict[str, float]:
        return {mode: abs(value) for mode, value in self.amplitudes.items()}


@dataclass(eq=False)
class TwoModeReport:
    times: np.ndarray
    trace_distance: np.ndarray
    validity_ratio: float
    storage_dim: int
    waste_dim: int
    waste_top_population: float
    g3: float
    kappa_w: float

    @property
    def final_trace_distance(self) -> float:
        return float(self.trace_distance[-1])

    @property
    def max_trace_distance(self) -> float:
        return float(np.max(self.trace_distance))


@dataclass(frozen=True)
class SkpoReport:
    energy: float
    residuals: dict[int, float]
    gap: float
    factored_mismatch: float
    eigenvalues: np.ndarray = field(repr=False)


# --- Pump plan ---
def pump_amplitudes(lam: float, r: float) -> tuple[float, float, float]:
    """ε₁ = λcosh²r, ε₂ = λsinh²r, ε₃ = λsinh 2r"""
    return lam * math.cosh(r) ** 2, lam * math.sinh(r) ** 2, lam * math.sinh(2.0 * r)


def validity_ratio(cp: CircuitParams, code: CodeParams) -> float:
    """2|α|g₃/κ_w"""
    return 2.0 * abs(code.alpha) * cp.g3 / cp.kappa_w


def _denominator(omega_x: float, kappa_x: float, omega_k: float) -> complex:
    return 1j * (omega_x - omega_k) + 0.5 * kappa_x


def _is_resonant(denominator: complex, omega_x: float, kappa_x: float) -> bool:
    return abs(denominator) < config.RESONANCE_TOL * max(kappa_x, omega_x)


def waste_drive_terms(cp: CircuitParams, eps_3: float) -> dict[str, complex]:
    """Ω̃ 的各模貢獻 iE_Jε₃φ_x²/(i(ω_x−ω₃)+κ_x/2)，ω₃ = ω_w。"""
    terms = {}
    for name in MODES:
        mode = cp.mode(name)
        if mode is None:
            continue
        omega_x, kappa_x, phi_x = mode
        denominator = _denominator(omega_x, kappa_x, cp.omega_w)
        if denominator == 0:
            raise ResonanceError(f"模 {name} 與 ω₃ 共振且無損耗，Ω̃ 發散")
        terms[name] = 1j * cp.e_j * eps_3 * phi_x ** 2 / denominator
    return terms


def pump_plan(cp: CircuitParams, code: CodeParams) -> PumpPlan:
    eps_1, eps_2, eps_3 = pump_amplitudes(cp.lam, code.r)
    ratio = validity_ratio(cp, code)
    warnings = []
    if ratio >= config.VALIDITY_LIMIT:
        warnings.append(f"2|α|g₃/κ_w = {ratio:.3g} ≥ {config.VALIDITY_LIMIT}，絕熱消去可能失效")
    if cp.eta != 0:
        warnings.append(f"接面不對稱 η = {cp.eta:g} 會產生靜態 Kerr 非線性"
                        f"（實驗參考點 |K/κ₂| ≈ {config.KERR_REFERENCE_RATIO:g}）")
    for message in warnings:
        logger.warning(f"pump_plan: {message}")

    terms = waste_drive_terms(cp, eps_3)
    omega_tilde = {"full": sum(terms.values(), 0j), "waste_only": terms["w"]}
    omega_tilde.update({f"dropped_{name}": value for name, value in terms.items() if name != "w"})

    return PumpPlan(
        omega_1=2.0 * cp.omega_a - cp.omega_w,
        omega_2=2.0 * cp.omega_a + cp.omega_w,
        omega_3=cp.omega_w,
        eps_1=eps_1, eps_2=eps_2, eps_3=eps_3,
        kappa2_eff=cp.kappa2_eff,
        omega_eff=complex(-cp.g3 * code.beta ** 2),
        validity_ratio=ratio,
        omega_tilde=omega_tilde,
        warnings=warnings,
    )


def displaced_frame_amplitudes(cp: CircuitParams, pump_index: int, omega_k: float, eps_k: float) -> DisplacedFrame:
    """ξ_x 中第 k 個泵浦的係數 −iE_Jφ_xε_k/(i(ω_x−ω_k)+κ_x/2)。"""
    amplitudes, resonant = {}, []
    for name in MODES:
        mode = cp.mode(name)
        if mode is None:
            continue
        omega_x, kappa_x, phi_x = mode
        denominator = _denominator(omega_x, kappa_x, omega_k)
        if denominator == 0:
            raise ResonanceError(f"泵浦 {pump_index} 與模 {name} 共振且無損耗")
        if _is_resonant(denominator, omega_x, kappa_x):
            resonant.append(name)
            logger.warning(f"泵浦 {pump_index} 與模 {name} 近共振: |分母| = {abs(denominator):.3e}")
        amplitudes[name] = -1j * cp.e_j * phi_x * eps_k / denominator
    return DisplacedFrame(pump_index, amplitudes, resonant)


# --- Two-mode reduction ---
def two_mode_master_equation(code: CodeParams, g3: float, kappa_w: float,
                             storage: FockSpace, waste: FockSpace) -> MasterEquation:
    """H = g₃(w†b² + wb†²) + Ωw† + Ω*w，Ω = −g₃β²；耗散 κ_wD[w]。儲存模為慢指標。"""
    b = squeezed_mode(storage, code.r, code.phi)
    w = annihilation(waste)
    b2 = b @ b
    omega = -g3 * code.beta ** 2
    eye_a, eye_w = identity(storage), identity(waste)
    coupling = tensor(b2, w.dag()) + tensor(b2.dag(), w)
    drive = tensor(eye_a, omega * w.dag() + np.conj(omega) * w)
    return MasterEquation(g3 * coupling + drive, [(tensor(eye_a, w), kappa_w)])


def two_mode_validation(cp: CircuitParams, code: CodeParams, cfg: EvolutionConfig,
                        waste_dim: int = config.WASTE_DIM, storage_dim: int | None = None,
                        initial: DensityMatrix | None = None) -> TwoModeReport:
    """在 κ₂_eff = 1 的單位下比較雙模模型與 κ₂D[b²−β²] 單模模型的儲存模約化態。"""
    ratio = validity_ratio(cp, code)
    if ratio >= config.VALIDITY_LIMIT:
        logger.warning(f"two_mode_validation: 2|α|g₃/κ_w = {ratio:.3g}，預期化約誤差偏大")
    g3 = cp.g3 / cp.kappa2_eff
    kappa_w = cp.kappa_w / cp.kappa2_eff

    if storage_dim is None:
        storage_dim = required_dim(code.cutoff_photons, code.r)
    storage = FockSpace(storage_dim)
    check_cutoff(storage, code.cutoff_photons, "two_mode_validation", code.r)
    waste = FockSpace(waste_dim)

    rho_storage = initial if initial is not None else ket_to_dm(fock_state(storage, 0))
    storage.require_same(rho_storage.space)
    rho_waste = ket_to_dm(fock_state(waste, 0))
    joint = DensityMatrix(FockSpace(storage_dim * waste_dim), np.kron(rho_storage.entries, rho_waste.entries))

    single = MasterEquation(Operator(storage, np.zeros((storage_dim, storage_dim))),
                            [(confinement_dissipator(storage, code), 1.0)])
    reduced_single = []
    evolve(single, rho_storage, cfg, on_sample=lambda i, rho: reduced_single.append(rho))

    top = {"population": 0.0}
    top_projector = np.kron(np.eye(storage_dim), np.diag(np.eye(waste_dim)[-1]))
    reduced_two = []

    def keep(index, rho):
        population = float(np.real(np.sum(top_projector.T * rho)))
        top["population"] = max(top["population"], population)
        if population > config.WASTE_TOP_TOL:
            raise InvariantViolationError(
                f"廢棄模第 {waste_dim - 1} 階占據 {population:.3e} 超過 {config.WASTE_TOP_TOL:g}，請增加 waste_dim")
        reduced_two.append(partial_trace_second(rho, storage_dim, waste_dim))

    logger.info(f"two_mode_validation: N_a = {storage_dim}, N_w = {waste_dim}, g₃ = {g3:.4g}, κ_w = {kappa_w:.4g}")
    evolve(two_mode_master_equation(code, g3, kappa_w, storage, waste), joint, cfg, on_sample=keep)

    distances = np.array([
        trace_distance(reduced, DensityMatrix(storage, rho_single))
        for reduced, rho_single in zip(reduced_two, reduced_single)
    ])
    return TwoModeReport(times=cfg.times, trace_distance=distances, validity_ratio=ratio,
                         storage_dim=storage_dim, waste_dim=waste_dim,
                         waste_top_population=top["population"], g3=g3, kappa_w=kappa_w)


# --- Squeezed Kerr parametric oscillator ---
def skpo_hamiltonians(space: FockSpace, code: CodeParams, kerr: float, eps2: float) -> tuple[Operator, Operator]:
    """展開式 K b†²b² − ε₂(b†² + b²) 與因式形式 K(b†²−α²)(b²−α²) − Kα⁴。"""
    b = squeezed_mode(space, code.r, code.phi)
    b2 = b @ b
    alpha_sq = eps2 / kerr
    expanded = kerr * (b2.dag() @ b2) - eps2 * (b2.dag() + b2)
    factored = kerr * ((b2.dag() - alpha_sq) @ (b2 - alpha_sq)) - kerr * alpha_sq ** 2
    return expanded, factored


def skpo_check(space: FockSpace, code: CodeParams, kerr: float, eps2: float) -> SkpoReport:
    """壓縮貓態 |C±_{α,r}⟩ 為 H_sKPO 的簡併本徵態，E = −Kα⁴；回報到下一能階的能隙。"""
    if not (kerr > 0 and eps2 > 0):
        raise InvalidParameterError("K 與 ε₂ 必須 > 0")
    alpha = math.sqrt(eps2 / kerr)
    cat_code = CodeParams(alpha=alpha, r=code.r, phi=code.phi)
    # b 的本徵值為 α，對應位移 α e^{−r}（φ = 0）
    displaced = alpha * math.cosh(code.r) - alpha * np.exp(-1j * code.phi) * math.sinh(code.r)
    state_code = CodeParams(alpha=displaced, r=code.r, phi=code.phi)
    check_cutoff(space, max(cat_code.alpha_sq, state_code.alpha_sq) + math.sinh(code.r) ** 2, "skpo_check",
                 code.r)

    expanded, factored = skpo_hamiltonians(space, cat_code, kerr, eps2)
    mismatch = float(np.max(np.abs(expanded.entries - factored.entries)))
    energy = -kerr * alpha ** 4

    residuals = {}
    for parity in (+1, -1):
        ket = squeezed_cat(space, state_code, parity).ket.amplitudes
        residuals[parity] = float(np.linalg.norm(expanded.entries @ ket - energy * ket))

    eigenvalues = eigh(expanded.entries, eigvals_only=True)
    gap = float(eigenvalues[2] - eigenvalues[1])
    logger.info(f"skpo_check: E = {energy:.6g}, 殘差 {residuals}, 能隙 {gap:.6g}")
    return SkpoReport(energy=energy, residuals=residuals, gap=gap,
                      factored_mismatch=mismatch, eigenvalues=eigenvalues)
