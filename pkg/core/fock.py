# core/fock.py
"""
截斷 Fock 空間上的線性代數：算符、態向量、密度矩陣，
以及所有後續模組共用的基本玻色算符建構函式。
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm, eigvalsh

import config
from core.errors import (
    CutoffTooSmallError,
    DimensionMismatchError,
    InvalidParameterError,
    NonFiniteInputError,
)

logger = logging.getLogger(__name__)


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=complex)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class FockSpace:
    dim: int

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise InvalidParameterError(f"Fock 空間維度必須是 ≥ 2 的整數，收到 {self.dim}")

    def require_same(self, other: "FockSpace"):
        if self.dim != other.dim:
            raise DimensionMismatchError(f"維度不一致: {self.dim} vs {other.dim}")


@dataclass(frozen=True, eq=False)
class Operator:
    space: FockSpace
    entries: np.ndarray

    # numpy 純量與算符相乘時改走 __rmul__
    __array_ufunc__ = None

    def __post_init__(self):
        object.__setattr__(self, "entries", _frozen(self.entries))
        if self.entries.shape != (self.space.dim, self.space.dim):
            raise DimensionMismatchError(
                f"算符形狀 {self.entries.shape} 與空間維度 {self.space.dim} 不符")

    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, Operator):
            self.space.require_same(other.space)
            return other.entries
        return np.asarray(other) * np.eye(self.space.dim)

    def __matmul__(self, other):
        if isinstance(other, Ket):
            self.space.require_same(other.space)
            return Ket(self.space, self.entries @ other.amplitudes, normalize=False)
        if isinstance(other, Operator):
            self.space.require_same(other.space)
            return Operator(self.space, self.entries @ other.entries)
        return NotImplemented

    def __add__(self, other):
        return Operator(self.space, self.entries + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Operator(self.space, self.entries - self._coerce(other))

    def __rsub__(self, other):
        return Operator(self.space, self._coerce(other) - self.entries)

    def __mul__(self, scalar):
        return Operator(self.space, self.entries * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return Operator(self.space, -self.entries)

    def dag(self) -> "Operator":
        return dagger(self)

    def is_hermitian(self, tol: float = config.HERMITIAN_TOL) -> bool:
        return bool(np.max(np.abs(self.entries - self.entries.conj().T), initial=0.0) <= tol)


@dataclass(frozen=True, eq=False)
class Ket:
    space: FockSpace
    amplitudes: np.ndarray
    normalize: bool = True

    def __post_init__(self):
        amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amplitudes.shape != (self.space.dim,):
            raise DimensionMismatchError(
                f"態向量長度 {amplitudes.shape[0]} 與空間維度 {self.space.dim} 不符")
        if self.normalize:
            norm = np.linalg.norm(amplitudes)
            if norm == 0:
                raise InvalidParameterError("無法正規化零向量")
            amplitudes = amplitudes / norm
        object.__setattr__(self, "amplitudes", _frozen(amplitudes))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def inner(self, other: "Ket") -> complex:
        """⟨self|other⟩"""
        self.space.require_same(other.space)
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    space: FockSpace
    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", _frozen(self.entries))
        if self.entries.shape != (self.space.dim, self.space.dim):
            raise DimensionMismatchError(
                f"密度矩陣形狀 {self.entries.shape} 與空間維度 {self.space.dim} 不符")

    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))

    def min_eigenvalue(self) -> float:
        hermitian = 0.5 * (self.entries + self.entries.conj().T)
        return float(eigvalsh(hermitian)[0])

    def check(self, trace_tol: float = 1e-8, herm_tol: float = config.HERMITIAN_TOL,
              eig_tol: float = config.POSITIVITY_WARN_TOL):
        """檢查 Hermitian、跡與正定性；不符時拋出 InvalidParameterError。"""
        if self.hermiticity_error() > herm_tol:
            raise InvalidParameterError(f"密度矩陣非 Hermitian (偏差 {self.hermiticity_error():.3e})")
        if abs(self.trace() - 1.0) > trace_tol:
            raise InvalidParameterError(f"密度矩陣跡偏離 1 (tr = {self.trace():.12f})")
        if self.min_eigenvalue() < eig_tol:
            raise InvalidParameterError(f"密度矩陣最小特徵值為負 ({self.min_eigenvalue():.3e})")


# --- Cutoff adequacy ---
def squeeze_tail(r: float) -> float:
    """壓縮態振幅約按 tanh(r)^{n/2} 衰減；回傳降到 CUTOFF_TAIL_AMPLITUDE 所需的光子數。"""
    if r <= 0.0:
        return 0.0
    return 2.0 * math.log(1.0 / config.CUTOFF_TAIL_AMPLITUDE) / math.log(1.0 / math.tanh(r))


def required_dim(mean_photons: float, r: float = 0.0) -> int:
    """N ≥ max(n̄ + 8√(n̄+1) + 20, n̄ + 壓縮尾端)"""
    spread = mean_photons + config.CUTOFF_SPREAD * math.sqrt(mean_photons + 1.0) + config.CUTOFF_MARGIN
    return int(math.ceil(max(spread, mean_photons + squeeze_tail(r))))


def check_cutoff(space: FockSpace, mean_photons: float, what: str = "state", r: float = 0.0):
    needed = required_dim(mean_photons, r)
    if space.dim < needed:
        raise CutoffTooSmallError(
            f"{what}: 平均光子數 {mean_photons:.4g} (r = {r:.3g}) 需要 N ≥ {needed}，目前 N = {space.dim}")


# --- Elementary operators ---
def annihilation(space: FockSpace) -> Operator:
    return Operator(space, np.diag(np.sqrt(np.arange(1, space.dim, dtype=float)), k=1))


def creation(space: FockSpace) -> Operator:
    return dagger(annihilation(space))


def number_operator(space: FockSpace) -> Operator:
    return Operator(space, np.diag(np.arange(space.dim, dtype=float)))


def identity(space: FockSpace) -> Operator:
    return Operator(space, np.eye(space.dim))


def parity_operator(space: FockSpace) -> Operator:
    """(−1)^n"""
    return Operator(space, np.diag((-1.0) ** np.arange(space.dim)))


def dagger(op: Operator) -> Operator:
    return Operator(op.space, op.entries.conj().T)


def matrix_exponential(op: Operator) -> Operator:
    if not np.all(np.isfinite(op.entries)):
        raise NonFiniteInputError("matrix_exponential 收到非有限值")
    norm = np.linalg.norm(op.entries, 1)
    if norm > config.EXPM_MAX_NORM:
        logger.debug(f"matrix_exponential: ‖A‖₁ = {norm:.3g} 超出已驗證範圍")
    return Operator(op.space, expm(op.entries))


def displacement(space: FockSpace, alpha: complex) -> Operator:
    """D(α) = exp(α a† − α* a)"""
    amp = abs(alpha)
    if amp ** 2 + config.CUTOFF_SPREAD * amp + config.CUTOFF_MARGIN > space.dim:
        raise CutoffTooSmallError(f"displacement: |α| = {amp:.4g} 對 N = {space.dim} 而言過大")
    a = annihilation(space)
    generator = alpha * a.dag() - np.conj(alpha) * a
    return matrix_exponential(generator)


def _check_squeeze(space: FockSpace, r: float):
    if r < 0:
        raise InvalidParameterError(f"壓縮參數 r 必須 ≥ 0，收到 {r}")
    check_cutoff(space, math.sinh(r) ** 2, "squeeze")


def squeeze(space: FockSpace, r: float, phi: float = 0.0) -> Operator:
    """S(ξ) = exp[½(ξ a² − ξ* a†²)], ξ = r e^{iφ}，使 S†aS = cosh r a − e^{−iφ} sinh r a†。"""
    _check_squeeze(space, r)
    a = annihilation(space)
    xi = r * np.exp(1j * phi)
    a2 = a @ a
    generator = 0.5 * (xi * a2 - np.conj(xi) * a2.dag())
    return matrix_exponential(generator)


def squeezed_mode(space: FockSpace, r: float, phi: float = 0.0) -> Operator:
    """b = S a S† = cosh r a + e^{−iφ} sinh r a†，直接組合而非共軛。"""
    _check_squeeze(space, r)
    a = annihilation(space)
    return math.cosh(r) * a + (np.exp(-1j * phi) * math.sinh(r)) * a.dag()


# --- States ---
def fock_state(space: FockSpace, n: int) -> Ket:
    if not 0 <= n < space.dim:
        raise InvalidParameterError(f"Fock 能階 {n} 超出範圍 0..{space.dim - 1}")
    amplitudes = np.zeros(space.dim, dtype=complex)
    amplitudes[n] = 1.0
    return Ket(space, amplitudes)


def coherent_state(space: FockSpace, alpha: complex) -> Ket:
    return Ket(space, displacement(space, alpha).entries[:, 0])


def ket_to_dm(ket: Ket) -> DensityMatrix:
    return DensityMatrix(ket.space, np.outer(ket.amplitudes, ket.amplitudes.conj()))


def thermal_state(space: FockSpace, n_th: float) -> DensityMatrix:
    """截斷後重新正規化的熱態。"""
    if n_th < 0:
        raise InvalidParameterError(f"n_th 必須 ≥ 0，收到 {n_th}")
    if n_th == 0:
        return ket_to_dm(fock_state(space, 0))
    check_cutoff(space, n_th, "thermal_state")
    ratio = n_th / (1.0 + n_th)
    weights = ratio ** np.arange(space.dim)
    return DensityMatrix(space, np.diag(weights / weights.sum()))


def expectation(state, op: Operator) -> complex:
    """⟨A⟩；Hermitian 算符回傳實部。"""
    if isinstance(state, Ket):
        op.space.require_same(state.space)
        value = complex(np.vdot(state.amplitudes, op.entries @ state.amplitudes))
    else:
        op.space.require_same(state.space)
        value = complex(np.trace(op.entries @ state.entries))
    if op.is_hermitian():
        return value.real
    return value


def fidelity(rho: DensityMatrix, target: Ket) -> float:
    """⟨ψ|ρ|ψ⟩"""
    rho.space.require_same(target.space)
    return float(np.real(np.vdot(target.amplitudes, rho.entries @ target.amplitudes)))


def purity(rho: DensityMatrix) -> float:
    return float(np.real(np.trace(rho.entries @ rho.entries)))


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    rho.space.require_same(sigma.space)
    delta = rho.entries - sigma.entries
    delta = 0.5 * (delta + delta.conj().T)
    return float(0.5 * np.sum(np.abs(eigvalsh(delta))))


# --- Two-mode helpers ---
def tensor(first: Operator, second: Operator) -> Operator:
    """A ⊗ B，第一個因子為慢指標。"""
    space = FockSpace(first.space.dim * second.space.dim)
    return Operator(space, np.kron(first.entries, second.entries))


def partial_trace_second(rho, dim_first: int, dim_second: int) -> DensityMatrix:
    """tr_2 ρ，ρ 以 first ⊗ second 排列。"""
    entries = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho)
    if entries.shape != (dim_first * dim_second,) * 2:
        raise DimensionMismatchError(
            f"ρ 形狀 {entries.shape} 與 {dim_first}×{dim_second} 不符")
    reduced = np.einsum("ijkj->ik", entries.reshape(dim_first, dim_second, dim_first, dim_second))
    return DensityMatrix(FockSpace(dim_first), reduced)
