# core/states.py
"""
壓縮相干態、雙光子相干態、壓縮貓態與 SCQ 邏輯基底的建構，以及由碼參數導出的純量。
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from core.errors import InvalidParameterError
from core.fock import (
    FockSpace,
    Ket,
    check_cutoff,
    displacement,
    parity_operator,
    squeeze,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CodeParams:
    alpha: complex
    r: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "alpha", complex(self.alpha))
        if self.r < 0:
            raise InvalidParameterError(f"壓縮參數 r 必須 ≥ 0，收到 {self.r}")

    @classmethod
    def from_alpha_sq(cls, alpha_sq: float, r: float = 0.0) -> "CodeParams":
        """實數 α、φ = 0 的研究用參數。"""
        if alpha_sq < 0:
            raise InvalidParameterError(f"α² 必須 ≥ 0，收到 {alpha_sq}")
        return cls(alpha=math.sqrt(alpha_sq), r=r, phi=0.0)

    @property
    def alpha_sq(self) -> float:
        return abs(self.alpha) ** 2

    @property
    def beta(self) -> complex:
        return beta(self)

    @property
    def beta_sq(self) -> float:
        return abs(self.beta) ** 2

    @property
    def mean_photons(self) -> float:
        return self.alpha_sq + math.sinh(self.r) ** 2

    @property
    def cutoff_photons(self) -> float:
        """截斷判準用的光子數：max(α², β²) + sinh²r"""
        return max(self.alpha_sq, self.beta_sq) + math.sinh(self.r) ** 2


@dataclass(frozen=True, eq=False)
class SqueezedCat:
    params: CodeParams
    parity: int
    ket: Ket = field(repr=False)
    norm_constant: float


def beta(params: CodeParams) -> complex:
    """β = α cosh r + α* e^{−iφ} sinh r"""
    return (params.alpha * math.cosh(params.r)
            + np.conj(params.alpha) * np.exp(-1j * params.phi) * math.sinh(params.r))


def _squeezed_vacuum_column(space: FockSpace, r: float, phi: float) -> np.ndarray:
    return squeeze(space, r, phi).entries[:, 0]


def squeezed_state(space: FockSpace, params: CodeParams) -> Ket:
    """|α,ξ⟩ = D(α)S(ξ)|0⟩"""
    check_cutoff(space, params.mean_photons, "squeezed_state", params.r)
    vacuum = _squeezed_vacuum_column(space, params.r, params.phi)
    return Ket(space, displacement(space, params.alpha).entries @ vacuum)


def two_photon_coherent(space: FockSpace, alpha: complex, r: float = 0.0, phi: float = 0.0) -> Ket:
    """S(ξ)D(α)|0⟩"""
    check_cutoff(space, abs(alpha) ** 2 * math.exp(2 * r) + math.sinh(r) ** 2, "two_photon_coherent", r)
    coherent = displacement(space, alpha).entries[:, 0]
    return Ket(space, squeeze(space, r, phi).entries @ coherent)


def squeezed_cat(space: FockSpace, params: CodeParams, parity: int) -> SqueezedCat:
    """|C±⟩ = (|α,ξ⟩ ± |−α,ξ⟩)/N±，以宇稱算符鏡射保證宇稱純度。"""
    if parity not in (1, -1):
        raise InvalidParameterError(f"parity 必須是 +1 或 −1，收到 {parity}")
    check_cutoff(space, params.cutoff_photons, "squeezed_cat", params.r)

    squeeze_op = squeeze(space, params.r, params.phi)
    if params.alpha == 0 and parity == -1:
        # 零振幅奇貓態的極限：壓縮單光子態
        logger.debug("squeezed_cat: α = 0 奇宇稱，回傳壓縮單光子態")
        ket = Ket(space, squeeze_op.entries[:, 1])
        return SqueezedCat(params, parity, ket, 0.0)

    displaced = displacement(space, params.alpha).entries @ squeeze_op.entries[:, 0]
    displaced = displaced / np.linalg.norm(displaced)
    mirrored = parity_operator(space).entries @ displaced
    raw = displaced + parity * mirrored
    norm_constant = float(np.linalg.norm(raw))
    return SqueezedCat(params, parity, Ket(space, raw / norm_constant, normalize=False), norm_constant)


def logical_basis(space: FockSpace, params: CodeParams) -> tuple[Ket, Ket]:
    """|0̄⟩ = (|C+⟩+|C−⟩)/√2, |1̄⟩ = (|C+⟩−|C−⟩)/√2"""
    plus = squeezed_cat(space, params, +1).ket.amplitudes
    minus = squeezed_cat(space, params, -1).ket.amplitudes
    zero = Ket(space, (plus + minus) / math.sqrt(2), normalize=False)
    one = Ket(space, (plus - minus) / math.sqrt(2), normalize=False)
    return zero, one


def r_to_db(r: float) -> float:
    """r_dB = 20r/ln 10"""
    return 20.0 * r / math.log(10.0)


def mirror_overlap(params: CodeParams) -> float:
    """⟨−α,r|α,r⟩ = exp(−2α²e^{2r})（實數 α）"""
    return math.exp(-2.0 * params.beta_sq)


def norm_constant_model(params: CodeParams, parity: int) -> float:
    """N± = √(2(1 ± e^{−2α²e^{2r}}))"""
    return math.sqrt(2.0 * (1.0 + parity * mirror_overlap(params)))
