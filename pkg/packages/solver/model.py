"""
流动参数、Poiseuille 基本流与 (Φ, α, n) 区域划分
@author Color2333
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from packages.config import get_settings
from packages.domain.enums import RegimeTag
from packages.domain.exceptions import ConfigError, DomainError

logger = logging.getLogger(__name__)

PERIOD = 2.0 * math.pi


@dataclass(frozen=True)
class FlowParams:
    """通量 Φ、Navier 滑移系数 α，轴向周期固定为 2π"""

    flux: float
    slip: float = 0.0
    period: float = PERIOD

    def __post_init__(self) -> None:
        if not (self.flux > 0 and math.isfinite(self.flux)):
            raise ConfigError(f"flux 必须为正有限数，当前为 {self.flux}")
        if not (self.slip >= 0 and math.isfinite(self.slip)):
            raise ConfigError(f"slip 必须非负，当前为 {self.slip}")
        if self.period != PERIOD:
            raise ConfigError("轴向周期固定为 2π")

    def with_slip(self, slip: float) -> FlowParams:
        return FlowParams(self.flux, slip)

    @property
    def wall_shear_coefficient(self) -> float:
        """κ = 4Φα / (π(α+4))，即 −Ū′(r)/r"""
        return 4.0 * self.flux * self.slip / (math.pi * (4.0 + self.slip))


def poiseuille(params: FlowParams, r):
    """
    Ū(r) = Φ/π · (4 + 2α(1 − r²)) / (4 + α) 及其导数，支持标量与数组
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0.0) or np.any(r_arr > 1.0):
        raise DomainError(f"r 必须位于 [0, 1]，当前为 {r}")
    phi, alpha = params.flux, params.slip
    value = phi / math.pi * (4.0 + 2.0 * alpha * (1.0 - r_arr**2)) / (4.0 + alpha)
    derivative = -params.wall_shear_coefficient * r_arr
    if r_arr.ndim == 0:
        return float(value), float(derivative)
    return value, derivative


def poiseuille_ratio_bound(params: FlowParams, nodes: np.ndarray) -> np.ndarray:
    """逐点 (2Φ/π)(1 − r²) / Ū(r)，对任意 α ≥ 0 不超过 2"""
    value, _ = poiseuille(params, nodes)
    return 2.0 * params.flux / math.pi * (1.0 - np.asarray(nodes) ** 2) / value


def classify_regime(
    params: FlowParams,
    n: int,
    eps1: float | None = None,
    delta: float | None = None,
    large_flux_threshold: float | None = None,
) -> RegimeTag:
    """
    按下列顺序判定：零模态、小通量、高频（|n| ≥ ε₁√Φ）、
    小滑移 Z₁（4+α ≤ δ(Φ|n|)^{1/3}）、大滑移 Z₂（4+α ≥ (Φ|n|)^{1/3}/δ）、其余为 Z₃。
    边界上的等号归入前一个分支。
    """
    settings = get_settings()
    eps1 = settings.eps1 if eps1 is None else eps1
    delta = settings.delta if delta is None else delta
    threshold = settings.large_flux_threshold if large_flux_threshold is None else large_flux_threshold
    if not 0.0 < eps1 < 1.0:
        raise ConfigError(f"eps1 必须位于 (0, 1)，当前为 {eps1}")
    if not 0.0 < delta < 1.0:
        raise ConfigError(f"delta 必须位于 (0, 1)，当前为 {delta}")

    if n == 0:
        return RegimeTag.zero_mode
    if params.flux < threshold:
        return RegimeTag.small_flux
    m = abs(n)
    if m >= eps1 * math.sqrt(params.flux):
        return RegimeTag.high_frequency
    scale = (params.flux * m) ** (1.0 / 3.0)
    if 4.0 + params.slip <= delta * scale:
        return RegimeTag.small_slip
    if 4.0 + params.slip >= scale / delta:
        return RegimeTag.large_slip
    return RegimeTag.intermediate_slip


# 壁面边界层内至少要落下的 Lobatto 节点数
LAYER_POINTS = 10


def layer_width(params: FlowParams, n: int) -> float:
    """边界层厚度 (Φ·max(|n|, 1))^{-1/3}"""
    return (params.flux * max(abs(n), 1)) ** (-1.0 / 3.0)


def resolved_grid_size(
    params: FlowParams,
    n: int,
    minimum: int | None = None,
    maximum: int | None = None,
) -> int:
    """
    距壁 w 以内的 Lobatto 节点数至少为 2M√w/π。取使其不少于 LAYER_POINTS 的
    最小 8 的倍数，再截到 [grid_size, max_grid_size]。
    """
    settings = get_settings()
    low = settings.grid_size if minimum is None else minimum
    high = settings.max_grid_size if maximum is None else maximum
    if low < 4 or high < low:
        raise ConfigError(f"网格阶数范围无效: [{low}, {high}]")
    need = LAYER_POINTS * math.pi / (2.0 * math.sqrt(layer_width(params, n)))
    size = int(min(max(8 * math.ceil(need / 8.0), low), high))
    logger.debug("Φ=%g n=%d 层厚 %.4g，M=%d", params.flux, n, layer_width(params, n), size)
    return size
