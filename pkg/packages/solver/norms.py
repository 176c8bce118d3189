"""
加权范数与 Sobolev 代理范数

所有 1/r 权的量都通过 rφ 表示计算：
    ∫|ψ|² r           = ∫|φ|² r³
    ∫|(rψ)′|²/r       = ∫|2φ + rφ′|² r
    ∫|𝓛ψ|² r          = ∫|Δ₄φ|² r³
    ∫|(r𝓛ψ)′|²/r      = ∫|2g + rg′|² r，g = Δ₄φ
@author Color2333
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from packages.domain.exceptions import ConfigError
from packages.solver.grid import RadialField, RadialGrid
from packages.solver.linear import StreamMode, SwirlMode, VelocityField, field_from_arrays
from packages.solver.model import FlowParams, poiseuille


@dataclass(frozen=True)
class NormBundle:
    """基本量 l2 / grad / lpsi / hi，以及按估计左端命名的组合项"""

    l2: float
    grad: float
    lpsi: float
    hi: float
    entries: dict[str, float] = field(default_factory=dict)

    def __getitem__(self, key: str) -> float:
        return self.entries[key]


def _radial_basics(grid: RadialGrid, phi: np.ndarray) -> tuple[float, float, float, float]:
    r = grid.nodes
    s = 2.0 * phi + r * (grid.d1 @ phi)
    g = grid.delta4 @ phi
    sg = 2.0 * g + r * (grid.d1 @ g)
    l2 = float(grid.qweights3 @ np.abs(phi) ** 2)
    grad = float(grid.qweights @ np.abs(s) ** 2)
    lpsi = float(grid.qweights3 @ np.abs(g) ** 2)
    hi = float(grid.qweights @ np.abs(sg) ** 2)
    return l2, grad, lpsi, hi


def radial_norms(phi: RadialField) -> tuple[float, float, float, float]:
    """g = rφ 的 (∫|g|²r, ∫|(rg)′|²/r, ∫|𝓛g|²r, ∫|(r𝓛g)′|²/r)"""
    return _radial_basics(phi.grid, phi.values)


def weighted_norms(mode: StreamMode | SwirlMode, params: FlowParams | None = None) -> NormBundle:
    grid = mode.grid
    n2 = float(mode.n**2)
    if isinstance(mode, StreamMode):
        phi = mode.phi.values
    else:
        phi = mode.V.values
    l2, grad, lpsi, hi = _radial_basics(grid, phi)
    r = grid.nodes
    omega_sq = float(grid.qweights3 @ np.abs(grid.delta4 @ phi - n2 * phi) ** 2)

    entries = {
        "l2": l2,
        "grad": grad,
        "lpsi": lpsi,
        "hi": hi,
        "energy1": grad + n2 * l2,
        "energy2": lpsi + n2 * grad + n2**2 * l2,
        "energy3": hi + n2 * lpsi + n2**2 * grad + n2**3 * l2,
        "omega": omega_sq,
    }
    if params is not None:
        ubar, _ = poiseuille(params, r)
        s = 2.0 * phi + r * (grid.d1 @ phi)
        m = abs(mode.n)
        entries["flux_weighted"] = m * float(grid.qweights @ (ubar * np.abs(s) ** 2)) + m**3 * float(
            grid.qweights3 @ (ubar * np.abs(phi) ** 2)
        )
        wall = phi[-1] + grid.d1[-1] @ phi
        entries["wall"] = params.slip * float(abs(wall) ** 2)
        if isinstance(mode, SwirlMode):
            entries["swirl_wall"] = (params.slip - 2.0) * float(abs(phi[-1]) ** 2)
    return NormBundle(l2=l2, grad=grad, lpsi=lpsi, hi=hi, entries=entries)


def _mode_levels(stream: StreamMode, swirl: SwirlMode) -> tuple[float, float, float]:
    """单模态 (L², H¹ 增量, H² 增量) 的平方量，不含 2π"""
    grid = stream.grid
    r = grid.nodes
    n2 = float(stream.n**2)
    phi = stream.phi.values
    V = swirl.V.values

    velocity_sq = float(
        grid.qweights
        @ (np.abs(stream.vr.values) ** 2 + np.abs(stream.vz.values) ** 2 + np.abs(swirl.vtheta.values) ** 2)
    )
    omega_phi = grid.delta4 @ phi - n2 * phi
    omega_sq = float(grid.qweights3 @ np.abs(omega_phi) ** 2)
    v_l2, v_grad, _, _ = _radial_basics(grid, V)

    h1 = omega_sq + n2 * velocity_sq + v_grad + n2 * v_l2

    s_omega = 2.0 * omega_phi + r * (grid.d1 @ omega_phi)
    omega_grad = float(grid.qweights @ np.abs(s_omega) ** 2)
    swirl_op = float(grid.qweights3 @ np.abs(grid.delta4 @ V - n2 * V) ** 2)
    h2 = omega_grad + n2 * omega_sq + n2**2 * velocity_sq + swirl_op + n2 * v_grad + n2**2 * v_l2
    return velocity_sq, h1, h2


def sobolev_surrogate(v: VelocityField, s: float) -> float:
    """
    s=0: √(2π Σ∫(|v^r|²+|v^z|²+|v^θ|²) r)；s=1、2 逐级加入涡量与 n 加权项；
    s=1.5 取 √(H¹·H²)
    """
    if s not in (0, 1, 1.5, 2):
        raise ConfigError(f"不支持的 Sobolev 指数 s={s}，可选 0 / 1 / 1.5 / 2")
    l2 = h1 = h2 = 0.0
    for n in v.indices:
        a, b, c = _mode_levels(v.stream(n), v.swirl(n))
        l2 += a
        h1 += b
        h2 += c
    scale = 2.0 * math.pi
    h0_norm = math.sqrt(scale * l2)
    h1_norm = math.sqrt(scale * (l2 + h1))
    h2_norm = math.sqrt(scale * (l2 + h1 + h2))
    if s == 0:
        return h0_norm
    if s == 1:
        return h1_norm
    if s == 2:
        return h2_norm
    return math.sqrt(h1_norm * h2_norm)


def mode_surrogate(stream: StreamMode, swirl: SwirlMode, s: float) -> float:
    """单个模态（不做 Hermitian 补齐）的代理范数"""
    field_ = VelocityField(stream.grid, {stream.n: (stream, swirl)}, abs(stream.n), real=False)
    return sobolev_surrogate(field_, s)


def projection_norm(v: VelocityField) -> float:
    """‖𝒬v‖_{L²}：去掉 z 平均（n = 0）后的 L² 范数"""
    total = 0.0
    for n in v.indices:
        if n == 0:
            continue
        a, _, _ = _mode_levels(v.stream(n), v.swirl(n))
        total += a
    return math.sqrt(2.0 * math.pi * total)


def field_difference(a: VelocityField, b: VelocityField) -> VelocityField:
    """两个同网格速度场的逐模态差"""
    N = max(a.truncation, b.truncation)
    return field_from_arrays(a.grid, a.phi_array(N) - b.phi_array(N), a.v_array(N) - b.v_array(N), a.real)
