"""
中频边界层分解 ψₙ = ψ_s + b(χψ_BL + ψ_e) + a·I₁(|n|r)

- Z₁（小滑移）：指数边界层
- Z₂（大滑移）：Airy 边界层
Z₃、高频、零模态与小通量区域没有分解，调用时抛 RegimeError。
@author Color2333
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from packages.domain.enums import BCKind, RegimeTag
from packages.domain.exceptions import DegenerateRegimeError, RegimeError
from packages.solver.grid import RadialField
from packages.solver.linear import (
    StreamMode,
    apply_stream_operator,
    solve_slip_with_axis,
    solve_stream_mode,
    stream_mode_from_phi,
    wall_traces,
)
from packages.solver.model import FlowParams, classify_regime, poiseuille
from packages.solver.specfun import (
    AiryLayerData,
    ExpLayerData,
    airy_boundary_layer,
    bessel_i1,
    bessel_i1_log_derivative,
    bessel_i1_samples,
    cutoff_chi,
    exp_boundary_layer,
)

logger = logging.getLogger(__name__)

LayerData = ExpLayerData | AiryLayerData


def _layer_scale(layer: LayerData) -> float:
    return layer.beta if isinstance(layer, ExpLayerData) else layer.beta_abs


def chi_layer_phi(layer: LayerData) -> RadialField:
    """χψ_BL / r；χ 在 r ≤ 1/4 为零，故轴上取 0"""
    grid = layer.profile.grid
    r = grid.nodes
    chi = cutoff_chi(r)
    values = np.zeros(grid.points, dtype=complex)
    inner = r > 0
    values[inner] = chi[inner] * layer.profile.values[inner] / r[inner]
    return grid.field(values)


def solve_remainder(params: FlowParams, n: int, chi_psi_bl: RadialField) -> StreamMode:
    """
    滑移问题 [inŪ(𝓛−n²) − (𝓛−n²)²]ψ_e = −[inŪ(𝓛−n²) − (𝓛−n²)²](χψ_BL)，
    右端由离散算子作用在 χψ_BL 上得到；χψ_BL 需在轴附近为零。
    """
    grid = chi_psi_bl.grid
    r = grid.nodes
    phi_values = np.zeros(grid.points, dtype=complex)
    inner = r > 0
    phi_values[inner] = chi_psi_bl.values[inner] / r[inner]
    phi_bl = grid.field(phi_values)
    rhs = apply_stream_operator(params, n, phi_bl) * -1.0
    axis = -complex(grid.d1[0] @ phi_values)
    return solve_slip_with_axis(params, n, rhs, axis)


def remainder_rhs_psi_form(params: FlowParams, n: int, chi_psi_bl: RadialField) -> RadialField:
    """
    余项右端的 ψ 形式：直接用 𝓛 = d²/dr² + (1/r)d/dr − 1/r² 作用在 χψ_BL 上
    （r ≥ 1/4 处有效），与 φ 形式的离散算子互为校验
    """
    grid = chi_psi_bl.grid
    r = grid.nodes
    inv_r = np.zeros_like(r)
    inv_r[r > 0] = 1.0 / r[r > 0]
    lop = grid.d2 + inv_r[:, None] * grid.d1 - np.diag(inv_r**2)
    w = lop - n * n * np.eye(grid.points)
    ubar, _ = poiseuille(params, r)
    omega = w @ chi_psi_bl.values
    values = -(1j * n * ubar * omega - w @ omega)
    values[r < 0.25] = 0.0
    return grid.field(values)


def boundary_layer_constants(
    params: FlowParams,
    n: int,
    psi_s: StreamMode,
    psi_e: StreamMode,
    layer: LayerData,
) -> tuple[complex, complex, complex]:
    """
    J = (𝓛 + α d/dr)(χψ_BL)(1) + αψ_e′(1) − ψ_BL(1)[n² + α|n|I₁′(|n|)/I₁(|n|)]，
    b = −αψ_s′(1)/J，a = −bψ_BL(1)/I₁(|n|)；迹由谱微分矩阵给出。
    """
    alpha = params.slip
    m = abs(n)
    wall = layer.profile.at_wall()
    lpsi_bl, dpsi_bl = wall_traces(chi_layer_phi(layer))
    _, dpsi_e = wall_traces(psi_e.phi)
    _, dpsi_s = wall_traces(psi_s.phi)
    i1, _ = bessel_i1(float(m))
    J = lpsi_bl + alpha * dpsi_bl + alpha * dpsi_e - wall * (
        n * n + alpha * m * bessel_i1_log_derivative(float(m))
    )
    scale = _layer_scale(layer)
    if abs(J) < 1e-12 * max(scale, scale**2):
        raise DegenerateRegimeError(
            f"边界层常数 |J| = {abs(J):.3e} 过小",
            detail={"n": n, "flux": params.flux, "slip": alpha, "scale": scale},
        )
    b = -alpha * dpsi_s / J
    a = -b * wall / i1
    logger.debug("边界层常数 n=%d J=%s b=%s a=%s", n, J, b, a)
    return complex(a), complex(b), complex(J)


@dataclass(frozen=True, eq=False)
class Decomposition:
    regime: RegimeTag
    n: int
    params: FlowParams
    slip_part: StreamMode
    remainder: StreamMode
    layer: LayerData
    phi_bl: RadialField
    bessel_phi: RadialField
    a: complex
    b: complex
    J: complex

    @property
    def psi_s(self) -> RadialField:
        return self.slip_part.psi

    @property
    def psi_e(self) -> RadialField:
        return self.remainder.psi

    @property
    def psi_bl(self) -> RadialField:
        """χ·ψ_BL"""
        return self.phi_bl.grid.field(self.phi_bl.grid.nodes * self.phi_bl.values)

    @property
    def bessel_part(self) -> RadialField:
        """a·I₁(|n|r)"""
        grid = self.bessel_phi.grid
        return grid.field(self.a * grid.nodes * self.bessel_phi.values)

    def reconstruction_phi(self) -> RadialField:
        values = (
            self.slip_part.phi.values
            + self.b * (self.phi_bl.values + self.remainder.phi.values)
            + self.a * self.bessel_phi.values
        )
        return self.phi_bl.grid.field(values)

    def reconstruction(self) -> StreamMode:
        return stream_mode_from_phi(self.n, self.reconstruction_phi(), BCKind.navier)

    def with_constants(self, a: complex, b: complex) -> Decomposition:
        return replace(self, a=a, b=b)


def decompose_mode(
    params: FlowParams,
    n: int,
    f: RadialField,
    eps1: float | None = None,
    delta: float | None = None,
    large_flux_threshold: float | None = None,
) -> Decomposition:
    regime = classify_regime(params, n, eps1, delta, large_flux_threshold)
    if regime is RegimeTag.small_slip:
        layer: LayerData = exp_boundary_layer(params, n, f.grid)
    elif regime is RegimeTag.large_slip:
        layer = airy_boundary_layer(params, n, f.grid)
    else:
        raise RegimeError(
            f"区域 {regime} 没有边界层分解",
            detail={"n": n, "flux": params.flux, "slip": params.slip},
        )

    slip_part = solve_stream_mode(params, n, f, BCKind.slip)
    phi_bl = chi_layer_phi(layer)
    remainder = solve_remainder(params, n, f.grid.field(f.grid.nodes * phi_bl.values))
    a, b, J = boundary_layer_constants(params, n, slip_part, remainder, layer)
    logger.info(
        "分解 n=%d 区域=%s |J|=%.4g |b|=%.4g", n, regime, abs(J), abs(b)
    )
    return Decomposition(
        regime=regime,
        n=n,
        params=params,
        slip_part=slip_part,
        remainder=remainder,
        layer=layer,
        phi_bl=phi_bl,
        bessel_phi=f.grid.field(bessel_i1_samples(f.grid.nodes, float(abs(n)))),
        a=a,
        b=b,
        J=J,
    )


def decomposition_residual(dec: Decomposition, direct: StreamMode) -> float:
    """‖重构 − 直接解‖ / ‖直接解‖，r 加权 L²"""
    diff = dec.reconstruction().psi - direct.psi
    scale = direct.psi.norm()
    if scale == 0.0:
        return diff.norm()
    return diff.norm() / scale
