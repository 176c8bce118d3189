"""
特殊函数与边界层剖面

- 修正 Bessel I₁ 与复 Airy Ai 直接调用 scipy.special，只负责定义域与溢出检查
- 指数边界层（小滑移 Z₁）与 Airy 边界层（大滑移 Z₂）剖面
- 光滑截断函数 χ
@author Color2333
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import special

from packages.config import get_settings
from packages.domain.exceptions import DomainError, RangeOverflowError, RegimeError
from packages.solver.grid import RadialField, RadialGrid
from packages.solver.model import FlowParams

logger = logging.getLogger(__name__)

# Ai 的参数沿射线 e^{±iπ/6} 取值
_C_PLUS = cmath.exp(1j * math.pi / 6.0)
_C_MINUS = cmath.exp(-1j * math.pi / 6.0)


# ========== Bessel I₁ ==========


def bessel_i1(x: float) -> tuple[float, float]:
    """I₁(x) 与 I₁′(x)，x ≥ 0"""
    if x < 0 or not math.isfinite(x):
        raise DomainError(f"I₁ 只对 x ≥ 0 求值，当前为 {x}")
    if x == 0.0:
        return 0.0, 0.5
    value = float(special.iv(1, x))
    derivative = float(special.ivp(1, x))
    if not (math.isfinite(value) and math.isfinite(derivative)):
        raise RangeOverflowError(f"I₁({x}) 超出双精度范围", detail={"x": x})
    return value, derivative


def bessel_i1_log_derivative(x: float) -> float:
    """I₁′(x)/I₁(x)，用指数缩放形式避免大 x 溢出"""
    if x <= 0 or not math.isfinite(x):
        raise DomainError(f"I₁′/I₁ 只对 x > 0 求值，当前为 {x}")
    # I₁′ = I₀ − I₁/x
    return float(special.ive(0, x) / special.ive(1, x)) - 1.0 / x


def log_bessel_i1(x: np.ndarray) -> np.ndarray:
    """log I₁(x)，x > 0"""
    x = np.asarray(x, dtype=float)
    return np.log(special.ive(1, x)) + x


def bessel_i1_samples(nodes: np.ndarray, scale: float) -> np.ndarray:
    """节点上的 I₁(scale·r)/r，轴上取极限 scale/2"""
    values = np.empty_like(nodes)
    inner = nodes > 0
    values[inner] = special.iv(1, scale * nodes[inner]) / nodes[inner]
    values[~inner] = 0.5 * scale
    return values


# ========== Airy Ai ==========


def airy_ai(z: complex) -> complex:
    max_modulus = get_settings().airy_max_modulus
    if not abs(z) <= max_modulus:
        raise DomainError(f"|z| = {abs(z):.3g} 超出支持范围 {max_modulus}")
    ai, _, _, _ = special.airy(complex(z))
    return complex(ai)


def _airy_ai_masked(z: np.ndarray, max_modulus: float) -> np.ndarray:
    """向量化 Ai；|z| 超出范围的点置零（该处 Ai 已远小于双精度）"""
    out = np.zeros(z.shape, dtype=complex)
    inside = np.abs(z) <= max_modulus
    out[inside] = special.airy(z[inside])[0]
    return out


# ========== 指数边界层（Z₁） ==========


@dataclass(frozen=True)
class ExpLayerData:
    beta: float
    theta: float
    profile: RadialField
    rate: complex

    def psi_at(self, r: np.ndarray) -> np.ndarray:
        return np.exp(-self.rate * (1.0 - np.asarray(r)))


def exp_layer_phase(params: FlowParams, n: int) -> tuple[float, float]:
    """β 与 θ：β e^{iθ} = n² + i·4Φn/(π(4+α))"""
    if n == 0:
        raise DomainError("边界层剖面要求 n ≠ 0")
    imag = 4.0 * params.flux * n / (math.pi * (4.0 + params.slip))
    beta = math.hypot(float(n * n), imag)
    theta = math.atan2(imag, float(n * n))
    return beta, theta


def exp_boundary_layer(params: FlowParams, n: int, grid: RadialGrid) -> ExpLayerData:
    """ψ_BL(r) = exp(−√β e^{iθ/2}(1 − r))"""
    beta, theta = exp_layer_phase(params, n)
    rate = math.sqrt(beta) * cmath.exp(0.5j * theta)
    profile = grid.field(np.exp(-rate * (1.0 - grid.nodes)))
    logger.debug("指数边界层 n=%d β=%.6g θ=%.6g", n, beta, theta)
    return ExpLayerData(beta=beta, theta=theta, profile=profile, rate=rate)


# ========== Airy 边界层（Z₂） ==========


def airy_beta(params: FlowParams, n: int) -> float:
    """|β| = (4Φ|n|/π)^{1/3}"""
    return (4.0 * params.flux * abs(n) / math.pi) ** (1.0 / 3.0)


def airy_forcing(params: FlowParams, n: int, rho: np.ndarray) -> np.ndarray:
    """G̃(ρ) = Ai(C±(ρ ∓ iγ))，γ = n²/|β|²；n < 0 取共轭分支"""
    beta_abs = airy_beta(params, n)
    gamma = n * n / beta_abs**2
    rho = np.asarray(rho, dtype=float)
    if n > 0:
        z = _C_PLUS * (rho - 1j * gamma)
    else:
        z = _C_MINUS * (rho + 1j * gamma)
    return _airy_ai_masked(z, get_settings().airy_max_modulus)


@lru_cache(maxsize=8)
def _gauss_panels(panels: int, length: float) -> tuple[np.ndarray, np.ndarray]:
    x, w = leggauss(16)
    edges = np.linspace(0.0, length, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    t = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    tw = (half[:, None] * w[None, :]).ravel()
    t.setflags(write=False)
    tw.setflags(write=False)
    return t, tw


def airy_layer_kernel(
    params: FlowParams,
    n: int,
    rho: np.ndarray,
    derivative: int = 0,
) -> np.ndarray:
    """
    G(ρ) = ∫_0^T sinh(kt)/k · G̃(ρ+t) dt，G′(ρ) = −∫_0^T cosh(kt) G̃(ρ+t) dt，k = |n|/|β|。
    它是 G″ − k²G = G̃ 在无穷远衰减的解；复合 Gauss–Legendre 面板数加倍直到结果稳定。
    """
    if n == 0:
        raise DomainError("Airy 边界层要求 n ≠ 0")
    settings = get_settings()
    k = abs(n) / airy_beta(params, n)
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    length = settings.layer_truncation

    def _integrate(panels: int) -> np.ndarray:
        t, tw = _gauss_panels(panels, length)
        g_tilde = airy_forcing(params, n, rho[:, None] + t[None, :])
        if derivative == 0:
            kern = np.sinh(k * t) / k
            return (g_tilde * (kern * tw)[None, :]).sum(axis=1)
        kern = np.cosh(k * t)
        return -(g_tilde * (kern * tw)[None, :]).sum(axis=1)

    panels = 16
    previous = _integrate(panels)
    while panels < 1024:
        panels *= 2
        current = _integrate(panels)
        scale = max(float(np.max(np.abs(current))), 1e-300)
        if float(np.max(np.abs(current - previous))) <= 1e-12 * scale:
            return current
        previous = current
    logger.warning("Airy 核积分在 %d 个面板时仍未完全稳定", panels)
    return previous


@dataclass(frozen=True)
class AiryLayerData:
    beta_abs: float
    c0: complex
    g0: complex
    profile: RadialField


def airy_boundary_layer(params: FlowParams, n: int, grid: RadialGrid) -> AiryLayerData:
    """ψ_BL(r) = C₀·G(|β|(1 − r))，|G(0)| ≥ 1 时 C₀ = 1/G(0)，否则 C₀ = 1"""
    if n == 0:
        raise DomainError("Airy 边界层要求 n ≠ 0")
    beta_abs = airy_beta(params, n)
    if beta_abs < 1.0:
        raise RegimeError(f"|β| = {beta_abs:.4g} < 1，不在大滑移区域")
    g0 = complex(airy_layer_kernel(params, n, np.array([0.0]))[0])
    c0 = 1.0 / g0 if abs(g0) >= 1.0 else 1.0 + 0j
    values = c0 * airy_layer_kernel(params, n, beta_abs * (1.0 - grid.nodes))
    logger.debug("Airy 边界层 n=%d |β|=%.6g G(0)=%s", n, beta_abs, g0)
    return AiryLayerData(beta_abs=beta_abs, c0=c0, g0=g0, profile=grid.field(values))


# ========== 截断函数 χ ==========


def _smoothstep(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    out = np.zeros_like(t)
    out[t >= 1.0] = 1.0
    mid = (t > 0.0) & (t < 1.0)
    a = np.exp(-1.0 / t[mid])
    b = np.exp(-1.0 / (1.0 - t[mid]))
    out[mid] = a / (a + b)
    return out


def _unit_interval(r) -> np.ndarray:
    r_arr = np.asarray(r, dtype=float)
    if np.any(~(r_arr >= 0.0)) or np.any(r_arr > 1.0):
        raise DomainError(f"r 必须位于 [0, 1]，当前为 {r}")
    return r_arr


def cutoff_chi(r):
    """χ(r)：r ≤ 1/4 为 0，r ≥ 1/2 为 1，中间 C∞ 单调过渡"""
    r_arr = _unit_interval(r)
    value = _smoothstep(4.0 * (np.atleast_1d(r_arr) - 0.25))
    return float(value[0]) if r_arr.ndim == 0 else value


def cutoff_chi_slope(r):
    """χ′(r) = 4·s(1 − s)·(1/t² + 1/(1 − t)²)，t = 4(r − 1/4)"""
    r_arr = _unit_interval(r)
    t = 4.0 * (np.atleast_1d(r_arr) - 0.25)
    out = np.zeros_like(t)
    mid = (t > 0.0) & (t < 1.0)
    s = _smoothstep(t[mid])
    tm = t[mid]
    out[mid] = 4.0 * s * (1.0 - s) * (1.0 / tm**2 + 1.0 / (1.0 - tm) ** 2)
    return float(out[0]) if r_arr.ndim == 0 else out
