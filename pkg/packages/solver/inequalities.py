"""
径向不等式的随机性质测试

测试函数 g = rφ，φ 为随机偶多项式（系数 i.i.d. 标准正态）；需要 g(1) = 0 时取 φ − φ(1)。
所有 1/r 权积分都用 φ 表示（见 norms 模块），半区间 [1/2, 1] 上的积分用
Clenshaw–Curtis 节点加重心插值。

- 常数明确的不等式（Poincaré 链、Bessel 夹逼）给出 hard_pass
- 常数未给出的不等式只记录经验最大比值，并检查网格加密 M → 2M 后变化不超过 2 倍
@author Color2333
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy import special

from packages.config import get_settings
from packages.domain.exceptions import ConfigError
from packages.solver.grid import RadialGrid, build_grid, clenshaw_curtis, interpolation_matrix
from packages.solver.specfun import bessel_i1_samples, log_bessel_i1

logger = logging.getLogger(__name__)

MIN_SAMPLES = 50
HARD_TOLERANCE = 1e-8
STABILITY_FACTOR = 2.0
SOBOLEV_ALPHAS = (0.1, 1.0, 10.0, 100.0)
BESSEL_XI = (1.0, 2.0, 5.0, 10.0, 20.0)


@dataclass(frozen=True)
class InequalityReport:
    inequality_id: str
    samples: int
    seed: int
    max_ratio: float
    refined_max_ratio: float
    hard_constant: float | None
    hard_pass: bool | None
    stable: bool

    @property
    def passed(self) -> bool:
        return self.hard_pass is not False and self.stable

    def to_row(self) -> dict:
        return {
            "inequality_id": self.inequality_id,
            "samples": self.samples,
            "seed": self.seed,
            "max_ratio": self.max_ratio,
            "refined_max_ratio": self.refined_max_ratio,
            "hard_constant": self.hard_constant,
            "hard_pass": self.hard_pass,
            "stable": self.stable,
        }


# ========== 随机测试函数 ==========


def random_even_coefficients(rng: np.random.Generator, samples: int, degree: int) -> np.ndarray:
    """(samples, degree//2 + 1) 个偶次幂 r^0, r^2, ... 的系数"""
    return rng.standard_normal((samples, degree // 2 + 1))


def _even_values(coeffs: np.ndarray, r: np.ndarray) -> np.ndarray:
    powers = r[None, :] ** (2 * np.arange(coeffs.shape[1]))[:, None]
    return coeffs @ powers


def _integrate(weights: np.ndarray, values: np.ndarray) -> np.ndarray:
    return np.abs(values) ** 2 @ weights


class _Quantities:
    """
    网格上由 φ 导出的各积分量与边界迹，按样本向量化；
    命名：l2 = ∫|g|²r，grad = ∫|(rg)′|²/r，lpsi = ∫|𝓛g|²r，hi = ∫|(r𝓛g)′|²/r，
    bi = ∫|𝓛²g|²r；后缀 _half 表示只在 [1/2, 1] 上积分
    """

    def __init__(self, grid: RadialGrid, phi: np.ndarray):
        r = grid.nodes
        d1t = grid.d1.T
        lap = grid.delta4.T
        self.phi = phi
        dphi = phi @ d1t
        h = phi @ lap
        self.s = 2.0 * phi + r * dphi
        self.sh = 2.0 * h + r * (h @ d1t)
        self.h = h
        self.bih = h @ lap

        self.l2 = _integrate(grid.qweights3, phi)
        self.grad = _integrate(grid.qweights, self.s)
        self.lpsi = _integrate(grid.qweights3, h)
        self.hi = _integrate(grid.qweights, self.sh)
        self.bi = _integrate(grid.qweights3, self.bih)
        self.dphi_sq = _integrate(grid.qweights3, dphi)

        taper = 1.0 - r**2
        self.l2_taper = _integrate(grid.qweights3 * taper, phi)
        self.grad_taper = _integrate(grid.qweights * taper, self.s)

        nodes_h, w_h = clenshaw_curtis(grid.size, 0.5, 1.0)
        E = interpolation_matrix(grid, nodes_h).T
        self.lpsi_half = _integrate(w_h * nodes_h**3, h @ E)
        self.hi_half = _integrate(w_h * nodes_h, self.sh @ E)
        self.bi_half = _integrate(w_h * nodes_h**3, self.bih @ E)

        self.wall_phi = np.abs(phi[:, -1])
        self.wall_drg = np.abs(self.s[:, -1])
        self.wall_lg = np.abs(h[:, -1])
        self.wall_drlg = np.abs(self.sh[:, -1])


def _ratio(lhs: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    out = np.zeros_like(lhs, dtype=float)
    mask = rhs > 0
    out[mask] = lhs[mask] / rhs[mask]
    out[~mask & (lhs > 0)] = math.inf
    return out


# 每条不等式：(编号, 是否需要 g(1) = 0, 明确常数, 比值函数)
_Check = tuple[str, bool, float | None, Callable[[_Quantities], np.ndarray]]


def _sobolev_check(alpha: float) -> _Check:
    def ratio(q: _Quantities) -> np.ndarray:
        return _ratio(q.l2, q.dphi_sq + alpha * q.wall_phi**2)

    return (f"sobolev_alpha={alpha:g}", False, None, ratio)


_POLYNOMIAL_CHECKS: list[_Check] = [
    ("poincare_l2_gradient", False, 1.0, lambda q: _ratio(q.l2, q.grad)),
    ("gradient_interpolation", True, 1.0, lambda q: _ratio(q.grad, np.sqrt(q.lpsi * q.l2))),
    ("gradient_operator_chain", True, 1.0, lambda q: _ratio(np.sqrt(q.lpsi * q.l2), q.lpsi)),
    (
        "trace_gradient",
        False,
        None,
        lambda q: _ratio(q.wall_drg, 2.0 * (q.grad * q.lpsi) ** 0.25 + 4.0 * np.sqrt(q.grad)),
    ),
    (
        "trace_vorticity_half",
        False,
        None,
        lambda q: _ratio(
            q.wall_lg,
            2.0 * np.sqrt(q.lpsi_half) + 2.0 * (q.hi_half * q.lpsi_half) ** 0.25,
        ),
    ),
    (
        "vorticity_gradient",
        False,
        None,
        lambda q: _ratio(q.hi, np.sqrt(q.lpsi * q.bi) + q.lpsi),
    ),
    (
        "trace_vorticity_gradient_half",
        False,
        None,
        lambda q: _ratio(q.wall_drlg**2, 4.0 * q.hi_half + 8.0 * np.sqrt(q.bi_half * q.hi_half)),
    ),
    (
        "trace_vorticity_pair",
        False,
        None,
        lambda q: _ratio(q.wall_lg + q.wall_drlg, np.sqrt(q.lpsi + q.bi)),
    ),
    (
        "trace_gradient_dirichlet",
        True,
        None,
        lambda q: _ratio(q.wall_drg, 2.0 * math.sqrt(3.0) * q.l2**0.125 * q.lpsi**0.375),
    ),
    ("hardy_weighted", False, None, lambda q: _ratio(q.l2, q.grad_taper)),
    (
        "weighted_l2",
        False,
        None,
        lambda q: _ratio(q.l2, q.l2_taper ** (2.0 / 3.0) * q.grad ** (1.0 / 3.0) + q.l2_taper),
    ),
    (
        "weighted_gradient",
        False,
        None,
        lambda q: _ratio(q.grad, q.grad_taper ** (2.0 / 3.0) * q.lpsi ** (1.0 / 3.0) + q.grad_taper),
    ),
    *(_sobolev_check(a) for a in SOBOLEV_ALPHAS),
]


def _polynomial_reports(
    coeffs: np.ndarray, seed: int, grid_size: int
) -> list[InequalityReport]:
    coarse = build_grid(grid_size)
    fine = build_grid(2 * grid_size)
    quantities = {}
    for projected in (False, True):
        per_grid = []
        for grid in (coarse, fine):
            phi = _even_values(coeffs, grid.nodes)
            if projected:
                phi = phi - phi[:, -1:]
            per_grid.append(_Quantities(grid, phi))
        quantities[projected] = per_grid

    reports = []
    for inequality_id, projected, constant, ratio in _POLYNOMIAL_CHECKS:
        q_coarse, q_fine = quantities[projected]
        coarse_max = float(np.max(ratio(q_coarse)))
        fine_max = float(np.max(ratio(q_fine)))
        reports.append(_report(inequality_id, len(coeffs), seed, coarse_max, fine_max, constant))
    return reports


def _report(
    inequality_id: str,
    samples: int,
    seed: int,
    max_ratio: float,
    refined: float,
    constant: float | None,
    strict: bool = False,
) -> InequalityReport:
    hard_pass = None
    if constant is not None:
        worst = max(max_ratio, refined)
        hard_pass = worst < constant if strict else worst <= constant * (1.0 + HARD_TOLERANCE)
    stable = (
        math.isfinite(max_ratio)
        and math.isfinite(refined)
        and (max_ratio == refined == 0.0 or (
            refined <= STABILITY_FACTOR * max_ratio and max_ratio <= STABILITY_FACTOR * refined
        ))
    )
    if hard_pass is False or not stable:
        logger.warning("不等式 %s 未通过：max=%.6g refined=%.6g", inequality_id, max_ratio, refined)
    return InequalityReport(inequality_id, samples, seed, max_ratio, refined, constant, hard_pass, stable)


# ========== Bessel ==========


def bessel_arguments(count: int = 200, low: float = 1e-3, high: float = 50.0) -> np.ndarray:
    return np.logspace(math.log10(low), math.log10(high), count)


def bessel_sandwich_ratios(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    对所有 x < y：下界比 e^{x−y}(x/y) / (I₁(x)/I₁(y)) 与上界比 (I₁(x)/I₁(y)) / (e^{x−y}√(y/x))，
    均在对数空间计算
    """
    log_i1 = log_bessel_i1(points)
    i, j = np.triu_indices(len(points), k=1)
    x, y = points[i], points[j]
    log_quot = log_i1[i] - log_i1[j]
    lower = np.exp((x - y) + np.log(x / y) - log_quot)
    upper = np.exp(log_quot - (x - y) - 0.5 * np.log(y / x))
    return lower, upper


def _bessel_reports(seed: int) -> list[InequalityReport]:
    coarse = bessel_arguments()
    fine = bessel_arguments(400)
    reports = []
    for label, index in (("bessel_quotient_lower", 0), ("bessel_quotient_upper", 1)):
        a = float(np.max(bessel_sandwich_ratios(coarse)[index]))
        b = float(np.max(bessel_sandwich_ratios(fine)[index]))
        reports.append(_report(label, len(coarse), seed, a, b, 1.0, strict=True))

    def growth(points: np.ndarray) -> tuple[float, float]:
        i1 = special.iv(1, points)
        lower = float(np.max((points / 2.0) / i1))
        upper = float(np.max(i1 / (points / 2.0 * np.cosh(points))))
        return lower, upper

    c_low, c_up = growth(coarse)
    f_low, f_up = growth(fine)
    reports.append(_report("bessel_growth_lower", len(coarse), seed, c_low, f_low, 1.0))
    reports.append(_report("bessel_growth_upper", len(coarse), seed, c_up, f_up, 1.0))

    def slope(points: np.ndarray) -> tuple[float, float]:
        # 指数缩放：I₁′ = I₀ − I₁/x
        i0 = special.ive(0, points)
        i1 = special.ive(1, points)
        deriv = i0 - i1 / points
        return float(np.max(-deriv / i1)), float(np.max(deriv / (i1 + i1 / points)))

    c_neg, c_bound = slope(coarse)
    f_neg, f_bound = slope(fine)
    reports.append(
        _report("bessel_slope_nonnegative", len(coarse), seed, max(c_neg, 0.0), max(f_neg, 0.0), 0.0)
    )
    reports.append(_report("bessel_slope_upper", len(coarse), seed, c_bound, f_bound, 1.0))
    return reports


def bessel_integral_ratios(xi: float, grid: RadialGrid) -> dict[str, float]:
    """I₁(ξr) 的四个积分与 I₁(ξ)² 乘相应 ξ 幂次之比"""
    phi = bessel_i1_samples(grid.nodes, xi)[None, :]
    q = _Quantities(grid, phi)
    i1_sq = float(special.iv(1, xi)) ** 2
    small = min(1.0, 1.0 / xi)
    large = max(1.0, xi)
    return {
        "bessel_integral_l2": float(q.l2[0]) / (small * i1_sq),
        "bessel_integral_gradient": float(q.grad[0]) / (large * i1_sq),
        "bessel_integral_operator": float(q.lpsi[0]) / (small * xi**4 * i1_sq),
        "bessel_integral_high": float(q.hi[0]) / (large * xi**4 * i1_sq),
    }


def _bessel_integral_reports(seed: int, grid_size: int) -> list[InequalityReport]:
    coarse = build_grid(grid_size)
    fine = build_grid(2 * grid_size)
    per_xi = [(bessel_integral_ratios(xi, coarse), bessel_integral_ratios(xi, fine)) for xi in BESSEL_XI]
    reports = []
    for key in per_xi[0][0]:
        a = max(c[key] for c, _ in per_xi)
        b = max(f[key] for _, f in per_xi)
        reports.append(_report(key, len(BESSEL_XI), seed, a, b, None))
    return reports


# ========== 入口 ==========


def inequality_suite(
    samples: int,
    seed: int,
    grid_size: int = 32,
    degree: int | None = None,
) -> list[InequalityReport]:
    if samples < MIN_SAMPLES:
        raise ConfigError(f"不等式测试至少需要 {MIN_SAMPLES} 个样本，当前为 {samples}")
    degree = get_settings().random_degree if degree is None else degree
    rng = np.random.default_rng(seed)
    coeffs = random_even_coefficients(rng, samples, degree)
    logger.info("不等式测试：%d 个样本，次数 %d，seed=%d，M=%d", samples, degree, seed, grid_size)

    reports = _polynomial_reports(coeffs, seed, grid_size)
    reports.extend(_bessel_reports(seed))
    reports.extend(_bessel_integral_reports(seed, grid_size))
    failed = [r.inequality_id for r in reports if not r.passed]
    if failed:
        logger.warning("未通过的不等式: %s", failed)
    return reports
