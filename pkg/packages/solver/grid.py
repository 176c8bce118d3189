"""
径向离散：[0,1] 上的 Chebyshev–Lobatto 配点、微分矩阵、Δ₄ 算子与 r 加权求积

未知量统一取 φ = ψ/r（以及 V = v^θ/r），于是 𝓛(rφ) = rΔ₄φ，
轴上的 1/r、1/r² 奇性被精确消去。
@author Color2333
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import BarycentricInterpolator

from packages.domain.exceptions import ConfigError, InputError

logger = logging.getLogger(__name__)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def clenshaw_curtis(size: int, a: float = 0.0, b: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """[a, b] 上 size+1 个 Clenshaw–Curtis 节点（升序）与权重"""
    theta = np.pi * np.arange(size + 1) / size
    x = np.cos(theta)
    w = np.zeros(size + 1)
    inner = np.arange(1, size)
    v = np.ones(size - 1)
    if size % 2 == 0:
        w[0] = w[size] = 1.0 / (size**2 - 1)
        for k in range(1, size // 2):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
        v -= np.cos(size * theta[inner]) / (size**2 - 1)
    else:
        w[0] = w[size] = 1.0 / size**2
        for k in range(1, (size - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
    w[inner] = 2.0 * v / size
    # x 从 1 递减到 -1，映射 r = a + (b-a)(1-x)/2 后为升序
    nodes = a + (b - a) * (1.0 - x) / 2.0
    return nodes, w * (b - a) / 2.0


def _differentiation_matrix(nodes: np.ndarray) -> np.ndarray:
    """Lobatto 节点上的重心公式一阶微分矩阵（对角线用负行和）"""
    size = len(nodes) - 1
    c = np.ones(size + 1)
    c[0] = c[-1] = 0.5
    w = c * (-1.0) ** np.arange(size + 1)
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    d1 = (w[None, :] / w[:, None]) / diff
    np.fill_diagonal(d1, 0.0)
    np.fill_diagonal(d1, -d1.sum(axis=1))
    return d1


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """径向配点网格；所有数组只读，可在线程间共享"""

    size: int
    nodes: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    delta4: np.ndarray
    r_delta4: np.ndarray
    weights: np.ndarray
    qweights: np.ndarray
    qweights3: np.ndarray

    @property
    def points(self) -> int:
        return self.size + 1

    def field(self, values) -> RadialField:
        return RadialField(self, np.asarray(values, dtype=complex))

    def sample(self, func) -> RadialField:
        return self.field(func(self.nodes))


@lru_cache(maxsize=32)
def build_grid(size: int) -> RadialGrid:
    """构造 size+1 个节点的径向网格 r_j = (1 − cos(jπ/size))/2"""
    if size < 4:
        raise ConfigError(f"网格阶数必须 ≥ 4，当前为 {size}")
    nodes, weights = clenshaw_curtis(size)
    nodes[0], nodes[-1] = 0.0, 1.0
    d1 = _differentiation_matrix(nodes)
    d2 = d1 @ d1

    inv_r = np.zeros_like(nodes)
    inv_r[1:] = 1.0 / nodes[1:]
    delta4 = d2 + 3.0 * inv_r[:, None] * d1
    # 轴上取偶函数极限 Δ₄φ(0) = 4φ″(0)
    delta4[0] = 4.0 * d2[0]
    r_delta4 = nodes[:, None] * d2 + 3.0 * d1

    logger.debug("构造径向网格 size=%d", size)
    return RadialGrid(
        size=size,
        nodes=_frozen(nodes),
        d1=_frozen(d1),
        d2=_frozen(d2),
        delta4=_frozen(delta4),
        r_delta4=_frozen(r_delta4),
        weights=_frozen(weights),
        qweights=_frozen(weights * nodes),
        qweights3=_frozen(weights * nodes**3),
    )


@dataclass(frozen=True, eq=False)
class RadialField:
    """网格上的复值采样"""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.shape != (self.grid.points,):
            raise InputError(
                f"采样长度 {self.values.shape} 与网格节点数 {self.grid.points} 不一致"
            )

    def __add__(self, other: RadialField) -> RadialField:
        _check_same_grid(self, other)
        return RadialField(self.grid, self.values + other.values)

    def __sub__(self, other: RadialField) -> RadialField:
        _check_same_grid(self, other)
        return RadialField(self.grid, self.values - other.values)

    def __mul__(self, scalar: complex) -> RadialField:
        return RadialField(self.grid, self.values * scalar)

    __rmul__ = __mul__

    def conj(self) -> RadialField:
        return RadialField(self.grid, np.conj(self.values))

    def at_wall(self) -> complex:
        return complex(self.values[-1])

    def norm(self) -> float:
        """r 加权 L² 范数 (∫|f|² r dr)^{1/2}"""
        return float(np.sqrt(self.grid.qweights @ np.abs(self.values) ** 2))


def _check_same_grid(a: RadialField, b: RadialField) -> None:
    if a.grid is not b.grid:
        raise InputError("两个径向场不在同一网格上")


def zeros(grid: RadialGrid) -> RadialField:
    return RadialField(grid, np.zeros(grid.points, dtype=complex))


def apply_delta4(grid: RadialGrid, field: RadialField) -> RadialField:
    if field.grid is not grid:
        raise InputError("径向场不在给定网格上")
    return RadialField(grid, grid.delta4 @ field.values)


def weighted_integral(grid: RadialGrid, field: RadialField, weight: str = "r") -> complex:
    """∫₀¹ f(r) w(r) dr，w ∈ {r, r3}"""
    if weight == "r":
        return complex(grid.qweights @ field.values)
    if weight in ("r3", "r^3", "r³"):
        return complex(grid.qweights3 @ field.values)
    raise ConfigError(f"不支持的权函数: {weight}")


def interpolation_matrix(grid: RadialGrid, targets: np.ndarray) -> np.ndarray:
    """重心插值矩阵 E，使 E @ values 为 targets 处的多项式插值"""
    basis = BarycentricInterpolator(grid.nodes, np.eye(grid.points))
    return np.asarray(basis(np.asarray(targets, dtype=float)))


def interpolate(field: RadialField, target: RadialGrid) -> RadialField:
    if target is field.grid:
        return field
    return RadialField(target, interpolation_matrix(field.grid, target.nodes) @ field.values)


def refine(grid: RadialGrid, factor: int = 2, extra: int = 0) -> RadialGrid:
    return build_grid(grid.size * factor + extra)
