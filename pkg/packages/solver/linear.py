"""
逐模态线性化问题

流函数模态（四阶）：inŪ(𝓛−n²)ψ − (𝓛−n²)²ψ = f，ψ = rφ 约化为
    r·[inŪ(Δ₄−n²)φ − (Δ₄−n²)²φ] = f
在 r 乘形式下配点，使 f(0) ≠ 0 的数据也保持正则。
旋转速度模态（二阶）：inŪv − (𝓛−n²)v = F^θ，v = rV。

边界行（边界加边）：
    行 0    φ′(0) = 0          （与 𝓛ψ(0) = 0 等价）
    行 M−1  Δ₄φ(1) + αφ′(1) = 0 （Navier；Slip 时去掉 α 项）
    行 M    φ(1) = 0
@author Color2333
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from packages.config import get_settings
from packages.domain.enums import BCKind
from packages.domain.schemas import ForcingSpec, ModeForcingSpec
from packages.domain.exceptions import InputError, NumericalError
from packages.solver.grid import (
    RadialField,
    RadialGrid,
    interpolate,
    interpolation_matrix,
    refine,
    zeros,
)
from packages.solver.model import FlowParams, poiseuille

logger = logging.getLogger(__name__)


# ========== 模态数据结构 ==========


@dataclass(frozen=True, eq=False)
class StreamMode:
    """第 n 个轴向 Fourier 模态的流函数及其导出量"""

    n: int
    bc_kind: BCKind
    phi: RadialField
    psi: RadialField
    vr: RadialField
    vz: RadialField
    omega: RadialField

    @property
    def grid(self) -> RadialGrid:
        return self.phi.grid

    def conj(self) -> StreamMode:
        return stream_mode_from_phi(-self.n, self.phi.conj(), self.bc_kind)


@dataclass(frozen=True, eq=False)
class SwirlMode:
    n: int
    V: RadialField
    vtheta: RadialField

    @property
    def grid(self) -> RadialGrid:
        return self.V.grid

    def conj(self) -> SwirlMode:
        return swirl_mode_from_v(-self.n, self.V.conj())


def stream_mode_from_phi(n: int, phi: RadialField, bc_kind: BCKind = BCKind.navier) -> StreamMode:
    """由 φ 组装 ψ = rφ、v^r = inψ、v^z = −(2φ + rφ′)、ω^θ = r(Δ₄ − n²)φ"""
    grid = phi.grid
    r = grid.nodes
    values = phi.values
    psi = r * values
    dphi = grid.d1 @ values
    g = grid.delta4 @ values - n * n * values
    return StreamMode(
        n=n,
        bc_kind=bc_kind,
        phi=phi,
        psi=grid.field(psi),
        vr=grid.field(1j * n * psi),
        vz=grid.field(-(2.0 * values + r * dphi)),
        omega=grid.field(r * g),
    )


def swirl_mode_from_v(n: int, V: RadialField) -> SwirlMode:
    return SwirlMode(n=n, V=V, vtheta=V.grid.field(V.grid.nodes * V.values))


# ========== 外力 ==========


@dataclass(frozen=True, eq=False)
class ModeForcing:
    """单个模态的外力分量 (F_n^r, F_n^z, F_n^θ)"""

    n: int
    r: RadialField
    z: RadialField
    theta: RadialField

    @classmethod
    def zero(cls, grid: RadialGrid, n: int) -> ModeForcing:
        return cls(n, zeros(grid), zeros(grid), zeros(grid))

    def __add__(self, other: ModeForcing) -> ModeForcing:
        return ModeForcing(self.n, self.r + other.r, self.z + other.z, self.theta + other.theta)

    def scaled(self, factor: complex) -> ModeForcing:
        return ModeForcing(self.n, self.r * factor, self.z * factor, self.theta * factor)

    def conj(self) -> ModeForcing:
        return ModeForcing(-self.n, self.r.conj(), self.z.conj(), self.theta.conj())

    def norm_sq(self) -> float:
        return self.r.norm() ** 2 + self.z.norm() ** 2 + self.theta.norm() ** 2


@dataclass(frozen=True, eq=False)
class Forcing:
    """按模态索引的外力；real=True 表示物理外力为实值（Hermitian 对称）"""

    grid: RadialGrid
    modes: Mapping[int, ModeForcing] = field(default_factory=dict)
    real: bool = True

    def __post_init__(self) -> None:
        for n, mode in self.modes.items():
            if mode.n != n:
                raise InputError(f"外力模态索引不一致: {n} != {mode.n}")
            if mode.r.grid is not self.grid:
                raise InputError(f"外力模态 {n} 不在给定网格上")

    @property
    def indices(self) -> list[int]:
        return sorted(self.modes)

    def mode(self, n: int) -> ModeForcing:
        return self.modes.get(n) or ModeForcing.zero(self.grid, n)

    def with_modes(self, modes: Mapping[int, ModeForcing]) -> Forcing:
        return Forcing(self.grid, dict(modes), self.real)

    def scaled(self, factor: float) -> Forcing:
        return self.with_modes({n: m.scaled(factor) for n, m in self.modes.items()})

    def __add__(self, other: Forcing) -> Forcing:
        merged: dict[int, ModeForcing] = dict(self.modes)
        for n, m in other.modes.items():
            merged[n] = merged[n] + m if n in merged else m
        return Forcing(self.grid, merged, self.real and other.real)

    def hermitian_completion(self) -> Forcing:
        """real 外力只给出 n ≥ 0 时，补齐 F_{−n} = conj(F_n)"""
        if not self.real:
            return self
        modes = dict(self.modes)
        for n, m in self.modes.items():
            if n > 0 and -n not in modes:
                modes[-n] = m.conj()
        return self.with_modes(modes)

    def norm(self) -> float:
        """‖F‖_{L²(Ω)}，与 Sobolev 代理范数同一 2π 约定"""
        total = sum(m.norm_sq() for m in self.modes.values())
        return math.sqrt(2.0 * math.pi * total)

    def is_zero(self) -> bool:
        return all(m.norm_sq() == 0.0 for m in self.modes.values())


def _monomial_field(grid: RadialGrid, real: list[float], imag: list[float]) -> RadialField:
    r = grid.nodes
    values = np.zeros(grid.points, dtype=complex)
    for k, c in enumerate(real):
        values += c * r**k
    for k, c in enumerate(imag):
        values += 1j * c * r**k
    return grid.field(values)


def _mode_forcing(grid: RadialGrid, spec: ModeForcingSpec) -> ModeForcing:
    return ModeForcing(
        spec.n,
        _monomial_field(grid, spec.r, spec.r_imag),
        _monomial_field(grid, spec.z, spec.z_imag),
        _monomial_field(grid, spec.theta, spec.theta_imag),
    )


def build_forcing(
    spec: ForcingSpec,
    grid: RadialGrid,
    indices: Iterable[int] | None = None,
) -> Forcing:
    """
    由系数表构造外力。shape 模板套用到 indices（默认 spec.indices）中未显式给出的模态；
    实外力只保留 n ≥ 0 并补齐共轭模态，最后按 target_norm 缩放。
    """
    specs = {m.n: m for m in spec.modes}
    wanted = spec.indices if indices is None else list(indices)
    if spec.shape is not None:
        for n in wanted:
            specs.setdefault(n, spec.shape.model_copy(update={"n": n}))

    if spec.real:
        dropped = sorted(n for n in specs if n < 0)
        if dropped:
            logger.warning("实外力只使用 n ≥ 0，忽略模态 %s", dropped)
        specs = {n: s for n, s in specs.items() if n >= 0}
        zero = specs.get(0)
        if zero is not None and any(zero.r_imag + zero.z_imag + zero.theta_imag):
            raise InputError("实外力的零模态必须为实值")

    modes = {n: _mode_forcing(grid, s) for n, s in sorted(specs.items())}
    forcing = Forcing(grid, modes, spec.real).hermitian_completion()
    if spec.target_norm is not None:
        current = forcing.norm()
        if current == 0.0:
            if spec.target_norm > 0.0:
                raise InputError("零外力无法缩放到非零范数")
        else:
            forcing = forcing.scaled(spec.target_norm / current)
    return forcing


@dataclass(frozen=True, eq=False)
class VelocityField:
    """模态索引的轴对称速度场 n → (StreamMode, SwirlMode)，|n| ≤ N"""

    grid: RadialGrid
    modes: Mapping[int, tuple[StreamMode, SwirlMode]]
    truncation: int
    real: bool = True

    @property
    def indices(self) -> list[int]:
        return sorted(self.modes)

    def stream(self, n: int) -> StreamMode:
        if n in self.modes:
            return self.modes[n][0]
        return stream_mode_from_phi(n, zeros(self.grid))

    def swirl(self, n: int) -> SwirlMode:
        if n in self.modes:
            return self.modes[n][1]
        return swirl_mode_from_v(n, zeros(self.grid))

    def phi_array(self, truncation: int | None = None) -> np.ndarray:
        """(2N+1, P) 的 φ 系数数组，行序 n = −N..N"""
        N = self.truncation if truncation is None else truncation
        out = np.zeros((2 * N + 1, self.grid.points), dtype=complex)
        for n, (stream, _) in self.modes.items():
            if abs(n) <= N:
                out[n + N] = stream.phi.values
        return out

    def v_array(self, truncation: int | None = None) -> np.ndarray:
        N = self.truncation if truncation is None else truncation
        out = np.zeros((2 * N + 1, self.grid.points), dtype=complex)
        for n, (_, swirl) in self.modes.items():
            if abs(n) <= N:
                out[n + N] = swirl.V.values
        return out


def zero_field(grid: RadialGrid, truncation: int) -> VelocityField:
    return VelocityField(grid, {}, truncation)


def field_from_arrays(
    grid: RadialGrid,
    phi: np.ndarray,
    V: np.ndarray,
    real: bool = True,
) -> VelocityField:
    N = (phi.shape[0] - 1) // 2
    modes = {}
    for k in range(2 * N + 1):
        n = k - N
        modes[n] = (
            stream_mode_from_phi(n, grid.field(phi[k])),
            swirl_mode_from_v(n, grid.field(V[k])),
        )
    return VelocityField(grid, modes, N, real)


# ========== 离散算子 ==========


def _mean_flow(params: FlowParams, grid: RadialGrid) -> np.ndarray:
    value, _ = poiseuille(params, grid.nodes)
    return value


def stream_operator(params: FlowParams, n: int, grid: RadialGrid) -> np.ndarray:
    """L = (R(inŪ + n²) − rΔ₄)(Δ₄ − n²)，作用在 φ 上给出 r 乘形式的 f"""
    g = grid.delta4 - n * n * np.eye(grid.points)
    return swirl_operator(params, n, grid) @ g


def swirl_operator(params: FlowParams, n: int, grid: RadialGrid) -> np.ndarray:
    """R(inŪ + n²) − rΔ₄，作用在 V 上给出 F^θ"""
    r = grid.nodes
    diag = r * (1j * n * _mean_flow(params, grid) + n * n)
    return np.diag(diag) - grid.r_delta4


def apply_stream_operator(params: FlowParams, n: int, phi: RadialField) -> RadialField:
    return phi.grid.field(stream_operator(params, n, phi.grid) @ phi.values)


def apply_swirl_operator(params: FlowParams, n: int, V: RadialField) -> RadialField:
    return V.grid.field(swirl_operator(params, n, V.grid) @ V.values)


def stream_rhs(n: int, Fr: RadialField, Fz: RadialField) -> RadialField:
    """fₙ = inF_n^r − dF_n^z/dr"""
    grid = Fr.grid
    return grid.field(1j * n * Fr.values - grid.d1 @ Fz.values)


def wall_traces(phi: RadialField) -> tuple[complex, complex]:
    """(𝓛ψ(1), ψ′(1))，ψ = rφ；ψ′(1) = φ(1) + φ′(1)"""
    grid = phi.grid
    lpsi = complex(grid.delta4[-1] @ phi.values)
    dpsi = complex(phi.values[-1] + grid.d1[-1] @ phi.values)
    return lpsi, dpsi


def _check_factorization(lu: np.ndarray, label: str) -> None:
    pivots = np.abs(np.diag(lu))
    if not np.all(np.isfinite(pivots)) or pivots.min() <= 1e-14 * pivots.max():
        raise NumericalError(
            f"{label} 离散算子奇异",
            detail={"min_pivot": float(pivots.min()), "max_pivot": float(pivots.max())},
        )


def _log_condition(matrix: np.ndarray, label: str) -> None:
    if logger.isEnabledFor(logging.DEBUG):
        logger.debug("%s 条件数 %.3e", label, np.linalg.cond(matrix))


@lru_cache(maxsize=256)
def _stream_factor(params: FlowParams, n: int, grid: RadialGrid, bc_kind: BCKind):
    M = grid.size
    A = stream_operator(params, n, grid)
    A[0] = grid.d1[0]
    A[M - 1] = grid.delta4[M]
    if bc_kind is BCKind.navier:
        A[M - 1] = A[M - 1] + params.slip * grid.d1[M]
    A[M] = 0.0
    A[M, M] = 1.0
    label = f"流函数模态 n={n} ({bc_kind})"
    _log_condition(A, label)
    factor = lu_factor(A, check_finite=False)
    _check_factorization(factor[0], label)
    return factor


@lru_cache(maxsize=256)
def _swirl_factor(params: FlowParams, n: int, grid: RadialGrid):
    M = grid.size
    A = swirl_operator(params, n, grid)
    if n == 0 and params.slip == 0.0:
        # 纯 Neumann 零模态：以 v₀^θ(1) = 0 归一化
        A[M] = 0.0
        A[M, M] = 1.0
    else:
        A[M] = grid.d1[M]
        A[M, M] += params.slip
    label = f"旋转模态 n={n}"
    _log_condition(A, label)
    factor = lu_factor(A, check_finite=False)
    _check_factorization(factor[0], label)
    return factor


def _solve_phi(
    params: FlowParams,
    n: int,
    f: RadialField,
    bc_kind: BCKind,
    axis_value: complex = 0.0,
) -> RadialField:
    grid = f.grid
    M = grid.size
    rhs = np.array(f.values, dtype=complex)
    rhs[0] = axis_value
    rhs[M - 1] = 0.0
    rhs[M] = 0.0
    solution = lu_solve(_stream_factor(params, n, grid, bc_kind), rhs, check_finite=False)
    if not np.all(np.isfinite(solution)):
        raise NumericalError(f"流函数模态 n={n} 解含非有限值")
    return grid.field(solution)


# ========== 求解 ==========


def solve_stream_mode(
    params: FlowParams,
    n: int,
    f: RadialField,
    bc: BCKind = BCKind.navier,
) -> StreamMode:
    if n == 0:
        raise InputError("n = 0 请使用 solve_zero_mode")
    return stream_mode_from_phi(n, _solve_phi(params, n, f, bc), bc)


def solve_slip_with_axis(
    params: FlowParams, n: int, f: RadialField, axis_value: complex
) -> StreamMode:
    """滑移问题，但轴行 φ′(0) 取给定值（边界层余项需要与 χψ_BL 的离散轴值抵消）"""
    return stream_mode_from_phi(n, _solve_phi(params, n, f, BCKind.slip, axis_value), BCKind.slip)


def solve_zero_mode(params: FlowParams, Fz0: RadialField) -> StreamMode:
    """𝓛²ψ₀ = dF₀^z/dr，Navier 条件；v₀^r ≡ 0"""
    grid = Fz0.grid
    f = grid.field(-(grid.d1 @ Fz0.values))
    return stream_mode_from_phi(0, _solve_phi(params, 0, f, BCKind.navier), BCKind.navier)


def swirl_compatibility(Ftheta: RadialField) -> float:
    """∫₀¹ F₀^θ r² dr"""
    grid = Ftheta.grid
    return float(abs(grid.qweights @ (Ftheta.values * grid.nodes)))


def solve_swirl_mode(params: FlowParams, n: int, Ftheta: RadialField) -> SwirlMode:
    grid = Ftheta.grid
    if n == 0 and params.slip == 0.0:
        defect = swirl_compatibility(Ftheta)
        tolerance = get_settings().compatibility_tolerance * max(Ftheta.norm(), 1e-300)
        if defect > tolerance:
            raise InputError(
                "零模态旋转外力不满足相容性条件 ∫F₀^θ r² dr = 0",
                detail={"defect": defect, "tolerance": tolerance},
            )
    rhs = np.array(Ftheta.values, dtype=complex)
    rhs[grid.size] = 0.0
    solution = lu_solve(_swirl_factor(params, n, grid), rhs, check_finite=False)
    if not np.all(np.isfinite(solution)):
        raise NumericalError(f"旋转模态 n={n} 解含非有限值")
    return swirl_mode_from_v(n, grid.field(solution))


def assemble_velocity(
    modes: Iterable[tuple[StreamMode, SwirlMode]],
    real: bool = False,
    truncation: int | None = None,
) -> VelocityField:
    collected: dict[int, tuple[StreamMode, SwirlMode]] = {}
    grid = None
    for stream, swirl in modes:
        if stream.n != swirl.n:
            raise InputError(f"流函数模态 {stream.n} 与旋转模态 {swirl.n} 索引不一致")
        if stream.n in collected:
            raise InputError(f"模态 n={stream.n} 重复")
        grid = grid or stream.grid
        collected[stream.n] = (stream, swirl)
    if grid is None:
        raise InputError("至少需要一个模态")
    if real:
        for n in list(collected):
            if n > 0 and -n not in collected:
                stream, swirl = collected[n]
                collected[-n] = (stream.conj(), swirl.conj())
    ordered = {n: collected[n] for n in sorted(collected)}
    N = max(abs(n) for n in ordered) if truncation is None else truncation
    return VelocityField(grid, ordered, N, real)


def _solve_pair(
    params: FlowParams, mode: ModeForcing, bc: BCKind
) -> tuple[StreamMode, SwirlMode]:
    if mode.n == 0:
        stream = solve_zero_mode(params, mode.z)
    else:
        stream = solve_stream_mode(params, mode.n, stream_rhs(mode.n, mode.r, mode.z), bc)
    return stream, solve_swirl_mode(params, mode.n, mode.theta)


def solve_linear_field(
    params: FlowParams,
    forcing: Forcing,
    truncation: int | None = None,
    bc: BCKind = BCKind.navier,
    jobs: int | None = None,
) -> VelocityField:
    """线性解算子 𝒯：各模态并发求解，按 n 排序组装"""
    N = truncation if truncation is not None else max((abs(n) for n in forcing.modes), default=0)
    indices = [n for n in range(-N, N + 1)]
    if forcing.real:
        indices = [n for n in indices if n >= 0]
    jobs = jobs if jobs is not None else get_settings().jobs
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        pairs = list(pool.map(lambda n: _solve_pair(params, forcing.mode(n), bc), indices))
    return assemble_velocity(pairs, real=forcing.real, truncation=N)


# ========== 验证 ==========


def divergence_defect(mode: StreamMode) -> float:
    """max |(1/r)(r v^r)′ + in v^z|，(1/r)(r·inψ)′ = in(2φ + rφ′)"""
    grid = mode.grid
    phi = mode.phi.values
    div_r = 1j * mode.n * (2.0 * phi + grid.nodes * (grid.d1 @ phi))
    return float(np.max(np.abs(div_r + 1j * mode.n * mode.vz.values)))


def _fine_norm(grid: RadialGrid, values: np.ndarray) -> float:
    return float(np.sqrt(grid.qweights @ np.abs(values) ** 2))


def linear_residual(
    params: FlowParams,
    mode: StreamMode | SwirlMode,
    data: RadialField,
) -> float:
    """
    细网格 (2M) 上 ‖算子(mode) − data‖ / max(‖data‖, ε)，加边界残差。

    导数在解网格上求出（对次数 ≤ M 的多项式精确）后再插值到细网格，
    只有乘 Ū 的一项在细网格上逐点求值；舍入下限随 M⁸ 而不是 (2M)⁸ 增长。
    """
    coarse = mode.grid
    fine = refine(coarse, get_settings().refine_factor)
    data_norm = data.norm()
    scale = max(data_norm, 1e-300)
    if isinstance(mode, StreamMode):
        phi = mode.phi.values
        inner = coarse.delta4 @ phi - mode.n**2 * phi
        lpsi, dpsi = wall_traces(mode.phi)
        wall = lpsi + params.slip * dpsi if mode.bc_kind is BCKind.navier else lpsi
        bc = abs(phi[-1]) + abs(wall) + abs(complex(coarse.d1[0] @ phi))
    else:
        inner = mode.V.values
        if mode.n == 0 and params.slip == 0.0:
            bc = abs(inner[-1])
        else:
            bc = abs(complex(coarse.d1[-1] @ inner) + params.slip * inner[-1])
    E = interpolation_matrix(coarse, fine.nodes)
    r = fine.nodes
    diag = r * (1j * mode.n * _mean_flow(params, fine) + mode.n**2)
    res = diag * (E @ inner) - E @ (coarse.r_delta4 @ inner) - interpolate(data, fine).values
    total = _fine_norm(fine, res) + bc
    if data_norm == 0.0 and total == 0.0:
        return 0.0
    return float(total / scale)


def _identity_grid(grid: RadialGrid) -> RadialGrid:
    return refine(grid, 2, 8)


def stream_energy_identity(params: FlowParams, mode: StreamMode, f: RadialField) -> dict[str, float]:
    """流函数模态能量恒等式两侧（实部与虚部）"""
    fine = _identity_grid(mode.grid)
    phi = interpolate(mode.phi, fine).values
    fv = interpolate(f, fine).values
    r = fine.nodes
    n = mode.n
    s = 2.0 * phi + r * (fine.d1 @ phi)
    lap = fine.delta4 @ phi
    ubar, _ = poiseuille(params, r)
    dpsi_wall = phi[-1] + fine.d1[-1] @ phi

    l2 = float(fine.qweights3 @ np.abs(phi) ** 2)
    grad = float(fine.qweights @ np.abs(s) ** 2)
    lpsi = float(fine.qweights3 @ np.abs(lap) ** 2)
    forcing_pair = complex(fine.qweights @ (fv * np.conj(phi) * r))
    cross = complex(fine.qweights3 @ (s * np.conj(phi)))
    kappa = params.wall_shear_coefficient

    return {
        "real_lhs": lpsi + 2 * n**2 * grad + n**4 * l2 + params.slip * abs(dpsi_wall) ** 2,
        "real_rhs": -forcing_pair.real - n * kappa * cross.imag,
        "imag_lhs": n * float(fine.qweights @ (ubar * np.abs(s) ** 2))
        + n**3 * float(fine.qweights3 @ (ubar * np.abs(phi) ** 2)),
        "imag_rhs": -forcing_pair.imag,
    }


def swirl_energy_identity(params: FlowParams, mode: SwirlMode, Ftheta: RadialField) -> dict[str, float]:
    fine = _identity_grid(mode.grid)
    V = interpolate(mode.V, fine).values
    F = interpolate(Ftheta, fine).values
    r = fine.nodes
    n = mode.n
    s = 2.0 * V + r * (fine.d1 @ V)
    ubar, _ = poiseuille(params, r)
    pair = complex(fine.qweights @ (F * np.conj(V) * r))
    return {
        "real_lhs": float(fine.qweights @ np.abs(s) ** 2)
        + (params.slip - 2.0) * abs(V[-1]) ** 2
        + n**2 * float(fine.qweights3 @ np.abs(V) ** 2),
        "real_rhs": pair.real,
        "imag_lhs": n * float(fine.qweights3 @ (ubar * np.abs(V) ** 2)),
        "imag_rhs": pair.imag,
    }


def slip_energy_identity(params: FlowParams, mode: StreamMode, f: RadialField) -> tuple[float, float]:
    """滑移解：n∫Ū|(𝓛−n²)ψ|² r 与 Im∫f·conj((𝓛−n²)ψ) r"""
    fine = _identity_grid(mode.grid)
    phi = interpolate(mode.phi, fine).values
    fv = interpolate(f, fine).values
    r = fine.nodes
    omega = r * (fine.delta4 @ phi - mode.n**2 * phi)
    ubar, _ = poiseuille(params, r)
    lhs = mode.n * float(fine.qweights @ (ubar * np.abs(omega) ** 2))
    rhs = complex(fine.qweights @ (fv * np.conj(omega))).imag
    return lhs, rhs
