"""
截断 Fourier 系统上的 Picard 迭代

v⁰ = 𝒯F，v^{j+1} = 𝒯(F + F^j)，F^j 为旋度形式的对流项（已含负号）：
    F^r = (v^θ)²/r − v^z ω^θ
    F^z = v^r ω^θ
    F^θ = −v^r (v^θ)′ − v^z ∂_z v^θ − v^r v^θ/r
z 方向用 3/2 规则去混叠的伪谱乘积，径向在配点上逐点相乘。
@author Color2333
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from packages.config import get_settings
from packages.domain.enums import DataRegime
from packages.domain.exceptions import ConvergenceError, InputError, NumericalError
from packages.domain.schemas import ForcingSpec, NonlinearConfig, default_forcing_shape
from packages.solver.grid import RadialGrid
from packages.solver.linear import (
    Forcing,
    ModeForcing,
    VelocityField,
    build_forcing,
    divergence_defect,
    field_from_arrays,
    linear_residual,
    solve_linear_field,
    stream_rhs,
)
from packages.solver.model import FlowParams
from packages.solver.norms import field_difference, sobolev_surrogate

logger = logging.getLogger(__name__)

HERMITIAN_TOLERANCE = 1e-10
DIVERGENCE_TOLERANCE = 1e-10


@dataclass(frozen=True)
class IterationStep:
    update_norm: float
    rhs_norm: float
    wall_time: float


@dataclass
class IterationTrace:
    steps: list[IterationStep] = field(default_factory=list)
    converged: bool = False
    final_residual: float | None = None

    @property
    def iterations(self) -> int:
        return len(self.steps)

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "final_residual": self.final_residual,
            "update_norms": [s.update_norm for s in self.steps],
            "rhs_norms": [s.rhs_norm for s in self.steps],
        }


# ========== 外力与数据区域 ==========


def forcing_norm(F: Forcing) -> float:
    """‖F‖_{L²(Ω)}，与代理范数相同的 2π 约定"""
    return F.norm()


def smallness_threshold(params: FlowParams) -> float:
    return get_settings().smallness_factor / (1.0 + params.flux**0.25)


def data_regime(
    params: FlowParams, F: Forcing, large_flux_threshold: float | None = None
) -> DataRegime:
    """小数据：‖F‖ ≤ ε(1+Φ^{1/4})⁻¹；大通量：Φ 超过阈值且 ‖F‖ ≤ Φ^{1/32}"""
    norm = forcing_norm(F)
    if norm <= smallness_threshold(params):
        return DataRegime.small_data
    threshold = get_settings().large_flux_threshold if large_flux_threshold is None else large_flux_threshold
    if params.flux >= threshold and norm <= params.flux ** (1.0 / 32.0):
        return DataRegime.large_flux
    return DataRegime.outside


def enforce_compatibility(F: Forcing) -> Forcing:
    """F₀^θ ← F₀^θ − c·r，c = 4∫F₀^θ r² dr"""
    if 0 not in F.modes:
        return F
    zero = F.modes[0]
    grid = zero.theta.grid
    c = 4.0 * complex(grid.qweights @ (zero.theta.values * grid.nodes))
    if c == 0.0:
        return F
    tolerance = get_settings().compatibility_tolerance * max(zero.theta.norm(), 1.0)
    if abs(c) > tolerance:
        logger.warning("零模态旋转外力不相容，扣除 c·r，c = %.6g", abs(c))
    if F.real:
        c = c.real
    corrected = ModeForcing(0, zero.r, zero.z, grid.field(zero.theta.values - c * grid.nodes))
    modes = dict(F.modes)
    modes[0] = corrected
    return F.with_modes(modes)


# ========== 对流项 ==========


def dealiased_points(truncation: int) -> int:
    return math.ceil(3 * (2 * truncation + 1) / 2)


def _to_physical(coeffs: np.ndarray, points: int) -> np.ndarray:
    N = (coeffs.shape[0] - 1) // 2
    spec = np.zeros((points, coeffs.shape[1]), dtype=complex)
    spec[np.arange(-N, N + 1) % points] = coeffs
    return np.fft.ifft(spec, axis=0) * points


def _to_modes(values: np.ndarray, truncation: int) -> np.ndarray:
    points = values.shape[0]
    spec = np.fft.fft(values, axis=0) / points
    return spec[np.arange(-truncation, truncation + 1) % points]


def convection_arrays(v: VelocityField) -> dict[str, np.ndarray]:
    """各模态的 v^r, v^z, ω^θ, v^θ/r, ∂_z v^θ, (v^θ)′，行序 n = −N..N"""
    grid = v.grid
    N = v.truncation
    n = np.arange(-N, N + 1)[:, None]
    r = grid.nodes[None, :]
    phi = v.phi_array()
    V = v.v_array()
    return {
        "vr": 1j * n * r * phi,
        "vz": -(2.0 * phi + r * (phi @ grid.d1.T)),
        "omega": r * (phi @ grid.delta4.T - n**2 * phi),
        "V": V,
        "dz_vtheta": 1j * n * r * V,
        "dr_vtheta": V + r * (V @ grid.d1.T),
    }


def nonlinear_terms(v: VelocityField) -> Forcing:
    grid = v.grid
    N = v.truncation
    K = dealiased_points(N)
    phys = {k: _to_physical(a, K) for k, a in convection_arrays(v).items()}
    r = grid.nodes[None, :]

    # (v^θ)²/r = r·V²
    Fr = r * phys["V"] ** 2 - phys["vz"] * phys["omega"]
    Fz = phys["vr"] * phys["omega"]
    Ftheta = (
        -phys["vr"] * (phys["dr_vtheta"] + phys["V"]) - phys["vz"] * phys["dz_vtheta"]
    )

    Fr, Fz, Ftheta = (_to_modes(a, N) for a in (Fr, Fz, Ftheta))
    modes = {
        n: ModeForcing(n, grid.field(Fr[n + N]), grid.field(Fz[n + N]), grid.field(Ftheta[n + N]))
        for n in range(-N, N + 1)
    }
    return Forcing(grid, modes, v.real)


def hermitian_defect(F: Forcing) -> float:
    """max |F_n − conj(F_{−n})|，对三个分量取最大"""
    worst = 0.0
    for n in F.indices:
        if n <= 0:
            continue
        a, b = F.mode(n), F.mode(-n)
        for x, y in ((a.r, b.r), (a.z, b.z), (a.theta, b.theta)):
            worst = max(worst, float(np.max(np.abs(x.values - np.conj(y.values)))))
    return worst


def _max_divergence(v: VelocityField) -> float:
    return max((divergence_defect(v.stream(n)) for n in v.indices), default=0.0)


# ========== Picard ==========


def _blend(old: VelocityField, new: VelocityField, weight: float) -> VelocityField:
    if weight == 1.0:
        return new
    N = max(old.truncation, new.truncation)
    phi = (1.0 - weight) * old.phi_array(N) + weight * new.phi_array(N)
    V = (1.0 - weight) * old.v_array(N) + weight * new.v_array(N)
    return field_from_arrays(new.grid, phi, V, new.real)


def _check_inputs(F: Forcing, cfg: NonlinearConfig) -> None:
    if cfg.grid_size is not None and F.grid.size != cfg.grid_size:
        raise InputError(f"外力网格阶数 {F.grid.size} 与配置 {cfg.grid_size} 不一致")
    too_high = [n for n in F.indices if abs(n) > cfg.truncation]
    if too_high:
        raise InputError(f"外力模态 {too_high} 超出截断 N={cfg.truncation}")


def _total_forcing(params: FlowParams, F: Forcing, v: VelocityField) -> Forcing:
    Fj = nonlinear_terms(v)
    if v.real:
        defect = hermitian_defect(Fj)
        scale = max(1.0, max((m.norm_sq() for m in Fj.modes.values()), default=0.0) ** 0.5)
        if defect > HERMITIAN_TOLERANCE * scale:
            raise NumericalError("对流项失去 Hermitian 对称", detail={"defect": defect})
    total = F + Fj
    if params.slip == 0.0:
        total = enforce_compatibility(total)
    return total


def picard_solve(
    params: FlowParams,
    F: Forcing,
    cfg: NonlinearConfig | None = None,
    initial: VelocityField | None = None,
    jobs: int | None = None,
    large_flux_threshold: float | None = None,
) -> tuple[VelocityField, IterationTrace]:
    """
    收敛判据：‖v^{j+1} − v^j‖_{H^{3/2}} ≤ tolerance·max(1, ‖v^{j+1}‖_{H^{3/2}})。
    更新范数连续 divergence_window 步增长即判为发散。
    """
    cfg = cfg or NonlinearConfig()
    _check_inputs(F, cfg)
    N = cfg.truncation
    regime = data_regime(params, F, large_flux_threshold)
    if regime is DataRegime.outside:
        logger.warning(
            "外力 ‖F‖=%.4g 不在小数据或大通量区域（Φ=%g），迭代可能不收敛", forcing_norm(F), params.flux
        )
    else:
        logger.info("数据区域 %s，‖F‖=%.4g", regime, forcing_norm(F))

    if params.slip == 0.0:
        F = enforce_compatibility(F)
    trace = IterationTrace()
    v = initial if initial is not None else solve_linear_field(params, F, truncation=N, jobs=jobs)

    for step in range(1, cfg.max_iterations + 1):
        started = time.perf_counter()
        total = _total_forcing(params, F, v)
        candidate = solve_linear_field(params, total, truncation=N, jobs=jobs)
        new = _blend(v, candidate, cfg.relaxation)
        update = sobolev_surrogate(field_difference(new, v), 1.5)
        size = sobolev_surrogate(new, 1.5)
        trace.steps.append(IterationStep(update, forcing_norm(total), time.perf_counter() - started))
        logger.debug("Picard 第 %d 步：更新 %.3e，右端 %.3e", step, update, trace.steps[-1].rhs_norm)

        if not math.isfinite(update):
            raise ConvergenceError("Picard 迭代出现非有限值", trace=trace)
        divergence = _max_divergence(new)
        if divergence > DIVERGENCE_TOLERANCE * max(1.0, size):
            raise NumericalError("迭代解离散散度过大", detail={"divergence": divergence})
        v = new

        if update <= cfg.tolerance * max(1.0, size):
            trace.converged = True
            break
        window = cfg.divergence_window
        recent = [s.update_norm for s in trace.steps[-(window + 1):]]
        if len(recent) == window + 1 and all(b > a for a, b in zip(recent, recent[1:])):
            raise ConvergenceError(
                f"更新范数连续 {window} 步增长，判定发散",
                trace=trace,
                detail={"update_norms": recent},
            )

    if not trace.converged:
        raise ConvergenceError(
            f"Picard 迭代 {cfg.max_iterations} 步内未收敛",
            trace=trace,
            detail={"last_update": trace.steps[-1].update_norm},
        )
    trace.final_residual = nonlinear_residual(params, v, F)
    logger.info(
        "Picard 收敛：%d 步，残差 %.3e", trace.iterations, trace.final_residual
    )
    return v, trace


# ========== 验证 ==========


def nonlinear_residual(params: FlowParams, v: VelocityField, F: Forcing) -> float:
    """
    各模态流函数与旋转方程（含对流项）在加密网格上的残差；
    取绝对残差的最大值，再除以各模态数据范数的最大值
    """
    total = F + nonlinear_terms(v)
    if params.slip == 0.0:
        total = enforce_compatibility(total)
    N = v.truncation
    indices = range(0, N + 1) if v.real else range(-N, N + 1)
    worst = 0.0
    data_scale = 0.0
    for n in indices:
        mode = total.mode(n)
        if n == 0:
            f = mode.z.grid.field(-(mode.z.grid.d1 @ mode.z.values))
        else:
            f = stream_rhs(n, mode.r, mode.z)
        for solved, data in ((v.stream(n), f), (v.swirl(n), mode.theta)):
            norm = data.norm()
            absolute = linear_residual(params, solved, data) * max(norm, 1e-300)
            worst = max(worst, absolute)
            data_scale = max(data_scale, norm)
    if worst == 0.0:
        return 0.0
    return worst / max(data_scale, 1e-300)


@dataclass(frozen=True)
class UniquenessReport:
    distance: float
    perturbation_norm: float
    conclusive: bool
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "distance": self.distance,
            "perturbation_norm": self.perturbation_norm,
            "conclusive": self.conclusive,
            "message": self.message,
        }


def _perturbation(params: FlowParams, grid: RadialGrid, cfg: NonlinearConfig) -> VelocityField:
    """由默认外力形状的线性解归一化得到的扰动，代理范数为 scale·Φ^{1/64}"""
    modes = list(range(1, min(2, cfg.truncation) + 1))
    shape = build_forcing(ForcingSpec(shape=default_forcing_shape()), grid, indices=modes)
    base = solve_linear_field(params, shape, truncation=cfg.truncation)
    size = sobolev_surrogate(base, 1.5)
    target = cfg.perturbation_scale * params.flux ** (1.0 / 64.0)
    N = cfg.truncation
    return field_from_arrays(grid, base.phi_array(N) * (target / size), base.v_array(N) * (target / size))


def uniqueness_probe(
    params: FlowParams,
    F: Forcing,
    cfg: NonlinearConfig | None = None,
    jobs: int | None = None,
) -> UniquenessReport:
    cfg = cfg or NonlinearConfig()
    perturbation = _perturbation(params, F.grid, cfg)
    perturbation_norm = sobolev_surrogate(perturbation, 1.5)
    N = cfg.truncation
    try:
        first, _ = picard_solve(params, F, cfg, jobs=jobs)
        start = solve_linear_field(
            params, enforce_compatibility(F) if params.slip == 0.0 else F, truncation=N, jobs=jobs
        )
        shifted = field_from_arrays(
            F.grid,
            start.phi_array(N) + perturbation.phi_array(N),
            start.v_array(N) + perturbation.v_array(N),
            F.real,
        )
        second, _ = picard_solve(params, F, cfg, initial=shifted, jobs=jobs)
    except ConvergenceError as exc:
        logger.warning("唯一性探测无结论：%s", exc.message)
        return UniquenessReport(math.nan, perturbation_norm, False, exc.message)
    distance = sobolev_surrogate(field_difference(first, second), 1.5)
    logger.info("唯一性探测：两个不动点距离 %.3e", distance)
    return UniquenessReport(distance, perturbation_norm, True)


def convergence_in_truncation(
    params: FlowParams,
    F: Forcing,
    cfg: NonlinearConfig | None = None,
    jobs: int | None = None,
) -> float:
    """截断 N 与 2N 的不动点之差（H^{3/2} 代理范数）"""
    cfg = cfg or NonlinearConfig()
    coarse, _ = picard_solve(params, F, cfg, jobs=jobs)
    doubled = cfg.model_copy(update={"truncation": 2 * cfg.truncation})
    fine, _ = picard_solve(params, F, doubled, jobs=jobs)
    return sobolev_surrogate(field_difference(fine, coarse), 1.5)
