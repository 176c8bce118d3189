"""
一致估计注册表与 (Φ, α, n) 扫描

每条估计给出：适用区域、左端量、缩放因子与期望指数。
比值 LHS / (scaling · ‖F‖²) 即经验常数 C；扫描在对数坐标下拟合
LHS / ‖F‖² 关于 Φ 的指数，并记录固定 Φ 下比值随 α 的离散度。
@author Color2333
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from packages.config import get_settings
from packages.domain.enums import AlphaMode, EstimateId, EstimateKind, RegimeTag
from packages.domain.exceptions import ConfigError, InputError, RegimeError
from packages.domain.schemas import ForcingSpec, SweepSpec, default_forcing_shape
from packages.solver.grid import RadialField, RadialGrid, build_grid, zeros
from packages.solver.linear import (
    Forcing,
    ModeForcing,
    StreamMode,
    SwirlMode,
    build_forcing,
    solve_linear_field,
    solve_stream_mode,
    solve_swirl_mode,
    solve_zero_mode,
    stream_rhs,
    swirl_mode_from_v,
)
from packages.solver.model import FlowParams, classify_regime, resolved_grid_size
from packages.solver.norms import mode_surrogate, sobolev_surrogate, weighted_norms

logger = logging.getLogger(__name__)

_NONZERO = frozenset(set(RegimeTag) - {RegimeTag.zero_mode})
_MEDIUM = frozenset({RegimeTag.small_slip, RegimeTag.large_slip, RegimeTag.intermediate_slip})


@dataclass(frozen=True)
class _ModeSolution:
    params: FlowParams
    n: int
    stream: StreamMode | None
    swirl: SwirlMode | None


def _flux_scale(power: float) -> Callable[[FlowParams, int], float]:
    def scale(params: FlowParams, n: int) -> float:
        return (params.flux * abs(n)) ** power

    return scale


def _unit(params: FlowParams, n: int) -> float:
    return 1.0


def _inverse_n2(params: FlowParams, n: int) -> float:
    return 1.0 / float(n * n)


def _stream_entry(key: str) -> Callable[[_ModeSolution], float]:
    def lhs(sol: _ModeSolution) -> float:
        return weighted_norms(sol.stream, sol.params)[key]

    return lhs


def _swirl_entry(key: str) -> Callable[[_ModeSolution], float]:
    def lhs(sol: _ModeSolution) -> float:
        return weighted_norms(sol.swirl, sol.params)[key]

    return lhs


def _intermediate_high(sol: _ModeSolution) -> float:
    bundle = weighted_norms(sol.stream, sol.params)
    return bundle["energy2"] + bundle["wall"]


def _stream_surrogate(s: float) -> Callable[[_ModeSolution], float]:
    def lhs(sol: _ModeSolution) -> float:
        swirl = swirl_mode_from_v(sol.n, zeros(sol.stream.grid))
        return mode_surrogate(sol.stream, swirl, s) ** 2

    return lhs


@dataclass(frozen=True)
class EstimateSpec:
    """
    regimes 为 None 表示任意区域；data 取 "stream"（F* = (F^r, F^z)）、"swirl"（F^θ）
    或 "all"（场估计，使用整个外力）
    """

    id: EstimateId
    kind: EstimateKind
    regimes: frozenset[RegimeTag] | None
    data: str
    target_exponent: float
    scaling: Callable[[FlowParams, int], float]
    lhs: Callable[[_ModeSolution], float] | None = None
    surrogate: float | None = None


def _mode(
    id_: EstimateId,
    regimes: frozenset[RegimeTag] | None,
    lhs: Callable[[_ModeSolution], float],
    scaling: Callable[[FlowParams, int], float],
    target: float,
    data: str = "stream",
) -> EstimateSpec:
    return EstimateSpec(id_, EstimateKind.mode, regimes, data, target, scaling, lhs)


def _linear_h2_scaling(params: FlowParams, n: int) -> float:
    return (1.0 + params.flux**0.25) ** 2


REGISTRY: dict[EstimateId, EstimateSpec] = {
    spec.id: spec
    for spec in (
        _mode(EstimateId.zero_mode, frozenset({RegimeTag.zero_mode}), _stream_entry("lpsi"), _unit, 0.0),
        _mode(
            EstimateId.zero_mode_velocity,
            frozenset({RegimeTag.zero_mode}),
            _stream_surrogate(2),
            _unit,
            0.0,
        ),
        _mode(
            EstimateId.high_frequency,
            frozenset({RegimeTag.high_frequency}),
            _stream_entry("energy2"),
            _inverse_n2,
            0.0,
        ),
        _mode(
            EstimateId.high_frequency_flux,
            frozenset({RegimeTag.high_frequency}),
            _stream_entry("flux_weighted"),
            _inverse_n2,
            0.0,
        ),
        _mode(
            EstimateId.small_slip_energy,
            frozenset({RegimeTag.small_slip}),
            _stream_entry("energy1"),
            _flux_scale(-4.0 / 3.0),
            -4.0 / 3.0,
        ),
        _mode(
            EstimateId.small_slip_high,
            frozenset({RegimeTag.small_slip}),
            _stream_entry("energy3"),
            _unit,
            0.0,
        ),
        _mode(
            EstimateId.large_slip_energy,
            frozenset({RegimeTag.large_slip}),
            _stream_entry("energy1"),
            _flux_scale(-4.0 / 3.0),
            -4.0 / 3.0,
        ),
        _mode(
            EstimateId.large_slip_high,
            frozenset({RegimeTag.large_slip}),
            _stream_entry("energy3"),
            _unit,
            0.0,
        ),
        _mode(
            EstimateId.medium_energy,
            _MEDIUM,
            _stream_entry("energy1"),
            _flux_scale(-4.0 / 3.0),
            -4.0 / 3.0,
        ),
        _mode(
            EstimateId.intermediate_l2,
            frozenset({RegimeTag.intermediate_slip}),
            _stream_entry("l2"),
            _flux_scale(-5.0 / 3.0),
            -5.0 / 3.0,
        ),
        _mode(
            EstimateId.intermediate_energy,
            frozenset({RegimeTag.intermediate_slip}),
            _stream_entry("energy1"),
            _flux_scale(-4.0 / 3.0),
            -4.0 / 3.0,
        ),
        _mode(
            EstimateId.intermediate_flux,
            frozenset({RegimeTag.intermediate_slip}),
            _stream_entry("flux_weighted"),
            _flux_scale(-2.0 / 3.0),
            -2.0 / 3.0,
        ),
        _mode(
            EstimateId.intermediate_high,
            frozenset({RegimeTag.intermediate_slip}),
            _intermediate_high,
            _flux_scale(-0.5),
            -0.5,
        ),
        _mode(EstimateId.swirl_decay, _NONZERO, _swirl_entry("l2"), _flux_scale(-4.0 / 3.0), -4.0 / 3.0, "swirl"),
        _mode(
            EstimateId.swirl_energy,
            _NONZERO,
            _swirl_entry("energy1"),
            _flux_scale(-2.0 / 3.0),
            -2.0 / 3.0,
            "swirl",
        ),
        _mode(EstimateId.swirl_h2, _NONZERO, _swirl_entry("omega"), _unit, 0.0, "swirl"),
        _mode(
            EstimateId.small_flux_h2,
            None,
            _stream_surrogate(2),
            lambda params, n: (1.0 + params.flux**1.5) ** 2,
            3.0,
        ),
        _mode(EstimateId.medium_regularity, _MEDIUM - {RegimeTag.intermediate_slip}, _stream_surrogate(2), _unit, 0.0),
        _mode(
            EstimateId.intermediate_regularity,
            frozenset({RegimeTag.intermediate_slip}),
            _stream_surrogate(1.5),
            _unit,
            0.0,
        ),
        EstimateSpec(EstimateId.linear_h32, EstimateKind.field, None, "all", 0.0, _unit, surrogate=1.5),
        EstimateSpec(
            EstimateId.linear_h2, EstimateKind.field, None, "all", 0.5, _linear_h2_scaling, surrogate=2
        ),
    )
}


def get_estimate(estimate: EstimateId | str) -> EstimateSpec:
    try:
        return REGISTRY[EstimateId(estimate)]
    except ValueError as exc:
        raise ConfigError(f"未知估计: {estimate}，可选 {[e.value for e in EstimateId]}") from exc


# ========== 单点求值 ==========


@dataclass(frozen=True)
class EstimateResult:
    estimate: EstimateId
    ratio: float
    lhs: float
    data_norm_sq: float
    scaling: float
    zero_data: bool
    regime: RegimeTag | None

    @property
    def raw(self) -> float:
        """LHS / ‖F‖²，扫描拟合的对象"""
        return 0.0 if self.zero_data else self.lhs / self.data_norm_sq


def _finish(spec: EstimateSpec, lhs: float, data_sq: float, scaling: float, regime) -> EstimateResult:
    if data_sq == 0.0:
        return EstimateResult(spec.id, 0.0, lhs, 0.0, scaling, True, regime)
    return EstimateResult(spec.id, lhs / (scaling * data_sq), lhs, data_sq, scaling, False, regime)


def evaluate_estimate(
    params: FlowParams,
    forcing: ModeForcing,
    estimate: EstimateId | str,
    eps1: float | None = None,
    delta: float | None = None,
    large_flux_threshold: float | None = None,
) -> EstimateResult:
    """单模态估计：按区域求解所需模态问题，返回经验常数"""
    spec = get_estimate(estimate)
    if spec.kind is not EstimateKind.mode:
        raise ConfigError(f"{spec.id} 是场估计，请使用 evaluate_field_estimate")
    n = forcing.n
    regime = classify_regime(params, n, eps1, delta, large_flux_threshold)
    if spec.regimes is not None and regime not in spec.regimes:
        raise RegimeError(
            f"估计 {spec.id} 不适用于区域 {regime}",
            detail={"flux": params.flux, "slip": params.slip, "n": n},
        )

    stream = swirl = None
    if spec.data == "stream":
        data_sq = forcing.r.norm() ** 2 + forcing.z.norm() ** 2
        if n == 0:
            stream = solve_zero_mode(params, forcing.z)
        else:
            stream = solve_stream_mode(params, n, stream_rhs(n, forcing.r, forcing.z))
    else:
        data_sq = forcing.theta.norm() ** 2
        swirl = solve_swirl_mode(params, n, forcing.theta)

    lhs = spec.lhs(_ModeSolution(params, n, stream, swirl))
    result = _finish(spec, lhs, data_sq, spec.scaling(params, n), regime)
    logger.debug("估计 %s Φ=%g α=%g n=%d 比值 %.6g", spec.id, params.flux, params.slip, n, result.ratio)
    return result


def estimate_ratio(
    params: FlowParams,
    n: int,
    F: tuple[RadialField, RadialField, RadialField],
    estimate: EstimateId | str,
    eps1: float | None = None,
    delta: float | None = None,
    large_flux_threshold: float | None = None,
) -> float:
    Fr, Fz, Ftheta = F
    mode = ModeForcing(n, Fr, Fz, Ftheta)
    return evaluate_estimate(params, mode, estimate, eps1, delta, large_flux_threshold).ratio


def evaluate_field_estimate(
    params: FlowParams,
    forcing: Forcing,
    estimate: EstimateId | str,
    jobs: int | None = None,
) -> EstimateResult:
    """场估计：‖v‖_{H^s} 代理范数² / (scaling · ‖F‖²)，v = 𝒯F"""
    spec = get_estimate(estimate)
    if spec.kind is not EstimateKind.field:
        raise ConfigError(f"{spec.id} 是单模态估计，请使用 evaluate_estimate")
    v = solve_linear_field(params, forcing, jobs=jobs)
    lhs = sobolev_surrogate(v, spec.surrogate) ** 2
    return _finish(spec, lhs, forcing.norm() ** 2, spec.scaling(params, 0), None)


# ========== 扫描与拟合 ==========


def fit_exponent(phis: Sequence[float], values: Sequence[float]) -> float:
    """log(values) 对 log(phis) 的最小二乘斜率"""
    phis = np.asarray(phis, dtype=float)
    values = np.asarray(values, dtype=float)
    if phis.shape != values.shape or phis.size < 2:
        raise InputError("拟合需要至少两个等长的数据点")
    if np.any(phis <= 0) or np.any(values <= 0):
        raise InputError("对数拟合要求数据全部为正")
    slope, _ = np.polyfit(np.log(phis), np.log(values), 1)
    return float(slope)


@dataclass(frozen=True)
class SweepPoint:
    phi: float
    alpha: float
    alpha_setting: float
    n: int
    regime: RegimeTag | None
    result: EstimateResult | None

    @property
    def in_regime(self) -> bool:
        return self.result is not None


@dataclass
class SweepReport:
    estimate: EstimateId
    target_exponent: float
    slack: float
    spread_bound: float
    points: list[SweepPoint]
    excluded: list[SweepPoint] = field(default_factory=list)
    # (α 设定, n) → 拟合指数
    exponents: dict[tuple[float, int], float] = field(default_factory=dict)
    # (Φ, n) → max/min 比值
    spreads: dict[tuple[float, int], float] = field(default_factory=dict)
    # (α 设定, n) → 区域内格点数（不足 3 个，未拟合）
    unfitted: dict[tuple[float, int], int] = field(default_factory=dict)

    def exponent_ok(self, alpha_setting: float, n: int) -> bool:
        value = self.exponents.get((alpha_setting, n))
        return value is None or value <= self.target_exponent + self.slack

    def spread_ok(self, phi: float, n: int) -> bool:
        return self.spreads.get((phi, n), 1.0) <= self.spread_bound

    def point_passed(self, point: SweepPoint) -> bool:
        return self.exponent_ok(point.alpha_setting, point.n) and self.spread_ok(point.phi, point.n)

    @property
    def passed(self) -> bool:
        if not self.exponents:
            return False
        return all(self.point_passed(p) for p in self.points)

    def rows(self) -> list[dict]:
        """CSV 行：estimate_id, phi, alpha, n, ratio, fitted_exponent, pass"""
        out = []
        for p in self.points:
            out.append(
                {
                    "estimate_id": self.estimate.value,
                    "phi": p.phi,
                    "alpha": p.alpha,
                    "n": p.n,
                    "ratio": p.result.ratio,
                    "fitted_exponent": self.exponents.get((p.alpha_setting, p.n), math.nan),
                    "pass": self.point_passed(p),
                }
            )
        return out

    def summary(self) -> dict:
        return {
            "estimate_id": self.estimate.value,
            "target_exponent": self.target_exponent,
            "slack": self.slack,
            "spread_bound": self.spread_bound,
            "passed": self.passed,
            "exponents": [
                {"alpha": a, "n": n, "exponent": e} for (a, n), e in sorted(self.exponents.items())
            ],
            "spreads": [{"phi": p, "n": n, "spread": s} for (p, n), s in sorted(self.spreads.items())],
            "excluded": [
                {"phi": p.phi, "alpha": p.alpha, "n": p.n, "regime": str(p.regime)} for p in self.excluded
            ],
            "unfitted": [
                {"alpha": a, "n": n, "points": k, "reason": "区域内格点不足 3 个"}
                for (a, n), k in sorted(self.unfitted.items())
            ],
        }


def _alpha_value(spec: SweepSpec, setting: float, phi: float, n: int) -> float:
    if spec.alpha_mode is AlphaMode.cube_root:
        return setting * (phi * max(abs(n), 1)) ** (1.0 / 3.0)
    return setting


def _sweep_forcing(spec: SweepSpec, grid: RadialGrid, estimate: EstimateSpec) -> Forcing:
    forcing_spec = spec.forcing or ForcingSpec(shape=default_forcing_shape())
    indices = sorted(set(spec.modes))
    if estimate.kind is EstimateKind.field and spec.forcing is None:
        indices = sorted(set(indices) | {0})
    return build_forcing(forcing_spec, grid, indices=indices)


def sweep_and_fit(spec: SweepSpec, jobs: int | None = None) -> SweepReport:
    settings = get_settings()
    if len(spec.phis) < 3:
        raise ConfigError(f"扫描至少需要 3 个 Φ 值，当前为 {len(spec.phis)}")
    estimate = get_estimate(spec.estimate)
    slack = settings.exponent_slack if spec.exponent_slack is None else spec.exponent_slack
    bound = settings.alpha_spread_bound if spec.alpha_spread_bound is None else spec.alpha_spread_bound
    jobs = settings.jobs if jobs is None else jobs

    modes = [0] if estimate.kind is EstimateKind.field else sorted(set(spec.modes))
    lattice = [(phi, a, n) for phi in spec.phis for a in spec.alphas for n in modes]
    logger.info("扫描 %s：%d 个格点", estimate.id, len(lattice))

    @lru_cache(maxsize=None)
    def _forcing_on(size: int) -> Forcing:
        return _sweep_forcing(spec, build_grid(size), estimate)

    def _grid_size(params: FlowParams, n: int) -> int:
        if spec.grid_size is not None:
            return spec.grid_size
        top = max(abs(m) for m in spec.modes) if estimate.kind is EstimateKind.field else n
        return resolved_grid_size(params, top)

    def _evaluate(point: tuple[float, float, int]) -> SweepPoint:
        phi, setting, n = point
        alpha = _alpha_value(spec, setting, phi, n)
        params = FlowParams(phi, alpha)
        forcing = _forcing_on(_grid_size(params, n))
        if estimate.kind is EstimateKind.field:
            result = evaluate_field_estimate(params, forcing, estimate.id, jobs=1)
            return SweepPoint(phi, alpha, setting, n, None, result)
        regime = classify_regime(params, n, spec.eps1, spec.delta, spec.large_flux_threshold)
        if estimate.regimes is not None and regime not in estimate.regimes:
            return SweepPoint(phi, alpha, setting, n, regime, None)
        result = evaluate_estimate(
            params, forcing.mode(n), estimate.id, spec.eps1, spec.delta, spec.large_flux_threshold
        )
        return SweepPoint(phi, alpha, setting, n, regime, result)

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        evaluated = list(pool.map(_evaluate, lattice))
    evaluated.sort(key=lambda p: (p.phi, p.alpha, p.n))

    report = SweepReport(
        estimate=estimate.id,
        target_exponent=estimate.target_exponent,
        slack=slack,
        spread_bound=bound,
        points=[p for p in evaluated if p.in_regime],
        excluded=[p for p in evaluated if not p.in_regime],
    )
    if report.excluded:
        logger.info("%d 个格点不在估计 %s 的适用区域内", len(report.excluded), estimate.id)

    for setting in spec.alphas:
        for n in modes:
            group = [
                p
                for p in report.points
                if p.alpha_setting == setting and p.n == n and not p.result.zero_data and p.result.raw > 0
            ]
            if len(group) < 3:
                report.unfitted[(setting, n)] = len(group)
                logger.warning(
                    "估计 %s α=%g n=%d 只有 %d 个区域内格点，不拟合指数（可调整 delta / eps1 或 Φ 范围）",
                    estimate.id,
                    setting,
                    n,
                    len(group),
                )
                continue
            exponent = fit_exponent([p.phi for p in group], [p.result.raw for p in group])
            report.exponents[(setting, n)] = exponent
            logger.info("估计 %s α=%g n=%d 拟合指数 %.4f（目标 %.4f）", estimate.id, setting, n, exponent, estimate.target_exponent)

    for phi in spec.phis:
        for n in modes:
            ratios = [
                p.result.ratio
                for p in report.points
                if p.phi == phi and p.n == n and not p.result.zero_data and p.result.ratio > 0
            ]
            if len(ratios) >= 2:
                report.spreads[(phi, n)] = max(ratios) / min(ratios)

    if not report.passed:
        logger.warning("估计 %s 扫描未通过", estimate.id)
    return report
