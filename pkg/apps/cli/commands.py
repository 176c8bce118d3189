"""
子命令实现：每个命令读 RunConfig，返回固定列的行与一份汇总

CSV 列：
    solve-linear       r, psi_re, psi_im, vr_re, vr_im, vz_re, vz_im, vtheta_re, vtheta_im, omega_re, omega_im
    solve-swirl        r, vtheta_re, vtheta_im
    decompose          r, direct_re, direct_im, reconstruction_re, reconstruction_im, psi_s_re, psi_s_im,
                       psi_bl_re, psi_bl_im, psi_e_re, psi_e_im, bessel_re, bessel_im
    sweep-estimates    estimate_id, phi, alpha, n, ratio, fitted_exponent, pass
    solve-nonlinear    step, update_norm, rhs_norm
    test-inequalities  inequality_id, samples, seed, max_ratio, refined_max_ratio, hard_constant, hard_pass, stable
    specfun-eval       function, x_re, x_im, value_re, value_im, derivative_re, derivative_im
@author Color2333
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from packages.config import get_settings
from packages.domain.enums import BCKind, SpecialFunction
from packages.domain.exceptions import ConfigError, ConvergenceError
from packages.domain.schemas import ForcingSpec, RunConfig, default_forcing_shape
from packages.solver.decomposition import decompose_mode, decomposition_residual
from packages.solver.estimates import sweep_and_fit
from packages.solver.grid import RadialField, RadialGrid, build_grid
from packages.solver.inequalities import inequality_suite
from packages.solver.linear import (
    ModeForcing,
    build_forcing,
    divergence_defect,
    linear_residual,
    slip_energy_identity,
    solve_stream_mode,
    solve_swirl_mode,
    solve_zero_mode,
    stream_energy_identity,
    stream_rhs,
    swirl_compatibility,
    swirl_energy_identity,
)
from packages.solver.model import FlowParams, classify_regime, resolved_grid_size
from packages.solver.nonlinear import (
    data_regime,
    forcing_norm,
    picard_solve,
    smallness_threshold,
    uniqueness_probe,
)
from packages.solver.norms import projection_norm, sobolev_surrogate, weighted_norms
from packages.solver.specfun import airy_ai, bessel_i1, cutoff_chi, cutoff_chi_slope

logger = logging.getLogger(__name__)

# 两个不动点之差相对 H^{3/2} 代理范数的上限
UNIQUENESS_TOLERANCE = 1e-8


@dataclass
class CommandResult:
    name: str
    columns: list[str]
    rows: list[dict]
    summary: dict = field(default_factory=dict)
    passed: bool = True


def _complex_columns(row: dict, name: str, value: complex) -> None:
    row[f"{name}_re"] = float(np.real(value))
    row[f"{name}_im"] = float(np.imag(value))


def _params(cfg: RunConfig) -> FlowParams:
    if cfg.flux is None:
        raise ConfigError("该命令需要在配置中给出 flux")
    return FlowParams(cfg.flux, cfg.slip)


def _grid_for(cfg: RunConfig, params: FlowParams, n: int) -> RadialGrid:
    """显式 grid_size 优先，否则按 (Φ, n) 的边界层厚度选取"""
    if cfg.grid_size is not None:
        return build_grid(cfg.grid_size)
    return build_grid(resolved_grid_size(params, n))


def _mode_forcing(cfg: RunConfig, grid: RadialGrid) -> ModeForcing:
    spec = cfg.forcing or ForcingSpec(shape=default_forcing_shape())
    forcing = build_forcing(spec, grid, indices=[cfg.mode])
    return forcing.mode(cfg.mode)


def _field_rows(grid: RadialGrid, fields: dict[str, RadialField]) -> list[dict]:
    rows = []
    for j, r in enumerate(grid.nodes):
        row: dict = {"r": float(r)}
        for name, f in fields.items():
            _complex_columns(row, name, f.values[j])
        rows.append(row)
    return rows


def _columns(*names: str) -> list[str]:
    cols = ["r"]
    for name in names:
        cols += [f"{name}_re", f"{name}_im"]
    return cols


# ========== solve-linear / solve-swirl ==========


def run_solve_linear(cfg: RunConfig, jobs: int | None = None) -> CommandResult:
    params = _params(cfg)
    grid = _grid_for(cfg, params, cfg.mode)
    mode = _mode_forcing(cfg, grid)
    n = cfg.mode
    tolerance = get_settings().residual_tolerance

    if n == 0:
        f = grid.field(-(grid.d1 @ mode.z.values))
        stream = solve_zero_mode(params, mode.z)
    else:
        f = stream_rhs(n, mode.r, mode.z)
        stream = solve_stream_mode(params, n, f, cfg.bc)
    swirl = solve_swirl_mode(params, n, mode.theta)

    stream_residual = linear_residual(params, stream, f)
    swirl_residual = linear_residual(params, swirl, mode.theta)
    divergence = divergence_defect(stream)
    if cfg.bc is BCKind.navier:
        identity = stream_energy_identity(params, stream, f)
    else:
        lhs, rhs = slip_energy_identity(params, stream, f)
        identity = {"imag_lhs": lhs, "imag_rhs": rhs}

    regime = classify_regime(params, n, cfg.eps1, cfg.delta, cfg.large_flux_threshold)
    summary = {
        "regime": regime.value,
        "n": n,
        "bc": cfg.bc.value,
        "grid_size": grid.size,
        "stream_residual": stream_residual,
        "swirl_residual": swirl_residual,
        "divergence_defect": divergence,
        "energy_identity": identity,
        "stream_norms": weighted_norms(stream, params).entries,
        "swirl_norms": weighted_norms(swirl, params).entries,
    }
    passed = stream_residual <= tolerance and swirl_residual <= tolerance
    logger.info("solve-linear n=%d 区域 %s 残差 %.3e / %.3e", n, regime, stream_residual, swirl_residual)
    rows = _field_rows(
        grid,
        {
            "psi": stream.psi,
            "vr": stream.vr,
            "vz": stream.vz,
            "vtheta": swirl.vtheta,
            "omega": stream.omega,
        },
    )
    return CommandResult(
        "solve-linear", _columns("psi", "vr", "vz", "vtheta", "omega"), rows, summary, passed
    )


def run_solve_swirl(cfg: RunConfig, jobs: int | None = None) -> CommandResult:
    params = _params(cfg)
    grid = _grid_for(cfg, params, cfg.mode)
    mode = _mode_forcing(cfg, grid)
    swirl = solve_swirl_mode(params, cfg.mode, mode.theta)
    residual = linear_residual(params, swirl, mode.theta)
    summary = {
        "regime": classify_regime(params, cfg.mode, cfg.eps1, cfg.delta, cfg.large_flux_threshold).value,
        "n": cfg.mode,
        "grid_size": grid.size,
        "swirl_residual": residual,
        "compatibility_defect": swirl_compatibility(mode.theta) if cfg.mode == 0 else None,
        "energy_identity": swirl_energy_identity(params, swirl, mode.theta),
        "swirl_norms": weighted_norms(swirl, params).entries,
    }
    rows = _field_rows(grid, {"vtheta": swirl.vtheta})
    return CommandResult(
        "solve-swirl",
        _columns("vtheta"),
        rows,
        summary,
        residual <= get_settings().residual_tolerance,
    )


# ========== decompose ==========


def run_decompose(cfg: RunConfig, jobs: int | None = None) -> CommandResult:
    params = _params(cfg)
    settings = get_settings()
    size = settings.decomposition_grid_size if cfg.grid_size is None else cfg.grid_size
    grid = build_grid(size)
    mode = _mode_forcing(cfg, grid)
    n = cfg.mode
    f = stream_rhs(n, mode.r, mode.z)

    dec = decompose_mode(params, n, f, cfg.eps1, cfg.delta, cfg.large_flux_threshold)
    direct = solve_stream_mode(params, n, f)
    residual = decomposition_residual(dec, direct)
    summary = {
        "regime": dec.regime.value,
        "n": n,
        "a": dec.a,
        "b": dec.b,
        "J": dec.J,
        "reconstruction_residual": residual,
        "grid_size": size,
    }
    rows = _field_rows(
        grid,
        {
            "direct": direct.psi,
            "reconstruction": dec.reconstruction().psi,
            "psi_s": dec.psi_s,
            "psi_bl": dec.psi_bl,
            "psi_e": dec.psi_e,
            "bessel": dec.bessel_part,
        },
    )
    columns = _columns("direct", "reconstruction", "psi_s", "psi_bl", "psi_e", "bessel")
    return CommandResult("decompose", columns, rows, summary, residual <= settings.reconstruction_tolerance)


# ========== sweep-estimates ==========

SWEEP_COLUMNS = ["estimate_id", "phi", "alpha", "n", "ratio", "fitted_exponent", "pass"]


def run_sweep(cfg: RunConfig, jobs: int | None = None) -> CommandResult:
    if cfg.sweep is None:
        raise ConfigError("sweep-estimates 需要配置 sweep 段")
    update = {}
    if cfg.sweep.eps1 is None:
        update["eps1"] = cfg.eps1
    if cfg.sweep.delta is None:
        update["delta"] = cfg.delta
    if cfg.sweep.large_flux_threshold is None:
        update["large_flux_threshold"] = cfg.large_flux_threshold
    if cfg.sweep.grid_size is None and cfg.grid_size is not None:
        update["grid_size"] = cfg.grid_size
    spec = cfg.sweep.model_copy(update=update)
    report = sweep_and_fit(spec, jobs=jobs)
    return CommandResult("sweep-estimates", SWEEP_COLUMNS, report.rows(), report.summary(), report.passed)


# ========== solve-nonlinear ==========

TRACE_COLUMNS = ["step", "update_norm", "rhs_norm"]


def _nonlinear_spec(cfg: RunConfig, params: FlowParams) -> ForcingSpec:
    if cfg.forcing is not None:
        return cfg.forcing
    return ForcingSpec(
        shape=default_forcing_shape(), indices=[0, 1], target_norm=smallness_threshold(params)
    )


def _nonlinear_grid(cfg: RunConfig, params: FlowParams, spec: ForcingSpec) -> RadialGrid:
    size = cfg.nonlinear.grid_size if cfg.nonlinear.grid_size is not None else cfg.grid_size
    if size is not None:
        return build_grid(size)
    forced = [m.n for m in spec.modes] + list(spec.indices)
    top = max((abs(n) for n in forced), default=1)
    return build_grid(resolved_grid_size(params, top))


def run_solve_nonlinear(cfg: RunConfig, jobs: int | None = None) -> CommandResult:
    params = _params(cfg)
    nl = cfg.nonlinear
    spec = _nonlinear_spec(cfg, params)
    grid = _nonlinear_grid(cfg, params, spec)
    F = build_forcing(spec, grid)
    threshold = cfg.large_flux_threshold
    summary: dict = {
        "data_regime": data_regime(params, F, threshold).value,
        "forcing_norm": forcing_norm(F),
        "truncation": nl.truncation,
        "grid_size": grid.size,
    }
    try:
        v, trace = picard_solve(params, F, nl, jobs=jobs, large_flux_threshold=threshold)
    except ConvergenceError as exc:
        trace = exc.trace
        summary.update({"converged": False, "error": exc.to_dict()})
        rows = [] if trace is None else _trace_rows(trace)
        return CommandResult("solve-nonlinear", TRACE_COLUMNS, rows, summary, False)

    h32 = sobolev_surrogate(v, 1.5)
    projected = projection_norm(v)
    summary.update(
        {
            "converged": trace.converged,
            "iterations": trace.iterations,
            "final_residual": trace.final_residual,
            "h32_surrogate": h32,
            "h2_surrogate": sobolev_surrogate(v, 2),
            "projection_norm": projected,
            "projection_decay": projected * params.flux ** (7.0 / 12.0),
        }
    )
    passed = trace.final_residual <= get_settings().nonlinear_residual_tolerance
    if nl.uniqueness_probe:
        probe = uniqueness_probe(params, F, nl, jobs=jobs)
        summary["uniqueness"] = probe.to_dict()
        passed = passed and probe.conclusive and probe.distance <= UNIQUENESS_TOLERANCE * max(1.0, h32)
    return CommandResult("solve-nonlinear", TRACE_COLUMNS, _trace_rows(trace), summary, passed)


def _trace_rows(trace) -> list[dict]:
    return [
        {"step": k, "update_norm": s.update_norm, "rhs_norm": s.rhs_norm}
        for k, s in enumerate(trace.steps, start=1)
    ]


# ========== test-inequalities ==========

INEQUALITY_COLUMNS = [
    "inequality_id",
    "samples",
    "seed",
    "max_ratio",
    "refined_max_ratio",
    "hard_constant",
    "hard_pass",
    "stable",
]


def run_inequalities(
    cfg: RunConfig, jobs: int | None = None, samples: int | None = None
) -> CommandResult:
    spec = cfg.inequalities
    count = spec.samples if samples is None else samples
    reports = inequality_suite(count, cfg.seed, spec.grid_size, spec.degree)
    rows = [r.to_row() for r in reports]
    failed = [r.inequality_id for r in reports if not r.passed]
    summary = {"samples": count, "seed": cfg.seed, "failed": failed, "total": len(reports)}
    return CommandResult("test-inequalities", INEQUALITY_COLUMNS, rows, summary, not failed)


# ========== specfun-eval ==========

SPECFUN_COLUMNS = [
    "function",
    "x_re",
    "x_im",
    "value_re",
    "value_im",
    "derivative_re",
    "derivative_im",
]


def run_specfun(cfg: RunConfig, jobs: int | None = None) -> CommandResult:
    spec = cfg.specfun
    rows = []

    def add(x: complex, value: complex, derivative: complex | None) -> None:
        row = {"function": spec.function.value}
        _complex_columns(row, "x", x)
        _complex_columns(row, "value", value)
        if derivative is None:
            row["derivative_re"] = row["derivative_im"] = math.nan
        else:
            _complex_columns(row, "derivative", derivative)
        rows.append(row)

    if spec.function is SpecialFunction.bessel_i1:
        for x in spec.points:
            value, derivative = bessel_i1(x)
            add(x, value, derivative)
    elif spec.function is SpecialFunction.airy_ai:
        points = [complex(x) for x in spec.points] + [complex(a, b) for a, b in spec.complex_points]
        for z in points:
            add(z, airy_ai(z), None)
    else:
        for x in spec.points:
            add(x, cutoff_chi(x), cutoff_chi_slope(x))
    return CommandResult("specfun-eval", SPECFUN_COLUMNS, rows, {"count": len(rows)}, True)


COMMANDS: dict[str, Callable[..., CommandResult]] = {
    "solve-linear": run_solve_linear,
    "solve-swirl": run_solve_swirl,
    "decompose": run_decompose,
    "sweep-estimates": run_sweep,
    "solve-nonlinear": run_solve_nonlinear,
    "test-inequalities": run_inequalities,
    "specfun-eval": run_specfun,
}
