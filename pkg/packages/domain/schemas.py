"""
配置与请求模型（Pydantic）

所有模型 extra="forbid"：未知键直接报错，由 CLI 给出拼写建议。
数值默认值来自 packages.config.Settings。
@author Color2333
"""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from packages.config import get_settings
from packages.domain.enums import AlphaMode, BCKind, EstimateId, SpecialFunction


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ---------- 外力 ----------


class ModeForcingSpec(_Strict):
    """单模态外力：各分量为单项式 r^k 的系数表（下标即幂次）"""

    n: int = 0
    r: list[float] = Field(default_factory=list)
    z: list[float] = Field(default_factory=list)
    theta: list[float] = Field(default_factory=list)
    r_imag: list[float] = Field(default_factory=list)
    z_imag: list[float] = Field(default_factory=list)
    theta_imag: list[float] = Field(default_factory=list)


class ForcingSpec(_Strict):
    """
    modes 显式列出的模态；shape 作为模板套用到 indices 中未显式列出的模态。
    real=True 时只取 n ≥ 0 并做 Hermitian 补齐；target_norm 给定时整体缩放到该 L² 范数。
    """

    modes: list[ModeForcingSpec] = Field(default_factory=list)
    shape: ModeForcingSpec | None = None
    indices: list[int] = Field(default_factory=list)
    real: bool = True
    target_norm: float | None = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _unique_modes(self) -> ForcingSpec:
        seen = [m.n for m in self.modes]
        if len(seen) != len(set(seen)):
            raise ValueError(f"外力模态重复: {sorted(seen)}")
        return self


def default_forcing_shape() -> ModeForcingSpec:
    """扫描默认外力：F^r = 1 − r²，F^z = r，F^θ = 4r − 5r²（零模态相容）"""
    return ModeForcingSpec(r=[1.0, 0.0, -1.0], z=[0.0, 1.0], theta=[0.0, 4.0, -5.0])


# ---------- 扫描 ----------


class SweepSpec(_Strict):
    """
    grid_size 为空时每个格点按边界层厚度自适应选取 M。
    eps1 / delta / large_flux_threshold 为空时沿用 RunConfig 的值；小滑移 Z₁ 在 δ=0.1 下
    要到 Φ ≳ 6·10⁴ 才出现，扫描小滑移估计时可在这里单独放宽 delta（例如 0.5）。
    """

    estimate: EstimateId
    phis: list[float] = Field(default_factory=lambda: [1e3, 1e4, 1e5, 1e6])
    alphas: list[float] = Field(default_factory=lambda: [0.0, 1.0, 10.0, 1e3, 1e6])
    alpha_mode: AlphaMode = AlphaMode.absolute
    modes: list[int] = Field(default_factory=lambda: [1])
    forcing: ForcingSpec | None = None
    grid_size: int | None = Field(default=None, ge=4)
    eps1: float | None = Field(default=None, gt=0, lt=1)
    delta: float | None = Field(default=None, gt=0, lt=1)
    large_flux_threshold: float | None = Field(default=None, gt=0)
    exponent_slack: float | None = Field(default=None, ge=0)
    alpha_spread_bound: float | None = Field(default=None, ge=1)

    @field_validator("phis")
    @classmethod
    def _positive_phis(cls, v: list[float]) -> list[float]:
        if any(p <= 0 for p in v):
            raise ValueError("phis 必须全部为正")
        return sorted(v)

    @field_validator("alphas")
    @classmethod
    def _nonnegative_alphas(cls, v: list[float]) -> list[float]:
        if any(a < 0 for a in v):
            raise ValueError("alphas 不能为负")
        return sorted(v)


# ---------- 非线性 ----------


class NonlinearConfig(_Strict):
    truncation: int = Field(default_factory=lambda: get_settings().truncation, ge=1)
    # 为空时按外力最高模态自适应
    grid_size: int | None = Field(default=None, ge=4)
    tolerance: float = Field(default_factory=lambda: get_settings().picard_tolerance, gt=0)
    max_iterations: int = Field(default_factory=lambda: get_settings().picard_max_iterations, ge=1)
    relaxation: float = Field(default_factory=lambda: get_settings().relaxation, gt=0, le=1)
    divergence_window: int = Field(default_factory=lambda: get_settings().divergence_window, ge=1)
    uniqueness_probe: bool = False
    perturbation_scale: float = Field(default=0.1, gt=0, le=1)


# ---------- 径向不等式 / 特殊函数 ----------


class InequalitySpec(_Strict):
    samples: int = Field(default_factory=lambda: get_settings().inequality_samples, ge=1)
    degree: int = Field(default_factory=lambda: get_settings().random_degree, ge=2)
    grid_size: int = Field(default=32, ge=4)


class SpecfunSpec(_Strict):
    function: SpecialFunction = SpecialFunction.bessel_i1
    points: list[float] = Field(default_factory=lambda: [0.0, 1.0, 3.0, 10.0])
    complex_points: list[tuple[float, float]] = Field(default_factory=list)


# ---------- 顶层运行配置 ----------


class RunConfig(_Strict):
    flux: float | None = Field(default=None, gt=0)
    slip: float = Field(default=0.0, ge=0)
    mode: int = 1
    bc: BCKind = BCKind.navier
    grid_size: int | None = Field(default=None, ge=4)
    eps1: float = Field(default_factory=lambda: get_settings().eps1, gt=0, lt=1)
    delta: float = Field(default_factory=lambda: get_settings().delta, gt=0, lt=1)
    large_flux_threshold: float = Field(
        default_factory=lambda: get_settings().large_flux_threshold, gt=0
    )
    seed: int = Field(default=0, ge=0)
    forcing: ForcingSpec | None = None
    sweep: SweepSpec | None = None
    nonlinear: NonlinearConfig = Field(default_factory=NonlinearConfig)
    inequalities: InequalitySpec = Field(default_factory=InequalitySpec)
    specfun: SpecfunSpec = Field(default_factory=SpecfunSpec)
