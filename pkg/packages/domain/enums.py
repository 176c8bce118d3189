"""
领域枚举定义
@author Color2333
"""

from __future__ import annotations

from enum import StrEnum


class RegimeTag(StrEnum):
    """(Φ, α, n) 参数区域"""

    zero_mode = "ZeroMode"
    high_frequency = "HighFrequency"
    small_slip = "Z1_SmallSlip"
    large_slip = "Z2_LargeSlip"
    intermediate_slip = "Z3_IntermediateSlip"
    small_flux = "SmallFlux"


class BCKind(StrEnum):
    """壁面边界条件"""

    navier = "navier"
    slip = "slip"


class AlphaMode(StrEnum):
    """扫描中 α 的给法：绝对值，或 (Φ|n|)^{1/3} 的倍数"""

    absolute = "absolute"
    cube_root = "cube_root"


class EstimateKind(StrEnum):
    mode = "mode"
    field = "field"


class EstimateId(StrEnum):
    """一致估计的标识，与注册表一一对应"""

    zero_mode = "zero_mode"
    zero_mode_velocity = "zero_mode_velocity"
    high_frequency = "high_frequency"
    high_frequency_flux = "high_frequency_flux"
    small_slip_energy = "small_slip_energy"
    small_slip_high = "small_slip_high"
    large_slip_energy = "large_slip_energy"
    large_slip_high = "large_slip_high"
    medium_energy = "medium_energy"
    intermediate_l2 = "intermediate_l2"
    intermediate_energy = "intermediate_energy"
    intermediate_flux = "intermediate_flux"
    intermediate_high = "intermediate_high"
    swirl_decay = "swirl_decay"
    swirl_energy = "swirl_energy"
    swirl_h2 = "swirl_h2"
    small_flux_h2 = "small_flux_h2"
    medium_regularity = "medium_regularity"
    intermediate_regularity = "intermediate_regularity"
    linear_h32 = "linear_h32"
    linear_h2 = "linear_h2"


class DataRegime(StrEnum):
    """非线性问题的数据区域"""

    small_data = "small_data"
    large_flux = "large_flux"
    outside = "outside"


class OutputFormat(StrEnum):
    csv = "csv"
    json = "json"


class SpecialFunction(StrEnum):
    bessel_i1 = "bessel_i1"
    airy_ai = "airy_ai"
    cutoff_chi = "cutoff_chi"
