"""
求解器配置 - Pydantic Settings
所有工程默认值（网格、区域常数、容差、扫描阈值）集中在这里，
可通过 SLIPFLOW_* 环境变量或 SLIPFLOW_ENV_FILE 指定的 dotenv 文件覆盖。
@author Color2333
"""

import os
from functools import lru_cache
from pathlib import Path

from pydantic_settings import BaseSettings, SettingsConfigDict


def _resolve_env_file() -> str:
    """优先使用 SLIPFLOW_ENV_FILE 环境变量指定的路径"""
    return os.environ.get("SLIPFLOW_ENV_FILE", ".env")


class Settings(BaseSettings):
    log_level: str = "INFO"
    output_dir: Path = Path("./out")
    # 并发 worker 数，None 表示按逻辑核数
    jobs: int | None = None

    # 径向离散
    # 自适应网格的下限与上限；边界层越薄 M 越大
    grid_size: int = 48
    max_grid_size: int = 128
    refine_factor: int = 2
    decomposition_grid_size: int = 160

    # 区域划分常数（只要求"足够小"，这里给出工程默认值）
    eps1: float = 0.1
    delta: float = 0.1
    large_flux_threshold: float = 100.0

    # 线性求解 / 分解容差
    residual_tolerance: float = 1e-8
    nonlinear_residual_tolerance: float = 1e-6
    compatibility_tolerance: float = 1e-10
    reconstruction_tolerance: float = 1e-6

    # 边界层特殊函数
    layer_truncation: float = 40.0
    airy_max_modulus: float = 50.0

    # 估计扫描
    exponent_slack: float = 0.15
    alpha_spread_bound: float = 50.0

    # 非线性 Picard 迭代
    truncation: int = 16
    picard_tolerance: float = 1e-10
    picard_max_iterations: int = 30
    relaxation: float = 1.0
    divergence_window: int = 3
    smallness_factor: float = 0.05

    # 径向不等式随机测试
    random_degree: int = 16
    inequality_samples: int = 100

    model_config = SettingsConfigDict(
        env_prefix="SLIPFLOW_",
        env_file=_resolve_env_file(),
        env_file_encoding="utf-8",
        extra="ignore",
    )


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings()
