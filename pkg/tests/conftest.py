"""
Pytest 全局 fixture：网格、流动参数与 Settings 缓存隔离

get_settings() 带 lru_cache；修改 SLIPFLOW_* 环境变量的用例通过 fresh_settings
清缓存，避免污染其它用例。
"""

from __future__ import annotations

import numpy as np
import pytest

from packages.config import get_settings
from packages.solver.grid import RadialGrid, build_grid
from packages.solver.model import FlowParams


@pytest.fixture
def fresh_settings():
    """清空 Settings 缓存，用例结束后再清一次"""
    get_settings.cache_clear()
    yield get_settings
    get_settings.cache_clear()


@pytest.fixture(scope="session")
def grid() -> RadialGrid:
    return build_grid(48)


@pytest.fixture(scope="session")
def fine_grid() -> RadialGrid:
    return build_grid(96)


@pytest.fixture
def moderate() -> FlowParams:
    """中等通量、中等滑移"""
    return FlowParams(flux=50.0, slip=1.0)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)
