"""
统一日志配置：CLI / 库 / 测试共享同一格式

日志只进 stdout，从不写入产物文件。numpy / scipy 的 RuntimeWarning
（溢出、病态矩阵）经 logging.captureWarnings 进入 py.warnings logger。
@author Color2333
"""

from __future__ import annotations

import logging
import sys

from packages.config import get_settings
from packages.domain.exceptions import ConfigError

_LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s (%(filename)s:%(lineno)d): %(message)s"
_DATE_FORMAT = "%Y-%m-%d %H:%M:%S"
_QUIET = ("matplotlib", "numba", "hypothesis")


def _resolve_level(level: str | None) -> int:
    name = (level or get_settings().log_level).upper()
    value = logging.getLevelName(name)
    if not isinstance(value, int):
        raise ConfigError(f"未知日志级别: {name}", detail={"level": name})
    return value


def setup_logging(level: str | None = None) -> None:
    """安装根 handler；重复调用只调整级别"""
    resolved = _resolve_level(level)
    root = logging.getLogger()
    root.setLevel(resolved)
    if root.handlers:
        return

    handler = logging.StreamHandler(sys.stdout)
    handler.setFormatter(logging.Formatter(_LOG_FORMAT, datefmt=_DATE_FORMAT))
    root.addHandler(handler)
    logging.captureWarnings(True)

    for noisy in _QUIET:
        logging.getLogger(noisy).setLevel(logging.WARNING)
