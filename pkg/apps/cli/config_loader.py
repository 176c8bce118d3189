"""
运行配置加载：JSON 或 TOML 文件 → RunConfig

未知键给出拼写建议；文件读不到或解析失败属于输入错误（退出码 2）。
@author Color2333
"""

from __future__ import annotations

import difflib
import json
import logging
import tomllib
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ValidationError

from packages.domain.exceptions import ConfigError, InputError
from packages.domain.schemas import (
    ForcingSpec,
    InequalitySpec,
    ModeForcingSpec,
    NonlinearConfig,
    RunConfig,
    SpecfunSpec,
    SweepSpec,
)

logger = logging.getLogger(__name__)

_MODELS: tuple[type[BaseModel], ...] = (
    RunConfig,
    ForcingSpec,
    ModeForcingSpec,
    SweepSpec,
    NonlinearConfig,
    InequalitySpec,
    SpecfunSpec,
)


def _known_keys() -> list[str]:
    keys: set[str] = set()
    for model in _MODELS:
        keys.update(model.model_fields)
    return sorted(keys)


def _read(path: Path) -> dict[str, Any]:
    if not path.is_file():
        raise InputError(f"配置文件不存在: {path}")
    suffix = path.suffix.lower()
    try:
        if suffix == ".json":
            data = json.loads(path.read_text(encoding="utf-8"))
        elif suffix == ".toml":
            data = tomllib.loads(path.read_text(encoding="utf-8"))
        else:
            raise ConfigError(f"不支持的配置格式 {suffix}，请使用 .json 或 .toml")
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise InputError(f"配置文件解析失败: {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise InputError("配置文件顶层必须是对象")
    return data


def _describe(exc: ValidationError) -> tuple[str, list[dict]]:
    known = _known_keys()
    problems = []
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"])
        entry = {"loc": loc, "message": err["msg"]}
        if err["type"] == "extra_forbidden":
            key = str(err["loc"][-1])
            close = difflib.get_close_matches(key, known, n=1)
            if close:
                entry["suggestion"] = close[0]
                lines.append(f"{loc}: 未知键，是否想写 '{close[0]}'？")
            else:
                lines.append(f"{loc}: 未知键")
        else:
            lines.append(f"{loc}: {err['msg']}")
        problems.append(entry)
    return "; ".join(lines), problems


def load_config(path: Path | None = None, *, seed: int | None = None) -> RunConfig:
    """读取配置文件（可选），命令行 --seed 覆盖文件中的 seed"""
    data = _read(path) if path is not None else {}
    if seed is not None:
        data["seed"] = seed
    try:
        config = RunConfig.model_validate(data)
    except ValidationError as exc:
        message, problems = _describe(exc)
        raise ConfigError(f"配置不合法: {message}", detail={"errors": problems}) from exc
    logger.debug("已加载配置 %s", path or "<默认>")
    return config
