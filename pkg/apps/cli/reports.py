"""
报告写出：格点结果写 CSV，汇总写 JSON

- 浮点数统一 17 位有效数字
- 每个产物开头嵌入完整配置（CSV 用 `# config:` 注释行）
- 不写入墙钟时间，保证同一配置与 seed 的产物逐字节一致
"""

from __future__ import annotations

import csv
import json
import math
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

from packages.domain.enums import OutputFormat
from packages.domain.schemas import RunConfig


def format_number(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _jsonable(value: Any) -> Any:
    """NaN / inf 写成 null；元组转列表；枚举写值"""
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, complex):
        return {"re": _jsonable(value.real), "im": _jsonable(value.imag)}
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [_jsonable(v) for v in value]
    if hasattr(value, "value") and isinstance(value.value, str):
        return value.value
    return value


def config_header(config: RunConfig) -> str:
    return json.dumps(config.model_dump(mode="json"), sort_keys=True, ensure_ascii=False)


def write_csv(
    path: Path,
    columns: Sequence[str],
    rows: Iterable[dict],
    config: RunConfig,
) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(f"# config: {config_header(config)}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_number(row.get(c)) for c in columns])
    return path


def write_json(path: Path, payload: dict, config: RunConfig) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {"config": config.model_dump(mode="json"), **_jsonable(payload)}
    path.write_text(
        json.dumps(document, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    return path


def write_report(
    out_dir: Path,
    name: str,
    fmt: OutputFormat,
    columns: Sequence[str],
    rows: list[dict],
    summary: dict,
    config: RunConfig,
) -> list[Path]:
    """
    csv：<name>.csv（格点行）+ <name>.json（汇总）
    json：单个 <name>.json，行放在 "rows" 下
    """
    if fmt is OutputFormat.csv:
        return [
            write_csv(out_dir / f"{name}.csv", columns, rows, config),
            write_json(out_dir / f"{name}.json", {"summary": summary}, config),
        ]
    payload = {"columns": list(columns), "rows": rows, "summary": summary}
    return [write_json(out_dir / f"{name}.json", payload, config)]
