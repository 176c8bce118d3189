"""
slipflow 命令行：solve-linear / solve-swirl / decompose / sweep-estimates /
solve-nonlinear / test-inequalities / specfun-eval

退出码：0 全部检查通过；1 数值或检查失败；2 配置 / 输入错误
@author Color2333
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from apps.cli.commands import COMMANDS, run_inequalities
from apps.cli.config_loader import load_config
from apps.cli.reports import write_report
from packages.config import get_settings
from packages.domain.enums import OutputFormat
from packages.domain.exceptions import SolverError
from packages.logging_setup import setup_logging

logger = logging.getLogger(__name__)

_HELP = {
    "solve-linear": "求解单个模态的线性化问题（流函数 + 旋转分量）",
    "solve-swirl": "只求解旋转分量 v^θ",
    "decompose": "中频区域的边界层分解并与直接解比较",
    "sweep-estimates": "在 (Φ, α, n) 格点上扫描一致估计并拟合 Φ 指数",
    "solve-nonlinear": "Picard 迭代求解截断非线性问题",
    "test-inequalities": "随机多项式检验径向不等式与 Bessel 不等式",
    "specfun-eval": "计算 I₁ / Ai / 截断函数 χ",
}


def _common_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="JSON 或 TOML 配置文件")
    common.add_argument(
        "--out", type=Path, default=settings.output_dir, help=f"输出目录 (默认 {settings.output_dir})"
    )
    common.add_argument(
        "--format",
        choices=[f.value for f in OutputFormat],
        default=OutputFormat.csv.value,
        help="csv：格点 CSV + 汇总 JSON；json：单个 JSON",
    )
    common.add_argument("--seed", type=int, default=None, help="随机种子，覆盖配置文件")
    common.add_argument("--jobs", type=int, default=settings.jobs, help="并发 worker 数 (默认按核数)")
    common.add_argument("--log-level", default=settings.log_level, help="日志级别")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slipflow",
        description="带 Navier 滑移的周期圆管 Poiseuille 流线性化扰动：谱求解与验证",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
示例:
  # 单模态线性求解
  python -m apps.cli solve-linear --config run.toml --out out/

  # 估计扫描，8 个并发
  python -m apps.cli sweep-estimates --config sweep.json --jobs 8

  # 径向不等式随机检验
  python -m apps.cli test-inequalities --samples 200 --seed 7
        """,
    )
    common = _common_parser()
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name, parents=[common], help=_HELP[name], description=_HELP[name])
        if name == "test-inequalities":
            cmd.add_argument("--samples", type=int, default=None, help="随机样本数（≥ 50）")
    return parser


def _report_name(command: str) -> str:
    return command.replace("-", "_")


def run(args: argparse.Namespace) -> int:
    config = load_config(args.config, seed=args.seed)
    if args.command == "test-inequalities":
        result = run_inequalities(config, jobs=args.jobs, samples=args.samples)
    else:
        result = COMMANDS[args.command](config, jobs=args.jobs)
    paths = write_report(
        args.out,
        _report_name(args.command),
        OutputFormat(args.format),
        result.columns,
        result.rows,
        {**result.summary, "passed": result.passed},
        config,
    )
    for path in paths:
        logger.info("已写出 %s", path)
    status = "通过" if result.passed else "未通过"
    logger.info("%s %s", args.command, status)
    return 0 if result.passed else 1


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        setup_logging(args.log_level)
        return run(args)
    except SolverError as exc:
        logger.error("%s 失败：%s", args.command, exc.message)
        print(json.dumps(exc.to_dict(), ensure_ascii=False, default=str), file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
