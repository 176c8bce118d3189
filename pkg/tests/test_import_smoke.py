"""
Import 冒烟测试：捕获模块拆分/重命名时的悬空导入与循环引用
"""

from __future__ import annotations

import importlib

import pytest

MODULES = [
    "packages.config",
    "packages.logging_setup",
    "packages.domain.enums",
    "packages.domain.exceptions",
    "packages.domain.schemas",
    "packages.solver.grid",
    "packages.solver.model",
    "packages.solver.specfun",
    "packages.solver.linear",
    "packages.solver.decomposition",
    "packages.solver.norms",
    "packages.solver.estimates",
    "packages.solver.inequalities",
    "packages.solver.nonlinear",
    "apps.cli.reports",
    "apps.cli.config_loader",
    "apps.cli.commands",
    "apps.cli.main",
]


@pytest.mark.parametrize("name", MODULES)
def test_module_importable(name):
    importlib.import_module(name)


def test_exit_codes():
    """配置 / 输入类错误退出码 2，其余 1"""
    from packages.domain import exceptions as exc

    assert exc.ConfigError.exit_code == 2
    assert exc.InputError.exit_code == 2
    assert exc.DomainError.exit_code == 2
    for cls in (exc.RegimeError, exc.DegenerateRegimeError, exc.NumericalError, exc.ConvergenceError, exc.RangeOverflowError):
        assert cls.exit_code == 1
        assert issubclass(cls, exc.SolverError)


def test_every_command_registered():
    from apps.cli.commands import COMMANDS
    from apps.cli.main import build_parser

    parser = build_parser()
    for name in COMMANDS:
        args = parser.parse_args([name])
        assert args.command == name
