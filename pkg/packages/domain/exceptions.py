"""
统一异常体系：区分配置/输入错误（退出码 2）与数值/区域失败（退出码 1），配合 CLI 使用
@author Color2333
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from packages.solver.nonlinear import IterationTrace


class SolverError(Exception):
    """求解器异常基类"""

    exit_code: int = 1
    error_type: str = "solver_error"

    def __init__(self, message: str = "", *, detail: Any = None):
        self.message = message or self.__class__.__doc__ or "未知错误"
        self.detail = detail
        super().__init__(self.message)

    def to_dict(self) -> dict:
        d = {
            "error": self.error_type,
            "message": self.message,
        }
        if self.detail:
            d["detail"] = self.detail
        return d


# ---------- 退出码 2：使用 / 配置错误 ----------


class ConfigError(SolverError):
    """配置缺失或不合法"""

    exit_code = 2
    error_type = "config_error"


class InputError(SolverError):
    """输入数据不合法（形状不符、模态重复、相容性条件不满足等）"""

    exit_code = 2
    error_type = "input_error"


class DomainError(SolverError):
    """自变量超出函数定义域"""

    exit_code = 2
    error_type = "domain_error"


# ---------- 退出码 1：运行期失败 ----------


class RangeOverflowError(SolverError):
    """特殊函数结果超出双精度表示范围"""

    error_type = "range_overflow"


class RegimeError(SolverError):
    """在不适用的参数区域调用了该操作"""

    error_type = "regime_error"


class DegenerateRegimeError(RegimeError):
    """边界层常数 J 退化，无法确定分解系数"""

    error_type = "degenerate_regime"


class NumericalError(SolverError):
    """离散算子奇异或对称性破坏"""

    error_type = "numerical_error"


class ConvergenceError(SolverError):
    """Picard 迭代未收敛或发散"""

    error_type = "convergence_error"

    def __init__(
        self,
        message: str = "",
        *,
        trace: IterationTrace | None = None,
        detail: Any = None,
    ):
        super().__init__(message, detail=detail)
        self.trace = trace
