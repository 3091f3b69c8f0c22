"""Expression language used in system, perturbation and transform files."""

from nedlin.expr.expression import (
    EvalContext,
    Expression,
    ExpressionDomainError,
    UnboundVariableError,
    evaluate,
    parse,
)
from nedlin.expr.parser import ExpressionSyntaxError, UnknownFunctionError

__all__ = [
    "EvalContext",
    "Expression",
    "ExpressionDomainError",
    "ExpressionSyntaxError",
    "UnboundVariableError",
    "UnknownFunctionError",
    "evaluate",
    "parse",
]
