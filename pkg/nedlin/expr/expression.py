"""
Expression: parsed, immutable, evaluable arithmetic expression.

An Expression wraps an AST (nedlin.expr.nodes) and lazily compiles it into
nested closures for repeated evaluation inside ODE right-hand sides.
Evaluation is pure: the same tree and bindings always give the same double.
"""

from __future__ import annotations

import math
from typing import Any, Callable, Mapping

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_serializer, model_validator

from nedlin.expr import nodes
from nedlin.expr.nodes import Binary, Call, Constant, Node, Unary, Variable
from nedlin.expr.parser import parse_tree

Compiled = Callable[[Mapping[str, float]], float]


class UnboundVariableError(KeyError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"Unbound variable '{name}'")


class ExpressionDomainError(ArithmeticError):
    """Raised when a function or operator is applied outside its domain."""

    def __init__(self, message: str, subexpression: str):
        self.subexpression = subexpression
        super().__init__(f"{message} in '{subexpression}'")


class EvalContext(BaseModel):
    """Variable bindings for one evaluation."""
    model_config = ConfigDict(frozen=True)

    bindings: dict[str, float] = Field(default_factory=dict, description="Variable name to value")


def _checked(name: str, fn: Callable[..., float], node: Call) -> Callable[..., float]:
    def call(*values: float) -> float:
        try:
            return fn(*values)
        except OverflowError:
            return math.inf
        except (ValueError, ZeroDivisionError) as exc:
            raise ExpressionDomainError(f"{name}{tuple(values)} undefined ({exc})", nodes.to_source(node)) from None

    return call


def _ln(value: float) -> float:
    if value <= 0.0:
        raise ValueError("non-positive argument")
    return math.log(value)


def _sqrt(value: float) -> float:
    if value < 0.0:
        raise ValueError("negative argument")
    return math.sqrt(value)


_FUNCTIONS: dict[str, Callable[..., float]] = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "ln": _ln,
    "abs": abs,
    "sqrt": _sqrt,
    "pow": math.pow,
    "min": min,
    "max": max,
}


def _compile(node: Any) -> Compiled:
    if isinstance(node, Constant):
        value = node.value
        return lambda env: value
    if isinstance(node, Variable):
        name = node.name

        def lookup(env: Mapping[str, float]) -> float:
            try:
                return env[name]
            except KeyError:
                raise UnboundVariableError(name) from None

        return lookup
    if isinstance(node, Unary):
        inner = _compile(node.operand)
        return lambda env: -inner(env)
    if isinstance(node, Binary):
        left, right = _compile(node.left), _compile(node.right)
        if node.op == "+":
            return lambda env: left(env) + right(env)
        if node.op == "-":
            return lambda env: left(env) - right(env)
        if node.op == "*":
            return lambda env: left(env) * right(env)
        text = nodes.to_source(node)

        def divide(env: Mapping[str, float]) -> float:
            numerator = left(env)
            denominator = right(env)
            if denominator == 0.0:
                raise ExpressionDomainError("division by zero", text)
            return numerator / denominator

        return divide
    if isinstance(node, Call):
        fn = _checked(node.name, _FUNCTIONS[node.name], node)
        args = [_compile(a) for a in node.args]
        if len(args) == 1:
            only = args[0]
            return lambda env: fn(only(env))
        return lambda env: fn(*[a(env) for a in args])
    raise TypeError(f"Cannot compile node {type(node).__name__}")


class Expression(BaseModel):
    """
    Immutable parsed expression.

    Serializes to its pretty-printed source text, and validates from either
    source text or an ``{"ast": ...}`` mapping.
    """
    model_config = ConfigDict(frozen=True)

    ast: Node
    _compiled: Compiled | None = PrivateAttr(default=None)

    @model_validator(mode="before")
    @classmethod
    def _from_text(cls, data: Any) -> Any:
        if isinstance(data, str):
            return {"ast": parse_tree(data)}
        if isinstance(data, (int, float)):
            return {"ast": Constant(value=float(data))}
        return data

    @model_serializer(mode="plain")
    def _to_text(self) -> str:
        return self.source

    @classmethod
    def parse(cls, source: str) -> "Expression":
        return cls(ast=parse_tree(source))

    @classmethod
    def constant(cls, value: float) -> "Expression":
        return cls(ast=Constant(value=float(value)))

    @classmethod
    def variable(cls, name: str) -> "Expression":
        return cls(ast=Variable(name=name))

    @property
    def source(self) -> str:
        return nodes.to_source(self.ast)

    @property
    def free_variables(self) -> frozenset[str]:
        return nodes.free_variables(self.ast)

    def is_zero(self) -> bool:
        return isinstance(self.ast, Constant) and self.ast.value == 0.0

    def compiled(self) -> Compiled:
        if self._compiled is None:
            self._compiled = _compile(self.ast)
        return self._compiled

    def evaluate(self, ctx: EvalContext | Mapping[str, float]) -> float:
        bindings = ctx.bindings if isinstance(ctx, EvalContext) else ctx
        return float(self.compiled()(bindings))

    def substitute(self, mapping: Mapping[str, "Expression"]) -> "Expression":
        return Expression(ast=nodes.substitute(self.ast, {k: v.ast for k, v in mapping.items()}))

    # Tree builders used by system transformations. They skip trivial zeros and
    # ones so generated coefficients stay readable when printed.
    def __add__(self, other: "Expression") -> "Expression":
        if other.is_zero():
            return self
        if self.is_zero():
            return other
        return Expression(ast=Binary(op="+", left=self.ast, right=other.ast))

    def __sub__(self, other: "Expression") -> "Expression":
        if other.is_zero():
            return self
        if self.is_zero():
            return -other
        return Expression(ast=Binary(op="-", left=self.ast, right=other.ast))

    def __mul__(self, other: "Expression") -> "Expression":
        if self.is_zero() or other.is_zero():
            return Expression.constant(0.0)
        if isinstance(self.ast, Constant) and self.ast.value == 1.0:
            return other
        if isinstance(other.ast, Constant) and other.ast.value == 1.0:
            return self
        return Expression(ast=Binary(op="*", left=self.ast, right=other.ast))

    def __truediv__(self, other: "Expression") -> "Expression":
        if self.is_zero():
            return self
        if isinstance(other.ast, Constant) and other.ast.value == 1.0:
            return self
        return Expression(ast=Binary(op="/", left=self.ast, right=other.ast))

    def __neg__(self) -> "Expression":
        if isinstance(self.ast, Constant):
            return Expression.constant(-self.ast.value)
        if isinstance(self.ast, Unary):
            return Expression(ast=self.ast.operand)
        return Expression(ast=Unary(operand=self.ast))

    def __str__(self) -> str:
        return self.source

    # structural identity only; the compiled closure is a cache
    def __eq__(self, other: object) -> bool:
        return isinstance(other, Expression) and self.ast == other.ast

    def __hash__(self) -> int:
        return hash(self.ast)


def parse(source: str) -> Expression:
    """Parse expression source text."""
    return Expression.parse(source)


def evaluate(e: Expression, ctx: EvalContext | Mapping[str, float]) -> float:
    """Evaluate ``e`` under ``ctx``; every free variable must be bound."""
    return e.evaluate(ctx)
