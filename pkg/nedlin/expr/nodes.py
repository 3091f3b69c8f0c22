"""
Expression AST nodes

Each node is an immutable pydantic model tagged by ``kind`` so that trees
compare structurally and serialize to plain JSON. Printing lives here too,
because the printer and the node precedences must agree exactly for parsed
trees to round-trip.
"""

from __future__ import annotations

from typing import Annotated, ClassVar, Literal, Union

from pydantic import BaseModel, ConfigDict, Field

FUNCTION_ARITY: dict[str, tuple[int, int]] = {
    "sin": (1, 1),
    "cos": (1, 1),
    "exp": (1, 1),
    "ln": (1, 1),
    "abs": (1, 1),
    "sqrt": (1, 1),
    "pow": (2, 2),
    "min": (2, 64),
    "max": (2, 64),
}

# Binding strength used both by the parser and by the printer.
PREC_ADD = 10
PREC_MUL = 20
PREC_UNARY = 30
PREC_ATOM = 40

BINARY_PREC: dict[str, int] = {"+": PREC_ADD, "-": PREC_ADD, "*": PREC_MUL, "/": PREC_MUL}


class _Node(BaseModel):
    model_config = ConfigDict(frozen=True)

    def precedence(self) -> int:
        return PREC_ATOM


class Constant(_Node):
    """Numeric literal. Negative values come from a minus sign glued to a literal."""
    kind: Literal["constant"] = "constant"
    value: float = Field(..., description="IEEE double value")

    def precedence(self) -> int:
        # "-1.0" behaves like a unary expression when printed
        return PREC_UNARY if self.value < 0 or str(self.value).startswith("-") else PREC_ATOM


class Variable(_Node):
    kind: Literal["variable"] = "variable"
    name: str = Field(..., description="t, x1..xn or a parameter name")


class Unary(_Node):
    kind: Literal["unary"] = "unary"
    op: Literal["-"] = "-"
    operand: "Node"

    def precedence(self) -> int:
        return PREC_UNARY


class Binary(_Node):
    kind: Literal["binary"] = "binary"
    op: Literal["+", "-", "*", "/"]
    left: "Node"
    right: "Node"

    def precedence(self) -> int:
        return BINARY_PREC[self.op]


class Call(_Node):
    kind: Literal["call"] = "call"
    name: str
    args: tuple["Node", ...]
    functions: ClassVar[frozenset[str]] = frozenset(FUNCTION_ARITY)


Node = Annotated[Union[Constant, Variable, Unary, Binary, Call], Field(discriminator="kind")]

Unary.model_rebuild()
Binary.model_rebuild()
Call.model_rebuild()


def format_number(value: float) -> str:
    """Shortest text that parses back to the same double."""
    return repr(float(value))


def to_source(node: _Node) -> str:
    """Pretty-print a tree with the minimal parentheses that preserve its shape."""
    if isinstance(node, Constant):
        return format_number(node.value)
    if isinstance(node, Variable):
        return node.name
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_source(a) for a in node.args)})"
    if isinstance(node, Unary):
        inner = to_source(node.operand)
        # constants are wrapped so the minus is not folded into the literal on reparse
        if not isinstance(node.operand, (Variable, Call)):
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, Binary):
        prec = node.precedence()
        left = to_source(node.left)
        if node.left.precedence() < prec:
            left = f"({left})"
        right = to_source(node.right)
        if node.right.precedence() <= prec:
            right = f"({right})"
        return f"{left} {node.op} {right}"
    raise TypeError(f"Unknown node type: {type(node).__name__}")


def free_variables(node: _Node) -> frozenset[str]:
    if isinstance(node, Variable):
        return frozenset({node.name})
    if isinstance(node, Constant):
        return frozenset()
    if isinstance(node, Unary):
        return free_variables(node.operand)
    if isinstance(node, Binary):
        return free_variables(node.left) | free_variables(node.right)
    if isinstance(node, Call):
        out: frozenset[str] = frozenset()
        for arg in node.args:
            out |= free_variables(arg)
        return out
    raise TypeError(f"Unknown node type: {type(node).__name__}")


def substitute(node: _Node, mapping: dict[str, _Node]) -> _Node:
    """Simultaneous replacement of variables by subtrees."""
    if isinstance(node, Variable):
        return mapping.get(node.name, node)
    if isinstance(node, Constant):
        return node
    if isinstance(node, Unary):
        return Unary(operand=substitute(node.operand, mapping))
    if isinstance(node, Binary):
        return Binary(op=node.op, left=substitute(node.left, mapping), right=substitute(node.right, mapping))
    if isinstance(node, Call):
        return Call(name=node.name, args=tuple(substitute(a, mapping) for a in node.args))
    raise TypeError(f"Unknown node type: {type(node).__name__}")
