"""Guard expressions: syntax tree, type checking, evaluation and canonical printing.

Guards read stores (by bare or machine-qualified name) and the payload of the
thing that fired the trigger's source stage.  ``mod`` is the mathematical
modulus, so ``(-1) mod 4 == 3``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Optional, Union

BINARY_OPS = ("||", "&&", "==", "!=", "<", "<=", ">", ">=", "+", "-", "*", "mod")
UNARY_OPS = ("!", "-")

# Higher binds tighter.
PRECEDENCE = {
    "||": 1,
    "&&": 2,
    "==": 3, "!=": 3, "<": 3, "<=": 3, ">": 3, ">=": 3,
    "+": 4, "-": 4,
    "*": 5, "mod": 5,
}
UNARY_PRECEDENCE = 6


@dataclass(frozen=True)
class Lit:
    value: Union[int, bool, str]


@dataclass(frozen=True)
class StoreRef:
    name: str  # as written: "rear" or "Queue.rear"


@dataclass(frozen=True)
class PayloadRef:
    field: Optional[str] = None


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[Lit, StoreRef, PayloadRef, Unary, Binary]


class ExprTypeError(Exception):
    pass


class ExprEvalError(Exception):
    pass


def literal_type(value: Any) -> Optional[str]:
    # bool before int: bool is an int subclass
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, int):
        return "int"
    if isinstance(value, str):
        return "string"
    return None


def store_refs(expr: Expr) -> list[str]:
    """All store names referenced, left to right."""
    out: list[str] = []

    def walk(e):
        if isinstance(e, StoreRef):
            out.append(e.name)
        elif isinstance(e, Unary):
            walk(e.operand)
        elif isinstance(e, Binary):
            walk(e.left)
            walk(e.right)

    walk(expr)
    return out


def type_of(expr: Expr, store_type: Callable[[str], str]) -> str:
    """Return ``"int"``, ``"bool"``, ``"string"`` or ``"any"`` (payload-derived).

    ``store_type`` maps a store reference to its declared type and raises
    ``KeyError`` for unknown stores.
    """
    if isinstance(expr, Lit):
        t = literal_type(expr.value)
        if t is None:
            raise ExprTypeError(f"unsupported literal {expr.value!r}")
        return t
    if isinstance(expr, PayloadRef):
        return "any"
    if isinstance(expr, StoreRef):
        try:
            return store_type(expr.name)
        except KeyError:
            raise ExprTypeError(f"unknown store '{expr.name}'") from None
    if isinstance(expr, Unary):
        t = type_of(expr.operand, store_type)
        want = "bool" if expr.op == "!" else "int"
        if t not in (want, "any"):
            raise ExprTypeError(f"operator '{expr.op}' expects {want}, got {t}")
        return want
    if isinstance(expr, Binary):
        lt = type_of(expr.left, store_type)
        rt = type_of(expr.right, store_type)
        op = expr.op
        if op in ("+", "-", "*", "mod", "<", "<=", ">", ">="):
            for t in (lt, rt):
                if t not in ("int", "any"):
                    raise ExprTypeError(f"operator '{op}' expects int operands, got {lt} and {rt}")
            return "bool" if op in ("<", "<=", ">", ">=") else "int"
        if op in ("&&", "||"):
            for t in (lt, rt):
                if t not in ("bool", "any"):
                    raise ExprTypeError(f"operator '{op}' expects bool operands, got {lt} and {rt}")
            return "bool"
        if op in ("==", "!="):
            if lt != rt and "any" not in (lt, rt):
                raise ExprTypeError(f"cannot compare {lt} with {rt}")
            return "bool"
    raise ExprTypeError(f"unknown expression node {expr!r}")


def _want(value, kind: str, op: str):
    if literal_type(value) != kind:
        raise ExprEvalError(f"operator '{op}' expects {kind}, got {value!r}")
    return value


def evaluate(expr: Expr, store_value: Callable[[str], Any], payload: Any = None) -> Any:
    if isinstance(expr, Lit):
        return expr.value
    if isinstance(expr, StoreRef):
        return store_value(expr.name)
    if isinstance(expr, PayloadRef):
        if expr.field is None:
            return payload
        if not isinstance(payload, dict) or expr.field not in payload:
            raise ExprEvalError(f"payload has no field '{expr.field}'")
        return payload[expr.field]
    if isinstance(expr, Unary):
        v = evaluate(expr.operand, store_value, payload)
        if expr.op == "!":
            return not _want(v, "bool", "!")
        return -_want(v, "int", "-")
    if isinstance(expr, Binary):
        op = expr.op
        if op == "&&":
            return _want(evaluate(expr.left, store_value, payload), "bool", op) and _want(
                evaluate(expr.right, store_value, payload), "bool", op)
        if op == "||":
            return _want(evaluate(expr.left, store_value, payload), "bool", op) or _want(
                evaluate(expr.right, store_value, payload), "bool", op)
        a = evaluate(expr.left, store_value, payload)
        b = evaluate(expr.right, store_value, payload)
        if op == "==":
            return literal_type(a) == literal_type(b) and a == b
        if op == "!=":
            return not (literal_type(a) == literal_type(b) and a == b)
        a = _want(a, "int", op)
        b = _want(b, "int", op)
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "mod":
            if b == 0:
                raise ExprEvalError("mod by zero")
            return a % abs(b)  # result in [0, |b|)
        if op == "<":
            return a < b
        if op == "<=":
            return a <= b
        if op == ">":
            return a > b
        if op == ">=":
            return a >= b
    raise ExprEvalError(f"unknown expression node {expr!r}")


def format_literal(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        out = ['"']
        for ch in value:
            if ch == '"':
                out.append('\\"')
            elif ch == "\\":
                out.append("\\\\")
            elif ch == "\n":
                out.append("\\n")
            elif ch == "\t":
                out.append("\\t")
            elif ord(ch) < 0x20 or ord(ch) == 0x7F:
                out.append(f"\\u{ord(ch):04x}")
            else:
                out.append(ch)
        out.append('"')
        return "".join(out)
    raise TypeError(f"not a literal: {value!r}")


def format_expr(expr: Expr, parent_prec: int = 0) -> str:
    """Canonical text with the minimum parentheses that preserve the tree."""
    if isinstance(expr, Lit):
        return format_literal(expr.value)
    if isinstance(expr, StoreRef):
        return expr.name
    if isinstance(expr, PayloadRef):
        return "payload" if expr.field is None else f"payload.{expr.field}"
    if isinstance(expr, Unary):
        text = expr.op + format_expr(expr.operand, UNARY_PRECEDENCE)
        return f"({text})" if parent_prec > UNARY_PRECEDENCE else text
    if isinstance(expr, Binary):
        prec = PRECEDENCE[expr.op]
        # all binary operators are left-associative; comparisons do not chain
        right_prec = prec + 1
        left_prec = prec + 1 if prec == 3 else prec
        op = f" {expr.op} "
        text = format_expr(expr.left, left_prec) + op + format_expr(expr.right, right_prec)
        return f"({text})" if prec < parent_prec else text
    raise TypeError(f"not an expression: {expr!r}")
