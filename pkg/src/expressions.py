"""
Expression language for stage annotations: guards, actions, delays and
trigger conditions.

Expressions are immutable trees. `evaluate` is a pure function of the
expression and an EvalContext; actions (storage writes, transforms and
verdicts) are applied by the simulator.
"""
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Tuple

from src.things import Record, Symbol, render, type_name


class EvaluationError(ValueError):
    """Raised when an expression cannot be evaluated."""


class UnboundName(EvaluationError):
    pass


class TypeMismatch(EvaluationError):
    pass


class IndexOutOfRange(EvaluationError):
    pass


# ---------------------------------------------------------
# Expression tree
# ---------------------------------------------------------
@dataclass(frozen=True)
class Literal:
    value: Any


@dataclass(frozen=True)
class It:
    pass


@dataclass(frozen=True)
class Now:
    pass


@dataclass(frozen=True)
class Name:
    name: str


@dataclass(frozen=True)
class ListDisplay:
    items: Tuple[Any, ...]


@dataclass(frozen=True)
class Index:
    target: Any
    index: Any


@dataclass(frozen=True)
class Field:
    target: Any
    name: str


@dataclass(frozen=True)
class Len:
    arg: Any


@dataclass(frozen=True)
class Unary:
    op: str  # 'neg' or 'not'
    operand: Any


@dataclass(frozen=True)
class Binary:
    op: str
    left: Any
    right: Any


# Action items (the `do` clause)
@dataclass(frozen=True)
class Assign:
    name: str
    expr: Any


@dataclass(frozen=True)
class Transform:
    expr: Any


@dataclass(frozen=True)
class SetVerdict:
    verdict: str  # 'accepted' or 'rejected'


VERDICTS = ('accepted', 'rejected')
COMPARISONS = ('=', '!=', '<', '<=', '>', '>=')

PRECEDENCE = {
    'or': 1, 'and': 2, 'not': 3,
    '=': 4, '!=': 4, '<': 4, '<=': 4, '>': 4, '>=': 4,
    '+': 5, '-': 5,
    '*': 6, '/': 6, '%': 6,
    'neg': 7,
}
POSTFIX = 8
ATOM = 9


@dataclass
class EvalContext:
    it: Any = None
    storages: Mapping[str, Any] = field(default_factory=dict)
    now: int = 0


# ---------------------------------------------------------
# Evaluation
# ---------------------------------------------------------
def _is_int(value):
    return isinstance(value, int) and not isinstance(value, bool)


def _require(value, kind, op):
    actual = type_name(value)
    if actual != kind:
        raise TypeMismatch(f"'{op}' expects {kind}, got {actual} {render(value)}")
    return value


def _arith(op, left, right):
    if op == '+':
        if _is_int(left) and _is_int(right):
            return left + right
        lt, rt = type_name(left), type_name(right)
        if lt == rt and lt in ('list', 'text'):
            return left + right
        raise TypeMismatch(f"'+' cannot combine {lt} and {rt}")
    _require(left, 'integer', op)
    _require(right, 'integer', op)
    if op == '-':
        return left - right
    if op == '*':
        return left * right
    if right == 0:
        raise EvaluationError(f"'{op}' by zero")
    if op == '/':
        return left // right
    return left % right


def _compare(op, left, right):
    lt, rt = type_name(left), type_name(right)
    if lt != rt:
        raise TypeMismatch(f"'{op}' cannot compare {lt} with {rt}")
    if op == '=':
        return left == right
    if op == '!=':
        return left != right
    if lt not in ('integer', 'text'):
        raise TypeMismatch(f"'{op}' is not defined on {lt}")
    if op == '<':
        return left < right
    if op == '<=':
        return left <= right
    if op == '>':
        return left > right
    return left >= right


def evaluate(expr, context):
    """Evaluates an expression; raises EvaluationError subclasses on failure."""
    if isinstance(expr, Literal):
        return expr.value
    if isinstance(expr, It):
        if context.it is None:
            raise UnboundName("'it' is not bound (no thing at this stage)")
        return context.it
    if isinstance(expr, Now):
        return context.now
    if isinstance(expr, Name):
        if expr.name not in context.storages:
            raise UnboundName(f"Unknown name '{expr.name}'")
        value = context.storages[expr.name]
        if value is None:
            raise UnboundName(f"Storage '{expr.name}' holds no thing")
        return value
    if isinstance(expr, ListDisplay):
        return tuple(evaluate(item, context) for item in expr.items)
    if isinstance(expr, Len):
        value = evaluate(expr.arg, context)
        if type_name(value) not in ('list', 'text', 'record'):
            raise TypeMismatch(f"len() is not defined on {type_name(value)}")
        return len(value)
    if isinstance(expr, Index):
        target = evaluate(expr.target, context)
        index = _require(evaluate(expr.index, context), 'integer', '[]')
        if type_name(target) not in ('list', 'text'):
            raise TypeMismatch(f"Cannot index {type_name(target)}")
        if not 0 <= index < len(target):
            raise IndexOutOfRange(f"Index {index} outside 0..{len(target) - 1}")
        return target[index]
    if isinstance(expr, Field):
        target = _require(evaluate(expr.target, context), 'record', '.')
        try:
            return target.get(expr.name)
        except KeyError:
            raise UnboundName(f"Record has no field '{expr.name}'")
    if isinstance(expr, Unary):
        value = evaluate(expr.operand, context)
        if expr.op == 'not':
            return not _require(value, 'boolean', 'not')
        return -_require(value, 'integer', '-')
    if isinstance(expr, Binary):
        if expr.op in ('and', 'or'):
            left = _require(evaluate(expr.left, context), 'boolean', expr.op)
            if expr.op == 'and' and not left:
                return False
            if expr.op == 'or' and left:
                return True
            return _require(evaluate(expr.right, context), 'boolean', expr.op)
        left = evaluate(expr.left, context)
        right = evaluate(expr.right, context)
        if expr.op in COMPARISONS:
            return _compare(expr.op, left, right)
        return _arith(expr.op, left, right)
    raise TypeError(f"Not an expression: {expr!r}")


def is_true(expr, context):
    """Evaluates a boolean condition; non-boolean results are a type error."""
    value = evaluate(expr, context)
    if not isinstance(value, bool):
        raise TypeMismatch(f"Condition evaluated to {type_name(value)} {render(value)}, expected boolean")
    return value


def free_names(expr):
    """Storage names an expression reads."""
    if isinstance(expr, Name):
        return {expr.name}
    if isinstance(expr, (Literal, It, Now)) or expr is None:
        return set()
    if isinstance(expr, ListDisplay):
        return set().union(*(free_names(i) for i in expr.items)) if expr.items else set()
    if isinstance(expr, Index):
        return free_names(expr.target) | free_names(expr.index)
    if isinstance(expr, Field):
        return free_names(expr.target)
    if isinstance(expr, Len):
        return free_names(expr.arg)
    if isinstance(expr, Unary):
        return free_names(expr.operand)
    if isinstance(expr, Binary):
        return free_names(expr.left) | free_names(expr.right)
    if isinstance(expr, Assign):
        return {expr.name} | free_names(expr.expr)
    if isinstance(expr, Transform):
        return free_names(expr.expr)
    return set()


# ---------------------------------------------------------
# Printing
# ---------------------------------------------------------
def _precedence(expr):
    if isinstance(expr, Binary):
        return PRECEDENCE[expr.op]
    if isinstance(expr, Unary):
        return PRECEDENCE[expr.op]
    if isinstance(expr, (Index, Field)):
        return POSTFIX
    if isinstance(expr, Literal) and isinstance(expr.value, int) and not isinstance(expr.value, bool) \
            and expr.value < 0:
        return PRECEDENCE['neg']
    return ATOM


def to_source(expr, parent=0):
    """Prints an expression with the minimum parentheses the grammar needs."""
    prec = _precedence(expr)
    if isinstance(expr, Literal):
        text = render(expr.value)
    elif isinstance(expr, It):
        text = 'it'
    elif isinstance(expr, Now):
        text = 'now'
    elif isinstance(expr, Name):
        text = expr.name
    elif isinstance(expr, ListDisplay):
        text = '[' + ', '.join(to_source(i) for i in expr.items) + ']'
    elif isinstance(expr, Len):
        text = f"len({to_source(expr.arg)})"
    elif isinstance(expr, Index):
        text = f"{to_source(expr.target, POSTFIX)}[{to_source(expr.index)}]"
    elif isinstance(expr, Field):
        text = f"{to_source(expr.target, POSTFIX)}.{expr.name}"
    elif isinstance(expr, Unary):
        if expr.op == 'not':
            text = f"not {to_source(expr.operand, prec)}"
        else:
            text = f"-{to_source(expr.operand, prec)}"
    elif isinstance(expr, Binary):
        # Comparisons do not chain, so both sides need a tighter operand
        left_min = prec + 1 if expr.op in COMPARISONS else prec
        text = f"{to_source(expr.left, left_min)} {expr.op} {to_source(expr.right, prec + 1)}"
    else:
        raise TypeError(f"Not an expression: {expr!r}")
    if prec < parent:
        return f"({text})"
    return text


def action_to_source(items):
    parts = []
    for item in items:
        if isinstance(item, Assign):
            parts.append(f"{item.name} := {to_source(item.expr)}")
        elif isinstance(item, SetVerdict):
            parts.append(f"verdict({item.verdict})")
        else:
            parts.append(to_source(item.expr))
    return ', '.join(parts)
