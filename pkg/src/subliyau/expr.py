"""A tiny expression language for scalar fields.

Expressions use the coordinate names of a model (``x, y, z`` on the
Heisenberg group, ``re_a .. im_d`` on SU(2), ``a, b, c, d`` on SL(2)),
numbers, ``+ - * /``, integer powers written ``**`` or ``^``, parentheses
and the functions ``exp, log, sqrt, sin, cos``.  Parsing goes through
:mod:`ast` and rejects every node outside that whitelist.
"""
from __future__ import annotations

import ast
import operator

from . import jets
from .groups import get_model
from .jets import ScalarField

FUNCTIONS = {"exp": jets.exp, "log": jets.log, "sqrt": jets.sqrt, "sin": jets.sin, "cos": jets.cos}
_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}


class ExpressionError(ValueError):
    pass


def _compile(node, names):
    if isinstance(node, ast.Expression):
        return _compile(node.body, names)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        value = float(node.value)
        return lambda c: value
    if isinstance(node, ast.Name):
        if node.id not in names:
            raise ExpressionError(f"unknown symbol {node.id!r}; available: {', '.join(names)}")
        idx = names.index(node.id)
        return lambda c: c[idx]
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _compile(node.operand, names)
        return (lambda c: -inner(c)) if isinstance(node.op, ast.USub) else inner
    if isinstance(node, ast.BinOp):
        if isinstance(node.op, ast.Pow):
            exp = node.right
            if isinstance(exp, ast.UnaryOp) and isinstance(exp.op, ast.USub):
                raise ExpressionError("negative powers: write 1/(...) instead")
            if not (isinstance(exp, ast.Constant) and type(exp.value) is int):
                raise ExpressionError("powers must be integer literals")
            base, k = _compile(node.left, names), exp.value
            return lambda c: base(c) ** k
        if type(node.op) in _BINOPS:
            op = _BINOPS[type(node.op)]
            left, right = _compile(node.left, names), _compile(node.right, names)
            return lambda c: op(left(c), right(c))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
        fn = FUNCTIONS.get(node.func.id)
        if fn is None or len(node.args) != 1:
            raise ExpressionError(f"unsupported call {node.func.id!r}")
        arg = _compile(node.args[0], names)
        return lambda c: fn(arg(c))
    raise ExpressionError(f"unsupported syntax: {ast.dump(node)[:60]}")


def parse_field(text: str, model, positive=False) -> ScalarField:
    """Compile ``text`` into a :class:`ScalarField` on ``model``."""
    model = get_model(model)
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
    fn = _compile(tree, list(model.coordinate_names))
    return ScalarField(fn, model, positive=positive, name=text)
