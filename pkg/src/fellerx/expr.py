"""Safe arithmetic expressions in one variable ``x``.

Grammar (a subset of Python expression syntax)::

    expr    := expr ('+' | '-') term | term
    term    := term ('*' | '/') factor | factor
    factor  := ('+' | '-') factor | power
    power   := atom ['**' factor]
    atom    := NUMBER | 'x' | 'pi' | 'e' | NAME '(' expr [',' expr] ')' | '(' expr ')'
    NAME    := exp | log | sqrt | sinh | cosh | tanh | sin | cos | abs | pow

Parsing is done by :mod:`ast`; anything outside the whitelist is rejected.
"""

import ast

import numpy as np

_FUNCS = {
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
    "sin": np.sin,
    "cos": np.cos,
    "abs": np.abs,
    "pow": np.power,
}
_CONSTS = {"pi": np.pi, "e": np.e}
_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


class ExpressionError(ValueError):
    pass


def _compile(node):
    if isinstance(node, ast.Expression):
        return _compile(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        value = float(node.value)
        return lambda x: np.full_like(x, value)
    if isinstance(node, ast.Name):
        if node.id == "x":
            return lambda x: x
        if node.id in _CONSTS:
            value = _CONSTS[node.id]
            return lambda x: np.full_like(x, value)
        raise ExpressionError(f"unknown name {node.id!r}")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
        inner = _compile(node.operand)
        if isinstance(node.op, ast.USub):
            return lambda x: -inner(x)
        return inner
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        op = _BINOPS[type(node.op)]
        left, right = _compile(node.left), _compile(node.right)
        return lambda x: op(left(x), right(x))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
        name = node.func.id
        if name not in _FUNCS or node.keywords:
            raise ExpressionError(f"unknown function {name!r}")
        nargs = 2 if name == "pow" else 1
        if len(node.args) != nargs:
            raise ExpressionError(f"{name} takes {nargs} argument(s)")
        fn = _FUNCS[name]
        args = [_compile(arg) for arg in node.args]
        if nargs == 1:
            (arg,) = args
            return lambda x: fn(arg(x))
        return lambda x: fn(args[0](x), args[1](x))
    raise ExpressionError(f"unsupported syntax: {ast.dump(node)[:60]}")


class Expression:
    """Vectorised callable built from an expression string."""

    def __init__(self, text):
        self.text = str(text)
        try:
            tree = ast.parse(self.text.replace("^", "**"), mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {self.text!r}: {exc.msg}") from None
        self._fn = _compile(tree)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            return np.asarray(self._fn(x), dtype=float)

    def __repr__(self):
        return f"Expression({self.text!r})"


def parse(text):
    return Expression(text)
