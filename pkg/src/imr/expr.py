"""A small, safe expression language for payoffs in model documents.

Expressions are Python-syntax arithmetic over a fixed vocabulary::

    T1, T2, ...   random times (inf if the event never happens)
    Z1, Z2, ...   marks as strings ('' if the piece is never innovated)
    t, k          current grid time and step (processes and rates)
    y, n          chain state and jump count (jump-chain targets)
    inf           infinity
    ind(c)        1.0 if c else 0.0
    active(i)     1.0 if odd index i is active at the current step
    min, max, abs, exp

Anything else (attribute access, subscripts, lambdas, unknown names) is
rejected at parse time.
"""

from __future__ import annotations

import ast
import math
import operator

_BIN = {
    ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
    ast.Div: operator.truediv, ast.Pow: operator.pow, ast.Mod: operator.mod,
}
_CMP = {
    ast.Lt: operator.lt, ast.LtE: operator.le, ast.Gt: operator.gt,
    ast.GtE: operator.ge, ast.Eq: operator.eq, ast.NotEq: operator.ne,
}
_FUNCS = {
    "ind": lambda c: 1.0 if c else 0.0,
    "min": min,
    "max": max,
    "abs": abs,
    "exp": math.exp,
}
_FIXED = {"t", "k", "y", "n", "inf", "m"}


class ExpressionError(ValueError):
    pass


def _allowed_name(name: str) -> bool:
    if name in _FIXED or name in _FUNCS or name == "active":
        return True
    return len(name) > 1 and name[0] in "TZ" and name[1:].isdigit()


class Expression:
    """Compiled expression; call with a variable mapping."""

    def __init__(self, source: str):
        self.source = source
        try:
            tree = ast.parse(source, mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {source!r}: {exc.msg}") from None
        self._check(tree.body)
        self.tree = tree.body

    def _check(self, node):
        if isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float, str, bool)):
                raise ExpressionError(f"constant {node.value!r} not allowed")
        elif isinstance(node, ast.Name):
            if not _allowed_name(node.id):
                raise ExpressionError(f"unknown name {node.id!r} in {self.source!r}")
        elif isinstance(node, ast.BinOp):
            if type(node.op) not in _BIN:
                raise ExpressionError(f"operator not allowed in {self.source!r}")
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp):
            if not isinstance(node.op, (ast.USub, ast.UAdd, ast.Not)):
                raise ExpressionError(f"operator not allowed in {self.source!r}")
            self._check(node.operand)
        elif isinstance(node, ast.Compare):
            if any(type(op) not in _CMP for op in node.ops):
                raise ExpressionError(f"comparison not allowed in {self.source!r}")
            self._check(node.left)
            for c in node.comparators:
                self._check(c)
        elif isinstance(node, ast.BoolOp):
            for v in node.values:
                self._check(v)
        elif isinstance(node, ast.IfExp):
            for v in (node.test, node.body, node.orelse):
                self._check(v)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or not (node.func.id in _FUNCS or node.func.id == "active"):
                raise ExpressionError(f"call not allowed in {self.source!r}")
            if node.keywords:
                raise ExpressionError(f"keyword arguments not allowed in {self.source!r}")
            for a in node.args:
                self._check(a)
        else:
            raise ExpressionError(f"syntax {type(node).__name__} not allowed in {self.source!r}")

    def _eval(self, node, env):
        if isinstance(node, ast.Constant):
            return node.value
        if isinstance(node, ast.Name):
            if node.id == "inf":
                return math.inf
            try:
                return env[node.id]
            except KeyError:
                raise ExpressionError(f"name {node.id!r} unavailable here") from None
        if isinstance(node, ast.BinOp):
            return _BIN[type(node.op)](self._eval(node.left, env), self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            v = self._eval(node.operand, env)
            if isinstance(node.op, ast.USub):
                return -v
            if isinstance(node.op, ast.UAdd):
                return +v
            return not v
        if isinstance(node, ast.Compare):
            left = self._eval(node.left, env)
            for op, comp in zip(node.ops, node.comparators):
                right = self._eval(comp, env)
                if not _CMP[type(op)](left, right):
                    return False
                left = right
            return True
        if isinstance(node, ast.BoolOp):
            vals = (self._eval(v, env) for v in node.values)
            return all(vals) if isinstance(node.op, ast.And) else any(vals)
        if isinstance(node, ast.IfExp):
            return self._eval(node.body if self._eval(node.test, env) else node.orelse, env)
        # ast.Call
        name = node.func.id
        args = [self._eval(a, env) for a in node.args]
        if name == "active":
            fn = env.get("active")
            if fn is None:
                raise ExpressionError("active() needs a current step")
            return fn(*args)
        return _FUNCS[name](*args)

    def __call__(self, env) -> float:
        return float(self._eval(self.tree, env))


def path_env(path) -> dict:
    """Times ``T_i`` and marks ``Z_i`` of a path."""
    env = {}
    for i, (a, b) in enumerate(path.times, start=1):
        env[f"T{2 * i - 1}"] = a
        env[f"T{2 * i}"] = b
        env[f"Z{2 * i - 1}"] = path.marks[i - 1]
        env[f"Z{2 * i}"] = path.marks[i - 1]
    return env


def step_env(path, k) -> dict:
    """``path_env`` plus the current time, step and active-index test."""
    env = path_env(path)
    t = path.grid[k]
    env["t"] = t
    env["k"] = k

    def active(i):
        piece = (int(i) + 1) // 2
        a, b = path.times[piece - 1]
        return 1.0 if a <= t < b else 0.0

    env["active"] = active
    return env
