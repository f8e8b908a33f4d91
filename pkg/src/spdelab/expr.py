"""Tiny expression language for user-supplied coefficients and scales.

Grammar (recursive descent):

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := '-' factor | power
    power  := atom ('**' factor)?
    atom   := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Functions: exp, sin, cos, tanh, min, max.  Constants: pi, e.
The variable set is declared at compile time (e.g. {"t", "x", "r"}).
Compiled expressions evaluate on numpy arrays and are picklable.
"""

import re
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

_FUNCTIONS = {
    "exp": (1, np.exp),
    "sin": (1, np.sin),
    "cos": (1, np.cos),
    "tanh": (1, np.tanh),
    "min": (2, np.minimum),
    "max": (2, np.maximum),
}

_CONSTANTS = {"pi": np.pi, "e": np.e}

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/(),]))"
)


class _Node:
    pass


@dataclass(frozen=True)
class _Num(_Node):
    value: float

    def eval(self, env):
        return self.value


@dataclass(frozen=True)
class _Var(_Node):
    name: str

    def eval(self, env):
        return env[self.name]


@dataclass(frozen=True)
class _Neg(_Node):
    arg: _Node

    def eval(self, env):
        return -self.arg.eval(env)


@dataclass(frozen=True)
class _BinOp(_Node):
    op: str
    left: _Node
    right: _Node

    def eval(self, env):
        a = self.left.eval(env)
        b = self.right.eval(env)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if self.op == "/":
            return a / b
        return a ** b


@dataclass(frozen=True)
class _Call(_Node):
    func: str
    args: tuple

    def eval(self, env):
        fn = _FUNCTIONS[self.func][1]
        return fn(*(a.eval(env) for a in self.args))


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            rest = text[pos:].strip()
            if not rest:
                break
            raise ConfigError(f"unrecognized input in expression near {rest[:10]!r}")
        tokens.append((m.lastgroup, m.group(m.lastgroup)))
        pos = m.end()
    tokens.append(("end", ""))
    return tokens


class _Parser:
    def __init__(self, tokens, variables):
        self.tokens = tokens
        self.pos = 0
        self.variables = frozenset(variables)

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value):
        kind, text = self.next()
        if text != value:
            raise ConfigError(f"expected {value!r} in expression, got {text!r}")

    def parse(self):
        node = self.expr()
        kind, text = self.next()
        if kind != "end":
            raise ConfigError(f"unexpected trailing token {text!r} in expression")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.next()[1]
            node = _BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[1] in ("*", "/"):
            op = self.next()[1]
            node = _BinOp(op, node, self.factor())
        return node

    def factor(self):
        # unary minus binds looser than '**', matching Python: -2**2 == -4
        if self.peek()[1] == "-":
            self.next()
            return _Neg(self.factor())
        return self.power()

    def power(self):
        node = self.atom()
        if self.peek()[1] == "**":
            self.next()
            node = _BinOp("**", node, self.factor())
        return node

    def atom(self):
        kind, text = self.next()
        if kind == "num":
            return _Num(float(text))
        if kind == "name":
            if self.peek()[1] == "(":
                if text not in _FUNCTIONS:
                    raise ConfigError(f"unknown function {text!r} in expression")
                self.next()
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.next()
                    args.append(self.expr())
                self.expect(")")
                arity = _FUNCTIONS[text][0]
                if len(args) != arity:
                    raise ConfigError(f"{text} takes {arity} argument(s), got {len(args)}")
                return _Call(text, tuple(args))
            if text in _CONSTANTS:
                return _Num(_CONSTANTS[text])
            if text not in self.variables:
                raise ConfigError(
                    f"unknown variable {text!r}; allowed: {sorted(self.variables)}"
                )
            return _Var(text)
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ConfigError(f"unexpected token {text!r} in expression")


@dataclass(frozen=True)
class CompiledExpression:
    """Parsed expression; call with keyword arguments for each variable."""

    source: str
    variables: frozenset
    root: _Node

    def __call__(self, **env):
        missing = self.variables - env.keys()
        if missing:
            raise ConfigError(f"missing variables {sorted(missing)} for {self.source!r}")
        return self.root.eval(env)


def compile_expression(text, variables):
    """Compile an expression over the given variable names."""
    parser = _Parser(_tokenize(text), variables)
    return CompiledExpression(text, frozenset(variables), parser.parse())
