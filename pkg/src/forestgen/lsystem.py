"""Parametric, stochastic, context-sensitive L-systems.

Grammar source format (one statement per line, ``#`` starts a comment)::

    axiom: !(2)A(10, 1)
    const lr = 0.9              # fixed constant
    const ba = 0.3 .. 0.5       # sampled uniformly from [0.3, 0.5) on every use
    ignore: +-&/!$
    p1: A(l,w) -> !(w)F(l)[&(22.5deg)B(0.6*l, 0.707*w)]/(137.5deg)A(0.9*l, 0.707*w) : 0.4

A production is ``[label:] [lctx <] pred [> rctx] [: cond] -> successor [: prob]``.
Symbols are single characters.  Numeric literals may carry a ``deg`` (or ``°``)
suffix to convert degrees to radians.  A missing probability means 1.
"""

from __future__ import annotations

import math
import operator
import re
from dataclasses import dataclass, field
from typing import Union

BRACKETS = "[]"
MAX_MODULES = 10_000_000


class LSystemError(ValueError):
    pass


class GrammarSyntaxError(LSystemError):
    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class EvaluationError(LSystemError):
    pass


@dataclass(frozen=True)
class LModule:
    symbol: str
    params: tuple[float, ...] = ()

    def __str__(self):
        if not self.params:
            return self.symbol
        return f"{self.symbol}({', '.join(_fmt(p) for p in self.params)})"


def _fmt(x: float) -> str:
    return repr(float(x)) if x != int(x) else str(int(x))


def modules_to_string(modules) -> str:
    return "".join(str(m) for m in modules)


# ---------------------------------------------------------------------------
# expressions

Expr = Union["Num", "Name", "Unary", "Binary"]


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Name:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    operand: Expr


@dataclass(frozen=True)
class Binary:
    op: str
    left: Expr
    right: Expr


_BINOPS = {
    "+": operator.add,
    "-": operator.sub,
    "*": operator.mul,
    "<": lambda a, b: float(a < b),
    "<=": lambda a, b: float(a <= b),
    ">": lambda a, b: float(a > b),
    ">=": lambda a, b: float(a >= b),
    "=": lambda a, b: float(a == b),
    "==": lambda a, b: float(a == b),
    "!=": lambda a, b: float(a != b),
    "&&": lambda a, b: float(bool(a) and bool(b)),
    "||": lambda a, b: float(bool(a) or bool(b)),
}


def eval_expr(expr: Expr, bindings: dict, constants: dict | None = None, rng=None) -> float:
    """Evaluate ``expr``.  Comparisons give 1.0 or 0.0.

    Constants may be a number or a ``(lo, hi)`` range; ranged constants draw a
    fresh uniform sample from ``rng`` at each use.
    """
    constants = constants or {}
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Name):
        if expr.name in bindings:
            return bindings[expr.name]
        if expr.name in constants:
            value = constants[expr.name]
            if isinstance(value, tuple):
                if rng is None:
                    raise EvaluationError(f"ranged constant {expr.name!r} needs a random stream")
                return rng.uniform(*value)
            return value
        raise EvaluationError(f"unbound identifier {expr.name!r}")
    if isinstance(expr, Unary):
        v = eval_expr(expr.operand, bindings, constants, rng)
        return -v if expr.op == "-" else float(not v)
    if isinstance(expr, Binary):
        a = eval_expr(expr.left, bindings, constants, rng)
        b = eval_expr(expr.right, bindings, constants, rng)
        if expr.op == "/":
            if b == 0:
                raise EvaluationError("division by zero")
            return a / b
        if expr.op == "^":
            return a ** b
        return _BINOPS[expr.op](a, b)
    raise TypeError(f"not an expression: {expr!r}")


def expr_names(expr: Expr) -> set[str]:
    if isinstance(expr, Name):
        return {expr.name}
    if isinstance(expr, Unary):
        return expr_names(expr.operand)
    if isinstance(expr, Binary):
        return expr_names(expr.left) | expr_names(expr.right)
    return set()


_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?(?:deg|°)?)
  | (?P<name>[A-Za-z_]\w*)
  | (?P<op><=|>=|==|!=|&&|\|\||[-+*/^<>=!(),])
""", re.VERBOSE)


class _ExprParser:
    """Recursive-descent parser over one expression string."""

    def __init__(self, text: str, line: int, col0: int):
        self.tokens = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m:
                raise GrammarSyntaxError(f"unexpected character {text[pos]!r}", line, col0 + pos)
            if m.lastgroup != "ws":
                self.tokens.append((m.lastgroup, m.group(), col0 + pos))
            pos = m.end()
        self.i = 0
        self.line = line
        self.end_col = col0 + len(text)

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None, self.end_col)

    def take(self, value=None):
        kind, tok, col = self.peek()
        if kind is None or (value is not None and tok != value):
            raise GrammarSyntaxError(f"expected {value or 'token'}, found {tok or 'end'}", self.line, col)
        self.i += 1
        return kind, tok, col

    def parse(self) -> Expr:
        e = self.logic()
        if self.i != len(self.tokens):
            _, tok, col = self.peek()
            raise GrammarSyntaxError(f"unexpected {tok!r}", self.line, col)
        return e

    def logic(self):
        e = self.compare()
        while self.peek()[1] in ("&&", "||"):
            op = self.take()[1]
            e = Binary(op, e, self.compare())
        return e

    def compare(self):
        e = self.additive()
        while self.peek()[1] in ("<", "<=", ">", ">=", "=", "==", "!="):
            op = self.take()[1]
            e = Binary(op, e, self.additive())
        return e

    def additive(self):
        e = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            e = Binary(op, e, self.term())
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            e = Binary(op, e, self.unary())
        return e

    def unary(self):
        if self.peek()[1] in ("-", "!"):
            op = self.take()[1]
            return Unary(op, self.unary())
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return Binary("^", base, self.unary())
        return base

    def atom(self):
        kind, tok, col = self.take()
        if kind == "num":
            if tok.endswith("deg"):
                return Num(math.radians(float(tok[:-3])))
            if tok.endswith("°"):
                return Num(math.radians(float(tok[:-1])))
            return Num(float(tok))
        if kind == "name":
            if tok == "pi":
                return Num(math.pi)
            return Name(tok)
        if tok == "(":
            e = self.logic()
            self.take(")")
            return e
        raise GrammarSyntaxError(f"unexpected {tok!r}", self.line, col)


def parse_expr(text: str, line: int = 1, column: int = 1) -> Expr:
    return _ExprParser(text, line, column).parse()


# ---------------------------------------------------------------------------
# grammar


@dataclass(frozen=True)
class ModulePattern:
    """Predecessor or context module with formal parameter names."""
    symbol: str
    formals: tuple[str, ...] = ()


@dataclass(frozen=True)
class SuccessorModule:
    symbol: str
    exprs: tuple[Expr, ...] = ()


@dataclass(frozen=True)
class Production:
    predecessor: ModulePattern
    successor: tuple[SuccessorModule, ...]
    left_context: tuple[ModulePattern, ...] = ()
    right_context: tuple[ModulePattern, ...] = ()
    condition: Expr | None = None
    probability: float = 1.0
    label: str = ""
    condition_text: str = ""

    @property
    def specificity(self) -> int:
        return len(self.left_context) + len(self.right_context)

    @property
    def group_key(self):
        """Productions that are alternatives for each other share this key."""
        return (self.predecessor.symbol, len(self.predecessor.formals),
                self.left_context, self.right_context, self.condition_text)


@dataclass(frozen=True)
class LSystemDef:
    axiom: tuple[LModule, ...]
    productions: tuple[Production, ...]
    constants: dict = field(default_factory=dict)
    ignore: frozenset = frozenset()

    def __post_init__(self):
        if not self.axiom:
            raise LSystemError("axiom must not be empty")
        _check_brackets(self.axiom, "axiom")
        _check_probabilities(self.productions)
        for i, p in enumerate(self.productions):
            _check_brackets(p.successor, f"production {p.label or i + 1}")

    def with_constants(self, **constants) -> "LSystemDef":
        merged = dict(self.constants)
        merged.update(constants)
        return LSystemDef(self.axiom, self.productions, merged, self.ignore)


def _check_brackets(modules, what: str):
    depth = 0
    for m in modules:
        if m.symbol == "[":
            depth += 1
        elif m.symbol == "]":
            depth -= 1
            if depth < 0:
                raise LSystemError(f"unbalanced brackets in {what}")
    if depth:
        raise LSystemError(f"unbalanced brackets in {what}")


def _check_probabilities(productions):
    totals: dict = {}
    first: dict = {}
    for p in productions:
        totals[p.group_key] = totals.get(p.group_key, 0.0) + p.probability
        first.setdefault(p.group_key, p)
    for key, total in totals.items():
        if abs(total - 1.0) > 1e-9:
            p = first[key]
            raise LSystemError(
                f"probabilities for {p.predecessor.symbol!r} "
                f"(production {p.label or '?'}) sum to {total:g}, expected 1")


def _split_top(text: str, sep: str) -> list[tuple[str, int]]:
    """Split on ``sep`` outside parentheses, returning (piece, offset) pairs."""
    pieces, depth, start = [], 0, 0
    i = 0
    while i < len(text):
        c = text[i]
        if c == "(":
            depth += 1
        elif c == ")":
            depth -= 1
        elif depth == 0 and text.startswith(sep, i):
            pieces.append((text[start:i], start))
            start = i + len(sep)
            i += len(sep)
            continue
        i += 1
    pieces.append((text[start:], start))
    return pieces


def _scan_modules(text: str, line: int, col0: int):
    """Yield (symbol, argument-text or None, column) for a module string."""
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c in "()":
            raise GrammarSyntaxError(f"unexpected {c!r}", line, col0 + i)
        col = col0 + i
        i += 1
        j = i
        while j < n and text[j].isspace():
            j += 1
        if j < n and text[j] == "(" and c not in BRACKETS:
            depth = 0
            k = j
            while k < n:
                if text[k] == "(":
                    depth += 1
                elif text[k] == ")":
                    depth -= 1
                    if depth == 0:
                        break
                k += 1
            if k >= n:
                raise GrammarSyntaxError("unclosed parenthesis", line, col0 + j)
            yield c, text[j + 1:k], col, col0 + j + 1
            i = k + 1
        else:
            yield c, None, col, None


def _parse_patterns(text: str, line: int, col0: int) -> tuple[ModulePattern, ...]:
    out = []
    for sym, args, col, _ in _scan_modules(text, line, col0):
        formals = ()
        if args is not None:
            formals = tuple(a.strip() for a in args.split(","))
            for f in formals:
                if not re.fullmatch(r"[A-Za-z_]\w*", f):
                    raise GrammarSyntaxError(f"bad formal parameter {f!r}", line, col)
        out.append(ModulePattern(sym, formals))
    return tuple(out)


def _parse_successor(text: str, line: int, col0: int) -> tuple[SuccessorModule, ...]:
    out = []
    for sym, args, col, acol in _scan_modules(text, line, col0):
        exprs = ()
        if args is not None:
            exprs = tuple(parse_expr(a, line, acol + off) for a, off in _split_top(args, ","))
        out.append(SuccessorModule(sym, exprs))
    return tuple(out)


def parse_modules(text: str, constants: dict | None = None) -> tuple[LModule, ...]:
    """Parse a concrete module string such as ``!(2)A(10, 1)``."""
    mods = []
    for sm in _parse_successor(text, 1, 1):
        mods.append(LModule(sm.symbol, tuple(eval_expr(e, {}, constants or {}) for e in sm.exprs)))
    return tuple(mods)


_LABEL = re.compile(r"\s*([A-Za-z_]\w+)\s*$")


def _parse_production(text: str, line: int, col0: int) -> Production:
    parts = _split_top(text, "->")
    if len(parts) != 2:
        raise GrammarSyntaxError("expected exactly one '->'", line, col0)
    (lhs, _), (rhs, rhs_off) = parts
    rhs_parts = _split_top(rhs, ":")
    probability = 1.0
    succ_text, succ_off = rhs_parts[0]
    if len(rhs_parts) == 2:
        ptext, poff = rhs_parts[1]
        probability = eval_expr(parse_expr(ptext, line, col0 + rhs_off + poff), {})
        if not 0 < probability <= 1:
            raise GrammarSyntaxError(f"probability {probability} outside (0, 1]", line, col0 + rhs_off + poff)
    elif len(rhs_parts) > 2:
        raise GrammarSyntaxError("too many ':' in successor", line, col0 + rhs_off)
    successor = _parse_successor(succ_text, line, col0 + rhs_off + succ_off)

    lparts = _split_top(lhs, ":")
    label = ""
    if len(lparts) >= 2 and _LABEL.fullmatch(lparts[0][0]):
        label = lparts[0][0].strip()
        lparts = lparts[1:]
    if len(lparts) > 2:
        raise GrammarSyntaxError("too many ':' in predecessor", line, col0)
    pred_text, pred_off = lparts[0]
    condition = None
    cond_text = ""
    if len(lparts) == 2:
        cond_text = lparts[1][0].strip()
        condition = parse_expr(lparts[1][0], line, col0 + lparts[1][1])

    left, right = (), ()
    lt = _split_top(pred_text, "<")
    if len(lt) > 2:
        raise GrammarSyntaxError("more than one '<'", line, col0 + pred_off)
    if len(lt) == 2:
        left = _parse_patterns(lt[0][0], line, col0 + pred_off)
        core, core_off = lt[1][0], pred_off + lt[1][1]
    else:
        core, core_off = pred_text, pred_off
    rt = _split_top(core, ">")
    if len(rt) > 2:
        raise GrammarSyntaxError("more than one '>'", line, col0 + core_off)
    if len(rt) == 2:
        right = _parse_patterns(rt[1][0], line, col0 + core_off + rt[1][1])
        core = rt[0][0]
    pred = _parse_patterns(core, line, col0 + core_off)
    if len(pred) != 1:
        raise GrammarSyntaxError("predecessor must be exactly one module", line, col0 + core_off)
    return Production(pred[0], successor, left, right, condition, probability, label, cond_text)


def parse_lsystem(text: str) -> LSystemDef:
    axiom = None
    constants: dict = {}
    ignore: set = set()
    productions = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        stripped = line.lstrip()
        col = len(line) - len(stripped) + 1
        m = re.match(r"(axiom|ω|w)\s*:(?!.*->)(.*)$", stripped)
        if m:
            if axiom is not None:
                raise GrammarSyntaxError("axiom declared twice", lineno, col)
            body = m.group(2)
            off = col + m.start(2)
            succ = _parse_successor(body, lineno, off)
            try:
                axiom = tuple(LModule(s.symbol, tuple(eval_expr(e, {}, constants) for e in s.exprs))
                              for s in succ)
            except EvaluationError as exc:
                raise GrammarSyntaxError(str(exc), lineno, off) from exc
            continue
        m = re.match(r"const\s+([A-Za-z_]\w*)\s*=\s*(.+)$", stripped)
        if m:
            name, value = m.group(1), m.group(2)
            vcol = col + m.start(2)
            if ".." in value:
                lo_t, hi_t = value.split("..", 1)
                lo = eval_expr(parse_expr(lo_t, lineno, vcol), {}, constants)
                hi = eval_expr(parse_expr(hi_t, lineno, vcol), {}, constants)
                if lo > hi:
                    raise GrammarSyntaxError("range lower bound exceeds upper bound", lineno, vcol)
                constants[name] = (lo, hi)
            else:
                try:
                    constants[name] = eval_expr(parse_expr(value, lineno, vcol), {}, constants)
                except EvaluationError as exc:
                    raise GrammarSyntaxError(str(exc), lineno, vcol) from exc
            continue
        m = re.match(r"ignore\s*:(.*)$", stripped)
        if m:
            ignore.update(c for c in m.group(1) if not c.isspace())
            continue
        if "->" not in stripped:
            raise GrammarSyntaxError("expected 'axiom:', 'const', 'ignore:' or a production", lineno, col)
        productions.append(_parse_production(stripped, lineno, col))
    if axiom is None:
        raise GrammarSyntaxError("missing axiom", max(1, len(text.splitlines())), 1)
    for p in productions:
        known = set(p.predecessor.formals) | set(constants) | {"pi"}
        for ctx in p.left_context + p.right_context:
            known |= set(ctx.formals)
        exprs = [e for s in p.successor for e in s.exprs]
        if p.condition is not None:
            exprs.append(p.condition)
        for e in exprs:
            unknown = expr_names(e) - known
            if unknown:
                raise LSystemError(f"production {p.label or p.predecessor.symbol}: "
                                   f"unknown identifier(s) {sorted(unknown)}")
    try:
        return LSystemDef(tuple(axiom), tuple(productions), constants, frozenset(ignore))
    except LSystemError:
        raise


# ---------------------------------------------------------------------------
# derivation


def _bind(pattern: ModulePattern, module: LModule, bindings: dict) -> bool:
    if pattern.symbol != module.symbol or len(pattern.formals) != len(module.params):
        return False
    for name, value in zip(pattern.formals, module.params):
        bindings[name] = value
    return True


def _match_left(string, index, context, ignore, bindings) -> bool:
    """Match ``context`` against the modules preceding ``index``.

    Complete bracketed branches are skipped; an opening bracket is stepped over
    so a branch sees its parent's modules as left context.
    """
    i = index - 1
    for pattern in reversed(context):
        while True:
            if i < 0:
                return False
            sym = string[i].symbol
            if sym == "]":
                depth = 1
                i -= 1
                while i >= 0 and depth:
                    if string[i].symbol == "]":
                        depth += 1
                    elif string[i].symbol == "[":
                        depth -= 1
                    i -= 1
                continue
            if sym == "[" or sym in ignore:
                i -= 1
                continue
            break
        if not _bind(pattern, string[i], bindings):
            return False
        i -= 1
    return True


def _match_right(string, index, context, ignore, bindings) -> bool:
    """Match ``context`` against the modules following ``index``.

    A ``[`` in the pattern descends into the next branch; otherwise branches
    are skipped whole.  A ``]`` in the string ends the current branch.
    """
    i = index + 1
    n = len(string)
    for pattern in context:
        while True:
            if i >= n:
                return False
            sym = string[i].symbol
            if pattern.symbol == "[" and sym == "[":
                break
            if pattern.symbol == "]":
                # skip to the end of the current branch
                depth = 0
                while i < n:
                    s = string[i].symbol
                    if s == "[":
                        depth += 1
                    elif s == "]":
                        if depth == 0:
                            break
                        depth -= 1
                    i += 1
                if i >= n:
                    return False
                break
            if sym == "[":
                depth = 1
                i += 1
                while i < n and depth:
                    if string[i].symbol == "[":
                        depth += 1
                    elif string[i].symbol == "]":
                        depth -= 1
                    i += 1
                continue
            if sym == "]":
                return False
            if sym in ignore:
                i += 1
                continue
            break
        if pattern.symbol in BRACKETS:
            i += 1
            continue
        if not _bind(pattern, string[i], bindings):
            return False
        i += 1
    return True


def match_context(string, index: int, production: Production, ignore=frozenset()):
    """Return parameter bindings if ``production`` applies at ``index``, else None."""
    bindings: dict = {}
    if not _bind(production.predecessor, string[index], bindings):
        return None
    if production.left_context and not _match_left(string, index, production.left_context, ignore, bindings):
        return None
    if production.right_context and not _match_right(string, index, production.right_context, ignore, bindings):
        return None
    return bindings


def _candidates(defn: LSystemDef):
    """Productions per symbol grouped into alternatives, most specific first."""
    table: dict = {}
    for order, p in enumerate(defn.productions):
        groups = table.setdefault(p.predecessor.symbol, {})
        groups.setdefault(p.group_key, (order, []))[1].append(p)
    out = {}
    for sym, groups in table.items():
        ordered = sorted(groups.values(), key=lambda g: (-g[1][0].specificity, g[0]))
        out[sym] = [g[1] for g in ordered]
    return out


def _select(group, rng):
    if len(group) == 1:
        return group[0]
    u = rng.random()
    acc = 0.0
    for p in group:
        acc += p.probability
        if u < acc:
            return p
    return group[-1]


def derive_step(defn: LSystemDef, string, rng, _table=None, max_modules=MAX_MODULES):
    table = _table if _table is not None else _candidates(defn)
    out: list[LModule] = []
    for index, module in enumerate(string):
        groups = table.get(module.symbol)
        chosen = None
        if groups:
            for group in groups:
                bindings = match_context(string, index, group[0], defn.ignore)
                if bindings is None:
                    continue
                if group[0].condition is not None:
                    try:
                        ok = eval_expr(group[0].condition, bindings, defn.constants, rng)
                    except EvaluationError as exc:
                        raise EvaluationError(f"production {group[0].label or module.symbol}: {exc}") from exc
                    if not ok:
                        continue
                chosen = _select(group, rng)
                break
        if chosen is None:
            out.append(module)
            continue
        try:
            for sm in chosen.successor:
                out.append(LModule(sm.symbol, tuple(eval_expr(e, bindings, defn.constants, rng)
                                                    for e in sm.exprs)))
        except EvaluationError as exc:
            raise EvaluationError(f"production {chosen.label or module.symbol}: {exc}") from exc
        if len(out) > max_modules:
            raise LSystemError(f"derivation exceeded {max_modules} modules")
    return out


def derive(defn: LSystemDef, n: int, rng, max_modules: int = MAX_MODULES) -> list[LModule]:
    """Apply ``n`` parallel rewriting steps to the axiom."""
    if n < 0:
        raise ValueError("iteration count must be >= 0")
    table = _candidates(defn)
    string = list(defn.axiom)
    for _ in range(n):
        string = derive_step(defn, string, rng, table, max_modules)
    return string


TWIG_SOURCE = """\
# Twig grammar: simplified alternating monopodial branch
axiom: !(2)A(10, 1)
p1: A(l,w) -> !(w)F(l)[&(22.5deg)B(0.6*l, 0.707*w)]/(137.5deg)A(0.9*l, 0.707*w) : 0.4
p2: A(l,w) -> !(w)F(l)A(0.9*l, 0.707*w) : 0.6
p3: B(l,w) -> !(w)F(l)[+(-22.5deg)$A(0.9*l, 0.707*w)] : 0.3
p4: B(l,w) -> !(w)F(l) : 0.7
"""


def twig_lsystem() -> LSystemDef:
    return parse_lsystem(TWIG_SOURCE)
