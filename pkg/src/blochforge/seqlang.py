"""A small pulse-sequence language.

::

    program  := seqdef+
    seqdef   := "seq" IDENT "{" step+ "}"
    step     := pulse | wait | loss | repeat
    pulse    := "pulse" ("x"|"z") angle param+
    wait     := "wait" NUMBER param*
    loss     := "loss" NUMBER lossparam lossparam
    repeat   := "repeat" INTEGER "{" (pulse|wait|loss)+ "}"
    angle    := NUMBER ("deg"|"rad")
    param    := ("kappa"|"delta") "=" NUMBER
    lossparam:= ("g1"|"g2") "=" NUMBER

Durations are seconds and rates Hz. ``#`` starts a comment.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

from .dyncore import TWO_PI, DriveParams
from .propagator import PeriodicBlock, Schedule, Segment

KEYWORDS = frozenset({"seq", "pulse", "wait", "loss", "repeat"})
UNITS = frozenset({"deg", "rad"})
PUNCTUATION = frozenset("{}=")

_NUMBER = re.compile(r"-?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_WORD = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


class SeqError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.message = message
        self.line = line
        self.column = column


class LexError(SeqError):
    pass


class ParseError(SeqError):
    pass


class SemanticError(SeqError):
    pass


class CompileError(SeqError):
    pass


@dataclass(frozen=True)
class Token:
    kind: str  # keyword | identifier | number | unit | punctuation
    text: str
    line: int
    column: int

    @property
    def is_integer(self) -> bool:
        return self.kind == "number" and re.fullmatch(r"-?\d+", self.text) is not None


def tokenize(source: str) -> list[Token]:
    tokens = []
    line, col, i = 1, 1, 0
    n = len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            line, col, i = line + 1, 1, i + 1
            continue
        if ch in " \t\r":
            col, i = col + 1, i + 1
            continue
        if ch == "#":
            while i < n and source[i] != "\n":
                i += 1
            continue
        m = _NUMBER.match(source, i)
        if m and (ch != "-" or m.end() > i + 1):
            text = m.group()
            if not math.isfinite(float(text)):
                raise LexError(f"number {text!r} is not finite", line, col)
            tokens.append(Token("number", text, line, col))
        elif (m := _WORD.match(source, i)) is not None:
            text = m.group()
            kind = "keyword" if text in KEYWORDS else "unit" if text in UNITS else "identifier"
            tokens.append(Token(kind, text, line, col))
        elif ch in PUNCTUATION:
            text = ch
            tokens.append(Token("punctuation", ch, line, col))
        else:
            raise LexError(f"illegal character {ch!r}", line, col)
        col += len(text)
        i += len(text)
    return tokens


# ---------------------------------------------------------------- AST


@dataclass(frozen=True)
class Pulse:
    axis: str
    angle: float
    kappa: float = 0.0
    delta: float = 0.0
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Wait:
    duration: float
    delta: float = 0.0
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Loss:
    duration: float
    gamma1: float
    gamma2: float
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Repeat:
    count: int
    body: tuple[Union[Pulse, Wait, Loss], ...]
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)


Step = Union[Pulse, Wait, Loss, Repeat]


@dataclass(frozen=True)
class SequenceAst:
    name: str
    steps: tuple[Step, ...]
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)


# ---------------------------------------------------------------- parser


def _describe(tok: Optional[Token]) -> str:
    if tok is None:
        return "end of input"
    return f"{tok.kind} {tok.text!r}"


class _Parser:
    def __init__(self, tokens: Sequence[Token]):
        self.tokens = list(tokens)
        self.pos = 0

    def peek(self) -> Optional[Token]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _where(self) -> tuple[int, int]:
        tok = self.peek()
        if tok is not None:
            return tok.line, tok.column
        if self.tokens:
            last = self.tokens[-1]
            return last.line, last.column + len(last.text)
        return 1, 1

    def fail(self, expected: Sequence[str]):
        expected = list(expected)
        alts = expected[0] if len(expected) == 1 else ", ".join(expected[:-1]) + " or " + expected[-1]
        found = _describe(self.peek())
        raise ParseError(f"expected {alts} but found {found}", *self._where())

    def accept(self, kind: str, text: Optional[str] = None) -> Optional[Token]:
        tok = self.peek()
        if tok is not None and tok.kind == kind and (text is None or tok.text == text):
            self.pos += 1
            return tok
        return None

    def expect(self, kind: str, text: Optional[str] = None, expected: Optional[Sequence[str]] = None):
        tok = self.accept(kind, text)
        if tok is None:
            self.fail(expected or [repr(text) if text else kind])
        return tok

    def number(self, what: str) -> float:
        return float(self.expect("number", expected=[what]).text)

    # program := seqdef+
    def program(self) -> list[SequenceAst]:
        seqs = [self.seqdef()]
        while self.peek() is not None:
            seqs.append(self.seqdef())
        seen = set()
        for s in seqs:
            if s.name in seen:
                raise SemanticError(f"sequence {s.name!r} defined twice", s.line, s.column)
            seen.add(s.name)
        return seqs

    def seqdef(self) -> SequenceAst:
        kw = self.expect("keyword", "seq")
        name = self.expect("identifier", expected=["sequence name"]).text
        self.expect("punctuation", "{")
        steps = self.block(allow_repeat=True)
        if not steps:
            raise SemanticError(f"sequence {name!r} has an empty body", kw.line, kw.column)
        return SequenceAst(name, tuple(steps), kw.line, kw.column)

    def block(self, allow_repeat: bool) -> list[Step]:
        starts = ["'pulse'", "'wait'", "'loss'"] + (["'repeat'"] if allow_repeat else []) + ["'}'"]
        steps = []
        while True:
            if self.accept("punctuation", "}"):
                return steps
            tok = self.peek()
            if tok is None or tok.kind != "keyword":
                self.fail(starts)
            if tok.text == "pulse":
                steps.append(self.pulse())
            elif tok.text == "wait":
                steps.append(self.wait())
            elif tok.text == "loss":
                steps.append(self.loss())
            elif tok.text == "repeat" and allow_repeat:
                steps.append(self.repeat())
            else:
                self.fail(starts)

    def params(self, names: Sequence[str], minimum: int) -> dict[str, float]:
        found: dict[str, float] = {}
        while True:
            tok = self.peek()
            if tok is None or tok.kind != "identifier" or tok.text not in names:
                break
            self.pos += 1
            if tok.text in found:
                raise SemanticError(f"duplicate parameter {tok.text!r}", tok.line, tok.column)
            self.expect("punctuation", "=")
            found[tok.text] = self.number("number")
        if len(found) < minimum:
            self.fail([repr(n) for n in names])
        return found

    def pulse(self) -> Pulse:
        kw = self.expect("keyword", "pulse")
        axis_tok = self.peek()
        if axis_tok is None or axis_tok.kind != "identifier" or axis_tok.text not in ("x", "z"):
            self.fail(["'x'", "'z'"])
        self.pos += 1
        num = self.expect("number", expected=["angle"])
        unit = self.accept("unit")
        if unit is None:
            self.fail(["'deg'", "'rad'"])
        angle = float(num.text)
        if unit.text == "deg":
            angle = math.radians(angle)
        if not angle > 0:
            raise SemanticError("pulse angle must be > 0", num.line, num.column)
        p = self.params(("kappa", "delta"), 1)
        axis = axis_tok.text
        if axis == "x":
            if p.get("kappa", 0.0) <= 0:
                raise SemanticError("x pulse needs kappa > 0", kw.line, kw.column)
        else:
            if "kappa" in p:
                raise SemanticError("z pulse does not take kappa", kw.line, kw.column)
            if p.get("delta", 0.0) == 0:
                raise SemanticError("z pulse needs delta != 0", kw.line, kw.column)
        return Pulse(axis, angle, p.get("kappa", 0.0), p.get("delta", 0.0), kw.line, kw.column)

    def wait(self) -> Wait:
        kw = self.expect("keyword", "wait")
        duration = self.number("duration")
        if duration < 0:
            raise SemanticError("wait duration must be >= 0", kw.line, kw.column)
        tok = self.peek()
        if tok is not None and tok.kind == "identifier" and tok.text == "kappa":
            raise SemanticError("wait does not take kappa", tok.line, tok.column)
        p = self.params(("delta",), 0)
        return Wait(duration, p.get("delta", 0.0), kw.line, kw.column)

    def loss(self) -> Loss:
        kw = self.expect("keyword", "loss")
        duration = self.number("duration")
        if duration < 0:
            raise SemanticError("loss duration must be >= 0", kw.line, kw.column)
        p = self.params(("g1", "g2"), 2)
        if len(p) != 2:
            self.fail(["'g1'", "'g2'"])
        return Loss(duration, p["g1"], p["g2"], kw.line, kw.column)

    def repeat(self) -> Repeat:
        kw = self.expect("keyword", "repeat")
        tok = self.peek()
        if tok is None or not tok.is_integer:
            self.fail(["integer repeat count"])
        self.pos += 1
        count = int(tok.text)
        if count < 1:
            raise SemanticError("repeat count must be >= 1", tok.line, tok.column)
        self.expect("punctuation", "{")
        body = self.block(allow_repeat=False)
        if not body:
            raise SemanticError("repeat has an empty body", kw.line, kw.column)
        return Repeat(count, tuple(body), kw.line, kw.column)


def parse_program(tokens: Sequence[Token]) -> list[SequenceAst]:
    return _Parser(tokens).program()


def parse(tokens: Sequence[Token], name: Optional[str] = None) -> SequenceAst:
    """Parse a program and return one sequence.

    With several sequences in the program, ``name`` picks one.
    """
    seqs = parse_program(tokens)
    if name is not None:
        for s in seqs:
            if s.name == name:
                return s
        raise SemanticError(f"no sequence named {name!r}", 1, 1)
    if len(seqs) > 1:
        names = ", ".join(s.name for s in seqs)
        raise SemanticError(f"program defines several sequences ({names}); pick one by name", 1, 1)
    return seqs[0]


# ---------------------------------------------------------------- unparse


def _num(x: float) -> str:
    return repr(float(x))


def _unparse_step(step: Step, indent: str) -> list[str]:
    if isinstance(step, Pulse):
        parts = [f"pulse {step.axis} {_num(step.angle)}rad"]
        if step.axis == "x":
            parts.append(f"kappa={_num(step.kappa)}")
            if step.delta != 0:
                parts.append(f"delta={_num(step.delta)}")
        else:
            parts.append(f"delta={_num(step.delta)}")
        return [indent + " ".join(parts)]
    if isinstance(step, Wait):
        text = f"wait {_num(step.duration)}"
        if step.delta != 0:
            text += f" delta={_num(step.delta)}"
        return [indent + text]
    if isinstance(step, Loss):
        return [indent + f"loss {_num(step.duration)} g1={_num(step.gamma1)} g2={_num(step.gamma2)}"]
    lines = [indent + f"repeat {step.count} {{"]
    for sub in step.body:
        lines += _unparse_step(sub, indent + "  ")
    lines.append(indent + "}")
    return lines


def unparse(ast: Union[SequenceAst, Sequence[SequenceAst]]) -> str:
    """Canonical source text; angles are written in radians at full precision."""
    seqs = [ast] if isinstance(ast, SequenceAst) else list(ast)
    lines = []
    for s in seqs:
        lines.append(f"seq {s.name} {{")
        for step in s.steps:
            lines += _unparse_step(step, "  ")
        lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- compile


def _segment(step: Union[Pulse, Wait, Loss]) -> Segment:
    if isinstance(step, Pulse):
        if step.axis == "x":
            if step.kappa <= 0:
                raise CompileError("x pulse needs kappa > 0", step.line, step.column)
            return Segment(DriveParams(step.delta, step.kappa), step.angle / (2 * TWO_PI * step.kappa))
        if step.delta == 0:
            raise CompileError("z pulse with delta = 0 never completes", step.line, step.column)
        # sign of delta sets the rotation sense
        return Segment(DriveParams(step.delta, 0.0), step.angle / (TWO_PI * abs(step.delta)))
    if isinstance(step, Wait):
        return Segment(DriveParams(step.delta, 0.0), step.duration)
    return Segment(DriveParams(0.0, 0.0, step.gamma1, step.gamma2), step.duration)


def compile_ast(ast: SequenceAst) -> Schedule:
    items = []
    for step in ast.steps:
        if isinstance(step, Repeat):
            items.append(PeriodicBlock(tuple(_segment(s) for s in step.body), step.count))
        else:
            items.append(_segment(step))
    if not items:
        raise CompileError(f"sequence {ast.name!r} is empty", ast.line, ast.column)
    schedule = Schedule(tuple(items))
    if not schedule.duration > 0:
        raise CompileError(f"sequence {ast.name!r} has zero total duration", ast.line, ast.column)
    return schedule


compile = compile_ast  # noqa: A001  (public name mirrors the language's compile step)


def compile_source(source: str, name: Optional[str] = None) -> Schedule:
    return compile_ast(parse(tokenize(source), name))


def load(path, name: Optional[str] = None) -> Schedule:
    return compile_source(Path(path).read_text(encoding="utf-8"), name)


def corpus_dir() -> Path:
    return Path(__file__).parent / "corpus"
