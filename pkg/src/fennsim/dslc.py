"""One-pass compiler from the C-like neuron-model language to vector
assembly, with a fixed-point type system.

Pipeline: tokenize -> recursive-descent parse -> typecheck (one traversal,
inserting conversion shifts and multiply result shifts) -> codegen (one
traversal, linear register allocation over v1-v31).  A host-side
interpreter of the typed AST provides the semantic reference used by the
differential tests; it performs the same fxp operations in the same
order, including stochastic-rounding RNG consumption.

Supported surface: assignments (=, +=, -=), if/else with braced blocks,
arithmetic (+ - * and parentheses, unary minus), comparisons
(== != < <= > >=), and calls to declared event emitters such as
``Spike()``.  No loops or user function calls; the supported neuron
kernels need none.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .fxp import QFormat, RoundMode, quantize

NUM_LANES = 32


class CompileError(Exception):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        self.line, self.col = line, col
        where = f" at line {line}, column {col}" if line else ""
        super().__init__(msg + where)


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+|//[^\n]*)
  | (?P<num>\d+\.\d*|\.\d+|\d+)
  | (?P<name>[A-Za-z_]\w*)
  | (?P<op>\+=|-=|==|!=|<=|>=|[-+*(){};=<>!])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str   # "num" | "name" | "op" | "eof"
    text: str
    line: int
    col: int


def tokenize(code: str) -> list[Token]:
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(code):
        m = _TOKEN_RE.match(code, pos)
        if not m:
            raise CompileError(f"unexpected character {code[pos]!r}", line, col)
        kind = m.lastgroup
        text = m.group()
        if kind != "ws":
            tokens.append(Token(kind, text, line, col))
        nl = text.count("\n")
        if nl:
            line += nl
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass
class Node:
    line: int = 0
    col: int = 0


@dataclass
class Num(Node):
    value: float = 0.0
    fmt: QFormat | None = None      # set by typecheck
    raw: int = 0


@dataclass
class Name(Node):
    ident: str = ""
    fmt: QFormat | None = None


@dataclass
class BinOp(Node):
    op: str = "+"
    lhs: Node = None
    rhs: Node = None
    fmt: QFormat | None = None
    shift: int = 0                  # multiply result shift


@dataclass
class Neg(Node):
    child: Node = None
    fmt: QFormat | None = None


@dataclass
class Convert(Node):
    child: Node = None
    from_fmt: QFormat | None = None
    to_fmt: QFormat | None = None

    @property
    def fmt(self):
        return self.to_fmt

    @property
    def shift(self) -> int:
        # Positive: arithmetic right shift; negative: left shift.
        return self.from_fmt.frac_bits - self.to_fmt.frac_bits


@dataclass
class Compare(Node):
    op: str = ">="
    lhs: Node = None
    rhs: Node = None


@dataclass
class Assign(Node):
    target: str = ""
    aug: str = ""                  # "", "+", "-"
    expr: Node = None


@dataclass
class If(Node):
    cond: Compare = None
    then: list = field(default_factory=list)
    orelse: list = field(default_factory=list)


@dataclass
class Emit(Node):
    event: str = ""


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0

    def peek(self) -> Token:
        return self.toks[self.i]

    def next(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        t = self.next()
        if t.text != text:
            shown = t.text or "end of input"
            raise CompileError(f"expected {text!r}, found {shown!r}", t.line, t.col)
        return t

    def statements(self, until: str | None = None) -> list[Node]:
        out = []
        while True:
            t = self.peek()
            if t.kind == "eof" or (until and t.text == until):
                return out
            out.append(self.statement())

    def statement(self) -> Node:
        t = self.peek()
        if t.text == "if":
            return self.if_stmt()
        if t.kind != "name":
            raise CompileError(f"expected a statement, found {t.text!r}",
                               t.line, t.col)
        name = self.next()
        t = self.peek()
        if t.text == "(":
            self.next()
            self.expect(")")
            self.expect(";")
            return Emit(name.line, name.col, event=name.text)
        if t.text in ("=", "+=", "-="):
            op = self.next().text
            expr = self.expr()
            self.expect(";")
            return Assign(name.line, name.col, target=name.text,
                          aug=op[0] if len(op) == 2 else "", expr=expr)
        raise CompileError(f"expected '=', '+=', '-=' or a call, found {t.text!r}",
                           t.line, t.col)

    def if_stmt(self) -> If:
        kw = self.next()
        self.expect("(")
        cond = self.comparison()
        self.expect(")")
        self.expect("{")
        then = self.statements("}")
        self.expect("}")
        orelse = []
        if self.peek().text == "else":
            self.next()
            self.expect("{")
            orelse = self.statements("}")
            self.expect("}")
        return If(kw.line, kw.col, cond=cond, then=then, orelse=orelse)

    def comparison(self) -> Compare:
        lhs = self.expr()
        t = self.next()
        if t.text not in ("==", "!=", "<", "<=", ">", ">="):
            raise CompileError(f"expected a comparison operator, found {t.text!r}",
                               t.line, t.col)
        rhs = self.expr()
        return Compare(t.line, t.col, op=t.text, lhs=lhs, rhs=rhs)

    def expr(self) -> Node:
        node = self.term()
        while self.peek().text in ("+", "-"):
            t = self.next()
            node = BinOp(t.line, t.col, op=t.text, lhs=node, rhs=self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.peek().text == "*":
            t = self.next()
            node = BinOp(t.line, t.col, op="*", lhs=node, rhs=self.factor())
        return node

    def factor(self) -> Node:
        t = self.next()
        if t.text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if t.text == "-":
            return Neg(t.line, t.col, child=self.factor())
        if t.kind == "num":
            return Num(t.line, t.col, value=float(t.text))
        if t.kind == "name":
            return Name(t.line, t.col, ident=t.text)
        shown = t.text or "end of input"
        raise CompileError(f"expected an expression, found {shown!r}",
                           t.line, t.col)


def parse(code: str) -> list[Node]:
    """Parse kernel source to a statement list (pragmas stripped)."""
    body = "\n".join(l for l in code.split("\n")
                     if not l.strip().startswith("#pragma"))
    return _Parser(tokenize(body)).statements()


def parse_pragmas(code: str) -> RoundMode:
    mode = RoundMode.TO_ZERO
    for l in code.split("\n"):
        l = l.strip()
        if l.startswith("#pragma"):
            parts = l.split()
            if len(parts) == 3 and parts[1] == "rounding":
                try:
                    mode = {"zero": RoundMode.TO_ZERO,
                            "nearest": RoundMode.TO_NEAREST,
                            "stochastic": RoundMode.STOCHASTIC}[parts[2]]
                except KeyError:
                    raise CompileError(f"unknown rounding pragma {parts[2]!r}")
            else:
                raise CompileError(f"bad pragma {l!r}")
    return mode


# ---------------------------------------------------------------------------
# Kernel environment and typechecking
# ---------------------------------------------------------------------------

@dataclass
class KernelSource:
    """A kernel plus its environment.

    params: name -> (value, QFormat); value may be a float (quantized) or
    an int tagged raw via ``raw_params``.
    vars: name -> QFormat.
    events: declared event emitter names.
    """

    code: str
    params: dict[str, tuple[float, QFormat]] = field(default_factory=dict)
    vars: dict[str, QFormat] = field(default_factory=dict)
    events: tuple[str, ...] = ()
    raw_params: frozenset[str] = frozenset()

    def param_raw(self, name: str) -> int:
        value, fmt = self.params[name]
        if name in self.raw_params:
            return int(value) & 0xFFFF
        return quantize(value, fmt, name) & 0xFFFF


def _fmt_of(node: Node) -> QFormat:
    return node.fmt


class _TypeChecker:
    def __init__(self, src: KernelSource):
        self.src = src
        self.visits = 0    # traversal counter for the linearity smoke test

    def lookup(self, node: Name) -> QFormat:
        if node.ident in self.src.vars:
            return self.src.vars[node.ident]
        if node.ident in self.src.params:
            return self.src.params[node.ident][1]
        raise CompileError(f"unresolved identifier {node.ident}",
                           node.line, node.col)

    def _convert(self, node: Node, to: QFormat) -> Node:
        f = node.fmt
        if f.frac_bits == to.frac_bits:
            node.fmt = to if not isinstance(node, (Convert,)) else node.fmt
            return node
        conv = Convert(node.line, node.col, child=node, from_fmt=f, to_fmt=to)
        if not 0 <= abs(conv.shift) <= 15:
            raise CompileError(
                f"conversion {f.name} -> {to.name} needs shift {conv.shift} "
                "outside [0, 15]", node.line, node.col)
        return conv

    def expr(self, node: Node, want: QFormat) -> Node:
        """Type an expression tree so its result carries format ``want``."""
        self.visits += 1
        if isinstance(node, Num):
            node.fmt = want
            node.raw = quantize(node.value, want)
            return node
        if isinstance(node, Name):
            node.fmt = self.lookup(node)
            return self._convert(node, want)
        if isinstance(node, Neg):
            node.child = self.expr(node.child, want)
            node.fmt = want
            return node
        if isinstance(node, BinOp):
            if node.op in ("+", "-"):
                node.lhs = self.expr(node.lhs, want)
                node.rhs = self.expr(node.rhs, want)
                node.fmt = want
                return node
            # Multiply: operands keep their natural formats; the result
            # shift folds the format change into the datapath shifter.
            lf = self._natural(node.lhs, want)
            rf = self._natural(node.rhs, want)
            node.lhs = self.expr(node.lhs, lf)
            node.rhs = self.expr(node.rhs, rf)
            shift = lf.frac_bits + rf.frac_bits - want.frac_bits
            if not 0 <= shift <= 15:
                raise CompileError(
                    f"multiply {lf.name} * {rf.name} -> {want.name} needs "
                    f"result shift {shift} outside [0, 15]",
                    node.line, node.col)
            node.shift = shift
            node.fmt = want
            return node
        raise CompileError("expression expected", node.line, node.col)

    def _natural(self, node: Node, fallback: QFormat) -> QFormat:
        if isinstance(node, Name):
            return self.lookup(node)
        if isinstance(node, Neg):
            return self._natural(node.child, fallback)
        return fallback

    def compare(self, node: Compare) -> Compare:
        self.visits += 1
        f = (self._natural(node.lhs, None) or
             self._natural(node.rhs, None))
        if f is None:
            raise CompileError("comparison needs at least one typed operand",
                               node.line, node.col)
        node.lhs = self.expr(node.lhs, f)
        node.rhs = self.expr(node.rhs, f)
        return node

    def stmt(self, node: Node) -> Node:
        self.visits += 1
        if isinstance(node, Assign):
            if node.target not in self.src.vars:
                raise CompileError(f"unresolved identifier {node.target}",
                                   node.line, node.col)
            want = self.src.vars[node.target]
            if node.aug:
                expanded = BinOp(node.line, node.col, op=node.aug,
                                 lhs=Name(node.line, node.col, ident=node.target),
                                 rhs=node.expr)
                node.expr = self.expr(expanded, want)
                node.aug = ""
            else:
                node.expr = self.expr(node.expr, want)
            return node
        if isinstance(node, If):
            node.cond = self.compare(node.cond)
            node.then = [self.stmt(s) for s in node.then]
            node.orelse = [self.stmt(s) for s in node.orelse]
            return node
        if isinstance(node, Emit):
            if node.event not in self.src.events:
                raise CompileError(f"unresolved identifier {node.event}",
                                   node.line, node.col)
            return node
        raise CompileError("statement expected", node.line, node.col)


def typecheck(stmts: list[Node], src: KernelSource) -> tuple[list[Node], int]:
    """Type a parsed kernel; returns (typed statements, node-visit count)."""
    tc = _TypeChecker(src)
    return [tc.stmt(s) for s in stmts], tc.visits


# ---------------------------------------------------------------------------
# Code generation
# ---------------------------------------------------------------------------

@dataclass
class VarLayout:
    placement: str              # "vmem" | "llm" | "llm_delay"
    base: int                   # vmem byte address or llm halfword base


@dataclass
class KernelLayout:
    n: int                                  # neurons, multiple of 32
    vars: dict[str, VarLayout]
    events: dict[str, int]                  # event -> bitfield byte address
    n_delay: int = 1                        # for any llm_delay variable
    t_addr: int = 0

    def __post_init__(self):
        if self.n <= 0 or self.n % NUM_LANES:
            raise ValueError("population size must be a positive multiple of 32")


_WINDOW = 31
_MODE_SUFFIX = {RoundMode.TO_ZERO: ".rz", RoundMode.TO_NEAREST: ".rn",
                RoundMode.STOCHASTIC: ".rs"}


class _RegAlloc:
    """Linear allocation of v1-v31: pinned registers for parameters and
    variables, a stack for expression temporaries."""

    def __init__(self):
        self.next = 1
        self.temps: list[int] = []

    def pin(self, what: str) -> str:
        if self.next + len(self.temps) > 31:
            raise CompileError(f"register pressure: no vector register left "
                               f"for {what}")
        r = self.next
        self.next += 1
        return f"v{r}"

    def push(self) -> str:
        r = self.next + len(self.temps)
        if r > 31:
            raise CompileError("register pressure: expression too deep")
        self.temps.append(r)
        return f"v{r}"

    def pop(self) -> None:
        self.temps.pop()


def _collect_names(stmts, reads: set, writes: set, emits: set) -> None:
    def expr(n):
        if isinstance(n, Name):
            reads.add(n.ident)
        elif isinstance(n, (Neg, Convert)):
            expr(n.child)
        elif isinstance(n, BinOp):
            expr(n.lhs)
            expr(n.rhs)
    for s in stmts:
        if isinstance(s, Assign):
            expr(s.expr)
            writes.add(s.target)
        elif isinstance(s, If):
            expr(s.cond.lhs)
            expr(s.cond.rhs)
            _collect_names(s.then, reads, writes, emits)
            _collect_names(s.orelse, reads, writes, emits)
        elif isinstance(s, Emit):
            emits.add(s.event)


class _CodeGen:
    _COMPARES = {">=": ("vtge", False), "<": ("vtlt", False),
                 "==": ("vteq", False), "!=": ("vtne", False),
                 "<=": ("vtge", True), ">": ("vtlt", True)}

    def __init__(self, src: KernelSource, stmts, layout: KernelLayout,
                 tag: str = "kernel"):
        self.src = src
        self.stmts = stmts
        self.layout = layout
        self.tag = tag
        self.mode = parse_pragmas(src.code)
        self.lines: list[str] = []
        self.reg = _RegAlloc()
        self.var_reg: dict[str, str] = {}
        self.param_reg: dict[str, str] = {}
        self.mask_regs = ["t3", "t5", "s4", "s5"]
        self.emit_reg: dict[str, str] = {}
        self.visits = 0

    def emit(self, line: str) -> None:
        self.lines.append("    " + line)

    def generate(self) -> list[str]:
        src, lay = self.src, self.layout
        reads, writes, emits = set(), set(), set()
        _collect_names(self.stmts, reads, writes, emits)
        used_params = sorted(reads & set(src.params))
        used_vars = sorted((reads | writes) & set(src.vars))
        loaded = sorted(reads & set(src.vars))
        stored = sorted(writes)
        for v in used_vars:
            if v not in lay.vars:
                raise CompileError(f"no layout for variable {v}")
        self.lines = [f"# --- {self.tag}: compiled kernel, {lay.n} neurons ---"]
        # Parameter and constant registers.
        for p in used_params:
            r = self.reg.pin(f"parameter {p}")
            self.param_reg[p] = r
            self.emit(f"vlui {r}, {src.param_raw(p)}")
        self.vzero = self.reg.pin("zero")
        self.emit(f"vlui {self.vzero}, 0")
        for v in used_vars:
            self.var_reg[v] = self.reg.pin(f"variable {v}")
        # Scalar base registers for vmem variables and event bitfields.
        base_pool = ["t0", "t1", "t2", "t6", "s0", "s1", "s2", "s3"]
        self.base_reg: dict[str, str] = {}
        need_delay = any(lay.vars[v].placement == "llm_delay" for v in used_vars)
        if need_delay:
            nd = lay.n_delay
            self.emit(f"lw t4, {lay.t_addr}(x0)")
            self.emit(f"andi t4, t4, {nd - 1}")
            self.vaddr = self.reg.pin("delay-slot address")
        for v in used_vars:
            if lay.vars[v].placement == "vmem":
                if not base_pool:
                    raise CompileError("too many vector-memory variables")
                r = base_pool.pop(0)
                self.base_reg[v] = r
                self.emit(f"li {r}, {lay.vars[v].base}")
        for e in sorted(emits):
            if e not in lay.events:
                raise CompileError(f"no bitfield layout for event {e}")
            if not base_pool:
                raise CompileError("too many event containers")
            r = base_pool.pop(0)
            self.base_reg["event:" + e] = r
            self.emit(f"li {r}, {lay.events[e]}")
        # Unrolled per-vector body.
        nvec = lay.n // NUM_LANES
        for k in range(nvec):
            kw = k % _WINDOW
            if k and kw == 0:
                for v, r in self.base_reg.items():
                    step = _WINDOW * 4 if v.startswith("event:") else _WINDOW * 64
                    self.emit(f"addi {r}, {r}, {step}")
            self.body(k, kw, loaded, stored, sorted(emits))
        return self.lines

    # -- per-vector body ------------------------------------------------

    def _var_access(self, v: str, k: int, kw: int, store: bool,
                    reg: str) -> None:
        pl = self.layout.vars[v]
        op = "vstore" if store else "vload"
        if pl.placement == "vmem":
            self.emit(f"{op}.v {reg}, {kw * 64}({self.base_reg[v]})")
        elif pl.placement == "llm":
            self.emit(f"{op}.l {reg}, {pl.base + k}({self.vzero})")
        else:
            self.emit(f"{op}.l {reg}, 0({self.vaddr})")

    def body(self, k: int, kw: int, loaded, stored, emits) -> None:
        lay = self.layout
        delay_vars = [v for v in self.var_reg
                      if lay.vars[v].placement == "llm_delay"]
        if delay_vars:
            base = lay.vars[delay_vars[0]].base
            self.emit(f"addi t4, t4, {lay.n_delay if k else base}")
            self.emit(f"vfill {self.vaddr}, t4")
        for v in loaded:
            self._var_access(v, k, kw, False, self.var_reg[v])
        for e in emits:
            r = {0: "a1", 1: "a2", 2: "a3"}[emits.index(e)]
            self.emit_reg[e] = r
            self.emit(f"li {r}, 0")
        for s in self.stmts:
            self.stmt(s, None)
        for v in stored:
            self._var_access(v, k, kw, True, self.var_reg[v])
        for e in emits:
            self.emit(f"sw {self.emit_reg[e]}, "
                      f"{kw * 4}({self.base_reg['event:' + e]})")

    def stmt(self, s: Node, mask: str | None) -> None:
        self.visits += 1
        if isinstance(s, Assign):
            if mask is None:
                self.expr(s.expr, self.var_reg[s.target])
            else:
                t = self.reg.push()
                self.expr(s.expr, t)
                self.emit(f"vsel {self.var_reg[s.target]}, {mask}, {t}")
                self.reg.pop()
        elif isinstance(s, Emit):
            r = self.emit_reg[s.event]
            if mask is None:
                self.emit(f"li {r}, -1")
            else:
                self.emit(f"or {r}, {r}, {mask}")
        elif isinstance(s, If):
            if not self.mask_regs:
                raise CompileError("if-nesting too deep: no mask register left",
                                   s.line, s.col)
            m = self.mask_regs.pop(0)
            self.compare(s.cond, m)
            if mask is not None:
                self.emit(f"and {m}, {m}, {mask}")
            for sub in s.then:
                self.stmt(sub, m)
            if s.orelse:
                inv = self.mask_regs.pop(0) if self.mask_regs else None
                if inv is None:
                    raise CompileError("if-nesting too deep: no mask register "
                                       "left for else", s.line, s.col)
                self.emit(f"xori {inv}, {m}, -1")
                if mask is not None:
                    self.emit(f"and {inv}, {inv}, {mask}")
                for sub in s.orelse:
                    self.stmt(sub, inv)
                self.mask_regs.insert(0, inv)
            self.mask_regs.insert(0, m)
        else:
            raise CompileError("unsupported statement")

    def compare(self, c: Compare, mreg: str) -> None:
        a = self.reg.push()
        self.expr(c.lhs, a)
        b = self.reg.push()
        self.expr(c.rhs, b)
        mn, swap = self._COMPARES[c.op]
        ops = (b, a) if swap else (a, b)
        self.emit(f"{mn} {mreg}, {ops[0]}, {ops[1]}")
        self.reg.pop()
        self.reg.pop()

    def expr(self, e: Node, dst: str) -> None:
        self.visits += 1
        if isinstance(e, Num):
            self.emit(f"vlui {dst}, {e.raw & 0xFFFF}")
        elif isinstance(e, Name):
            src = self.var_reg.get(e.ident) or self.param_reg[e.ident]
            if src != dst:
                # Register-to-register move via an add of zero, preserving
                # the value bit-exactly (0 never saturates or wraps).
                self.emit(f"vadd {dst}, {src}, {self.vzero}")
        elif isinstance(e, Neg):
            t = self.reg.push()
            self.expr(e.child, t)
            sat = ".s" if e.fmt.saturating else ""
            self.emit(f"vsub{sat} {dst}, {self.vzero}, {t}")
            self.reg.pop()
        elif isinstance(e, Convert):
            t = self.reg.push()
            self.expr(e.child, t)
            if e.shift > 0:
                self.emit(f"vsri{_MODE_SUFFIX[self.mode]} {dst}, {t}, {e.shift}")
            else:
                self.emit(f"vsli {dst}, {t}, {-e.shift}")
            self.reg.pop()
        elif isinstance(e, BinOp):
            a = self.reg.push()
            self.expr(e.lhs, a)
            b = self.reg.push()
            self.expr(e.rhs, b)
            if e.op == "*":
                self.emit(f"vmul{_MODE_SUFFIX[self.mode]} {dst}, {a}, {b}, "
                          f"{e.shift}")
            else:
                sat = ".s" if e.fmt.saturating else ""
                mn = "vadd" if e.op == "+" else "vsub"
                self.emit(f"{mn}{sat} {dst}, {a}, {b}")
            self.reg.pop()
            self.reg.pop()
        else:
            raise CompileError("unsupported expression")


def compile_kernel(src: KernelSource, layout: KernelLayout,
                   tag: str = "kernel") -> list[str]:
    """Parse, typecheck and lower a kernel to an inline assembly block."""
    stmts, _ = typecheck(parse(src.code), src)
    return _CodeGen(src, stmts, layout, tag).generate()


# ---------------------------------------------------------------------------
# Typed-AST interpreter (host-side fxp reference)
# ---------------------------------------------------------------------------

class Interpreter:
    """Executes a typed kernel on numpy state, performing the same fixed
    point operations in the same order as the generated code, including
    stochastic-rounding RNG consumption (one generator step per stochastic
    multiply or conversion shift, per 32-neuron vector, in program order).
    """

    def __init__(self, src: KernelSource, rng=None):
        self.src = src
        self.stmts, _ = typecheck(parse(src.code), src)
        self.mode = parse_pragmas(src.code)
        self.rng = rng
        self.param_raw = {p: _signed16(src.param_raw(p)) for p in src.params}

    def run(self, state: dict[str, np.ndarray],
            masks_out: dict[str, list] | None = None) -> dict[str, np.ndarray]:
        """state: var -> int array (length n, multiple of 32).  Returns new
        state; appends per-vector event mask words to masks_out lists."""
        n = len(next(iter(state.values()))) if state else NUM_LANES
        out = {v: np.array(a, dtype=np.int64, copy=True)
               for v, a in state.items()}
        for e in self.src.events:
            if masks_out is not None:
                masks_out.setdefault(e, [])
        for k in range(n // NUM_LANES):
            sl = slice(k * NUM_LANES, (k + 1) * NUM_LANES)
            chunk = {v: a[sl] for v, a in out.items()}
            emitted = {e: np.zeros(NUM_LANES, dtype=bool)
                       for e in self.src.events}
            for s in self.stmts:
                self._stmt(s, chunk, None, emitted)
            for v, a in chunk.items():
                out[v][sl] = a
            if masks_out is not None:
                for e, m in emitted.items():
                    word = int(m.astype(np.uint64) @
                               (1 << np.arange(NUM_LANES, dtype=np.uint64)))
                    masks_out[e].append(word)
        return out

    def _rand(self) -> np.ndarray:
        if self.rng is None:
            raise CompileError("stochastic kernel interpreted without an RNG")
        return (self.rng.step() >> 1).astype(np.int64)

    def _stmt(self, s, chunk, mask, emitted) -> None:
        from . import fxp
        if isinstance(s, Assign):
            val = self._expr(s.expr, chunk)
            if mask is None:
                chunk[s.target][:] = val
            else:
                np.copyto(chunk[s.target], val, where=mask)
        elif isinstance(s, Emit):
            emitted[s.event] |= (np.ones(NUM_LANES, dtype=bool)
                                 if mask is None else mask)
        elif isinstance(s, If):
            m = self._compare(s.cond, chunk)
            eff = m if mask is None else (m & mask)
            for sub in s.then:
                self._stmt(sub, chunk, eff, emitted)
            if s.orelse:
                inv = ~m if mask is None else (~m & mask)
                for sub in s.orelse:
                    self._stmt(sub, chunk, inv, emitted)

    def _compare(self, c: Compare, chunk) -> np.ndarray:
        a = self._expr(c.lhs, chunk)
        b = self._expr(c.rhs, chunk)
        return {">=": a >= b, "<": a < b, "==": a == b, "!=": a != b,
                "<=": a <= b, ">": a > b}[c.op]

    def _expr(self, e, chunk) -> np.ndarray:
        from . import fxp
        if isinstance(e, Num):
            return np.full(NUM_LANES, _signed16(e.raw), dtype=np.int64)
        if isinstance(e, Name):
            if e.ident in chunk:
                return chunk[e.ident].astype(np.int64)
            return np.full(NUM_LANES, self.param_raw[e.ident], dtype=np.int64)
        if isinstance(e, Neg):
            v = self._expr(e.child, chunk)
            return fxp.sat_sub(0, v, e.fmt.saturating)
        if isinstance(e, Convert):
            v = self._expr(e.child, chunk)
            if e.shift > 0:
                rand = self._rand() if self.mode == RoundMode.STOCHASTIC else 0
                return fxp.shift_right_round(v, e.shift, self.mode, rand)
            return fxp.wrap16(v << -e.shift)
        if isinstance(e, BinOp):
            a = self._expr(e.lhs, chunk)
            b = self._expr(e.rhs, chunk)
            if e.op == "*":
                rand = self._rand() if self.mode == RoundMode.STOCHASTIC else 0
                return fxp.mul_shift(a, b, e.shift, self.mode, rand)
            f = fxp.sat_add if e.op == "+" else fxp.sat_sub
            return f(a, b, e.fmt.saturating)
        raise CompileError("unsupported expression in interpreter")


def _signed16(raw: int) -> int:
    raw &= 0xFFFF
    return raw - 0x10000 if raw & 0x8000 else raw

