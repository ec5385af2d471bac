"""Textual ``.tm`` format and the JSON model document.

Grammar (``//`` comments run to end of line)::

    model   := item*
    item    := machine | flow | trigger | store | event
    machine := "machine" IDENT "{" (stage | machine | store)* "}"
    stage   := KIND ["#" IDENT] ["fn" IDENT] ";"
    flow    := "flow" PATH "->" PATH ["carries" IDENT] ";"
    trigger := "trigger" PATH "->" PATH ["when" expr] ";"
    store   := "store" IDENT ":" ("int" | "bool" | "string") "=" literal ";"
    event   := "event" IDENT ["label" STRING] "region" "{" PATH ("," PATH)* "}" ";"
    PATH    := IDENT ("." IDENT)* "." KIND ["#" IDENT]

The last region path of an event is its anchor.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Any, List, Optional, Union

from .core import (KIND_NAMES, KIND_ORDER, STORE_TYPES, EventDef, Model, ModelBuilder,
                   lookup_stage)
from .diagnostics import Diagnostic, ModelError, SchemaError, SourceSpan
from .expr import (Binary, Expr, ExprTypeError, Lit, PayloadRef, StoreRef, Unary, format_expr,
                   format_literal, store_refs, type_of)

KEYWORDS = frozenset({
    "machine", "flow", "trigger", "store", "event", "label", "region", "carries", "when",
    "fn", "int", "bool", "string", "true", "false", "mod", "payload",
}) | KIND_NAMES

PUNCT = ("->", "==", "!=", "<=", ">=", "&&", "||",
         "{", "}", ";", ":", ".", "#", ",", "(", ")", "<", ">", "!", "+", "-", "*", "=")

MAX_DEPTH = 200


@dataclass
class Token:
    kind: str  # "ident", "kw", "int", "string", "punct", "eof"
    text: str
    value: Any
    line: int
    col: int
    length: int


class _Abort(Exception):
    """Statement-level syntax error; carries the diagnostic."""

    def __init__(self, diag: Diagnostic):
        self.diag = diag


def _is_ident_start(ch: str) -> bool:
    return ("a" <= ch <= "z") or ("A" <= ch <= "Z")


def _is_ident_char(ch: str) -> bool:
    return _is_ident_start(ch) or ("0" <= ch <= "9") or ch == "_"


_ESCAPES = {'"': '"', "\\": "\\", "n": "\n", "t": "\t", "r": "\r", "/": "/"}


def tokenize(text: str, file: str = "<string>") -> tuple[list[Token], list[Diagnostic]]:
    toks: list[Token] = []
    diags: list[Diagnostic] = []
    i, line, col, n = 0, 1, 1, len(text)

    def err(msg, ln, cl, length=1):
        diags.append(Diagnostic("E-SYNTAX", msg, None, SourceSpan(file, ln, cl, length)))

    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
                col += 1
            continue
        start_col = col
        if _is_ident_start(ch):
            j = i
            while j < n and _is_ident_char(text[j]):
                j += 1
            word = text[i:j]
            toks.append(Token("kw" if word in KEYWORDS else "ident", word, word, line, start_col, j - i))
            col += j - i
            i = j
            continue
        if "0" <= ch <= "9":
            j = i
            while j < n and "0" <= text[j] <= "9":
                j += 1
            if j < n and _is_ident_char(text[j]):
                k = j
                while k < n and _is_ident_char(text[k]):
                    k += 1
                err(f"malformed number {text[i:k]!r}", line, start_col, k - i)
                col += k - i
                i = k
                continue
            toks.append(Token("int", text[i:j], int(text[i:j]), line, start_col, j - i))
            col += j - i
            i = j
            continue
        if ch == '"':
            j = i + 1
            buf = []
            ok = True
            while True:
                if j >= n or text[j] == "\n":
                    err("unterminated string", line, start_col, max(1, j - i))
                    ok = False
                    break
                c = text[j]
                if c == '"':
                    j += 1
                    break
                if c == "\\":
                    if j + 1 < n and text[j + 1] in _ESCAPES:
                        buf.append(_ESCAPES[text[j + 1]])
                        j += 2
                        continue
                    hexdigits = text[j + 2:j + 6]
                    if (j + 1 < n and text[j + 1] == "u" and len(hexdigits) == 4
                            and all(h in "0123456789abcdefABCDEF" for h in hexdigits)):
                        cp = int(text[j + 2:j + 6], 16)
                        if 0xD800 <= cp <= 0xDFFF:
                            err("surrogate escape in string", line, col + (j - i), 6)
                            ok = False
                        buf.append(chr(cp))
                        j += 6
                        continue
                    err("bad escape in string", line, col + (j - i), 2 if j + 1 < n else 1)
                    ok = False
                    j += 2 if j + 1 < n and text[j + 1] != "\n" else 1
                    continue
                buf.append(c)
                j += 1
            if ok:
                toks.append(Token("string", text[i:j], "".join(buf), line, start_col, j - i))
            col += j - i
            i = j
            continue
        for p in PUNCT:
            if text.startswith(p, i):
                toks.append(Token("punct", p, p, line, start_col, len(p)))
                i += len(p)
                col += len(p)
                break
        else:
            err(f"unexpected character {ch!r}", line, start_col)
            i += 1
            col += 1
    toks.append(Token("eof", "", None, line, col, 0))
    return toks, diags


# --- syntax tree produced by the first pass -------------------------------

@dataclass
class _Path:
    text: str
    span: SourceSpan


@dataclass
class _StageDecl:
    kind: str
    tag: Optional[str]
    fn: Optional[str]
    span: SourceSpan


@dataclass
class _StoreDecl:
    name: str
    type: str
    initial: Any
    span: SourceSpan


@dataclass
class _MachineDecl:
    name: str
    span: SourceSpan
    body: list


@dataclass
class _FlowDecl:
    source: _Path
    target: _Path
    label: Optional[str]
    span: SourceSpan


@dataclass
class _TriggerDecl:
    source: _Path
    target: _Path
    guard: Optional[Expr]
    guard_span: Optional[SourceSpan]
    span: SourceSpan


@dataclass
class _EventDecl:
    id: str
    label: str
    region: List[_Path]
    span: SourceSpan


class _Parser:
    def __init__(self, toks: list[Token], file: str):
        self.toks = toks
        self.pos = 0
        self.file = file
        self.diags: list[Diagnostic] = []

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.pos]

    def span(self, t: Optional[Token] = None) -> SourceSpan:
        t = t or self.tok
        return SourceSpan(self.file, t.line, t.col, t.length)

    def fail(self, msg: str, t: Optional[Token] = None):
        t = t or self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        raise _Abort(Diagnostic("E-SYNTAX", f"{msg}, found {found}", None, self.span(t)))

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("punct", "kw") and t.text == text

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "eof":
            self.pos += 1
        return t

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(f"expected '{text}'")
        return self.advance()

    def ident(self, what: str = "identifier") -> Token:
        if self.tok.kind != "ident":
            if self.tok.kind == "kw":
                self.fail(f"expected {what} (keyword '{self.tok.text}' is reserved)")
            self.fail(f"expected {what}")
        return self.advance()

    def sync(self):
        """Skip to just past the next ';' or up to a '}' / end of input."""
        while self.tok.kind != "eof":
            if self.at(";"):
                self.advance()
                return
            if self.at("}"):
                return
            self.advance()

    # grammar
    def parse_items(self, depth: int = 0, in_machine: bool = False) -> list:
        items = []
        while True:
            t = self.tok
            if t.kind == "eof":
                return items
            if self.at("}"):
                if in_machine:
                    return items
                self.diags.append(Diagnostic("E-SYNTAX", "unmatched '}'", None, self.span()))
                self.advance()
                continue
            try:
                item = self.parse_item(depth, in_machine)
                if item is not None:
                    items.append(item)
            except _Abort as ab:
                self.diags.append(ab.diag)
                start = self.pos
                self.sync()
                if self.pos == start and not self.at("}") and self.tok.kind != "eof":
                    self.advance()

    def parse_item(self, depth: int, in_machine: bool):
        t = self.tok
        if self.at("machine"):
            return self.parse_machine(depth)
        if self.at("store"):
            return self.parse_store()
        if t.kind == "kw" and t.text in KIND_NAMES:
            if not in_machine:
                self.fail("stage declared outside a machine")
            return self.parse_stage()
        if not in_machine:
            if self.at("flow"):
                return self.parse_flow()
            if self.at("trigger"):
                return self.parse_trigger()
            if self.at("event"):
                return self.parse_event()
            self.fail("expected 'machine', 'flow', 'trigger', 'store' or 'event'")
        self.fail("expected a stage, 'store' or 'machine'")

    def parse_machine(self, depth: int) -> _MachineDecl:
        self.expect("machine")
        name = self.ident("machine name")
        if depth >= MAX_DEPTH:
            self.fail("machines nested too deeply", name)
        self.expect("{")
        body = self.parse_items(depth + 1, in_machine=True)
        if not self.at("}"):
            self.fail(f"expected '}}' closing machine '{name.text}'")
        self.advance()
        return _MachineDecl(name.text, self.span(name), body)

    def parse_stage(self) -> _StageDecl:
        kt = self.advance()
        tag = fn = None
        if self.at("#"):
            self.advance()
            tag = self.ident("stage tag").text
        if self.at("fn"):
            self.advance()
            fn = self.ident("function name").text
        self.expect(";")
        return _StageDecl(kt.text, tag, fn, self.span(kt))

    def parse_literal(self):
        t = self.tok
        if t.kind == "int":
            self.advance()
            return t.value
        if self.at("-") and self.toks[self.pos + 1].kind == "int":
            self.advance()
            return -self.advance().value
        if t.kind == "string":
            self.advance()
            return t.value
        if self.at("true") or self.at("false"):
            self.advance()
            return t.text == "true"
        self.fail("expected a literal")

    def parse_store(self) -> _StoreDecl:
        self.expect("store")
        name = self.ident("store name")
        self.expect(":")
        tt = self.tok
        if not (tt.kind == "kw" and tt.text in STORE_TYPES):
            self.fail("expected 'int', 'bool' or 'string'")
        self.advance()
        self.expect("=")
        value = self.parse_literal()
        self.expect(";")
        return _StoreDecl(name.text, tt.text, value, self.span(name))

    def parse_path(self) -> _Path:
        first = self.ident("machine name")
        parts = [first.text]
        last = first
        while True:
            self.expect(".")
            t = self.tok
            if t.kind == "ident":
                parts.append(self.advance().text)
                last = t
                continue
            if t.kind == "kw" and t.text in KIND_NAMES:
                parts.append(self.advance().text)
                last = t
                break
            self.fail("expected machine name or stage kind in path")
        text = ".".join(parts)
        if self.at("#"):
            self.advance()
            tag = self.ident("stage tag")
            text += "#" + tag.text
            last = tag
        end = last.col + last.length
        length = end - first.col if last.line == first.line else first.length
        return _Path(text, SourceSpan(self.file, first.line, first.col, length))

    def parse_flow(self) -> _FlowDecl:
        kw = self.expect("flow")
        src = self.parse_path()
        self.expect("->")
        dst = self.parse_path()
        label = None
        if self.at("carries"):
            self.advance()
            label = self.ident("thing type").text
        self.expect(";")
        return _FlowDecl(src, dst, label, self.span(kw))

    def parse_trigger(self) -> _TriggerDecl:
        kw = self.expect("trigger")
        src = self.parse_path()
        self.expect("->")
        dst = self.parse_path()
        guard = gspan = None
        if self.at("when"):
            self.advance()
            gspan = self.span()
            guard = self.parse_expr()
        self.expect(";")
        return _TriggerDecl(src, dst, guard, gspan, self.span(kw))

    def parse_event(self) -> _EventDecl:
        self.expect("event")
        eid = self.ident("event id")
        label = ""
        if self.at("label"):
            self.advance()
            if self.tok.kind != "string":
                self.fail("expected a string label")
            label = self.advance().value
        self.expect("region")
        self.expect("{")
        region = [self.parse_path()]
        while self.at(","):
            self.advance()
            region.append(self.parse_path())
        self.expect("}")
        self.expect(";")
        return _EventDecl(eid.text, label, region, self.span(eid))

    # expressions: || < && < comparison < + - < * mod < unary
    def parse_expr(self, depth: int = 0) -> Expr:
        if depth > MAX_DEPTH:
            self.fail("expression nested too deeply")
        left = self.parse_and(depth)
        while self.at("||"):
            self.advance()
            left = Binary("||", left, self.parse_and(depth))
        return left

    def parse_and(self, depth):
        left = self.parse_cmp(depth)
        while self.at("&&"):
            self.advance()
            left = Binary("&&", left, self.parse_cmp(depth))
        return left

    def parse_cmp(self, depth):
        left = self.parse_add(depth)
        for op in ("==", "!=", "<=", ">=", "<", ">"):
            if self.at(op):
                self.advance()
                return Binary(op, left, self.parse_add(depth))
        return left

    def parse_add(self, depth):
        left = self.parse_mul(depth)
        while self.at("+") or self.at("-"):
            op = self.advance().text
            left = Binary(op, left, self.parse_mul(depth))
        return left

    def parse_mul(self, depth):
        left = self.parse_unary(depth)
        while self.at("*") or self.at("mod"):
            op = self.advance().text
            left = Binary(op, left, self.parse_unary(depth))
        return left

    def parse_unary(self, depth):
        if depth > MAX_DEPTH:
            self.fail("expression nested too deeply")
        if self.at("!"):
            self.advance()
            return Unary("!", self.parse_unary(depth + 1))
        if self.at("-"):
            self.advance()
            if self.tok.kind == "int":
                return Lit(-self.advance().value)
            return Unary("-", self.parse_unary(depth + 1))
        return self.parse_atom(depth)

    def parse_atom(self, depth):
        t = self.tok
        if t.kind == "int" or t.kind == "string":
            self.advance()
            return Lit(t.value)
        if self.at("true") or self.at("false"):
            self.advance()
            return Lit(t.text == "true")
        if self.at("("):
            self.advance()
            e = self.parse_expr(depth + 1)
            self.expect(")")
            return e
        if self.at("payload"):
            self.advance()
            if self.at("."):
                self.advance()
                f = self.tok
                if f.kind not in ("ident", "kw"):
                    self.fail("expected payload field name")
                self.advance()
                return PayloadRef(f.text)
            return PayloadRef(None)
        if t.kind == "ident":
            parts = [self.advance().text]
            while self.at(".") and self.toks[self.pos + 1].kind == "ident":
                self.advance()
                parts.append(self.advance().text)
            return StoreRef(".".join(parts))
        self.fail("expected an expression")


def _decode(data: Union[str, bytes], file: str) -> tuple[Optional[str], list[Diagnostic]]:
    if isinstance(data, str):
        return data, []
    try:
        return data.decode("utf-8"), []
    except UnicodeDecodeError as exc:
        prefix = data[:exc.start].decode("utf-8", errors="replace")
        line = prefix.count("\n") + 1
        col = len(prefix) - (prefix.rfind("\n") + 1) + 1
        return None, [Diagnostic("E-SYNTAX", "input is not valid UTF-8", None,
                                 SourceSpan(file, line, col, 1))]


def parse_expr(text: str) -> Expr:
    """Parse a standalone guard expression (used by the JSON reader)."""
    toks, diags = tokenize(text, "<expr>")
    if diags:
        raise ModelError("E-SYNTAX", diagnostics=diags)
    p = _Parser(toks, "<expr>")
    try:
        e = p.parse_expr()
        if p.tok.kind != "eof":
            p.fail("unexpected trailing input")
    except _Abort as ab:
        raise ModelError("E-SYNTAX", diagnostics=[ab.diag]) from None
    return e


def parse_model(text: Union[str, bytes], file: str = "<string>") -> Model:
    """Parse and link a model; raise :class:`ModelError` with diagnostics on any failure."""
    decoded, diags = _decode(text, file)
    if decoded is None:
        raise ModelError("E-SYNTAX", diagnostics=diags)
    toks, diags = tokenize(decoded, file)
    p = _Parser(toks, file)
    items = p.parse_items()
    diags = diags + p.diags
    if diags:
        diags.sort(key=lambda d: (d.span.line, d.span.column))
        raise ModelError("E-SYNTAX", diagnostics=diags)
    return _link(items, file)


def _link(items: list, file: str) -> Model:
    b = ModelBuilder()
    diags: list[Diagnostic] = []

    def attempt(fn, span, *args, **kw):
        try:
            return fn(*args, span=span, **kw)
        except ModelError as exc:
            diags.append(Diagnostic(exc.code, exc.message, None, span))
            return None

    def declare(decl: _MachineDecl, parent: Optional[str]):
        mid = attempt(b.machine, decl.span, decl.name, parent)
        if mid is None:
            return
        for item in decl.body:
            if isinstance(item, _StageDecl):
                attempt(b.stage, item.span, mid, item.kind, item.tag, item.fn)
            elif isinstance(item, _StoreDecl):
                attempt(b.store, item.span, item.name, item.type, item.initial, mid)
            elif isinstance(item, _MachineDecl):
                declare(item, mid)

    for item in items:
        if isinstance(item, _MachineDecl):
            declare(item, None)
        elif isinstance(item, _StoreDecl):
            attempt(b.store, item.span, item.name, item.type, item.initial, None)

    skeleton = b.build()

    def resolve(path: _Path) -> Optional[str]:
        try:
            st = lookup_stage(skeleton, path.text)
        except ModelError as exc:
            diags.append(Diagnostic(exc.code, exc.message, path.text, path.span))
            return None
        if st is None:
            diags.append(Diagnostic("E-UNRESOLVED", f"no stage at path '{path.text}'", path.text,
                                    path.span))
            return None
        return st.id

    for item in items:
        if isinstance(item, _FlowDecl):
            s, t = resolve(item.source), resolve(item.target)
            if s and t:
                attempt(b.flow, item.span, s, t, item.label)
        elif isinstance(item, _TriggerDecl):
            s, t = resolve(item.source), resolve(item.target)
            if s and t and item.guard is not None:
                ctx = [skeleton.stage(s).owner, skeleton.stage(t).owner]
                bad = False
                for ref in store_refs(item.guard):
                    try:
                        skeleton.resolve_store(ref, ctx)
                    except KeyError:
                        diags.append(Diagnostic("E-UNRESOLVED", f"unknown store '{ref}' in guard",
                                                None, item.guard_span))
                        bad = True
                if not bad:
                    try:
                        gt = type_of(item.guard, lambda n: skeleton.resolve_store(n, ctx).type)
                        if gt not in ("bool", "any"):
                            raise ExprTypeError(f"guard has type {gt}, expected bool")
                    except ExprTypeError as exc:
                        diags.append(Diagnostic("E-TYPE", str(exc), None, item.guard_span))
                        bad = True
                if bad:
                    continue
            if s and t:
                attempt(b.trigger, item.span, s, t, item.guard)
        elif isinstance(item, _EventDecl):
            region = [resolve(p) for p in item.region]
            if all(region):
                attempt(b.event, item.span, EventDef.of(item.id, region, item.label))
    if diags:
        raise ModelError(diags[0].code, diagnostics=diags)
    return b.build()


# --- canonical text -------------------------------------------------------

def emit_text(model: Model) -> str:
    """Canonical ``.tm`` text; ``parse_model(emit_text(m)) == m``."""
    lines: list[str] = []

    def store_line(st, indent):
        return f"{indent}store {st.name}: {st.type} = {format_literal(st.initial)};"

    def emit_machine(mid, depth):
        m = model.machine(mid)
        ind = "  " * depth
        lines.append(f"{ind}machine {m.name} {{")
        stages = sorted((model.stage(s) for s in m.stages), key=lambda s: KIND_ORDER.index(s.kind))
        for st in stages:
            text = st.kind.value + (f"#{st.tag}" if st.tag else "") + (f" fn {st.fn}" if st.fn else "")
            lines.append(f"{ind}  {text};")
        for sid in m.stores:
            lines.append(store_line(model.store(sid), ind + "  "))
        for sub in m.submachines:
            emit_machine(sub, depth + 1)
        lines.append(f"{ind}}}")

    for root in model.roots():
        emit_machine(root.id, 0)
    blocks = ["\n".join(lines)] if lines else []
    arcs = []
    for f in model.flows:
        arcs.append(f"flow {f.source} -> {f.target}" + (f" carries {f.label}" if f.label else "") + ";")
    if arcs:
        blocks.append("\n".join(arcs))
    trig = []
    for t in model.triggers:
        trig.append(f"trigger {t.source} -> {t.target}"
                    + (f" when {format_expr(t.guard)}" if t.guard is not None else "") + ";")
    if trig:
        blocks.append("\n".join(trig))
    glob = [store_line(s, "") for s in model.stores if s.owner is None]
    if glob:
        blocks.append("\n".join(glob))
    evs = []
    for e in model.events:
        region = [r for r in e.region if r != e.anchor] + [e.anchor]
        label = f" label {format_literal(e.label)}" if e.label else ""
        evs.append(f"event {e.id}{label} region {{ {', '.join(region)} }};")
    if evs:
        blocks.append("\n".join(evs))
    return "\n\n".join(blocks) + "\n" if blocks else ""


# --- JSON document --------------------------------------------------------

def model_schema() -> dict:
    return json.loads(resources.files("thingmachine").joinpath("schemas/model.schema.json").read_text())


def to_document(model: Model) -> dict:
    return {
        "machines": [
            {
                "id": m.id,
                "name": m.name,
                "parent": m.parent,
                "stages": [{"kind": s.kind.value, "tag": s.tag, "fn": s.fn}
                           for s in model.machine_stages(m.id)],
            }
            for m in model.machines
        ],
        "flows": [{"from": f.source, "to": f.target, "label": f.label} for f in model.flows],
        "triggers": [{"from": t.source, "to": t.target,
                      "guard": format_expr(t.guard) if t.guard is not None else None}
                     for t in model.triggers],
        "stores": [{"owner": s.owner, "name": s.name, "type": s.type, "initial": s.initial}
                   for s in model.stores],
        "events": [{"id": e.id, "label": e.label, "region": list(e.region), "anchor": e.anchor,
                    "aliases": list(e.aliases)} for e in model.events],
    }


def to_json(model: Model) -> str:
    """Byte-stable JSON text: sorted keys, arrays in declaration order, no whitespace."""
    return json.dumps(to_document(model), sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def from_json(doc: Union[str, bytes, dict]) -> Model:
    """Read a model document; raise :class:`SchemaError` (``E-SCHEMA``) when malformed."""
    import jsonschema

    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except (ValueError, RecursionError) as exc:
            raise SchemaError(f"not JSON: {exc}") from None
    try:
        jsonschema.validate(doc, model_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaError(f"{where}: {exc.message}") from None
    b = ModelBuilder()
    try:
        for m in doc["machines"]:
            mid = m["id"]
            name, parent = m["name"], m["parent"]
            expected = f"{parent}.{name}" if parent else name
            if mid != expected:
                raise SchemaError(f"machine id {mid!r} does not match parent/name ({expected!r})")
            b.machine(name, parent)
            for s in m["stages"]:
                b.stage(mid, s["kind"], s.get("tag"), s.get("fn"))
        for s in doc["stores"]:
            b.store(s["name"], s["type"], s["initial"], s["owner"], check=False)
        for f in doc["flows"]:
            b.flow(f["from"], f["to"], f.get("label"))
        for t in doc["triggers"]:
            guard = t.get("guard")
            b.trigger(t["from"], t["to"], parse_expr(guard) if guard is not None else None)
        for e in doc["events"]:
            b.event(EventDef(e["id"], e.get("label", ""), tuple(e["region"]), e["anchor"],
                             tuple(e.get("aliases", ()))))
    except SchemaError:
        raise
    except ModelError as exc:
        raise SchemaError(exc.message or exc.code) from None
    return b.build()
