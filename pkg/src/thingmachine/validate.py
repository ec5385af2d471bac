"""Static checks: the flow rule table, entry/exit sanity, triggers, stores and events."""

from __future__ import annotations

from typing import Iterable, List, Mapping, Optional

from .core import Model, StageKind
from .diagnostics import Diagnostic
from .expr import ExprTypeError, literal_type, store_refs, type_of

C, P, RL, T, RC = (StageKind.CREATE, StageKind.PROCESS, StageKind.RELEASE, StageKind.TRANSFER,
                   StageKind.RECEIVE)


class RuleTable:
    """Permitted flow successors.

    ``intra`` holds (from, to) kind pairs allowed between stages of one machine,
    ``cross`` the pairs allowed between stages of different machines.
    Processing never flows into creation: that causation is a trigger.
    """

    def __init__(self, intra: Iterable, cross: Iterable):
        self.intra = frozenset(intra)
        self.cross = frozenset(cross)

    def allows(self, src: StageKind, dst: StageKind, same_machine: bool) -> bool:
        return (src, dst) in (self.intra if same_machine else self.cross)

    def successors(self, src: StageKind, same_machine: bool) -> list[StageKind]:
        pairs = self.intra if same_machine else self.cross
        return [d for d in StageKind if (src, d) in pairs]


RULES = RuleTable(
    intra=[(C, P), (C, RL), (RC, P), (RC, RL), (P, RL), (RL, T), (T, RC)],
    cross=[(T, T)],
)


def _diag(model: Model, code: str, message: str, element: Optional[str]) -> Diagnostic:
    return Diagnostic(code, message, element, model.spans.get(element) if element else None)


def _gated(model: Model) -> set:
    """Stages where things rest until a trigger activates them."""
    return {t.target for t in model.triggers if model.stage(t.target).kind is not StageKind.CREATE}


def check_flows(model: Model, rules: RuleTable = RULES) -> List[Diagnostic]:
    out = []
    for f in model.flows:
        a, b = model.stage(f.source), model.stage(f.target)
        same = a.owner == b.owner
        if rules.allows(a.kind, b.kind, same):
            continue
        if same:
            succ = ", ".join(k.value for k in rules.successors(a.kind, True)) or "none"
            msg = (f"flow {f.source} -> {f.target}: {a.kind.value} -> {b.kind.value} is not permitted "
                   f"inside machine {a.owner} (permitted successors of {a.kind.value}: {succ})")
        else:
            msg = (f"flow {f.source} -> {f.target} crosses from machine {a.owner} to {b.owner}; "
                   f"only transfer -> transfer may cross machines "
                   f"(route release -> transfer, transfer -> transfer, transfer -> receive)")
        out.append(_diag(model, "E-FLOW-ILLEGAL", msg, f.id))
    out.extend(_cycles(model))
    return out


def _cycles(model: Model) -> List[Diagnostic]:
    # iterative Tarjan over the stage graph
    succ = {s.id: [] for s in model.stages}
    for f in model.flows:
        succ[f.source].append(f.target)
    index, low, on_stack, stack, comp = {}, {}, set(), [], {}
    counter = 0
    for root in succ:
        if root in index:
            continue
        work = [(root, 0)]
        while work:
            v, i = work.pop()
            if i == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack.add(v)
            if i < len(succ[v]):
                work.append((v, i + 1))
                w = succ[v][i]
                if w not in index:
                    work.append((w, 0))
                elif w in on_stack:
                    low[v] = min(low[v], index[w])
                continue
            if low[v] == index[v]:
                members = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    members.append(w)
                    if w == v:
                        break
                for w in members:
                    comp[w] = v
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
    gated = _gated(model)
    sizes = {}
    for v, c in comp.items():
        sizes[c] = sizes.get(c, 0) + 1
    resting = {c for v, c in comp.items() if v in gated}
    out = []
    for f in model.flows:
        c = comp[f.source]
        if c != comp[f.target] or c in resting:
            continue
        if sizes[c] > 1 or f.source == f.target:
            out.append(_diag(model, "W-FLOW-CYCLE",
                             f"flow {f.id} lies on a cycle with no gated stage; a thing entering it "
                             f"never rests", f.id))
    return out


def check_entry_exit(model: Model) -> List[Diagnostic]:
    out = []
    triggered_in = {t.target for t in model.triggers}
    touched = set(triggered_in) | {t.source for t in model.triggers}
    for f in model.flows:
        touched.add(f.source)
        touched.add(f.target)
    for s in model.stages:
        if s.id not in touched:
            out.append(_diag(model, "E-ORPHAN-STAGE",
                             f"stage {s.id} has no flow and no trigger", s.id))
        if s.kind is StageKind.RECEIVE:
            ok = False
            for f in model.incoming(s.id):
                t = model.stage(f.source)
                if t.kind is not StageKind.TRANSFER:
                    continue
                feeders = model.incoming(t.id)
                if not feeders or any(model.stage(g.source).owner != t.owner for g in feeders):
                    ok = True
                    break
            if not ok:
                out.append(_diag(model, "W-UNREACHABLE-RECEIVE",
                                 f"receive stage {s.id} has no incoming transfer from the model "
                                 f"boundary or another machine", s.id))
        elif s.kind is StageKind.CREATE:
            if not model.outgoing(s.id) and s.id not in triggered_in and not s.fn:
                out.append(_diag(model, "W-DEAD-CREATE",
                                 f"create stage {s.id} has no outgoing flow, no incoming trigger "
                                 f"and no function", s.id))
    return out


def check_triggers(model: Model) -> List[Diagnostic]:
    out = []
    for t in model.triggers:
        target = model.stage(t.target)
        if target.kind is not StageKind.CREATE:
            out.append(_diag(model, "W-TRIGGER-TARGET",
                             f"trigger {t.id} activates a {target.kind.value} stage, not a create "
                             f"stage", t.id))
        if t.guard is None:
            continue
        ctx = [model.stage(t.source).owner, target.owner]
        unknown = []
        for ref in store_refs(t.guard):
            try:
                model.resolve_store(ref, ctx)
            except KeyError:
                unknown.append(ref)
        if unknown:
            out.append(_diag(model, "E-TRIGGER-GUARD",
                             f"guard of {t.id} references unknown store(s) {', '.join(unknown)}", t.id))
            continue
        try:
            gt = type_of(t.guard, lambda n: model.resolve_store(n, ctx).type)
            if gt not in ("bool", "any"):
                raise ExprTypeError(f"guard has type {gt}, expected bool")
        except ExprTypeError as exc:
            out.append(_diag(model, "E-TRIGGER-GUARD", f"guard of {t.id}: {exc}", t.id))
    return out


def check_stores(model: Model) -> List[Diagnostic]:
    out = []
    for s in model.stores:
        if literal_type(s.initial) != s.type:
            out.append(_diag(model, "E-STORE-TYPE",
                             f"store {s.id} is {s.type} but starts as {s.initial!r}", s.id))
    return out


def check_events(model: Model) -> List[Diagnostic]:
    out = []
    for e in model.events:
        if not e.region or e.anchor not in e.region:
            out.append(_diag(model, "E-EVENT-REGION",
                             f"event {e.id} needs a non-empty region containing its anchor", e.id))
        missing = [r for r in e.region if model.element_kind(r) not in ("stage", "flow", "trigger",
                                                                         "store")]
        if missing:
            out.append(_diag(model, "E-REGION-UNKNOWN",
                             f"event {e.id} region names unknown element(s) {', '.join(missing)}",
                             e.id))
    return out


def check_functions(model: Model, fns: Mapping) -> List[Diagnostic]:
    out = []
    for s in model.stages:
        if s.fn is None:
            continue
        if s.fn not in fns:
            out.append(_diag(model, "E-FN-MISSING",
                             f"stage {s.id} names unregistered function '{s.fn}'", s.id))
        if s.kind not in (StageKind.CREATE, StageKind.PROCESS):
            out.append(_diag(model, "W-FN-IGNORED",
                             f"function on {s.kind.value} stage {s.id} is never applied", s.id))
    return out


def sort_diagnostics(model: Model, diags: Iterable[Diagnostic]) -> List[Diagnostic]:
    order = model.declaration_order()
    end = len(order)
    return sorted(diags, key=lambda d: (order.get(d.element, end), d.code, d.message))


def validate(model: Model, fns: Optional[Mapping] = None, rules: RuleTable = RULES) -> List[Diagnostic]:
    """All diagnostics for ``model``; accepted iff none is an ``E-*``.

    Function names are only checked when a registry ``fns`` is supplied.
    """
    diags = check_flows(model, rules) + check_entry_exit(model) + check_triggers(model)
    diags += check_stores(model) + check_events(model)
    if fns is not None:
        diags += check_functions(model, fns)
    return sort_diagnostics(model, diags)
