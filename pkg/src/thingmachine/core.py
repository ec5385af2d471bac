"""Static Thing Machine models: machines, the five generic stages, arcs and stores.

A :class:`Model` is immutable.  Build one with :class:`ModelBuilder` (the DSL
parser and the JSON reader both do) or obtain one from :mod:`thingmachine.dsl`.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Iterator, Optional, Tuple

from .diagnostics import ModelError, SourceSpan
from .expr import Expr, literal_type


class StageKind(str, enum.Enum):
    CREATE = "create"
    PROCESS = "process"
    RELEASE = "release"
    TRANSFER = "transfer"
    RECEIVE = "receive"

    def __str__(self) -> str:
        return self.value


# canonical emission order
KIND_ORDER: Tuple[StageKind, ...] = tuple(StageKind)
KIND_NAMES = frozenset(k.value for k in StageKind)
STORE_TYPES = ("int", "bool", "string")


def stage_id(machine: str, kind: StageKind, tag: Optional[str] = None) -> str:
    sid = f"{machine}.{kind.value}"
    return f"{sid}#{tag}" if tag else sid


def flow_id(source: str, target: str) -> str:
    return f"{source}->{target}"


def trigger_id(source: str, target: str) -> str:
    return f"{source}~>{target}"


@dataclass(frozen=True)
class Stage:
    id: str
    kind: StageKind
    owner: str
    tag: Optional[str] = None
    fn: Optional[str] = None


@dataclass(frozen=True)
class Machine:
    id: str
    name: str
    parent: Optional[str]
    stages: Tuple[str, ...] = ()
    submachines: Tuple[str, ...] = ()
    stores: Tuple[str, ...] = ()


@dataclass(frozen=True)
class FlowArc:
    id: str
    source: str
    target: str
    label: Optional[str] = None


@dataclass(frozen=True)
class TriggerArc:
    id: str
    source: str
    target: str
    guard: Optional[Expr] = None


@dataclass(frozen=True)
class Store:
    id: str
    name: str
    owner: Optional[str]  # None for model-level stores
    type: str
    initial: Any


@dataclass(frozen=True)
class EventDef:
    """An event: a region of model elements plus the anchor whose firing completes it."""

    id: str
    label: str
    region: Tuple[str, ...]
    anchor: str
    aliases: Tuple[str, ...] = ()

    @classmethod
    def of(cls, id: str, region: Iterable[str], label: str = "", anchor: Optional[str] = None,
           aliases: Iterable[str] = ()) -> "EventDef":
        region = tuple(region)
        return cls(id, label, region, anchor if anchor is not None else (region[-1] if region else ""),
                   tuple(aliases))


@dataclass(frozen=True)
class Model:
    machines: Tuple[Machine, ...] = ()
    stages: Tuple[Stage, ...] = ()
    flows: Tuple[FlowArc, ...] = ()
    triggers: Tuple[TriggerArc, ...] = ()
    stores: Tuple[Store, ...] = ()
    events: Tuple[EventDef, ...] = ()
    spans: Dict[str, SourceSpan] = field(default_factory=dict, compare=False, repr=False, hash=False)

    def __post_init__(self):
        index = {
            "machine": {m.id: m for m in self.machines},
            "stage": {s.id: s for s in self.stages},
            "flow": {f.id: f for f in self.flows},
            "trigger": {t.id: t for t in self.triggers},
            "store": {s.id: s for s in self.stores},
            "event": {e.id: e for e in self.events},
        }
        object.__setattr__(self, "_index", index)

    # lookups -----------------------------------------------------------
    def machine(self, mid: str) -> Machine:
        return self._index["machine"][mid]

    def stage(self, sid: str) -> Stage:
        return self._index["stage"][sid]

    def store(self, sid: str) -> Store:
        return self._index["store"][sid]

    def flow(self, fid: str) -> FlowArc:
        return self._index["flow"][fid]

    def trigger(self, tid: str) -> TriggerArc:
        return self._index["trigger"][tid]

    def has_machine(self, mid: str) -> bool:
        return mid in self._index["machine"]

    def has_stage(self, sid: str) -> bool:
        return sid in self._index["stage"]

    def has_store(self, sid: str) -> bool:
        return sid in self._index["store"]

    def element_kind(self, eid: str) -> Optional[str]:
        """Which element table ``eid`` lives in, or None."""
        for kind in ("stage", "flow", "trigger", "store", "machine", "event"):
            if eid in self._index[kind]:
                return kind
        return None

    def machine_stages(self, mid: str) -> Iterator[Stage]:
        for sid in self.machine(mid).stages:
            yield self.stage(sid)

    def ancestors(self, mid: Optional[str]) -> Iterator[str]:
        """``mid`` itself, then its parent, grandparent... (stops on cycles)."""
        seen = set()
        while mid is not None and mid not in seen and self.has_machine(mid):
            seen.add(mid)
            yield mid
            mid = self.machine(mid).parent

    def roots(self) -> list[Machine]:
        return [m for m in self.machines if m.parent is None]

    def outgoing(self, sid: str) -> list[FlowArc]:
        return [f for f in self.flows if f.source == sid]

    def incoming(self, sid: str) -> list[FlowArc]:
        return [f for f in self.flows if f.target == sid]

    def resolve_store(self, name: str, context: Iterable[Optional[str]] = ()) -> Store:
        """Resolve a store reference as written in an expression or processing function.

        Qualified names (``Queue.rear``) must match a store id.  Bare names are
        searched in each context machine and its ancestors, then among
        model-level stores, then model-wide if unique.  Raises ``KeyError``.
        """
        idx = self._index["store"]
        if "." in name:
            return idx[name]
        for ctx in context:
            for mid in self.ancestors(ctx):
                sid = f"{mid}.{name}"
                if sid in idx:
                    return idx[sid]
        if name in idx:
            return idx[name]
        hits = [s for s in self.stores if s.name == name]
        if len(hits) == 1:
            return hits[0]
        raise KeyError(name)

    def declaration_order(self) -> Dict[str, int]:
        """Element id -> position, used to sort diagnostics deterministically."""
        order: Dict[str, int] = {}

        def add(eid):
            order.setdefault(eid, len(order))

        for m in self.machines:
            add(m.id)
            for sid in m.stages:
                add(sid)
            for st in m.stores:
                add(st)
        for coll in (self.flows, self.triggers, self.stores, self.events):
            for el in coll:
                add(el.id)
        return order


def split_stage_path(path: str) -> Tuple[str, str, Optional[str]]:
    """``"A.B.process#x"`` -> ``("A.B", "process", "x")``.  Raises ``ValueError``."""
    base, _, tag = path.partition("#")
    machine, dot, kind = base.rpartition(".")
    if not dot or not machine or kind not in KIND_NAMES:
        raise ValueError(f"not a stage path: {path!r}")
    return machine, kind, (tag or None)


def lookup_stage(model: Model, path: str) -> Optional[Stage]:
    """Find the stage at ``Machine.Sub...kind[#tag]``.

    Returns None when nothing matches.  An untagged path with no untagged stage
    falls back to the single tagged stage of that kind; several candidates raise
    ``ModelError("E-AMBIGUOUS")``.
    """
    try:
        machine, kind, tag = split_stage_path(path)
    except ValueError:
        return None
    if not model.has_machine(machine):
        return None
    matches = [s for s in model.machine_stages(machine) if s.kind.value == kind]
    exact = [s for s in matches if s.tag == tag]
    if len(exact) == 1:
        return exact[0]
    if len(exact) > 1:
        raise ModelError("E-AMBIGUOUS", f"{path!r} matches {len(exact)} stages")
    if tag is None and matches:
        if len(matches) == 1:
            return matches[0]
        raise ModelError("E-AMBIGUOUS", f"{path!r} matches tagged stages "
                         + ", ".join(s.id for s in matches))
    return None


@dataclass(frozen=True)
class ModelStats:
    machines: int
    stages: Dict[str, int]
    flows: int
    triggers: int
    stores: int
    events: int

    def to_json(self) -> dict:
        return {
            "machines": self.machines,
            "stages": dict(self.stages),
            "flows": self.flows,
            "triggers": self.triggers,
            "stores": self.stores,
            "events": self.events,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ModelStats":
        return cls(doc["machines"], {k: doc["stages"].get(k, 0) for k in KIND_NAMES},
                   doc["flows"], doc["triggers"], doc["stores"], doc["events"])

    def __eq__(self, other):
        if not isinstance(other, ModelStats):
            return NotImplemented
        return self.to_json() == other.to_json()


def model_stats(model: Model) -> ModelStats:
    counts = Counter(s.kind.value for s in model.stages)
    return ModelStats(
        machines=len(model.machines),
        stages={k.value: counts.get(k.value, 0) for k in KIND_ORDER},
        flows=len(model.flows),
        triggers=len(model.triggers),
        stores=len(model.stores),
        events=len(model.events),
    )


class ModelBuilder:
    """Incremental construction with invariant checks.

    Violations raise :class:`ModelError` with ``E-DUPLICATE``, ``E-UNRESOLVED``
    or ``E-TYPE``; the parser turns these into positioned diagnostics.
    """

    def __init__(self):
        self._machines: Dict[str, dict] = {}
        self._stages: Dict[str, Stage] = {}
        self._stage_order: list[str] = []
        self._stores: Dict[str, Store] = {}
        self._flows: Dict[str, FlowArc] = {}
        self._triggers: Dict[str, TriggerArc] = {}
        self._events: Dict[str, EventDef] = {}
        self.spans: Dict[str, SourceSpan] = {}

    def machine(self, name: str, parent: Optional[str] = None, span: Optional[SourceSpan] = None) -> str:
        if parent is not None and parent not in self._machines:
            raise ModelError("E-UNRESOLVED", f"unknown parent machine '{parent}'")
        mid = f"{parent}.{name}" if parent else name
        if mid in self._machines:
            raise ModelError("E-DUPLICATE", f"machine '{mid}' declared twice")
        self._machines[mid] = {"name": name, "parent": parent, "stages": [], "subs": [], "stores": []}
        if parent:
            self._machines[parent]["subs"].append(mid)
        if span:
            self.spans[mid] = span
        return mid

    def stage(self, machine: str, kind, tag: Optional[str] = None, fn: Optional[str] = None,
              span: Optional[SourceSpan] = None) -> str:
        if machine not in self._machines:
            raise ModelError("E-UNRESOLVED", f"unknown machine '{machine}'")
        kind = StageKind(kind)
        sid = stage_id(machine, kind, tag)
        if sid in self._stages:
            what = f"{kind.value}#{tag}" if tag else f"untagged {kind.value}"
            raise ModelError("E-DUPLICATE", f"machine '{machine}' already has a {what} stage")
        self._stages[sid] = Stage(sid, kind, machine, tag, fn)
        self._machines[machine]["stages"].append(sid)
        if span:
            self.spans[sid] = span
        return sid

    def store(self, name: str, type: str, initial: Any, owner: Optional[str] = None,
              span: Optional[SourceSpan] = None, check: bool = True) -> str:
        if owner is not None and owner not in self._machines:
            raise ModelError("E-UNRESOLVED", f"unknown machine '{owner}'")
        if type not in STORE_TYPES:
            raise ModelError("E-TYPE", f"unknown store type '{type}'")
        if check and literal_type(initial) != type:
            raise ModelError("E-TYPE", f"store '{name}' declared {type} but initialised with {initial!r}")
        sid = f"{owner}.{name}" if owner else name
        if sid in self._stores:
            raise ModelError("E-DUPLICATE", f"store '{sid}' declared twice")
        self._stores[sid] = Store(sid, name, owner, type, initial)
        if owner:
            self._machines[owner]["stores"].append(sid)
        if span:
            self.spans[sid] = span
        return sid

    def _need_stage(self, sid: str):
        if sid not in self._stages:
            raise ModelError("E-UNRESOLVED", f"unknown stage '{sid}'")

    def flow(self, source: str, target: str, label: Optional[str] = None,
             span: Optional[SourceSpan] = None) -> str:
        self._need_stage(source)
        self._need_stage(target)
        fid = flow_id(source, target)
        if fid in self._flows:
            raise ModelError("E-DUPLICATE", f"flow {fid} declared twice")
        self._flows[fid] = FlowArc(fid, source, target, label)
        if span:
            self.spans[fid] = span
        return fid

    def trigger(self, source: str, target: str, guard: Optional[Expr] = None,
                span: Optional[SourceSpan] = None) -> str:
        self._need_stage(source)
        self._need_stage(target)
        tid = trigger_id(source, target)
        if tid in self._triggers:
            raise ModelError("E-DUPLICATE", f"trigger {tid} declared twice")
        self._triggers[tid] = TriggerArc(tid, source, target, guard)
        if span:
            self.spans[tid] = span
        return tid

    def event(self, ev: EventDef, span: Optional[SourceSpan] = None) -> str:
        if ev.id in self._events:
            raise ModelError("E-DUPLICATE", f"event '{ev.id}' declared twice")
        self._events[ev.id] = ev
        if span:
            self.spans[ev.id] = span
        return ev.id

    def build(self) -> Model:
        machines: list[Machine] = []

        def visit(mid):
            m = self._machines[mid]
            # stages in canonical kind order, declaration order within a kind
            stages = sorted(m["stages"], key=lambda s: KIND_ORDER.index(self._stages[s].kind))
            machines.append(Machine(mid, m["name"], m["parent"], tuple(stages), tuple(m["subs"]),
                                    tuple(m["stores"])))
            for sub in m["subs"]:
                visit(sub)

        for mid, m in self._machines.items():
            if m["parent"] is None:
                visit(mid)
        stages = tuple(self._stages[s] for m in machines for s in m.stages)
        stores = tuple(self._stores[s] for m in machines for s in m.stores) + tuple(
            s for s in self._stores.values() if s.owner is None)
        return Model(tuple(machines), stages, tuple(self._flows.values()),
                     tuple(self._triggers.values()), stores, tuple(self._events.values()),
                     dict(self.spans))
