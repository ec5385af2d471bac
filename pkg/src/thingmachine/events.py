"""Events over traces and chronology conformance.

An event fires when its anchor element fires and every other element of its
region has fired at some step since the event last fired.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .core import EventDef, Model
from .diagnostics import EventError, SchemaError
from .trace import Trace, TraceRecord

__all__ = ["EventDef", "EventOccurrence", "Chronology", "ChronologyResult", "Detector",
           "detect_events", "check_chronology", "occurrences_to_json", "occurrences_from_json",
           "load_event_defs", "event_defs_to_json"]


@dataclass(frozen=True)
class EventOccurrence:
    event: str
    step: int
    thing: Optional[int] = None

    def to_json(self) -> dict:
        return {"event": self.event, "step": self.step}


class Detector:
    """Streaming event detector: feed records of one step, then close the step."""

    def __init__(self, defs: Sequence[EventDef]):
        self.defs = list(defs)
        self._marks: List[set] = [set() for _ in self.defs]
        self._members = [frozenset(d.region) for d in self.defs]
        self._anchor_by = [None] * len(self.defs)
        self._anchored = [False] * len(self.defs)
        watch: Dict[str, List[int]] = {}
        for i, d in enumerate(self.defs):
            for el in d.region:
                watch.setdefault(el, []).append(i)
        self._watch = watch

    def feed(self, record: TraceRecord) -> None:
        for el in record.fired_elements():
            for i in self._watch.get(el, ()):
                self._marks[i].add(el)
                if el == self.defs[i].anchor:
                    self._anchored[i] = True
                    self._anchor_by[i] = record.thing

    def close_step(self, step: int) -> List[EventOccurrence]:
        out = []
        for i, d in enumerate(self.defs):
            if self._anchored[i] and self._marks[i] >= self._members[i]:
                out.append(EventOccurrence(d.id, step, self._anchor_by[i]))
                self._marks[i] = set()
            self._anchored[i] = False
        return out


def detect_events(trace: Union[Trace, Iterable[TraceRecord]], defs: Sequence[EventDef],
                  model: Optional[Model] = None) -> List[EventOccurrence]:
    """Occurrences of ``defs`` in ``trace``, ordered by step then definition order.

    Event records already present in the trace are ignored.  With ``model``
    given, every region element must exist in it (``E-REGION-UNKNOWN``).
    """
    if model is not None:
        for d in defs:
            bad = [el for el in d.region if model.element_kind(el) is None]
            if bad:
                raise EventError("E-REGION-UNKNOWN",
                                 f"event {d.id} region names unknown element(s) {', '.join(bad)}")
    records = trace.records if isinstance(trace, Trace) else list(trace)
    det = Detector(defs)
    out: List[EventOccurrence] = []
    cur = None
    for r in records:
        if r.kind == "event":
            continue
        if cur is not None and r.step != cur:
            out.extend(det.close_step(cur))
        cur = r.step
        det.feed(r)
    if cur is not None:
        out.extend(det.close_step(cur))
    return out


# --- chronology ---------------------------------------------------------------

@dataclass(frozen=True)
class Chronology:
    events: Tuple[str, ...]
    start: Tuple[str, ...]
    edges: Tuple[Tuple[str, str], ...]
    repeatable: Tuple[str, ...] = ()

    def __post_init__(self):
        known = set(self.events)
        if not self.start:
            raise SchemaError("chronology start set is empty")
        for e in list(self.start) + list(self.repeatable) + [x for ab in self.edges for x in ab]:
            if e not in known:
                raise SchemaError(f"chronology names undeclared event {e!r}")

    @classmethod
    def from_json(cls, doc) -> "Chronology":
        if isinstance(doc, (str, bytes)):
            try:
                doc = json.loads(doc)
            except ValueError as exc:
                raise SchemaError(f"chronology is not JSON: {exc}") from None
        if not isinstance(doc, dict) or not {"events", "start", "edges"} <= set(doc):
            raise SchemaError("chronology needs keys events, start, edges")
        unknown = set(doc) - {"events", "start", "edges", "repeatable"}
        if unknown:
            raise SchemaError(f"unknown chronology key(s) {', '.join(sorted(unknown))}")

        def ids(key):
            v = doc.get(key, [])
            if not isinstance(v, list) or not all(isinstance(x, str) for x in v):
                raise SchemaError(f"chronology {key} must be a list of event ids")
            return tuple(v)

        edges = doc["edges"]
        if not isinstance(edges, list) or not all(
                isinstance(e, list) and len(e) == 2 and all(isinstance(x, str) for x in e)
                for e in edges):
            raise SchemaError("chronology edges must be [from, to] pairs")
        return cls(ids("events"), ids("start"), tuple((a, b) for a, b in edges), ids("repeatable"))

    @classmethod
    def load(cls, path) -> "Chronology":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    @classmethod
    def complete(cls, events: Sequence[str]) -> "Chronology":
        ev = tuple(events)
        return cls(ev, ev, tuple((a, b) for a in ev for b in ev), ev)

    def to_json(self) -> dict:
        return {"events": list(self.events), "start": list(self.start),
                "edges": [list(e) for e in self.edges], "repeatable": list(self.repeatable)}


@dataclass(frozen=True)
class ChronologyResult:
    conforms: bool
    index: Optional[int] = None
    pair: Optional[Tuple[Optional[str], str]] = None
    step: Optional[int] = None

    def __bool__(self) -> bool:
        return self.conforms


def check_chronology(occs: Sequence[EventOccurrence], chron: Chronology) -> ChronologyResult:
    """First violation of ``chron`` in ``occs``, or conformance.

    A start violation is reported at index 0 with pair ``(None, first)``.
    Repeating an event back to back needs either a self-loop edge or the event
    in the repeatable set.
    """
    if not occs:
        return ChronologyResult(True)
    known = set(chron.events)
    for o in occs:
        if o.event not in known:
            raise EventError("E-REGION-UNKNOWN", f"occurrence of undeclared event {o.event!r}")
    if occs[0].event not in chron.start:
        return ChronologyResult(False, 0, (None, occs[0].event), occs[0].step)
    edges = set(chron.edges)
    rep = set(chron.repeatable)
    for i in range(1, len(occs)):
        a, b = occs[i - 1].event, occs[i].event
        if (a, b) in edges or (a == b and a in rep):
            continue
        return ChronologyResult(False, i, (a, b), occs[i].step)
    return ChronologyResult(True)


# --- JSON forms -----------------------------------------------------------------

def occurrences_to_json(occs: Sequence[EventOccurrence]) -> str:
    return json.dumps([o.to_json() for o in occs], separators=(",", ":"))


def occurrences_from_json(text: str) -> List[EventOccurrence]:
    try:
        doc = json.loads(text)
    except ValueError as exc:
        raise SchemaError(f"occurrence list is not JSON: {exc}") from None
    if not isinstance(doc, list):
        raise SchemaError("occurrence list must be a JSON array")
    out = []
    for o in doc:
        if (not isinstance(o, dict) or set(o) != {"event", "step"} or not isinstance(o["event"], str)
                or isinstance(o["step"], bool) or not isinstance(o["step"], int)):
            raise SchemaError("each occurrence is {event, step}")
        out.append(EventOccurrence(o["event"], o["step"]))
    return out


def event_defs_to_json(defs: Sequence[EventDef]) -> list:
    return [{"id": d.id, "label": d.label, "region": list(d.region), "anchor": d.anchor,
             "aliases": list(d.aliases)} for d in defs]


def load_event_defs(doc) -> List[EventDef]:
    """Event definitions from a JSON array of {id, label, region, anchor?, aliases?}."""
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except ValueError as exc:
            raise SchemaError(f"event definitions are not JSON: {exc}") from None
    if not isinstance(doc, list):
        raise SchemaError("event definitions must be a JSON array")
    out = []
    for d in doc:
        if not isinstance(d, dict) or "id" not in d or "region" not in d:
            raise SchemaError("each event definition needs id and region")
        region = d["region"]
        if not isinstance(region, list) or not region or not all(isinstance(x, str) for x in region):
            raise SchemaError(f"event {d.get('id')}: region must be a non-empty list of ids")
        ev = EventDef.of(d["id"], region, d.get("label", ""), d.get("anchor"), d.get("aliases", ()))
        if ev.anchor not in ev.region:
            raise SchemaError(f"event {ev.id}: anchor {ev.anchor!r} is not in its region")
        out.append(ev)
    return out
