"""Trace records and their JSON Lines form."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional

from .diagnostics import SchemaError

RECORD_KINDS = ("inject", "refuse-inject", "create", "fire-flow", "fire-trigger", "apply-fn",
                "store-write", "depart", "event")
FIELDS = ("step", "kind", "element", "thing", "before", "after")


def canonical(value: Any) -> Any:
    """Payload with record keys sorted, for byte-stable output."""
    if isinstance(value, dict):
        return {k: canonical(value[k]) for k in sorted(value)}
    return value


@dataclass(frozen=True)
class TraceRecord:
    step: int
    kind: str
    element: str
    thing: Optional[int] = None
    before: Any = None
    after: Any = None

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "kind": self.kind,
            "element": self.element,
            "thing": self.thing,
            "before": canonical(self.before),
            "after": canonical(self.after),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"), ensure_ascii=True)

    def fired_elements(self) -> tuple:
        """Model elements this record counts as firing, for event detection."""
        k = self.kind
        if k in ("inject", "create", "apply-fn", "store-write", "depart"):
            return (self.element,)
        if k in ("fire-flow", "fire-trigger"):
            return (self.element, self.after)
        return ()


@dataclass
class FinalState:
    stores: Dict[str, Any] = field(default_factory=dict)
    residents: Dict[str, List[int]] = field(default_factory=dict)
    steps: int = 0


@dataclass
class Trace:
    records: List[TraceRecord] = field(default_factory=list)
    final: Optional[FinalState] = None

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def to_jsonl(self) -> str:
        return "".join(r.to_json() + "\n" for r in self.records)

    @classmethod
    def from_jsonl(cls, text: str) -> "Trace":
        return cls(read_jsonl(text))

    def of_kind(self, *kinds: str) -> List[TraceRecord]:
        return [r for r in self.records if r.kind in kinds]

    def events(self) -> List[str]:
        return [r.element for r in self.records if r.kind == "event"]

    def things(self) -> List[int]:
        return [r.thing for r in self.records if r.kind in ("inject", "create")]

    def summary(self) -> dict:
        steps = self.final.steps if self.final else (self.records[-1].step + 1 if self.records else 0)
        return {"steps": steps, "things": len(self.things()), "events": self.events()}


def read_jsonl(text: str) -> List[TraceRecord]:
    out = []
    last = -1
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
        except ValueError as exc:
            raise SchemaError(f"trace line {n}: not JSON ({exc})") from None
        if not isinstance(d, dict) or set(d) != set(FIELDS):
            raise SchemaError(f"trace line {n}: expected fields {', '.join(FIELDS)}")
        if isinstance(d["step"], bool) or not isinstance(d["step"], int) or d["step"] < last:
            raise SchemaError(f"trace line {n}: step must be a non-decreasing integer")
        if d["kind"] not in RECORD_KINDS:
            raise SchemaError(f"trace line {n}: unknown record kind {d['kind']!r}")
        if not isinstance(d["element"], str):
            raise SchemaError(f"trace line {n}: element must be a string")
        if d["thing"] is not None and (isinstance(d["thing"], bool) or not isinstance(d["thing"], int)):
            raise SchemaError(f"trace line {n}: thing must be an integer or null")
        last = d["step"]
        out.append(TraceRecord(d["step"], d["kind"], d["element"], d["thing"], d["before"], d["after"]))
    return out


def conservation_ledger(records: Iterable[TraceRecord]) -> List[dict]:
    """Replay thing locations from the trace alone.

    Returns one row per step with cumulative ``injected``, ``created``,
    ``departed`` and the resident count; raises ``ValueError`` if any record
    moves, transforms or removes a thing that is not where the trace says it is.
    """
    where: Dict[int, str] = {}
    injected = created = departed = 0
    rows: List[dict] = []
    cur = None

    def close(step):
        rows.append({"step": step, "injected": injected, "created": created, "departed": departed,
                     "resident": len(where)})

    for r in records:
        if cur is not None and r.step != cur:
            close(cur)
        cur = r.step
        if r.kind == "inject" or r.kind == "create":
            if r.thing in where:
                raise ValueError(f"step {r.step}: thing {r.thing} introduced twice")
            where[r.thing] = r.element
            if r.kind == "inject":
                injected += 1
            else:
                created += 1
        elif r.kind == "fire-flow":
            if where.get(r.thing) != r.before:
                raise ValueError(f"step {r.step}: thing {r.thing} moved from {r.before} "
                                 f"but is at {where.get(r.thing)}")
            where[r.thing] = r.after
        elif r.kind == "apply-fn" and r.thing is not None:
            if where.get(r.thing) != r.element:
                raise ValueError(f"step {r.step}: function at {r.element} applied to absent thing "
                                 f"{r.thing}")
        elif r.kind == "depart":
            if where.get(r.thing) != r.element:
                raise ValueError(f"step {r.step}: thing {r.thing} departed from {r.element} "
                                 f"but is at {where.get(r.thing)}")
            del where[r.thing]
            departed += 1
        if injected + created - departed != len(where):
            raise ValueError(f"step {r.step}: ledger out of balance")
    if cur is not None:
        close(cur)
    return rows


def residents_by_stage(records: Iterable[TraceRecord]) -> Dict[str, List[int]]:
    where: Dict[int, str] = {}
    for r in records:
        if r.kind in ("inject", "create"):
            where[r.thing] = r.element
        elif r.kind == "fire-flow":
            where[r.thing] = r.after
        elif r.kind == "depart":
            where.pop(r.thing, None)
    out: Dict[str, List[int]] = {}
    for tid, sid in where.items():
        out.setdefault(sid, []).append(tid)
    return out
