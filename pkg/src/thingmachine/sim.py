"""Deterministic token-flow simulation.

One step runs these phases:

1. scripted injections (into Transfer or Create stages);
2. flow fixpoint: every free thing moves one arc per round, taking the first
   outgoing arc (declaration order) whose destination accepts, until nothing
   moves;
3. triggers, in declaration order and each at most once, over the stages that
   fired in phases 1-2 plus those left pending by the previous step;
4. a second flow fixpoint for the things released or created in phase 3;
5. event detection.

Stages that fired in phases 3-4 are pending for the next step, so a cascade of
triggers advances one level per step.  Things arriving at a stage that is the
target of some trigger (a *gated* stage) rest there until a trigger releases
them; such a stage counts as firing when it lets a thing go, not on arrival.
A Transfer with no outgoing flow is the model boundary: things arriving there
depart.  A flow arc that carries a label only moves things of that type.
"""

from __future__ import annotations

import json
import random
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from .core import Model, Stage, StageKind, lookup_stage
from .diagnostics import ModelError, SimError
from .events import Detector
from .expr import ExprEvalError, evaluate, literal_type
from .fns import ProcessingFn, builtin_fns
from .trace import FinalState, Trace, TraceRecord, canonical
from .validate import validate

MICRO_CAP = 10_000


def _is_literal(v) -> bool:
    return literal_type(v) is not None


def check_payload(value, what="payload"):
    """Payloads are null, a literal, or a flat record of literals."""
    if value is None or _is_literal(value):
        return value
    if isinstance(value, dict) and all(isinstance(k, str) and _is_literal(v) for k, v in value.items()):
        return dict(value)
    raise ValueError(f"{what} must be an int, bool, string or a record of those, got {value!r}")


@dataclass
class Thing:
    id: int
    type: str
    payload: Any
    stage: str
    held: bool = False


@dataclass(frozen=True)
class Injection:
    step: int
    target: str
    type: str
    payload: Any = None


class Script:
    """Scripted arrivals, kept in step order (stable for equal steps)."""

    def __init__(self, injections=()):
        injections = list(injections)
        for inj in injections:
            if isinstance(inj.step, bool) or not isinstance(inj.step, int) or inj.step < 0:
                raise SimError("E-SCRIPT", f"injection step must be a non-negative int, got {inj.step!r}")
            if not isinstance(inj.target, str) or not isinstance(inj.type, str):
                raise SimError("E-SCRIPT", "injection target and type must be strings")
            try:
                check_payload(inj.payload)
            except ValueError as exc:
                raise SimError("E-SCRIPT", str(exc)) from None
        self.injections = sorted(injections, key=lambda i: i.step)

    def __len__(self):
        return len(self.injections)

    def __iter__(self):
        return iter(self.injections)

    @classmethod
    def from_json(cls, doc) -> "Script":
        if isinstance(doc, (str, bytes)):
            try:
                doc = json.loads(doc)
            except ValueError as exc:
                raise SimError("E-SCRIPT", f"script is not JSON: {exc}") from None
        if not isinstance(doc, list):
            raise SimError("E-SCRIPT", "script must be a JSON array")
        out = []
        for n, d in enumerate(doc):
            if not isinstance(d, dict) or not {"step", "target"} <= set(d) or set(d) - {
                    "step", "target", "type", "payload"}:
                raise SimError("E-SCRIPT", f"injection {n}: expected {{step, target, type, payload}}")
            out.append(Injection(d["step"], d["target"], d.get("type", "thing"), d.get("payload")))
        return cls(out)

    @classmethod
    def load(cls, path) -> "Script":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    def to_json(self) -> list:
        return [{"step": i.step, "target": i.target, "type": i.type, "payload": canonical(i.payload)}
                for i in self.injections]


@dataclass
class SimConfig:
    max_steps: int = 1000
    seed: int = 0
    fn_registry: Dict[str, ProcessingFn] = field(default_factory=builtin_fns)
    micro_cap: int = MICRO_CAP

    def __post_init__(self):
        if self.max_steps < 0:
            raise ValueError("max_steps must be >= 0")


class StoreView(Mapping):
    """Read-only store values as seen from one machine."""

    def __init__(self, model: Model, values: Dict[str, Any], context: Optional[str]):
        self._model = model
        self._values = values
        self._ctx = [context]

    def __getitem__(self, name):
        try:
            return self._values[self._model.resolve_store(name, self._ctx).id]
        except KeyError:
            raise KeyError(name) from None

    def __iter__(self):
        return iter(self._values)

    def __len__(self):
        return len(self._values)


class _Run:
    def __init__(self, model: Model, script: Script, config: SimConfig):
        self.m = model
        self.cfg = config
        self.rng = random.Random(config.seed)
        self.values = {s.id: s.initial for s in model.stores}
        self.things: Dict[int, Thing] = {}
        self.at: Dict[str, List[int]] = {s.id: [] for s in model.stages}
        self.next_id = 1
        self.records: List[TraceRecord] = []
        self.step = 0
        self.gated = {t.target for t in model.triggers
                      if model.stage(t.target).kind is not StageKind.CREATE}
        self.out = {s.id: model.outgoing(s.id) for s in model.stages}
        self.snapshot: Dict[str, Any] = {}
        self.fired: List[str] = []
        self.moves = 0
        self.detector = Detector(model.events)
        self.labels = {e.id: e.label for e in model.events}
        self.targets = []
        for inj in script:
            try:
                st = lookup_stage(model, inj.target)
            except ModelError as exc:
                raise SimError("E-SCRIPT", exc.message) from None
            if st is None:
                raise SimError("E-SCRIPT", f"injection target {inj.target!r} does not resolve")
            if st.kind not in (StageKind.TRANSFER, StageKind.CREATE):
                raise SimError("E-SCRIPT", f"injection target {st.id} is a {st.kind.value} stage; "
                               f"only transfer and create accept injections")
            self.targets.append((inj, st))

    # records -------------------------------------------------------------
    def emit(self, kind, element, thing=None, before=None, after=None):
        r = TraceRecord(self.step, kind, element, thing, canonical(before), canonical(after))
        self.records.append(r)
        self.detector.feed(r)

    def fire(self, sid, payload):
        if sid not in self.fired:
            self.fired.append(sid)
        self.snapshot[sid] = payload

    # stores and functions ------------------------------------------------
    def blocked(self, machine: str) -> bool:
        sid = f"{machine}.blocked"
        return self.m.has_store(sid) and self.m.store(sid).type == "bool" and self.values[sid] is True

    def apply_fn(self, stage: Stage, thing: Optional[Thing]):
        fn = self.cfg.fn_registry[stage.fn]
        before = thing.payload if thing else None
        try:
            result = fn(before, StoreView(self.m, self.values, stage.owner), self.rng)
            payload, updates = result
        except SimError:
            raise
        except Exception as exc:
            raise SimError("E-FN-ERROR", f"function {stage.fn} at {stage.id} failed: {exc!r}") from None
        try:
            payload = check_payload(payload, f"result of {stage.fn}")
        except ValueError as exc:
            raise SimError("E-FN-ERROR", str(exc)) from None
        if not isinstance(updates, Mapping):
            raise SimError("E-FN-ERROR", f"function {stage.fn} must return (payload, updates)")
        resolved = {}
        for name, value in updates.items():
            sid = name if "." in name else f"{stage.owner}.{name}"
            if not self.m.has_store(sid) or self.m.store(sid).owner != stage.owner:
                raise SimError("E-STORE-WRITE", f"function {stage.fn} at {stage.id} wrote {name!r}, "
                               f"which machine {stage.owner} does not own")
            st = self.m.store(sid)
            if literal_type(value) != st.type:
                raise SimError("E-FN-ERROR", f"function {stage.fn} wrote {value!r} to {st.type} store "
                               f"{sid}")
            resolved[sid] = value
        tid = thing.id if thing else None
        self.emit("apply-fn", stage.id, tid, before, payload)
        if thing:
            thing.payload = payload
        for s in self.m.stores:
            if s.id in resolved:
                old = self.values[s.id]
                self.values[s.id] = resolved[s.id]
                self.emit("store-write", s.id, tid, old, resolved[s.id])
        return payload

    # things ---------------------------------------------------------------
    def new_thing(self, stage: Stage, type_: str, payload) -> Thing:
        t = Thing(self.next_id, type_, payload, stage.id)
        self.next_id += 1
        self.things[t.id] = t
        self.at[stage.id].append(t.id)
        return t

    def settle(self, thing: Thing):
        """Bookkeeping for a thing that has just reached ``thing.stage``."""
        st = self.m.stage(thing.stage)
        if st.id in self.gated:
            thing.held = True
        elif st.kind is StageKind.TRANSFER and not self.out[st.id]:
            self.depart(thing)

    def depart(self, thing: Thing):
        self.emit("depart", thing.stage, thing.id, thing.payload, None)
        self.at[thing.stage].remove(thing.id)
        del self.things[thing.id]

    def inject(self, inj: Injection, st: Stage):
        if st.kind is StageKind.TRANSFER and self.blocked(st.owner):
            self.emit("refuse-inject", st.id, None, None, inj.payload)
            return
        t = self.new_thing(st, inj.type, check_payload(inj.payload))
        self.emit("inject", st.id, t.id, None, t.payload)
        if st.kind is StageKind.CREATE and st.fn:
            self.apply_fn(st, t)
        if st.id not in self.gated:
            self.fire(st.id, t.payload)
        self.settle(t)

    def accepts(self, arc, thing: Thing) -> bool:
        if arc.label is not None and arc.label != thing.type:
            return False
        src, dst = self.m.stage(arc.source), self.m.stage(arc.target)
        if dst.kind is StageKind.TRANSFER and src.owner != dst.owner and self.blocked(dst.owner):
            return False
        return True

    def flow(self):
        while True:
            moved = set()
            for arc in self.m.flows:
                for tid in list(self.at[arc.source]):
                    t = self.things.get(tid)
                    if t is None or tid in moved or t.held or t.stage != arc.source:
                        continue
                    choice = next((a for a in self.out[arc.source] if self.accepts(a, t)), None)
                    if choice is not arc:
                        continue
                    self.moves += 1
                    if self.moves > self.cfg.micro_cap:
                        raise SimError("E-DIVERGENT", f"more than {self.cfg.micro_cap} moves in step "
                                       f"{self.step}; a flow loop has no resting stage")
                    moved.add(tid)
                    self.at[arc.source].remove(tid)
                    self.at[arc.target].append(tid)
                    t.stage = arc.target
                    self.emit("fire-flow", arc.id, tid, arc.source, arc.target)
                    dst = self.m.stage(arc.target)
                    if dst.kind is StageKind.PROCESS and dst.fn:
                        self.apply_fn(dst, t)
                    if dst.id not in self.gated:
                        self.fire(dst.id, t.payload)
                    self.settle(t)
            if not moved:
                return

    def guard_ok(self, trig) -> bool:
        if trig.guard is None:
            return True
        ctx = [self.m.stage(trig.source).owner, self.m.stage(trig.target).owner]

        def value(name):
            try:
                return self.values[self.m.resolve_store(name, ctx).id]
            except KeyError:
                raise ExprEvalError(f"unknown store {name!r}") from None

        try:
            ok = evaluate(trig.guard, value, self.snapshot.get(trig.source))
        except ExprEvalError as exc:
            raise SimError("E-GUARD-EVAL", f"guard of {trig.id} at step {self.step}: {exc}") from None
        if not isinstance(ok, bool):
            raise SimError("E-GUARD-EVAL", f"guard of {trig.id} gave {ok!r}, not a bool")
        return ok

    def activate(self, st: Stage):
        if st.kind is StageKind.CREATE:
            outs = self.out[st.id]
            if not outs:
                # nothing to carry: the stage creates a state, not a thing
                payload = self.apply_fn(st, None) if st.fn else None
                self.fire(st.id, payload)
                return
            label = next((a.label for a in outs if a.label), None)
            t = self.new_thing(st, label or st.tag or "thing", None)
            self.emit("create", st.id, t.id, None, None)
            if st.fn:
                self.apply_fn(st, t)
            self.fire(st.id, t.payload)
            return
        for tid in self.at[st.id]:
            t = self.things[tid]
            if t.held:
                t.held = False
                self.fire(st.id, t.payload)
                if st.kind is StageKind.TRANSFER and not self.out[st.id]:
                    self.depart(t)
                return

    def run_step(self, injections, pending: List[str]) -> List[str]:
        self.moves = 0
        self.fired = []
        for inj, st in injections:
            self.inject(inj, st)
        self.flow()
        candidates = list(pending) + [s for s in self.fired if s not in pending]
        self.fired = []
        for trig in self.m.triggers:
            if trig.source in candidates and self.guard_ok(trig):
                self.emit("fire-trigger", trig.id, None, trig.source, trig.target)
                self.activate(self.m.stage(trig.target))
        self.flow()
        for occ in self.detector.close_step(self.step):
            self.records.append(TraceRecord(self.step, "event", occ.event, occ.thing, None,
                                            self.labels[occ.event]))
        return list(self.fired)


def simulate(model: Model, script: Optional[Script] = None, config: Optional[SimConfig] = None) -> Trace:
    """Run ``script`` against ``model`` and return the trace.

    Raises ``SimError`` with ``E-INVALID-MODEL`` when the model has validation
    errors, ``E-FN-MISSING`` for unregistered functions, and ``E-DIVERGENT``,
    ``E-GUARD-EVAL``, ``E-SCRIPT``, ``E-STORE-WRITE`` or ``E-FN-ERROR`` at run time.
    """
    script = script if script is not None else Script()
    config = config if config is not None else SimConfig()
    diags = [d for d in validate(model, config.fn_registry) if d.is_error]
    missing = [d for d in diags if d.code == "E-FN-MISSING"]
    if missing:
        raise SimError("E-FN-MISSING", diagnostics=missing)
    if diags:
        raise SimError("E-INVALID-MODEL", diagnostics=diags)
    run = _Run(model, script, config)
    queue = list(run.targets)
    pending: List[str] = []
    steps = 0
    for t in range(config.max_steps):
        run.step = t
        now = [q for q in queue if q[0].step == t]
        queue = [q for q in queue if q[0].step > t]
        mark = len(run.records)
        pending = run.run_step(now, pending)
        steps = t + 1
        if len(run.records) == mark and not pending and not queue:
            break
    residents = {sid: list(ids) for sid, ids in run.at.items() if ids}
    return Trace(run.records, FinalState(dict(run.values), residents, steps))


def load_script(path) -> Script:
    try:
        return Script.load(path)
    except OSError as exc:
        raise SimError("E-SCRIPT", f"cannot read script: {exc}") from None
