"""The bundled models: a service queue and three authentication schemes.

Each entry lives in its own directory::

    <name>/model.tm          model text
    <name>/scripts/*.json    injection scripts
    <name>/events.json       event definitions (with aliases)
    <name>/chronology.json   admissible event successions
    <name>/golden/*.jsonl    frozen trace per script
    <name>/manifest.json     frozen model_stats counts
    <name>/scenarios.json    seed, step budget and expected outcome per scenario

``TM_CORPUS_DIR`` points the loader at another directory with the same layout.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from ..core import EventDef, Model, ModelStats, model_stats
from ..diagnostics import CorpusError, TMError
from ..dsl import parse_model
from ..events import (Chronology, ChronologyResult, EventOccurrence, check_chronology,
                      detect_events, load_event_defs)
from ..sim import Script, SimConfig, simulate
from ..trace import Trace
from ..validate import validate
from .functions import corpus_fns, default_registry

__all__ = ["NAMES", "CorpusEntry", "Scenario", "Expectation", "corpus_dir", "names", "load",
           "scenario_matrix", "run_script", "run_scenario", "check_outcome", "corpus_fns",
           "default_registry"]

NAMES = ("queue", "pki", "biometric", "otp")


def corpus_dir() -> Path:
    override = os.environ.get("TM_CORPUS_DIR")
    if override:
        return Path(override)
    return Path(str(resources.files("thingmachine.corpus").joinpath("data")))


def names() -> List[str]:
    root = corpus_dir()
    if not os.environ.get("TM_CORPUS_DIR"):
        return list(NAMES)
    if not root.is_dir():
        return []
    return sorted(p.name for p in root.iterdir() if (p / "model.tm").is_file())


@dataclass(frozen=True)
class Expectation:
    present: Tuple[str, ...] = ()
    absent: Tuple[str, ...] = ()
    sequence: Optional[Tuple[str, ...]] = None
    refused: Optional[int] = None
    conforms: Optional[bool] = None

    @classmethod
    def from_json(cls, d: dict) -> "Expectation":
        seq = d.get("sequence")
        return cls(tuple(d.get("present", ())), tuple(d.get("absent", ())),
                   tuple(seq) if seq is not None else None, d.get("refused"), d.get("conforms"))


@dataclass(frozen=True)
class Scenario:
    name: str
    script_name: str
    script: Script = field(compare=False)
    expected: Expectation
    description: str = ""


@dataclass
class CorpusEntry:
    name: str
    path: Path
    text: str
    model: Model
    scripts: Dict[str, Script]
    events: List[EventDef]
    chronology: Chronology
    goldens: Dict[str, str]
    manifest: ModelStats
    seed: int
    max_steps: int
    scenarios: List[Scenario]

    def config(self, **overrides) -> SimConfig:
        kw = dict(max_steps=self.max_steps, seed=self.seed, fn_registry=default_registry())
        kw.update(overrides)
        return SimConfig(**kw)


def _read_json(path: Path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def load(name: str) -> CorpusEntry:
    """Parse, validate and assemble one corpus entry (``E-UNKNOWN-CORPUS`` if absent)."""
    root = corpus_dir() / name
    if name not in names() or not (root / "model.tm").is_file():
        raise CorpusError("E-UNKNOWN-CORPUS", f"no corpus entry named {name!r}; "
                          f"available: {', '.join(names())}")
    text = (root / "model.tm").read_text(encoding="utf-8")
    model = parse_model(text, f"{name}/model.tm")
    errors = [d for d in validate(model, default_registry()) if d.is_error]
    if errors:
        raise CorpusError("E-INVALID-MODEL", diagnostics=errors)
    scripts = {p.stem: Script.load(p) for p in sorted((root / "scripts").glob("*.json"))}
    events = load_event_defs((root / "events.json").read_text(encoding="utf-8"))
    declared = [(e.id, e.region, e.anchor) for e in model.events]
    if declared and declared != [(e.id, e.region, e.anchor) for e in events]:
        raise CorpusError("E-SCHEMA", f"{name}: events.json disagrees with the model's events")
    chron = Chronology.load(root / "chronology.json")
    goldens = {p.stem: p.read_text(encoding="utf-8")
               for p in sorted((root / "golden").glob("*.jsonl"))}
    manifest = ModelStats.from_json(_read_json(root / "manifest.json"))
    sc = _read_json(root / "scenarios.json")
    scenarios = []
    for d in sc["scenarios"]:
        if d["script"] not in scripts:
            raise CorpusError("E-SCHEMA", f"{name}: scenario {d['name']} names unknown script "
                              f"{d['script']!r}")
        scenarios.append(Scenario(d["name"], d["script"], scripts[d["script"]],
                                  Expectation.from_json(d.get("expect", {})), d.get("description", "")))
    return CorpusEntry(name, root, text, model, scripts, events, chron, goldens, manifest,
                       sc.get("seed", 0), sc.get("max_steps", 1000), scenarios)


def scenario_matrix(name: str) -> List[Scenario]:
    return load(name).scenarios


@dataclass
class Outcome:
    trace: Trace
    occurrences: List[EventOccurrence]
    chronology: ChronologyResult
    failures: List[str]

    @property
    def ok(self) -> bool:
        return not self.failures


def run_script(entry: CorpusEntry, script_name: str) -> Trace:
    return simulate(entry.model, entry.scripts[script_name], entry.config())


def check_outcome(entry: CorpusEntry, trace: Trace, expected: Expectation) -> Outcome:
    occs = detect_events(trace, entry.events, entry.model)
    ids = [o.event for o in occs]
    result = check_chronology(occs, entry.chronology)
    fails = []
    for e in expected.present:
        if e not in ids:
            fails.append(f"expected an occurrence of {e}")
    for e in expected.absent:
        if e in ids:
            fails.append(f"expected no occurrence of {e}")
    if expected.sequence is not None and tuple(ids) != expected.sequence:
        fails.append(f"expected occurrences {list(expected.sequence)}, got {ids}")
    if expected.refused is not None:
        n = len(trace.of_kind("refuse-inject"))
        if n != expected.refused:
            fails.append(f"expected {expected.refused} refused injection(s), got {n}")
    if expected.conforms is not None and result.conforms != expected.conforms:
        fails.append(f"expected conforms={expected.conforms}, got {result}")
    return Outcome(trace, occs, result, fails)


def run_scenario(entry: CorpusEntry, scenario: Scenario) -> Outcome:
    try:
        trace = simulate(entry.model, scenario.script, entry.config())
    except TMError as exc:
        return Outcome(Trace(), [], ChronologyResult(True), [str(exc)])
    return check_outcome(entry, trace, scenario.expected)


def manifest_for(model: Model) -> dict:
    return model_stats(model).to_json()
