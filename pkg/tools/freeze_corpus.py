"""Regenerate the derived corpus files: events.json, manifest.json and golden traces.

Run after editing a model or script, then review the diff before committing:

    python3 tools/freeze_corpus.py [name ...]
"""

import json
import sys
from pathlib import Path

from thingmachine.core import model_stats
from thingmachine.corpus import NAMES, corpus_dir
from thingmachine.corpus.functions import default_registry
from thingmachine.dsl import parse_model
from thingmachine.events import event_defs_to_json
from thingmachine.sim import Script, SimConfig, simulate

ALIASES = {"queue": {"E3": ["E7"]}}


def freeze(name: str) -> None:
    root = corpus_dir() / name
    model = parse_model((root / "model.tm").read_text(encoding="utf-8"), f"{name}/model.tm")
    defs = event_defs_to_json(model.events)
    for d in defs:
        d["aliases"] = ALIASES.get(name, {}).get(d["id"], [])
    (root / "events.json").write_text(json.dumps(defs, indent=2) + "\n", encoding="utf-8")
    (root / "manifest.json").write_text(
        json.dumps(model_stats(model).to_json(), indent=2) + "\n", encoding="utf-8")
    sc = json.loads((root / "scenarios.json").read_text(encoding="utf-8"))
    config = SimConfig(max_steps=sc["max_steps"], seed=sc["seed"], fn_registry=default_registry())
    (root / "golden").mkdir(exist_ok=True)
    for path in sorted((root / "scripts").glob("*.json")):
        trace = simulate(model, Script.load(path), config)
        (root / "golden" / f"{path.stem}.jsonl").write_text(trace.to_jsonl(), encoding="utf-8")
        print(f"{name}/{path.stem}: {len(trace)} records")


if __name__ == "__main__":
    for n in sys.argv[1:] or NAMES:
        freeze(n)
