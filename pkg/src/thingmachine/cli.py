"""``tm`` command line.

Exit status: 0 success or conformance, 1 diagnostics or non-conformance,
2 usage or I/O errors.  Summaries go to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from . import corpus
from .core import Model, model_stats
from .diagnostics import Diagnostic, ModelError, SchemaError, SimError, TMError
from .diagram import to_dot
from .dsl import from_json, parse_model
from .events import (Chronology, check_chronology, detect_events, load_event_defs,
                     occurrences_to_json)
from .sim import Script, SimConfig, simulate
from .trace import Trace
from .validate import validate

OK, FAIL, USAGE = 0, 1, 2


class _Usage(Exception):
    pass


def _err(*parts):
    print(*parts, file=sys.stderr)


def _read(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise _Usage(f"cannot read {path}: {exc.strerror or exc}") from None


def _load_model(path: str) -> Model:
    """Parse a ``.tm`` or ``.json`` model; ModelError/SchemaError propagate."""
    data = _read(path)
    if path.endswith(".json"):
        return from_json(data)
    return parse_model(data, path)


def _model_or_report(path: str) -> Optional[Model]:
    try:
        return _load_model(path)
    except ModelError as exc:
        for d in exc.diagnostics or [Diagnostic(exc.code, exc.message)]:
            _err(d)
    except SchemaError as exc:
        _err(f"{exc.code}: {exc.message}")
    return None


def cmd_validate(args) -> int:
    try:
        model = _load_model(args.path)
        diags = validate(model, corpus.default_registry())
    except ModelError as exc:
        diags = exc.diagnostics or [Diagnostic(exc.code, exc.message)]
    except SchemaError as exc:
        diags = [Diagnostic(exc.code, exc.message)]
    errors = sum(d.is_error for d in diags)
    if args.format == "json":
        print(json.dumps([d.to_json() for d in diags], indent=2))
    else:
        for d in diags:
            _err(d)
        print(f"{args.path}: {errors} error(s), {len(diags) - errors} warning(s)")
    return FAIL if errors else OK


def cmd_simulate(args) -> int:
    model = _model_or_report(args.path)
    if model is None:
        return FAIL
    try:
        script = Script.from_json(_read(args.script)) if args.script else Script()
    except SimError as exc:
        _err(f"{exc.code}: {exc.message}")
        return USAGE
    try:
        config = SimConfig(max_steps=args.max_steps, seed=args.seed,
                           fn_registry=corpus.default_registry())
    except ValueError as exc:
        raise _Usage(str(exc)) from None
    try:
        trace = simulate(model, script, config)
    except SimError as exc:
        for d in exc.diagnostics:
            _err(d)
        _err(f"{exc.code}: {exc.message}")
        return USAGE if exc.code == "E-SCRIPT" else FAIL
    if args.trace:
        try:
            Path(args.trace).write_text(trace.to_jsonl(), encoding="utf-8")
        except OSError as exc:
            raise _Usage(f"cannot write {args.trace}: {exc.strerror or exc}") from None
    s = trace.summary()
    print(f"steps: {s['steps']}")
    print(f"things: {s['things']}")
    print(f"records: {len(trace)}")
    print("events: " + (" ".join(s["events"]) if s["events"] else "(none)"))
    return OK


def cmd_events(args) -> int:
    model = _model_or_report(args.path)
    if model is None:
        return FAIL
    try:
        trace = Trace.from_jsonl(_read(args.trace).decode("utf-8", errors="replace"))
        chron = Chronology.from_json(_read(args.chronology))
        defs = load_event_defs(_read(args.events)) if args.events else list(model.events)
        occs = detect_events(trace, defs, model)
    except (SchemaError, TMError) as exc:
        _err(f"{exc.code}: {exc.message}")
        return USAGE
    if args.occurrences:
        Path(args.occurrences).write_text(occurrences_to_json(occs) + "\n", encoding="utf-8")
    if not occs:
        print("no occurrences; conforms vacuously")
        return OK
    print("occurrences: " + " ".join(f"{o.event}@{o.step}" for o in occs))
    try:
        result = check_chronology(occs, chron)
    except TMError as exc:
        _err(f"{exc.code}: {exc.message}")
        return USAGE
    if result.conforms:
        print("conforms")
        return OK
    first, second = result.pair
    if first is None:
        print(f"violation at index 0 (step {result.step}): {second} is not an allowed first event")
        edges = set(chron.edges)
        rep = set(chron.repeatable)
        for i in range(1, len(occs)):
            a, b = occs[i - 1].event, occs[i].event
            if (a, b) not in edges and not (a == b and a in rep):
                print(f"offending pair ({a},{b}) at index {i} (step {occs[i].step})")
                break
    else:
        print(f"violation at index {result.index} (step {result.step}): "
              f"offending pair ({first},{second})")
    return FAIL


def cmd_diagram(args) -> int:
    model = _model_or_report(args.path)
    if model is None:
        return FAIL
    dot = to_dot(model, Path(args.path).stem)
    if args.output in (None, "-"):
        sys.stdout.write(dot)
        return OK
    try:
        Path(args.output).write_text(dot, encoding="utf-8")
    except OSError as exc:
        _err(f"cannot write {args.output}: {exc.strerror or exc}")
        return USAGE
    print(f"wrote {args.output}")
    return OK


def cmd_corpus(args) -> int:
    if args.action == "list":
        for n in corpus.names():
            print(n)
        return OK
    if not args.name:
        raise _Usage(f"corpus {args.action} needs a name")
    try:
        entry = corpus.load(args.name)
    except TMError as exc:
        for d in exc.diagnostics:
            _err(d)
        _err(f"{exc.code}: {exc.message}")
        return USAGE if exc.code == "E-UNKNOWN-CORPUS" else FAIL
    if args.action == "show":
        print(f"name: {entry.name}")
        print(f"path: {entry.path}")
        print("stats: " + json.dumps(model_stats(entry.model).to_json(), sort_keys=True))
        print("stores: " + " ".join(s.id for s in entry.model.stores))
        print("scripts: " + " ".join(entry.scripts))
        for sc in entry.scenarios:
            print(f"scenario {sc.name} ({sc.script_name}): {sc.description}")
        return OK
    chosen = [s for s in entry.scenarios if not args.scenario or s.name == args.scenario]
    if not chosen:
        raise _Usage(f"no scenario {args.scenario!r} in {entry.name}")
    status = OK
    for sc in chosen:
        out = corpus.run_scenario(entry, sc)
        ids = " ".join(o.event for o in out.occurrences) or "(none)"
        print(f"{'PASS' if out.ok else 'FAIL'} {entry.name}/{sc.name}: {ids}")
        for f in out.failures:
            _err(f"  {f}")
        if not out.ok:
            status = FAIL
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tm", description="Thing Machine model toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="parse and check a model")
    v.add_argument("path")
    v.add_argument("--format", choices=("text", "json"), default="text")
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("simulate", help="run a script against a model")
    s.add_argument("path")
    s.add_argument("--script")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-steps", type=int, default=1000)
    s.add_argument("--trace", help="write the JSONL trace here")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("events", help="detect events in a trace and check a chronology")
    e.add_argument("path")
    e.add_argument("--trace", required=True)
    e.add_argument("--chronology", required=True)
    e.add_argument("--events", help="event definitions JSON (default: the model's events)")
    e.add_argument("--occurrences", help="write the occurrence list JSON here")
    e.set_defaults(func=cmd_events)

    d = sub.add_parser("diagram", help="emit Graphviz DOT")
    d.add_argument("path")
    d.add_argument("-o", "--output")
    d.set_defaults(func=cmd_diagram)

    c = sub.add_parser("corpus", help="bundled models")
    c.add_argument("action", choices=("list", "show", "run"))
    c.add_argument("name", nargs="?")
    c.add_argument("--scenario")
    c.set_defaults(func=cmd_corpus)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    try:
        return args.func(args)
    except _Usage as exc:
        _err(f"tm: {exc}")
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
