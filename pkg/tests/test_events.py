import json

import pytest

from thingmachine import (Chronology, EventError, EventOccurrence, SchemaError, TraceRecord,
                          check_chronology, detect_events, parse_model)
from thingmachine import corpus
from thingmachine.core import EventDef
from thingmachine.events import (event_defs_to_json, load_event_defs, occurrences_from_json,
                                 occurrences_to_json)


def occ(*names):
    return [EventOccurrence(n, i) for i, n in enumerate(names)]


def flow(step, arc, thing=1):
    src, dst = arc.split("->")
    return TraceRecord(step, "fire-flow", arc, thing, src, dst)


def test_degenerate_single_arc_region():
    d = EventDef.of("E", ["A.x->A.y"])
    records = [flow(0, "A.x->A.y"), flow(2, "A.x->A.y", 2), flow(2, "A.y->A.z")]
    got = detect_events(records, [d])
    assert [(o.event, o.step, o.thing) for o in got] == [("E", 0, 1), ("E", 2, 2)]


def test_anchor_completion_across_steps_and_reset():
    d = EventDef.of("E", ["A.a", "A.b"], anchor="A.b")
    rec = [TraceRecord(0, "inject", "A.a", 1), TraceRecord(3, "inject", "A.b", 2),
           TraceRecord(4, "inject", "A.b", 3), TraceRecord(5, "inject", "A.a", 4),
           TraceRecord(6, "inject", "A.b", 5)]
    assert [o.step for o in detect_events(rec, [d])] == [3, 6]


def test_ordering_by_step_then_declaration():
    d1, d2 = EventDef.of("X", ["A.a"]), EventDef.of("Y", ["A.a"])
    rec = [TraceRecord(0, "inject", "A.a", 1)]
    assert [o.event for o in detect_events(rec, [d2, d1])] == ["Y", "X"]
    assert [o.event for o in detect_events(rec, [d1, d2])] == ["X", "Y"]


def test_existing_event_records_ignored():
    d = EventDef.of("E", ["E"])
    assert detect_events([TraceRecord(0, "event", "E", None)], [d]) == []


def test_region_unknown():
    m = parse_model("machine M { create; }")
    with pytest.raises(EventError) as exc:
        detect_events([], [EventDef.of("E", ["M.ghost"])], m)
    assert exc.value.code == "E-REGION-UNKNOWN"


def test_occurrences_strictly_increasing_per_event():
    for name in corpus.NAMES:
        entry = corpus.load(name)
        for script in entry.scripts:
            occs = detect_events(corpus.run_script(entry, script), entry.events, entry.model)
            for e in entry.events:
                steps = [o.step for o in occs if o.event == e.id]
                assert steps == sorted(set(steps))


def test_detector_agrees_with_in_trace_event_records():
    for name in corpus.NAMES:
        entry = corpus.load(name)
        for script in entry.scripts:
            t = corpus.run_script(entry, script)
            occs = detect_events(t, entry.events, entry.model)
            assert [(o.event, o.step) for o in occs] == [
                (r.element, r.step) for r in t.of_kind("event")]


def test_queue_single_has_e9_before_e11():
    entry = corpus.load("queue")
    ids = [o.event for o in detect_events(corpus.run_script(entry, "single"), entry.events)]
    assert "E9" in ids and ids.index("E9") < ids.index("E11")


def test_queue_alias():
    entry = corpus.load("queue")
    e3 = [e for e in entry.events if e.id == "E3"][0]
    assert e3.aliases == ("E7",)


CHAIN = Chronology(("E1", "E2"), ("E1",), (("E1", "E2"),))


def test_chronology_basic():
    assert check_chronology(occ("E1", "E2"), CHAIN).conforms
    r = check_chronology(occ("E2", "E1"), CHAIN)
    assert not r and r.index == 0 and r.pair == (None, "E2")
    r = check_chronology(occ("E1", "E1"), CHAIN)
    assert (r.index, r.pair, r.step) == (1, ("E1", "E1"), 1)
    assert check_chronology([], CHAIN).conforms


def test_repeatable():
    chron = Chronology(("E1",), ("E1",), (), ("E1",))
    assert check_chronology(occ("E1", "E1", "E1"), chron).conforms


def test_complete_chronology_accepts_everything():
    import random
    rng = random.Random(3)
    names = [f"E{i}" for i in range(6)]
    chron = Chronology.complete(names)
    for _ in range(50):
        assert check_chronology(occ(*rng.choices(names, k=rng.randint(0, 12))), chron).conforms


def test_chronology_validation():
    with pytest.raises(SchemaError):
        Chronology(("E1",), (), ())
    with pytest.raises(SchemaError):
        Chronology(("E1",), ("E1",), (("E1", "E9"),))
    for doc in ["[]", "{}", '{"events":[],"start":[],"edges":[]}',
                '{"events":["a"],"start":["a"],"edges":[["a"]]}',
                '{"events":["a"],"start":["a"],"edges":[],"extra":1}', "nope"]:
        with pytest.raises(SchemaError):
            Chronology.from_json(doc)
    with pytest.raises(EventError):
        check_chronology(occ("E9"), CHAIN)


def test_chronology_json_round_trip():
    for name in corpus.NAMES:
        chron = corpus.load(name).chronology
        assert Chronology.from_json(json.dumps(chron.to_json())) == chron


def test_occurrence_json():
    occs = occ("E1", "E2")
    text = occurrences_to_json(occs)
    assert json.loads(text) == [{"event": "E1", "step": 0}, {"event": "E2", "step": 1}]
    assert occurrences_from_json(text) == occs
    for bad in ["{}", "[1]", '[{"event":"E1"}]', '[{"event":"E1","step":true}]']:
        with pytest.raises(SchemaError):
            occurrences_from_json(bad)


def test_event_defs_json():
    defs = corpus.load("queue").events
    assert load_event_defs(json.dumps(event_defs_to_json(defs))) == defs
    for bad in ["{}", "[{}]", '[{"id":"E","region":[]}]', '[{"id":"E","region":["a"],"anchor":"b"}]']:
        with pytest.raises(SchemaError):
            load_event_defs(bad)


def test_biometric_chain_conforms():
    entry = corpus.load("biometric")
    occs = detect_events(corpus.run_script(entry, "success"), entry.events, entry.model)
    assert check_chronology(occs, entry.chronology).conforms
    assert list(entry.chronology.edges) == [(f"E{i}", f"E{i + 1}") for i in range(1, 10)]
