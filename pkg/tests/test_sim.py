import os
import subprocess
import sys

import pytest

from thingmachine import SimConfig, SimError, Script, parse_model, simulate
from thingmachine import corpus
from thingmachine.fns import builtin_fns, register_fn
from thingmachine.sim import Injection

LINE = ("machine A { create; release; transfer; }\n"
        "flow A.create -> A.release; flow A.release -> A.transfer;\n")


def run(text, injections=(), **cfg):
    return simulate(parse_model(text), Script(Injection(*i) for i in injections), SimConfig(**cfg))


def kinds(trace):
    return [(r.step, r.kind, r.element) for r in trace.records]


def test_empty_script_empty_trace():
    for name in corpus.NAMES:
        t = simulate(corpus.load(name).model, Script(), corpus.load(name).config())
        assert t.records == []


def test_max_steps_zero():
    t = run(LINE, [(0, "A.create", "x", 1)], max_steps=0)
    assert t.records == [] and t.summary()["steps"] == 0
    with pytest.raises(ValueError):
        SimConfig(max_steps=-1)


def test_flow_to_boundary_departs():
    t = run(LINE, [(0, "A.create", "x", 1)])
    assert kinds(t) == [(0, "inject", "A.create"), (0, "fire-flow", "A.create->A.release"),
                        (0, "fire-flow", "A.release->A.transfer"), (0, "depart", "A.transfer")]
    assert t.final.residents == {}


def test_resting_at_flow_terminal_stage():
    t = run("machine A { create; release; } flow A.create -> A.release;", [(0, "A.create", "x", 1)])
    assert t.final.residents == {"A.release": [1]}


def test_labelled_arcs_route_by_type():
    text = ("machine A { transfer; receive#a; receive#b; }\n"
            "flow A.transfer -> A.receive#a carries apple; flow A.transfer -> A.receive#b;\n")
    t = run(text, [(0, "A.transfer", "apple", 1), (1, "A.transfer", "pear", 2)])
    assert t.final.residents == {"A.receive#a": [1], "A.receive#b": [2]}


def test_first_accepting_arc_in_declaration_order():
    text = ("machine A { receive; release#x; release#y; transfer; }\n"
            "flow A.transfer -> A.receive; flow A.receive -> A.release#y;\n"
            "flow A.receive -> A.release#x;\n")
    t = run(text, [(0, "A.transfer", "t", None)])
    assert t.final.residents == {"A.release#y": [1]}


def test_processing_preserves_identity():
    text = ("machine A { create; process fn incr_mod; release; store n: int = 10; }\n"
            "flow A.create -> A.process; flow A.process -> A.release;\n")
    t = run(text, [(0, "A.create", "x", 9)])
    fn = t.of_kind("apply-fn")
    assert [(r.thing, r.before, r.after) for r in fn] == [(1, 9, 0)]
    assert t.final.residents == {"A.release": [1]}


def test_gated_stage_holds_until_triggered():
    text = ("machine A { create#go; create#x; release; transfer; }\n"
            "flow A.create#x -> A.release; flow A.release -> A.transfer;\n"
            "trigger A.create#go -> A.release;\n")
    t = run(text, [(0, "A.create#x", "x", 1), (3, "A.create#go", "go", None)])
    assert t.of_kind("depart")[0].step == 3
    assert [r.step for r in t.of_kind("fire-trigger")] == [3]


def test_arrival_at_gated_stage_does_not_fire_triggers():
    text = ("machine A { create#go; create#x; create#y; release; transfer; }\n"
            "flow A.create#x -> A.release; flow A.release -> A.transfer;\n"
            "trigger A.create#go -> A.release; trigger A.release -> A.create#y;\n")
    t = run(text, [(0, "A.create#x", "x", 1)])
    assert not t.of_kind("fire-trigger")
    t = run(text, [(0, "A.create#x", "x", 1), (1, "A.create#go", "go", None)])
    assert [(r.step, r.element) for r in t.of_kind("fire-trigger")] == [
        (1, "A.create#go~>A.release"), (2, "A.release~>A.create#y")]


def test_trigger_on_empty_gate_is_a_no_op():
    text = ("machine A { create#go; create#y; release; transfer; create#x; }\n"
            "flow A.create#x -> A.release; flow A.release -> A.transfer;\n"
            "trigger A.create#go -> A.release; trigger A.release -> A.create#y;\n")
    t = run(text, [(0, "A.create#go", "go", None)])
    assert [r.element for r in t.of_kind("fire-trigger")] == ["A.create#go~>A.release"]


def test_guard_false_and_store_guard():
    text = ("machine A { create#a; create#b fn flip; store on: bool = false; }\n"
            "trigger A.create#a -> A.create#b when !on;\n")
    reg = builtin_fns()
    register_fn(reg, "flip", lambda p, s, r: (p, {"on": not s["on"]}))
    t = run(text, [(0, "A.create#a", "x", None), (1, "A.create#a", "x", None)], fn_registry=reg)
    writes = [(r.step, r.after) for r in t.of_kind("store-write")]
    assert writes == [(0, True)]
    assert t.final.stores["A.on"] is True


def test_state_create_applies_fn_without_thing():
    text = ("machine A { create#a; create#b fn bump; store k: int = 0; }\n"
            "trigger A.create#a -> A.create#b;\n")
    reg = builtin_fns()
    register_fn(reg, "bump", lambda p, s, r: (p, {"k": s["k"] + 1}))
    t = run(text, [(0, "A.create#a", "x", None)], fn_registry=reg)
    fn = t.of_kind("apply-fn")
    assert [(r.element, r.thing) for r in fn] == [("A.create#b", None)]
    assert not t.of_kind("create")


def test_trigger_creates_thing_on_labelled_arc():
    text = ("machine A { create#a; create#b; release; }\n"
            "flow A.create#b -> A.release carries token; trigger A.create#a -> A.create#b;\n")
    t = run(text, [(0, "A.create#a", "x", None)])
    created = t.of_kind("create")
    assert [(r.element, r.thing) for r in created] == [("A.create#b", 2)]
    assert t.final.residents == {"A.create#a": [1], "A.release": [2]}


def test_cascades_one_level_per_step():
    text = ("machine A { create#a; create#b; create#c; create#d; }\n"
            "trigger A.create#a -> A.create#b; trigger A.create#b -> A.create#c;\n"
            "trigger A.create#c -> A.create#d;\n")
    t = run(text, [(0, "A.create#a", "x", None)])
    assert [(r.step, r.after) for r in t.of_kind("fire-trigger")] == [
        (0, "A.create#b"), (1, "A.create#c"), (2, "A.create#d")]


def test_refused_injection_into_blocked_machine():
    text = ("machine Q { transfer; receive; store blocked: bool = true; }\n"
            "flow Q.transfer -> Q.receive;\n")
    t = run(text, [(0, "Q.transfer", "c", {"name": "x"})])
    assert kinds(t) == [(0, "refuse-inject", "Q.transfer")]
    assert t.records[0].after == {"name": "x"}


def test_cross_machine_flow_into_blocked_machine_waits():
    text = ("machine A { create; release; transfer; }\n"
            "machine Q { transfer; receive; store blocked: bool = true; }\n"
            "flow A.create -> A.release; flow A.release -> A.transfer;\n"
            "flow A.transfer -> Q.transfer; flow Q.transfer -> Q.receive;\n")
    t = run(text, [(0, "A.create", "c", None)])
    assert t.final.residents == {"A.transfer": [1]}


def test_divergent_loop():
    text = ("machine M { receive; release; transfer; }\n"
            "flow M.transfer -> M.receive; flow M.receive -> M.release;\n"
            "flow M.release -> M.transfer;\n")
    with pytest.raises(SimError) as exc:
        run(text, [(0, "M.transfer", "x", None)], micro_cap=500)
    assert exc.value.code == "E-DIVERGENT"


@pytest.mark.parametrize("inj,code", [
    ((0, "A.nowhere", "x", None), "E-SCRIPT"),
    ((0, "A.release", "x", None), "E-SCRIPT"),
    ((0, "B.create", "x", None), "E-SCRIPT"),
])
def test_script_targets(inj, code):
    with pytest.raises(SimError) as exc:
        run(LINE, [inj])
    assert exc.value.code == code


@pytest.mark.parametrize("inj", [(-1, "A.create", "x", None), (0, "A.create", "x", [1, 2]),
                                 (0, "A.create", "x", {"a": {"b": 1}}), (True, "A.create", "x", 1)])
def test_bad_injections(inj):
    with pytest.raises(SimError) as exc:
        Script([Injection(*inj)])
    assert exc.value.code == "E-SCRIPT"


def test_script_json():
    s = Script.from_json('[{"step": 2, "target": "A.create", "type": "x", "payload": 1},'
                         ' {"step": 0, "target": "A.create"}]')
    assert [i.step for i in s] == [0, 2]
    assert s.to_json()[0] == {"step": 0, "target": "A.create", "type": "thing", "payload": None}
    for bad in ["{}", "[1]", '[{"step": 0}]', '[{"step":0,"target":"A.create","extra":1}]', "nope"]:
        with pytest.raises(SimError):
            Script.from_json(bad)


def test_invalid_model_and_missing_fn():
    with pytest.raises(SimError) as exc:
        run("machine M { transfer; process; } flow M.transfer -> M.process;")
    assert exc.value.code == "E-INVALID-MODEL"
    with pytest.raises(SimError) as exc:
        run("machine M { create fn nope; release; } flow M.create -> M.release;")
    assert exc.value.code == "E-FN-MISSING"


def test_function_errors():
    text = ("machine A { create fn f; release; store x: int = 0; }\n"
            "machine B { create#z; store y: int = 0; }\n"
            "flow A.create -> A.release; trigger A.release -> B.create#z;\n")
    for fn, code in [(lambda p, s, r: (p, {"B.y": 1}), "E-STORE-WRITE"),
                     (lambda p, s, r: (p, {"x": "one"}), "E-FN-ERROR"),
                     (lambda p, s, r: ([p], {}), "E-FN-ERROR"),
                     (lambda p, s, r: 1 / 0, "E-FN-ERROR"),
                     (lambda p, s, r: (p, None), "E-FN-ERROR")]:
        reg = builtin_fns()
        register_fn(reg, "f", fn)
        with pytest.raises(SimError) as exc:
            run(text, [(0, "A.create", "x", 1)], fn_registry=reg)
        assert exc.value.code == code


def test_guard_eval_error():
    text = (LINE + "machine B { create#x; }\n"
            "trigger A.create -> B.create#x when payload.ok;\n")
    assert run(text, [(0, "A.create", "x", {"ok": True})]).of_kind("fire-trigger")
    assert not run(text, [(0, "A.create", "x", {"ok": False})]).of_kind("fire-trigger")
    for payload in [5, {"ok": 3}]:
        with pytest.raises(SimError) as exc:
            run(text, [(0, "A.create", "x", payload)])
        assert exc.value.code == "E-GUARD-EVAL"


def test_trace_wellformed_on_corpus():
    for name in corpus.NAMES:
        entry = corpus.load(name)
        for script in entry.scripts:
            t = corpus.run_script(entry, script)
            steps = [r.step for r in t.records]
            assert steps == sorted(steps)
            seen = set()
            for r in t.records:
                if r.kind in ("inject", "create"):
                    seen.add(r.thing)
                elif r.thing is not None:
                    assert r.thing in seen
            assert t.final.steps < entry.max_steps


def test_queue_safety():
    entry = corpus.load("queue")
    n = entry.model.store("Queue.n").initial
    for script in entry.scripts:
        t = corpus.run_script(entry, script)
        stores = {"Queue.rear": 0, "Queue.front": 0, "Queue.blocked": False}
        for r in t.records:
            if r.kind == "inject" and r.element == "Queue.transfer#in":
                assert stores["Queue.blocked"] is False
            if r.kind == "store-write" and r.element in stores:
                stores[r.element] = r.after
            assert 0 <= (stores["Queue.rear"] - stores["Queue.front"]) % n <= n - 1


def test_deterministic_across_hash_seeds(tmp_path):
    code = ("import sys; from thingmachine import corpus\n"
            "e = corpus.load(sys.argv[1]); sys.stdout.write(corpus.run_script(e, sys.argv[2]).to_jsonl())\n")
    for name, script in [("queue", "blocked"), ("otp", "success")]:
        outs = set()
        for seed in ("0", "1", "12345"):
            env = dict(os.environ, PYTHONHASHSEED=seed)
            out = subprocess.run([sys.executable, "-c", code, name, script], env=env,
                                 capture_output=True, text=True, check=True).stdout
            outs.add(out)
        assert len(outs) == 1
        assert outs.pop() == corpus.load(name).goldens[script]
