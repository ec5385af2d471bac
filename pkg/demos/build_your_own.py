"""Write a model in the DSL, validate it, simulate it and draw it.

A sensor emits readings to a logger machine.  The logger counts what it
receives and, every third reading, triggers an alert.
"""

from thingmachine import (Script, SimConfig, parse_model, simulate, to_dot, validate)
from thingmachine.fns import builtin_fns, register_fn, step_store
from thingmachine.sim import Injection

MODEL = """
machine Sensor {
  create;
  release;
  transfer;
}

machine Logger {
  create#alert;
  process fn count;
  transfer;
  receive;
  store seen: int = 0;
  store every: int = 3;
}

flow Sensor.create -> Sensor.release carries reading;
flow Sensor.release -> Sensor.transfer;
flow Sensor.transfer -> Logger.transfer;
flow Logger.transfer -> Logger.receive;
flow Logger.receive -> Logger.process;
trigger Logger.process -> Logger.create#alert when seen == 0;

event Logged label "reading logged" region { Sensor.transfer, Logger.process };
event Alert label "alert raised" region { Logger.create#alert };
"""

if __name__ == "__main__":
    model = parse_model(MODEL)
    fns = builtin_fns()
    register_fn(fns, "count", step_store("seen", "every"))
    for d in validate(model, fns):
        print(d)
    script = Script(Injection(step, "Sensor.create", "reading", {"celsius": 20 + step})
                    for step in range(7))
    trace = simulate(model, script, SimConfig(fn_registry=fns))
    print(trace.summary())
    print(to_dot(model, "sensor"))
