"""Run the three login models with an honest and an adversarial script each."""

from thingmachine import corpus, detect_events

CASES = [("pki", "success", "wrong-key"), ("biometric", "success", "mismatch"),
         ("otp", "success", "wrong-otp")]


def session(entry, script):
    trace = corpus.run_script(entry, script)
    occs = detect_events(trace, entry.events, entry.model)
    last = entry.events[-1]
    opened = any(o.event == last.id for o in occs)
    return opened, [o.event for o in occs]


if __name__ == "__main__":
    for name, good, bad in CASES:
        entry = corpus.load(name)
        for script in (good, bad):
            opened, ids = session(entry, script)
            print(f"{name:9s} {script:9s} session={'yes' if opened else 'no ':3s}  {' '.join(ids)}")
    otp = corpus.run_script(corpus.load("otp"), "success").final.stores["System.otp"]
    print(f"\notp drawn with seed 42: {otp}")
