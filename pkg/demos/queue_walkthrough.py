"""Five customers arrive at a desk whose queue holds three.

Prints the queue indices step by step, the refused arrival, and the events
detected along the way.

    python3 demos/queue_walkthrough.py
"""

from thingmachine import check_chronology, corpus, detect_events


def main():
    entry = corpus.load("queue")
    trace = corpus.run_script(entry, "blocked")
    stores = {"rear": 0, "front": 0, "blocked": False, "busy": False}
    for step in range(trace.final.steps):
        notes = []
        for r in trace.records:
            if r.step != step:
                continue
            if r.kind == "store-write":
                stores[r.element.split(".")[-1]] = r.after
            elif r.kind == "inject" and r.element == "Queue.transfer#in":
                notes.append(f"{r.after['name']} arrives")
            elif r.kind == "refuse-inject":
                notes.append(f"{r.after['name']} turned away")
            elif r.kind == "depart":
                notes.append(f"{r.before['name']} leaves")
        waiting = (stores["rear"] - stores["front"]) % 4
        print(f"step {step:2d}  rear={stores['rear']} front={stores['front']} waiting={waiting} "
              f"blocked={str(stores['blocked']):5s} busy={str(stores['busy']):5s}  "
              + "; ".join(notes))

    occs = detect_events(trace, entry.events, entry.model)
    print("\nevents:", " ".join(f"{o.event}@{o.step}" for o in occs))
    print("chronology:", "conforms" if check_chronology(occs, entry.chronology) else "violated")


if __name__ == "__main__":
    main()
