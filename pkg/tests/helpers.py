from thingmachine import ModelBuilder


def build(machines, flows=(), triggers=(), stores=()):
    """Small models from plain tuples: ``machines`` maps name -> [(kind, tag, fn)]."""
    mb = ModelBuilder()
    for name, stages in machines.items():
        parent, _, leaf = name.rpartition(".")
        mb.machine(leaf, parent or None)
        for st in stages:
            kind, tag, fn = (tuple(st) + (None, None))[:3]
            mb.stage(name, kind, tag, fn)
    for name, type_, init, owner in stores:
        mb.store(name, type_, init, owner)
    for f in flows:
        mb.flow(*f)
    for t in triggers:
        mb.trigger(*t)
    return mb.build()
