"""Graphviz DOT rendering: machines as nested clusters, flows solid, triggers dashed."""

from __future__ import annotations

from typing import List

from .core import Model
from .expr import format_expr


def _q(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def to_dot(model: Model, name: str = "tm") -> str:
    node = {s.id: f"s{i}" for i, s in enumerate(model.stages)}
    store_node = {s.id: f"m{i}" for i, s in enumerate(model.stores)}
    cluster_no = {m.id: i for i, m in enumerate(model.machines)}
    lines: List[str] = [f"digraph {_q(name)} {{", "  compound=true;", "  node [fontname=Helvetica];"]

    def store_line(sid, ind):
        st = model.store(sid)
        lines.append(f"{ind}{store_node[sid]} [label={_q(f'{st.name}: {st.type}')}, shape=box];")

    def cluster(mid: str, depth: int):
        m = model.machine(mid)
        ind = "  " * depth
        lines.append(f"{ind}subgraph cluster_{cluster_no[mid]} {{")
        lines.append(f"{ind}  label={_q(m.name)};")
        for s in model.machine_stages(mid):
            label = s.kind.value + (f"#{s.tag}" if s.tag else "") + (f"\n{s.fn}()" if s.fn else "")
            lines.append(f"{ind}  {node[s.id]} [label={_q(label)}, shape=ellipse];")
        for sid in m.stores:
            store_line(sid, ind + "  ")
        for sub in m.submachines:
            cluster(sub, depth + 1)
        lines.append(f"{ind}}}")

    for root in model.roots():
        cluster(root.id, 1)
    for s in model.stores:
        if s.owner is None:
            store_line(s.id, "  ")
    for f in model.flows:
        attrs = "style=solid" + (f", label={_q(f.label)}" if f.label else "")
        lines.append(f"  {node[f.source]} -> {node[f.target]} [{attrs}];")
    for t in model.triggers:
        attrs = "style=dashed"
        if t.guard is not None:
            attrs += f", label={_q(format_expr(t.guard))}"
        lines.append(f"  {node[t.source]} -> {node[t.target]} [{attrs}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
