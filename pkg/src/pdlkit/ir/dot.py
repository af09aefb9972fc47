"""Deterministic Graphviz DOT export."""
from __future__ import annotations

from .graph import BehaviorGraph


def _q(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(g: BehaviorGraph) -> str:
    lines = [f"digraph {_q(g.name or 'behavior')} {{", "  node [shape=box];"]
    # node ids are already a topological order with ties broken by id
    for n in g.nodes:
        shape = ""
        if n.is_effect:
            shape = ", shape=octagon"
        elif n.op in ("start", "end"):
            shape = ", shape=ellipse"
        lines.append(f"  n{n.id} [label={_q(n.label())}{shape}];")
    for n in g.nodes:
        for k, a in enumerate(n.args):
            lines.append(f"  n{a} -> n{n.id} [label=\"{k}\"];")
    lines.append(f"  n{g.start} -> n{g.end} [style=dashed];")
    lines.append("}")
    return "\n".join(lines) + "\n"
