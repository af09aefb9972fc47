"""Behavior-graph IR."""
from .build import build_behavior
from .canon import canonicalize
from .dot import export_dot
from .graph import BehaviorGraph, Node
from .interp import Effect, eval_op, evaluate_graph

__all__ = ["BehaviorGraph", "Node", "build_behavior", "canonicalize", "export_dot",
           "evaluate_graph", "eval_op", "Effect", "build_all"]


def build_all(spec) -> dict:
    """Canonical behavior graph of every instruction, in source order."""
    return {i.name: canonicalize(build_behavior(i)) for i in spec.instr_list()}
