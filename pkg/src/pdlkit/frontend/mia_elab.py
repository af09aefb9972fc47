"""Elaboration of micro architecture sections into MiaSpec."""
from __future__ import annotations

from graphlib import CycleError, TopologicalSorter

from ..errors import SpecNameError, SpecTypeError, UnsupportedFeature
from . import ast as A
from . import model as M

MAPPINGS = {"read": 1, "readOrForward": 2, "compute": 0, "verify": 0, "write": 1}


def _ann_words(ann):
    return [t.text for t in ann.tokens]


def _mia_annotations(d: A.MiaDef) -> dict:
    out = {"separateFetchPort": False, "dataBusWidth": None}
    for ann in d.annotations:
        words = _ann_words(ann)
        if words == ["separateFetchPort"]:
            out["separateFetchPort"] = True
        elif len(words) == 3 and words[0] == "dataBusWidth" and words[1] == "=" \
                and ann.tokens[2].value is not None:
            out["dataBusWidth"] = ann.tokens[2].value
        else:
            raise SpecTypeError(f"unknown micro architecture annotation [{ann.text}]", ann.span)
    return out


class _StageWalker:
    def __init__(self, spec: M.SpecModel, stage: A.StageDef, stage_names, logics):
        self.spec = spec
        self.stage = stage
        self.stage_names = stage_names
        self.logics = logics
        self.mappings: list[M.Mapping] = []
        self.deps: set[str] = set()
        self.fetch = False
        self.decode = False
        self.instr_vars: set[str] = set()
        self.assigned: set[str] = set()

    def resource_ok(self, name, span):
        s = self.spec
        known = set(s.regfiles) | set(s.registers)
        if s.memory is not None:
            known.add(s.memory.name)
        if s.pc is not None:
            known.add(s.pc.name)
        if name not in known:
            raise SpecNameError(f"unknown resource '@{name}' in stage {self.stage.name}", span)

    def value(self, e, span):
        """Classify a right-hand side: 'fetch', 'instr' or 'value'."""
        if isinstance(e, A.MFetchNext):
            self.fetch = True
            return "fetch"
        if isinstance(e, A.MDecode):
            kind = self.value(e.arg, span)
            if kind != "fetch":
                raise SpecTypeError("decode() expects a fetch result", span)
            self.decode = True
            return "instr"
        if isinstance(e, A.MRef):
            if e.member is None:
                if e.name in self.instr_vars:
                    return "instr"
                raise SpecNameError(f"unknown name '{e.name}' in stage {self.stage.name}", span)
            if e.name not in self.stage_names:
                raise SpecNameError(f"unknown stage '{e.name}'", span)
            if e.name == self.stage.name:
                raise SpecTypeError(f"stage {e.name} reads its own output", span)
            outs = dict(self.stage_names[e.name].outputs)
            if e.member not in outs:
                raise SpecNameError(f"stage {e.name} has no output '{e.member}'", span)
            self.deps.add(e.name)
            return {"FetchResult": "fetch", "Instruction": "instr"}.get(outs[e.member], "value")
        raise SpecTypeError("unsupported expression in stage body", span)

    def walk(self, stmts):
        for s in stmts:
            if isinstance(s, A.MLet):
                kind = self.value(s.value, s.span)
                if kind == "instr":
                    self.instr_vars.add(s.name)
                self.walk(s.body)
            elif isinstance(s, A.MIf):
                c = s.cond
                if not (isinstance(c, A.MRef) and c.member == "unknown" and c.name in self.instr_vars):
                    raise UnsupportedFeature("only 'if <instr>.unknown' conditions are supported", s.span)
                if not (len(s.then) == 1 and isinstance(s.then[0], A.MRaise)):
                    raise UnsupportedFeature("an unknown-instruction test must raise", s.span)
                self.stmt_raise(s.then[0])
                self.mappings.append(M.Mapping("check-invalid", span=s.span))
                self.walk(s.other)
            elif isinstance(s, A.MRaise):
                self.stmt_raise(s)
                self.mappings.append(M.Mapping("check-invalid", span=s.span))
            elif isinstance(s, A.MAssign):
                outs = dict(self.stage.outputs)
                if s.target not in outs:
                    raise SpecNameError(f"stage {self.stage.name} has no output '{s.target}'", s.span)
                if s.target in self.assigned:
                    raise SpecTypeError(f"output {s.target} assigned twice", s.span)
                kind = self.value(s.value, s.span)
                want = {"FetchResult": "fetch", "Instruction": "instr"}.get(outs[s.target], "value")
                if kind != want:
                    raise SpecTypeError(f"output {s.target} of type {outs[s.target]} gets a {kind}", s.span)
                self.assigned.add(s.target)
            elif isinstance(s, A.MCall):
                self.call(s)
            else:
                raise SpecTypeError("unsupported statement in stage body", s.span)

    def stmt_raise(self, r):
        if r.what != "invalid":
            raise UnsupportedFeature(f"unsupported construct 'raise {r.what}'", r.span)

    def call(self, s: A.MCall):
        if s.var not in self.instr_vars:
            raise SpecNameError(f"'{s.var}' is not an instruction in stage {self.stage.name}", s.span)
        if s.method not in MAPPINGS:
            raise UnsupportedFeature(f"unsupported instruction mapping '{s.method}'", s.span)
        if len(s.args) != MAPPINGS[s.method]:
            raise SpecTypeError(f"{s.method} takes {MAPPINGS[s.method]} argument(s)", s.span)
        res = s.args[0] if s.args else None
        logic = None
        if res is not None:
            self.resource_ok(res, s.span)
        if s.method == "readOrForward":
            logic = s.args[1]
            if logic not in self.logics:
                raise SpecNameError(f"unknown logic element '@{logic}'", s.span)
            if res not in self.spec.regfiles:
                raise SpecTypeError("readOrForward applies to register files", s.span)
        self.mappings.append(M.Mapping(s.method, res, logic, s.span))


def elaborate_mia(d: A.MiaDef, spec: M.SpecModel) -> M.MiaSpec:
    anns = _mia_annotations(d)
    logics = {}
    for lg in d.logics:
        kinds = [_ann_words(a) for a in lg.annotations]
        if kinds != [["forwarding"]]:
            raise UnsupportedFeature(f"logic element {lg.name} must be annotated [forwarding]", lg.span)
        if lg.name in logics:
            raise SpecNameError(f"duplicate logic element '{lg.name}'", lg.span)
        logics[lg.name] = "forwarding"
    by_name = {}
    for st in d.stages:
        if st.name in by_name:
            raise SpecNameError(f"duplicate stage '{st.name}'", st.span)
        if st.annotations:
            raise SpecTypeError(f"unknown stage annotation [{st.annotations[0].text}]", st.span)
        by_name[st.name] = st
    walkers = {}
    for st in d.stages:
        w = _StageWalker(spec, st, by_name, logics)
        w.walk(st.body)
        for o, _ in st.outputs:
            if o not in w.assigned:
                raise SpecTypeError(f"output {o} of stage {st.name} is never assigned", st.span)
        walkers[st.name] = w
    ts = TopologicalSorter()
    for st in d.stages:
        ts.add(st.name, *sorted(walkers[st.name].deps))
    try:
        # static_order is deterministic for a fixed insertion order; keep
        # textual order among independent stages by a stable ready-set walk
        ts.prepare()
        order = []
        textual = [s.name for s in d.stages]
        while ts.is_active():
            ready = sorted(ts.get_ready(), key=textual.index)
            for n in ready:
                order.append(n)
                ts.done(n)
    except CycleError as e:
        raise SpecTypeError(f"stage dependency cycle: {' -> '.join(e.args[1])}", d.span) from None
    stages = []
    for n in order:
        w = walkers[n]
        st = by_name[n]
        stages.append(M.MiaStage(n, list(st.outputs), w.mappings, w.fetch, w.decode, st.span))
    # a linear pipeline: each stage consumes the previous one only
    for i, s in enumerate(stages[1:], 1):
        deps = walkers[s.name].deps
        if deps != {stages[i - 1].name}:
            raise UnsupportedFeature(
                f"stage {s.name} must read exactly the preceding stage {stages[i - 1].name}", s.span)
    nf = sum(s.fetch for s in stages)
    nd = sum(s.decode for s in stages)
    if nf != 1 or nd != 1:
        raise SpecTypeError(f"a pipeline needs exactly one fetchNext and one decode "
                            f"(found {nf} and {nd})", d.span)
    fi = next(i for i, s in enumerate(stages) if s.fetch)
    di = next(i for i, s in enumerate(stages) if s.decode)
    if fi != 0 or di < fi:
        raise SpecTypeError("fetch must happen in the first stage, before decode", d.span)
    for i, s in enumerate(stages):
        if i < di and any(m.kind != "check-invalid" for m in s.mappings):
            raise SpecTypeError(f"stage {s.name} maps instructions before decode", s.span)
    return M.MiaSpec(d.name, d.isa, stages, logics, anns, d.span)
