"""Microarchitecture synthesis: Instruction Progress Graph, instruction
resolving, port inference and pipeline control.

The IPG is the union of all instructions' canonical behavior graphs.
Structurally equal nodes are shared; nodes with the same operation whose
operands differ per instruction are shared behind an ``imux`` node that
selects the operand by instruction kind.  Resolving walks the stages in
order and, mapping by mapping, marks IPG nodes available (reads, computes)
or placed (side effects).  Whatever is left at the end was never realized
by the pipeline.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import PortConflict, ResidualSemanticsError, UnsupportedMapping
from .ir.graph import EFFECTS

LEAVES = ("field", "pc", "const")
READ_OPS = ("readreg", "readmem")


# -- IPG ---------------------------------------------------------------------------
@dataclass
class IpgNode:
    id: int
    op: str
    attrs: tuple
    width: int
    args: list
    origins: set
    choices: dict = field(default_factory=dict)  # imux only: instruction -> arg id

    @property
    def is_effect(self):
        return self.op in EFFECTS

    @property
    def is_read(self):
        return self.op in READ_OPS

    @property
    def is_leaf(self):
        return self.op in LEAVES

    @property
    def res(self):
        if self.op in ("readreg", "readmem", "writereg", "writemem", "writepc"):
            return self.attrs[0]
        return None

    def label(self):
        a = self.attrs
        if self.op == "const":
            return f"const {a[0]:#x}:{self.width}"
        if self.op == "field":
            return f"field {a[0]}"
        if self.op == "pc":
            return "read<PC>"
        if self.op in ("readreg", "writereg"):
            return f"{'read' if self.op == 'readreg' else 'write'}<{a[0]}>"
        if self.op in ("readmem", "writemem"):
            return f"{'read' if self.op == 'readmem' else 'write'}<{a[0]}:{a[1]}>"
        if self.op == "writepc":
            return "write<PC>"
        if self.op == "slice":
            return f"slice {a[0]}..{a[1]}"
        if self.op == "imux":
            return f"mux instr ({len(self.choices)})"
        return self.op

    def __repr__(self):
        return f"#{self.id} {self.label()}({', '.join('#' + str(x) for x in self.args)})"


class Ipg:
    def __init__(self):
        self.nodes: dict[int, IpgNode] = {}
        self.instrs: list[str] = []
        self.graphs: dict = {}
        self.node_map: dict[str, dict[int, int]] = {}
        self._leaves: dict = {}
        self._by_sig: dict = {}

    def _new(self, op, attrs, width, args, origins):
        n = IpgNode(len(self.nodes), op, attrs, width, list(args), set(origins))
        self.nodes[n.id] = n
        return n

    def __len__(self):
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes.values())

    def __getitem__(self, i):
        return self.nodes[i]

    def users(self):
        out = {i: [] for i in self.nodes}
        for n in self.nodes.values():
            for a in n.args:
                out[a].append(n.id)
        return out

    def ancestors(self, root) -> set:
        seen = set()
        stack = [root]
        while stack:
            x = stack.pop()
            if x in seen:
                continue
            seen.add(x)
            stack.extend(self.nodes[x].args)
        return seen

    def arg_for(self, a: int, instr: str) -> int:
        """Resolve imux chains: the operand instr actually uses."""
        n = self.nodes[a]
        while n.op == "imux":
            n = self.nodes[n.choices[instr]]
        return n.id

    def effects(self):
        return [n for n in self.nodes.values() if n.is_effect]

    def topo_order(self):
        from graphlib import TopologicalSorter
        ts = TopologicalSorter({i: n.args for i, n in self.nodes.items()})
        return list(ts.static_order())

    def restrict(self, instr: str):
        """The slice of the IPG one instruction uses, muxes erased, as
        (op, attrs, width, args) tuples keyed by IPG id."""
        m = self.node_map[instr]
        out = {}
        for gid, nid in m.items():
            n = self.nodes[nid]
            out[nid] = (n.op, n.attrs, n.width, tuple(self.arg_for(a, instr) for a in n.args))
        return out


def _leaf_key(instr, n):
    if n.op == "field":
        f = instr.format.fields[n.attrs[0]]
        return ("field", tuple(f.ranges), n.width)
    return (n.op, n.attrs, n.width)


def build_ipg(graphs: dict, spec) -> Ipg:
    """Merge the canonical graphs of all instructions (name -> graph)."""
    ipg = Ipg()
    for name, g in graphs.items():
        instr = spec.instructions[name]
        ipg.instrs.append(name)
        ipg.graphs[name] = g
        m: dict[int, int] = {}
        ipg.node_map[name] = m
        for n in g.nodes:
            if n.op in ("start", "end"):
                continue
            args = [m[a] for a in n.args]
            if not args:
                key = _leaf_key(instr, n)
                hit = ipg._leaves.get(key)
                if hit is None:
                    hit = ipg._new(n.op, n.attrs, n.width, (), ()).id
                    ipg._leaves[key] = hit
                ipg.nodes[hit].origins.add(name)
                m[n.id] = hit
                continue
            m[n.id] = _merge(ipg, name, n, args)
    return ipg


def _merge(ipg: Ipg, name, n, args) -> int:
    sig = (n.op, n.attrs, n.width, len(args))
    best, best_score = None, -1
    for cid in ipg._by_sig.get(sig, ()):
        c = ipg.nodes[cid]
        if name in c.origins:
            continue
        score = 0
        for ca, a in zip(c.args, args):
            cn = ipg.nodes[ca]
            if ca == a or (cn.op == "imux" and a in cn.choices.values()):
                score += 1
        if score > best_score:
            best, best_score = c, score
    if best is not None and (best_score > 0 or n.op in EFFECTS):
        mism = [k for k, (ca, a) in enumerate(zip(best.args, args)) if ca != a]
        if all(best.id not in ipg.ancestors(args[k]) for k in mism):
            for k in mism:
                ca = best.args[k]
                cn = ipg.nodes[ca]
                if cn.op != "imux":
                    mux = ipg._new("imux", (), ipg.nodes[args[k]].width, (ca,), best.origins)
                    mux.choices = {o: ca for o in best.origins}
                    best.args[k] = mux.id
                    cn = mux
                cn.choices[name] = args[k]
                cn.origins.add(name)
                if args[k] not in cn.args:
                    cn.args.append(args[k])
            best.origins.add(name)
            return best.id
    node = ipg._new(n.op, n.attrs, n.width, args, (name,))
    ipg._by_sig.setdefault(sig, []).append(node.id)
    return node.id


# -- pipeline model ------------------------------------------------------------------
@dataclass
class ScheduledOp:
    mapping: str
    node: int
    label: str
    origins: tuple

    def __str__(self):
        return f"{self.mapping}: #{self.node} {self.label}"


@dataclass
class StageInfo:
    name: str
    ops: list
    fetch: bool = False
    decode: bool = False


@dataclass
class PipelineRegister:
    id: int
    boundary: str  # name of the stage whose output it is
    width: int
    sources: dict  # IPG node -> origin instructions


@dataclass
class Port:
    resource: str
    kind: str  # read | write
    stage: int
    index: int


@dataclass
class HazardRule:
    consumer: int
    resource: str
    producers: tuple
    forwarding: str | None


@dataclass
class Control:
    hazards: list
    forwards: list  # (producer stage, consumer stage, resource)
    verify_stage: int | None
    flush: tuple
    check_stage: int
    predictor: str = "always-not-taken"


@dataclass
class PipelineModel:
    mia: object
    ipg: Ipg
    stages: list
    registers: list
    avail: dict  # IPG node -> stage it became available / was placed
    read_logic: dict  # read node -> forwarding logic name or None
    fetch_stage: int
    decode_stage: int
    verify_stage: int | None
    check_stage: int
    ports: dict = field(default_factory=dict)
    port_binding: dict = field(default_factory=dict)
    control: Control | None = None

    @property
    def depth(self):
        return len(self.stages)

    def schedule(self, instr: str) -> dict:
        """Instruction graph node -> stage index."""
        return {gid: self.avail[nid] for gid, nid in self.ipg.node_map[instr].items()}

    def report(self) -> str:
        return pipeline_report(self)


class _Resolver:
    def __init__(self, mia, ipg: Ipg, pc_name):
        self.mia = mia
        self.ipg = ipg
        self.pc_name = pc_name
        self.avail: dict[int, int] = {}
        self.placed: set[int] = set()
        self.removed: set[int] = set()
        self.read_logic: dict[int, str | None] = {}
        self.users = ipg.users()
        self.stage = 0
        self.ops: list = []

    def ready(self, n):
        return all(a in self.avail for a in n.args)

    def mark(self, n, mapping):
        self.avail[n.id] = self.stage
        self.ops.append(ScheduledOp(mapping, n.id, n.label(), tuple(sorted(n.origins))))

    def compute_cone(self, nid, mapping) -> bool:
        """Implicitly compute the pure cone of nid; False if a read is missing."""
        if nid in self.avail:
            return True
        n = self.ipg[nid]
        if n.is_read or n.is_leaf or n.is_effect:
            return False
        ok = all([self.compute_cone(a, mapping) for a in n.args])
        if ok:
            self.mark(n, mapping)
        return ok

    def pending(self, n):
        return n.id not in self.avail and n.id not in self.placed

    # mappings -----------------------------------------------------------------------
    def do_decode(self):
        for n in self.ipg:
            if n.is_leaf and n.id not in self.avail:
                self.mark(n, "decode")

    def do_read(self, m):
        ready = [n for n in self.ipg if n.is_read and n.res == m.resource
                 and n.id not in self.avail and self.ready(n)]
        for n in ready:
            self.mark(n, str(m))
            self.read_logic[n.id] = m.logic if m.kind == "readOrForward" else None

    def do_compute(self):
        changed = True
        while changed:
            changed = False
            for nid in self.ipg.topo_order():
                n = self.ipg[nid]
                if (nid not in self.avail and not n.is_read and not n.is_leaf
                        and not n.is_effect and self.ready(n)):
                    self.mark(n, "compute")
                    changed = True

    def do_verify(self):
        for n in self.ipg.effects():
            if n.op == "writepc" and n.id not in self.placed:
                for a in n.args:
                    self.compute_cone(a, "verify")
                self.ops.append(ScheduledOp("verify", n.id, n.label(), tuple(sorted(n.origins))))

    def do_write(self, m):
        res = m.resource
        for n in self.ipg.effects():
            if n.id in self.placed:
                continue
            target = self.pc_name if n.op == "writepc" else n.res
            if target != res:
                continue
            # every read of res by the writing instructions must already have happened
            if any(r.is_read and r.res == res and r.id not in self.avail and r.origins & n.origins
                   for r in self.ipg):
                continue
            if all([self.compute_cone(a, str(m)) for a in n.args]):
                self.placed.add(n.id)
                self.avail[n.id] = self.stage
                self.ops.append(ScheduledOp(str(m), n.id, n.label(), tuple(sorted(n.origins))))

    def cleanup(self):
        """Drop available nodes nothing pending needs any more."""
        for nid in list(self.avail):
            if nid in self.removed:
                continue
            n = self.ipg[nid]
            if n.is_effect or not any(self.pending(self.ipg[u]) for u in self.users[nid]):
                self.removed.add(nid)

    def live(self):
        out = []
        for nid in self.avail:
            if nid in self.removed:
                continue
            n = self.ipg[nid]
            if n.op == "const" or n.is_effect:
                continue
            if any(self.pending(self.ipg[u]) for u in self.users[nid]):
                out.append(n)
        return out


def resolve(mia, ipg: Ipg, spec=None) -> PipelineModel:
    """Replace each stage's instruction mappings with scheduled IPG operations."""
    pc_name = spec.pc.name if spec is not None and spec.pc else "PC"
    r = _Resolver(mia, ipg, pc_name)
    stages = []
    registers = []
    fetch_stage = decode_stage = 0
    verify_stage = check_stage = None
    write_pc_stage = None
    for si, st in enumerate(mia.stages):
        r.stage = si
        r.ops = []
        if st.fetch:
            fetch_stage = si
        if st.decode:
            decode_stage = si
            r.do_decode()
        for m in st.mappings:
            if m.kind in ("read", "readOrForward"):
                r.do_read(m)
            elif m.kind == "compute":
                r.do_compute()
            elif m.kind == "verify":
                verify_stage = si
                r.do_verify()
            elif m.kind == "write":
                if m.resource == pc_name:
                    write_pc_stage = si
                r.do_write(m)
            elif m.kind == "check-invalid":
                check_stage = si
            else:
                raise UnsupportedMapping(f"mapping {m} is not supported", m.span)
        stages.append(StageInfo(st.name, r.ops, st.fetch, st.decode))
        r.cleanup()
        if si < len(mia.stages) - 1:
            registers.extend(_merge_registers(r.live(), st.name, len(registers)))

    residual = {}
    for n in ipg.effects():
        if n.id not in r.placed:
            for o in n.origins:
                residual.setdefault(o, []).append(n.label())
    if residual:
        names = [i for i in ipg.instrs if i in residual]
        raise ResidualSemanticsError(
            f"{mia.name}: semantics never realized for {len(names)} instruction(s): "
            + ", ".join(f"{i} ({', '.join(sorted(set(residual[i])))})" for i in names),
            {i: residual[i] for i in names})
    if verify_stage is None:
        verify_stage = write_pc_stage
    if check_stage is None:
        check_stage = decode_stage
    return PipelineModel(mia, ipg, stages, registers, dict(r.avail), r.read_logic,
                         fetch_stage, decode_stage, verify_stage, check_stage)


def _merge_registers(live, boundary, first_id):
    regs: list[PipelineRegister] = []
    for n in sorted(live, key=lambda n: (-n.width, n.id)):
        for reg in regs:
            if all(not (n.origins & o) for o in reg.sources.values()):
                reg.sources[n.id] = frozenset(n.origins)
                reg.width = max(reg.width, n.width)
                break
        else:
            regs.append(PipelineRegister(first_id + len(regs), boundary, n.width,
                                         {n.id: frozenset(n.origins)}))
    return regs


# -- ports ---------------------------------------------------------------------------
def infer_ports(model: PipelineModel, spec) -> PipelineModel:
    """Bind every register and memory access to a port; fill model.ports."""
    ipg = model.ipg
    mem = spec.memory.name if spec.memory else None
    separate_fetch = bool(model.mia.annotations.get("separateFetchPort"))
    ports: dict = {}
    binding: dict = {}
    for kind, ops in (("read", ("readreg", "readmem")), ("write", ("writereg", "writemem"))):
        by_res: dict = {}
        for n in ipg:
            if n.op in ops:
                by_res.setdefault(n.res, []).append(n)
        for res, nodes in sorted(by_res.items()):
            plist = ports.setdefault(res, {"read": [], "write": []})[kind]
            per_stage: dict = {}
            for n in nodes:
                per_stage.setdefault(model.avail[n.id], []).append(n)
            for st in sorted(per_stage):
                colors: dict = {}
                for n in sorted(per_stage[st], key=lambda n: n.id):
                    used = {c for o, c in colors.items() if ipg[o].origins & n.origins}
                    c = 0
                    while c in used:
                        c += 1
                    colors[n.id] = c
                count = max(colors.values()) + 1
                if res == mem and kind == "read":
                    if st == model.fetch_stage and not separate_fetch:
                        count += 1
                    if count > 1:
                        raise PortConflict(
                            f"{model.mia.name}: stage {model.stages[st].name} needs {count} "
                            f"reads of {res} but memory has a single read port")
                base = len(plist)
                plist.extend(Port(res, kind, st, base + i) for i in range(count))
                for nid, c in colors.items():
                    binding[nid] = plist[base + c + (1 if res == mem and kind == "read"
                                                     and st == model.fetch_stage
                                                     and not separate_fetch else 0)]
    if mem is not None:
        fp = ports.setdefault(mem, {"read": [], "write": []})
        if not any(p.stage == model.fetch_stage for p in fp["read"]):
            fp["read"].insert(0, Port(mem, "read", model.fetch_stage, -1))
        if separate_fetch:
            fp["fetch"] = [Port(mem, "fetch", model.fetch_stage, 0)]
    model.ports = ports
    model.port_binding = binding
    return model


def port_count(model, res, kind="read") -> int:
    return len(model.ports.get(res, {}).get(kind, []))


# -- control ---------------------------------------------------------------------------
def forward_stage(model: PipelineModel, instr: str, effect_gid: int) -> int:
    """Earliest stage from which instr's write value can be bypassed: the
    stage by which every read feeding it has happened."""
    g = model.ipg.graphs[instr]
    sched = model.schedule(instr)
    val = g[effect_gid].value
    stages = [sched[i] for i in g.cone([val]) if g[i].op in READ_OPS]
    return max(stages, default=model.decode_stage)


def synth_control(model: PipelineModel, spec=None) -> PipelineModel:
    ipg = model.ipg
    hazards = []
    forwards = set()
    writes_by_res: dict = {}
    for n in ipg:
        if n.op == "writereg":
            writes_by_res.setdefault(n.res, set()).add(model.avail[n.id])
    consumers = {}
    for n in ipg:
        if n.op == "readreg" and n.res in writes_by_res:
            key = (model.avail[n.id], n.res)
            consumers.setdefault(key, set()).add(model.read_logic.get(n.id))
    for (c, res), logics in sorted(consumers.items()):
        last = max(writes_by_res[res])
        producers = tuple(range(c + 1, last + 1))
        if not producers:
            continue
        logic = next((lg for lg in logics if lg), None)
        hazards.append(HazardRule(c, res, producers, logic))
        if logic:
            for name in ipg.instrs:
                g = ipg.graphs[name]
                sched = model.schedule(name)
                for e in g.effects:
                    if g[e].op == "writereg" and g[e].res == res:
                        f = forward_stage(model, name, e)
                        for p in producers:
                            if f <= p <= sched[e]:
                                forwards.add((p, c, res))
    v = model.verify_stage
    flush = tuple(range(v)) if v is not None else ()
    model.control = Control(hazards, sorted(forwards), v, flush, model.check_stage)
    return model


def synthesize(spec, mia=None, graphs=None) -> PipelineModel:
    """Elaborated MiA -> resolved model with ports and control."""
    from .ir import build_all
    if mia is None:
        mia = spec.mia
    elif isinstance(mia, str):
        mia = spec.mias[mia]
    graphs = graphs if graphs is not None else build_all(spec)
    ipg = build_ipg(graphs, spec)
    model = resolve(mia, ipg, spec)
    infer_ports(model, spec)
    synth_control(model, spec)
    return model


# -- report -----------------------------------------------------------------------------
def pipeline_report(model: PipelineModel) -> str:
    out = [f"pipeline {model.mia.name} ({model.depth} stages)"]
    for i, st in enumerate(model.stages):
        flags = [f for f, on in (("fetch", st.fetch), ("decode", st.decode),
                                 ("verify", i == model.verify_stage),
                                 ("check", i == model.check_stage)) if on]
        out.append(f"stage {i} {st.name}" + (f" [{', '.join(flags)}]" if flags else ""))
        for op in st.ops:
            out.append(f"  {op}")
    out.append(f"pipeline registers: {len(model.registers)}")
    for reg in model.registers:
        srcs = ", ".join(f"#{n}" for n in sorted(reg.sources))
        out.append(f"  r{reg.id} after {reg.boundary}: {reg.width} bits <- {srcs}")
    out.append("ports:")
    for res, kinds in sorted(model.ports.items()):
        for kind, plist in kinds.items():
            stages = ", ".join(model.stages[p.stage].name for p in plist)
            out.append(f"  {res} {kind}: {len(plist)} ({stages})")
    c = model.control
    if c is not None:
        out.append("control:")
        for h in c.hazards:
            prods = ", ".join(model.stages[p].name for p in h.producers)
            via = f" unless forwarded by {h.forwarding}" if h.forwarding else ""
            out.append(f"  stall {model.stages[h.consumer].name} on {h.resource} "
                       f"written by {prods}{via}")
        for p, cns, res in c.forwards:
            out.append(f"  forward {res} {model.stages[p].name} -> {model.stages[cns].name}")
        if c.verify_stage is not None:
            fl = ", ".join(model.stages[s].name for s in c.flush) or "none"
            out.append(f"  branch {c.predictor}, verify in {model.stages[c.verify_stage].name}, "
                       f"flush {fl}")
    return "\n".join(out) + "\n"
