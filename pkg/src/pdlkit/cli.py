"""Command line front end: `pdlkit <subcommand> ...`.

Exit status is 0 on success, 1 for errors in the user's input (bad spec,
bad program, bad flags) and 2 when an internal invariant breaks.  Output
files are written to a temporary name and renamed only on success.
"""
from __future__ import annotations

import argparse
import os
import sys
import tempfile

from . import RV32I_SPEC, __version__
from .errors import InternalError, PdlError

EXIT_OK, EXIT_USER, EXIT_INTERNAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USER)


def _int(s: str) -> int:
    return int(s.replace("'", "").replace("_", ""), 0)


def write_atomic(path: str, data, binary=False):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".pdlkit-", dir=d)
    try:
        with os.fdopen(fd, "wb" if binary else "w") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(args, text):
    out = getattr(args, "output", None)
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


# -- helpers -------------------------------------------------------------------------
def _spec_path(args):
    pos = getattr(args, "spec_pos", None)
    opt = getattr(args, "spec", None)
    if pos and opt:
        raise UsageError("give the description file either positionally or with --spec, not both")
    return pos or opt or RV32I_SPEC


def _load(args):
    from .frontend import load_spec
    return load_spec(_spec_path(args))


def _program(args, spec):
    """Program image from --bin (raw little-endian words) or --asm."""
    if args.bin and args.asm:
        raise UsageError("--bin and --asm are mutually exclusive")
    if not (args.bin or args.asm):
        raise UsageError("a program is required (--bin or --asm)")
    base = args.base if args.base is not None else _default_start(spec)
    if args.bin:
        with open(args.bin, "rb") as f:
            return f.read(), base
    from .asm import Assembler
    with open(args.asm) as f:
        img, _ = Assembler(spec).assemble_text(f.read(), base)
    return img, base


def _default_start(spec):
    p = spec.processor
    return p.start if p and p.start is not None else 0


def _stop(args, spec):
    if args.stop is not None:
        return args.stop
    p = spec.processor
    return p.stop[1] if p and p.stop else None


# -- subcommands ------------------------------------------------------------------------
def cmd_check(args):
    spec = _load(args)
    from .decode import build_decoder
    from .ir import build_all
    build_decoder(spec)
    build_all(spec)
    print(f"ok: {len(spec.instructions)} instructions")
    return EXIT_OK


def cmd_expand(args):
    from .frontend.unparse import stmt_lines
    spec = _load(args)
    lines = []
    for ins in spec.instr_list():
        enc = ", ".join(f"{k} = {v:#x}" for k, (v, _) in ins.encoding.items())
        lines.append(f"instruction {ins.name} : {ins.format.name} {{ {enc} }}")
        lines.extend("  " + s for s in stmt_lines(ins.body))
    _emit(args, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_dump_ir(args):
    from .ir import build_behavior, canonicalize, export_dot
    spec = _load(args)
    names = [args.instr] if args.instr else list(spec.instructions)
    out = []
    for n in names:
        if n not in spec.instructions:
            raise UsageError(f"unknown instruction {n}")
        g = build_behavior(spec.instructions[n])
        if not args.raw:
            g = canonicalize(g)
        if args.dot:
            out.append(export_dot(g))
        else:
            out.append(f"graph {n} ({len(g)} nodes)\n" + "".join(f"  {x!r}\n" for x in g.nodes))
    _emit(args, "".join(out))
    return EXIT_OK


def cmd_gen_decoder(args):
    from .decode import build_decoder, decoder_table
    _emit(args, decoder_table(build_decoder(_load(args))))
    return EXIT_OK


def cmd_asm(args):
    from .asm import Assembler
    spec = _load(args)
    base = args.base if args.base is not None else _default_start(spec)
    with open(args.source) as f:
        img, listing = Assembler(spec).assemble_text(f.read(), base)
    write_atomic(args.output, img, binary=True)
    if args.listing:
        write_atomic(args.listing, listing)
    return EXIT_OK


def cmd_disasm(args):
    from .asm import Assembler
    from .errors import UnknownInstructionWord
    spec = _load(args)
    a = Assembler(spec)
    nbytes = a.width // 8
    base = args.base if args.base is not None else _default_start(spec)
    with open(args.binary, "rb") as f:
        data = f.read()
    lines = []
    for off in range(0, len(data) - len(data) % nbytes, nbytes):
        w = int.from_bytes(data[off:off + nbytes], "little")
        try:
            text = a.disassemble(w)
        except UnknownInstructionWord:
            text = f".word {w:#x}"
        lines.append(f"{base + off:08x}: {w:0{nbytes * 2}x}  {text}\n")
    _emit(args, "".join(lines))
    return EXIT_OK


def cmd_run(args):
    from .iss import Simulator, load_program, trace_text
    spec = _load(args)
    img, base = _program(args, spec)
    sim = Simulator(spec)
    st = sim.new_state()
    load_program(st, img, base)
    st.pc = args.start if args.start is not None else sim.start
    r = sim.run(st, stop=_stop(args, spec), max_steps=args.max_steps, use_cache=not args.no_cache)
    if args.trace:
        write_atomic(args.trace, trace_text(r.trace))
    print(f"steps={r.steps}\nreason={r.reason}")
    if r.error is not None:
        tail = trace_text(r.trace[-5:])
        if tail:
            sys.stderr.write(tail)
        raise r.error
    return EXIT_OK


def _model(spec, name):
    from .mia import synthesize
    if not spec.mias:
        raise UsageError("the description has no micro architecture")
    if name and name not in spec.mias:
        raise UsageError(f"unknown micro architecture {name} (have {', '.join(spec.mias)})")
    return synthesize(spec, name or next(iter(spec.mias)))


def cmd_simulate(args):
    from .cas import simulate
    from .iss import trace_text
    spec = _load(args)
    model = _model(spec, args.mia)
    if args.dump_pipeline:
        write_atomic(args.dump_pipeline, model.report())
    if not (args.bin or args.asm):
        if args.dump_pipeline:
            return EXIT_OK
        raise UsageError("a program is required (--bin or --asm)")
    img, base = _program(args, spec)
    start = args.start if args.start is not None else _default_start(spec)
    r = simulate(spec, model, img, base, start, _stop(args, spec), args.max_cycles)
    if args.trace:
        write_atomic(args.trace, trace_text(r.trace))
    if args.stats:
        sys.stdout.write(r.stats())
    else:
        print(f"cycles={r.cycles} retired={r.retired}")
    return EXIT_OK


def cmd_cosim(args):
    from .cas import cosim
    spec = _load(args)
    img, base = _program(args, spec)
    start = args.start if args.start is not None else _default_start(spec)
    names = [args.mia] if args.mia else list(spec.mias)
    for n in names:
        ref, got = cosim(spec, _model(spec, n), img, base, start, _stop(args, spec), args.max_steps)
        print(f"{n}: {got.retired} retired, {got.cycles} cycles, equal")
    return EXIT_OK


def cmd_patterns(args):
    from .patterns import emit_patterns
    _emit(args, emit_patterns(_load(args)))
    return EXIT_OK


# -- parser ------------------------------------------------------------------------------
def build_parser():
    p = _Parser(prog="pdlkit", description="processor description toolkit")
    p.add_argument("--version", action="version", version=f"pdlkit {__version__}")
    sub = p.add_subparsers(dest="cmd", metavar="<command>", parser_class=_Parser)

    def spec_args(sp):
        sp.add_argument("spec_pos", nargs="?", metavar="SPEC", help="processor description file")
        sp.add_argument("--spec", help="processor description file (alternative to SPEC)")

    def prog_args(sp):
        sp.add_argument("--bin", help="raw little-endian program image")
        sp.add_argument("--asm", help="assembly source, assembled on the fly")
        sp.add_argument("--base", type=_int, help="load address")
        sp.add_argument("--start", type=_int, help="initial PC")
        sp.add_argument("--stop", type=_int, help="stop PC")
        sp.add_argument("--trace", help="write the retired-instruction trace here")

    s = sub.add_parser("check", help="parse and validate a processor description")
    spec_args(s)
    s.set_defaults(fn=cmd_check)

    s = sub.add_parser("expand", help="print instructions after macro expansion")
    spec_args(s)
    s.add_argument("-o", "--output")
    s.set_defaults(fn=cmd_expand)

    s = sub.add_parser("dump-ir", help="print behavior graphs")
    spec_args(s)
    s.add_argument("--instr")
    s.add_argument("--dot", action="store_true", help="Graphviz output")
    s.add_argument("--raw", action="store_true", help="skip canonicalization")
    s.add_argument("-o", "--output")
    s.set_defaults(fn=cmd_dump_ir)

    s = sub.add_parser("gen-decoder", help="print the mask/value decoder table")
    spec_args(s)
    s.add_argument("-o", "--output")
    s.set_defaults(fn=cmd_gen_decoder)

    s = sub.add_parser("asm", help="assemble a source file")
    spec_args(s)
    s.add_argument("source")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--base", type=_int)
    s.add_argument("--listing")
    s.set_defaults(fn=cmd_asm)

    s = sub.add_parser("disasm", help="disassemble a raw image")
    spec_args(s)
    s.add_argument("binary")
    s.add_argument("--base", type=_int)
    s.add_argument("-o", "--output")
    s.set_defaults(fn=cmd_disasm)

    s = sub.add_parser("run", help="run a program on the instruction-set simulator")
    spec_args(s)
    prog_args(s)
    s.add_argument("--max-steps", type=int, default=10_000_000)
    s.add_argument("--no-cache", action="store_true", help="disable the decoded-instruction cache")
    s.set_defaults(fn=cmd_run)

    s = sub.add_parser("simulate", help="run a program on the cycle-accurate simulator")
    spec_args(s)
    prog_args(s)
    s.add_argument("--mia", help="micro architecture name (default: the first)")
    s.add_argument("--max-cycles", type=int, default=10_000_000)
    s.add_argument("--stats", action="store_true", help="key=value statistics")
    s.add_argument("--dump-pipeline", metavar="FILE", help="write the pipeline report")
    s.set_defaults(fn=cmd_simulate)

    s = sub.add_parser("cosim", help="compare ISS and CAS retired streams")
    spec_args(s)
    prog_args(s)
    s.add_argument("--mia", help="one micro architecture (default: all)")
    s.add_argument("--max-steps", type=int, default=1_000_000)
    s.set_defaults(fn=cmd_cosim)

    s = sub.add_parser("patterns", help="emit instruction-selection patterns")
    spec_args(s)
    s.add_argument("-o", "--output")
    s.set_defaults(fn=cmd_patterns)
    return p


def _report(e: PdlError):
    for x in e.all:
        where = f"{x.span}: " if x.span else ""
        print(f"error: {where}{x.message}", file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "fn", None):
        parser.print_usage(sys.stderr)
        return EXIT_USER
    try:
        return args.fn(args)
    except PdlError as e:
        _report(e)
        return EXIT_USER
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USER
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USER
    except InternalError as e:
        print(f"error: internal: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as e:  # anything unexpected is our bug, not the user's
        print(f"error: internal: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
