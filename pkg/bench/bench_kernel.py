"""Compare the compiled tape kernel with the pure-Python fallback.

Two measurements per backend:

* tape: every instruction's tape evaluated on random fields and registers
* run:  a whole corpus program on the ISS (decode cache on)

    python3 bench/bench_kernel.py [--repeat N] [--program NAME]
"""
import argparse
import os
import random
import timeit

from pdlkit import DATA_DIR, RV32I_SPEC, kernel, load_spec
from pdlkit.asm import Assembler
from pdlkit.ir import build_all
from pdlkit.iss import MachineState, Simulator, load_program
from pdlkit.tape import compile_tape


def tape_workload(spec, graphs, n, seed=0):
    rng = random.Random(seed)
    st = MachineState(spec)
    for i in range(1, 32):
        st.regs[0, i] = rng.getrandbits(32)
    work = []
    for ins in spec.instr_list():
        tape = compile_tape(graphs[ins.name], st.reg_rows)
        fixed = {k: v for k, (v, _) in ins.encoding.items()}
        for _ in range(n):
            fields = {f.name: fixed.get(f.name, rng.getrandbits(f.width))
                      for f in ins.format.fields.values()}
            work.append((tape, tape.field_vector(fields), rng.getrandbits(32) & ~3))
    return st, work


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--program", default="sort")
    args = ap.parse_args()

    spec = load_spec(RV32I_SPEC)
    graphs = build_all(spec)
    st, work = tape_workload(spec, graphs, 200)
    mem = lambda addr, n: 0  # noqa: E731
    backends = {"python": kernel.fallback_run_tape}
    if kernel.BACKEND == "cython":
        backends["cython"] = kernel.run_tape
    else:
        print("compiled kernel not available; timing the fallback only")

    with open(os.path.join(DATA_DIR, "programs", args.program + ".s")) as f:
        image, _ = Assembler(spec).assemble_text(f.read(), 0x8000_0000)

    results = {}
    for name, run in backends.items():
        def tapes():
            for tape, fv, pc in work:
                run(tape, fv, pc, st.regs, mem)

        sim = Simulator(spec, graphs, backend=run)

        def program():
            s = sim.new_state()
            load_program(s, image, 0x8000_0000)
            return sim.run(s, keep_trace=False).steps

        steps = program()
        t_tape = min(timeit.repeat(tapes, number=1, repeat=args.repeat))
        t_prog = min(timeit.repeat(program, number=1, repeat=args.repeat))
        results[name] = (t_tape, t_prog)
        print(f"{name:7s} tape: {len(work) / t_tape / 1e3:8.1f} k evals/s   "
              f"{args.program}: {steps / t_prog / 1e3:8.1f} k instr/s ({steps} instructions)")

    if len(results) == 2:
        (pt, pp), (ct, cp) = results["python"], results["cython"]
        print(f"speedup tape x{pt / ct:.2f}, program x{pp / cp:.2f}")


if __name__ == "__main__":
    main()
