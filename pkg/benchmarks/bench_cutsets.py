"""Compare the compiled and pure-Python cut-set kernels.

    python benchmarks/bench_cutsets.py --trees 100 --leaves 24

Both backends run over the same seeded random AFTs; the script checks
that they agree before printing timings.
"""
import argparse
import random
import sys
import time

from aftco import kernels
from aftco.analyze import cut_set_families
from aftco.combine import Aft, AftNode, Provenance
from aftco.model import Gate, GateKind, NodeKind, TreeNode


def random_aft(rng, n_leaves):
    nodes = [TreeNode(f"e{i}", f"e{i}", NodeKind.BASIC_EVENT) for i in range(n_leaves)]
    open_, done, gates = [x.id for x in nodes], [], []
    while len(open_) > 1:
        ins = [open_.pop(rng.randrange(len(open_))) for _ in range(rng.randint(2, min(4, len(open_))))]
        if done and rng.random() < 0.3:
            shared = rng.choice(done)
            if shared not in ins:
                ins.append(shared)
        out = f"g{len(gates)}"
        # OR-heavy mixes give the larger families that stress minimisation
        gates.append(Gate(GateKind.AND if rng.random() < 0.4 else GateKind.OR, out, tuple(ins)))
        nodes.append(TreeNode(out, out, NodeKind.INTERMEDIATE_EVENT))
        done.extend(ins)
        open_.append(out)
    return Aft("bench", open_[0],
               tuple(AftNode(x, Provenance("FaultTree", "bench", x.id)) for x in nodes), tuple(gates))


def time_backend(kernel, afts, repeat):
    best, result = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = [sorted(cut_set_families(a, kernel=kernel)[0]) for a in afts]
        best = min(best, time.perf_counter() - t0)
    return best, result


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--leaves", type=int, default=24,
                   help="family sizes grow exponentially; above ~30 expect long runs")
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--seed", type=int, default=7)
    args = p.parse_args(argv)
    if not 2 <= args.leaves <= kernels.MAX_COMPILED_LEAVES:
        p.error(f"--leaves must be in 2..{kernels.MAX_COMPILED_LEAVES}")

    rng = random.Random(args.seed)
    afts = [random_aft(rng, args.leaves) for _ in range(args.trees)]
    backends = kernels.available()
    if "cython" not in backends:
        print("compiled extension not built; only the Python fallback is available", file=sys.stderr)

    results = {}
    for name, kernel in sorted(backends.items()):
        secs, fams = time_backend(kernel, afts, args.repeat)
        results[name] = (secs, fams)
        total = sum(len(f) for f in fams)
        print(f"{name:7s} {secs * 1000:9.1f} ms  ({args.trees} trees, {args.leaves} leaves, {total} cut sets)")

    if len(results) == 2:
        (py_s, py_f), (cy_s, cy_f) = results["python"], results["cython"]
        if py_f != cy_f:
            print("MISMATCH between backends", file=sys.stderr)
            return 1
        print(f"speedup {py_s / cy_s:.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
