"""Time the numba and numpy kernel backends on Tasaki Liouvillians.

    python3 benchmarks/bench_kernels.py [--L 10 30 60] [--repeat 5]
"""

import argparse
import math
import timeit

import numpy as np

from flatdiss import LatticeSpec, build_jump_set, build_tasaki, kernels
from flatdiss.superop import _action_args, _hamiltonian_csr


def _inputs(L):
    n = 2 * L + 1
    h = build_tasaki(LatticeSpec(L))
    jumps = build_jump_set(n, 1, math.pi)
    hs = _hamiltonian_csr(h)
    coo = hs.tocoo()
    assemble_args = (n, coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data) + jumps.packed
    rng = np.random.default_rng(0)
    rho = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return assemble_args, (rho,) + _action_args(hs, jumps)


def _best(fn, args, repeat):
    fn(*args)  # warm-up, includes JIT compilation for numba
    number = max(1, int(0.2 / max(timeit.timeit(lambda: fn(*args), number=1), 1e-6)))
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--L", type=int, nargs="+", default=[10, 30, 60])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if not kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    pairs = {
        "assemble": (kernels.assemble_coo_numpy, kernels.assemble_coo_numba),
        "action": (kernels.lindblad_action_numpy, kernels.lindblad_action_numba),
    }
    print(f"{'kernel':<10}{'L':>5}{'N^2':>8}{'numpy [ms]':>13}{'numba [ms]':>13}{'speedup':>9}")
    for L in args.L:
        inputs = dict(zip(pairs, _inputs(L)))
        for name, (slow, fast) in pairs.items():
            t_np = _best(slow, inputs[name], args.repeat)
            t_nb = _best(fast, inputs[name], args.repeat)
            print(f"{name:<10}{L:>5}{(2 * L + 1) ** 2:>8}{1e3 * t_np:>13.3f}{1e3 * t_nb:>13.3f}{t_np / t_nb:>9.1f}")


if __name__ == "__main__":
    main()
