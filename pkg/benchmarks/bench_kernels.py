"""Benchmark the tree-edit-distance kernel: numba @njit vs pure-Python fallback.

Run:  python3 benchmarks/bench_kernels.py
Force the fallback everywhere with PAGEFORGE_NUMBA=0 (this script always
times both paths regardless of the flag).
"""

from __future__ import annotations

import random
import time

import numpy as np

from pageforge.bench.domtree import TreeNode
from pageforge.bench.ted import NUMBA_ENABLED, _keyroots, _ted_kernel, flatten_tree, ted_kernel_python


def random_tree(n_nodes: int, rng: random.Random) -> TreeNode:
    labels = ["div", "p", "span", "section", "li", "a"]
    nodes = [TreeNode(rng.choice(labels))]
    for _ in range(n_nodes - 1):
        parent = nodes[rng.randrange(len(nodes))]
        child = TreeNode(rng.choice(labels))
        parent.children.append(child)
        nodes.append(child)
    return nodes[0]


def kernel_args(t1: TreeNode, t2: TreeNode):
    labels_a, lmds_a = flatten_tree(t1)
    labels_b, lmds_b = flatten_tree(t2)
    ids: dict = {}
    for lab in labels_a + labels_b:
        ids.setdefault(lab, len(ids))
    return (
        np.array(lmds_a, dtype=np.int64),
        np.array(_keyroots(lmds_a), dtype=np.int64),
        np.array([ids[x] for x in labels_a], dtype=np.int64),
        np.array(lmds_b, dtype=np.int64),
        np.array(_keyroots(lmds_b), dtype=np.int64),
        np.array([ids[x] for x in labels_b], dtype=np.int64),
    )


def time_kernel(kernel, pairs, repeats: int = 3) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        for args in pairs:
            kernel(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    rng = random.Random(0)
    print(f"numba enabled: {NUMBA_ENABLED}")
    for size, n_pairs in [(30, 200), (100, 60), (300, 8)]:
        pairs = [
            kernel_args(random_tree(size, rng), random_tree(size, rng))
            for _ in range(n_pairs)
        ]
        # check agreement before timing; also triggers JIT compilation
        for args in pairs[:2]:
            assert _ted_kernel(*args) == ted_kernel_python(*args)
        jit_s = time_kernel(_ted_kernel, pairs)
        py_s = time_kernel(ted_kernel_python, pairs, repeats=1)
        speedup = py_s / jit_s if jit_s > 0 else float("inf")
        print(
            f"n={size:4d} nodes, {n_pairs:3d} pairs: "
            f"jit {jit_s * 1e3:8.1f} ms | python {py_s * 1e3:9.1f} ms | "
            f"speedup {speedup:6.1f}x"
        )


if __name__ == "__main__":
    main()
