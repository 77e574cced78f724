"""Ordered-tree edit distance (Zhang-Shasha) over labeled trees.

Unit costs for insert, delete, and relabel. The dynamic program dominates
dedup runtime on big page corpora, so the kernel is JIT-compiled with numba;
set ``PAGEFORGE_NUMBA=0`` to force the pure-Python/numpy fallback (same
function, undecorated). ``benchmarks/bench_kernels.py`` compares the two.
"""

from __future__ import annotations

import os

import numpy as np

from .domtree import TreeNode


def flatten_tree(root: TreeNode) -> tuple[list, list[int]]:
    """Postorder labels and leftmost-leaf-descendant indices (iterative)."""
    labels: list = []
    lmds: list[int] = []
    lmd_of: dict[int, int] = {}
    stack: list[tuple[TreeNode, bool]] = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            if node.children:
                lmd = lmd_of[id(node.children[0])]
            else:
                lmd = len(labels)
            lmd_of[id(node)] = lmd
            lmds.append(lmd)
            labels.append(node.label)
        else:
            stack.append((node, True))
            for child in reversed(node.children):
                stack.append((child, False))
    return labels, lmds


def _keyroots(lmds: list[int]) -> list[int]:
    last: dict[int, int] = {}
    for i, lmd in enumerate(lmds):
        last[lmd] = i
    return sorted(last.values())


def _ted_kernel_impl(
    lmd1: np.ndarray,
    kr1: np.ndarray,
    lab1: np.ndarray,
    lmd2: np.ndarray,
    kr2: np.ndarray,
    lab2: np.ndarray,
) -> int:
    n1 = lab1.shape[0]
    n2 = lab2.shape[0]
    td = np.zeros((n1, n2), np.int64)
    fd = np.zeros((n1 + 1, n2 + 1), np.int64)
    for ii in range(kr1.shape[0]):
        i = kr1[ii]
        for jj in range(kr2.shape[0]):
            j = kr2[jj]
            li = lmd1[i]
            lj = lmd2[j]
            m = i - li + 2
            n = j - lj + 2
            ioff = li - 1
            joff = lj - 1
            fd[0, 0] = 0
            for x in range(1, m):
                fd[x, 0] = fd[x - 1, 0] + 1
            for y in range(1, n):
                fd[0, y] = fd[0, y - 1] + 1
            for x in range(1, m):
                for y in range(1, n):
                    if lmd1[x + ioff] == li and lmd2[y + joff] == lj:
                        cost = 0 if lab1[x + ioff] == lab2[y + joff] else 1
                        best = fd[x - 1, y] + 1
                        alt = fd[x, y - 1] + 1
                        if alt < best:
                            best = alt
                        alt = fd[x - 1, y - 1] + cost
                        if alt < best:
                            best = alt
                        fd[x, y] = best
                        td[x + ioff, y + joff] = best
                    else:
                        p = lmd1[x + ioff] - 1 - ioff
                        q = lmd2[y + joff] - 1 - joff
                        best = fd[x - 1, y] + 1
                        alt = fd[x, y - 1] + 1
                        if alt < best:
                            best = alt
                        alt = fd[p, q] + td[x + ioff, y + joff]
                        if alt < best:
                            best = alt
                        fd[x, y] = best
    return int(td[n1 - 1, n2 - 1])


ted_kernel_python = _ted_kernel_impl

NUMBA_ENABLED = os.environ.get("PAGEFORGE_NUMBA", "1").lower() not in ("0", "false", "off")
if NUMBA_ENABLED:
    try:
        from numba import njit

        _ted_kernel = njit(cache=True)(_ted_kernel_impl)
    except ImportError:
        NUMBA_ENABLED = False
        _ted_kernel = _ted_kernel_impl
else:
    _ted_kernel = _ted_kernel_impl


def tree_edit_distance(a: TreeNode, b: TreeNode) -> int:
    """Minimal unit-cost insert/delete/relabel script length between ordered trees."""
    labels_a, lmds_a = flatten_tree(a)
    labels_b, lmds_b = flatten_tree(b)
    ids: dict = {}
    for label in labels_a + labels_b:
        ids.setdefault(label, len(ids))
    lab1 = np.array([ids[x] for x in labels_a], dtype=np.int64)
    lab2 = np.array([ids[x] for x in labels_b], dtype=np.int64)
    return _ted_kernel(
        np.array(lmds_a, dtype=np.int64),
        np.array(_keyroots(lmds_a), dtype=np.int64),
        lab1,
        np.array(lmds_b, dtype=np.int64),
        np.array(_keyroots(lmds_b), dtype=np.int64),
        lab2,
    )
