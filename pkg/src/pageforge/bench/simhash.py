"""64-bit SimHash fingerprints over standardized DOM trees.

Features are the truncated root-to-node label paths: every node contributes
one shingle, the sequence of the last (up to) three labels on its root path.
A single-node tree therefore has the root label as its sole feature. Shingles
are hashed with MD5 truncated to 64 bits, so fingerprints are stable across
runs and platforms.
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .domtree import TreeNode

HASH_BITS = 64
_MASK = (1 << HASH_BITS) - 1

DEFAULT_HAMMING_THRESHOLD = 3
_PATH_LEN = 3


@dataclass(frozen=True)
class Fingerprint:
    bits: int

    def __post_init__(self) -> None:
        if not 0 <= self.bits <= _MASK:
            raise ValueError("fingerprint must fit in 64 bits")

    def hamming(self, other: "Fingerprint") -> int:
        return hamming(self.bits, other.bits)


def hamming(a: int, b: int) -> int:
    return ((a ^ b) & _MASK).bit_count()


def _hash64(feature: str) -> int:
    return int.from_bytes(hashlib.md5(feature.encode("utf-8")).digest()[:8], "big")


def path_shingles(tree: TreeNode) -> Counter:
    """Multiset of truncated root-path shingles, one per node."""
    shingles: Counter = Counter()
    stack: list[tuple[TreeNode, tuple]] = [(tree, ())]
    while stack:
        node, path = stack.pop()
        path = (path + (node.label,))[-_PATH_LEN:]
        shingles[path] += 1
        for child in node.children:
            stack.append((child, path))
    return shingles


def simhash(tree: TreeNode) -> Fingerprint:
    votes = [0] * HASH_BITS
    for shingle, count in path_shingles(tree).items():
        h = _hash64(repr(shingle))
        for bit in range(HASH_BITS):
            if h & (1 << bit):
                votes[bit] += count
            else:
                votes[bit] -= count
    bits = 0
    for bit in range(HASH_BITS):
        if votes[bit] > 0:
            bits |= 1 << bit
    return Fingerprint(bits)


def pairwise_hamming(fingerprints: list[Fingerprint]) -> np.ndarray:
    """Symmetric Hamming-distance matrix, vectorized over uint64 words."""
    words = np.array([f.bits for f in fingerprints], dtype=np.uint64)
    xored = words[:, None] ^ words[None, :]
    return np.bitwise_count(xored).astype(np.int64)
