"""Brute-force reference for tiny domains.

Materializes every node weight of the tree by counting leaves, then rebuilds
paths and fall-off databases with plain Python lists. Nothing here shares code
with the fast implementations it is compared against.
"""
from __future__ import annotations

from collections import Counter

from .errors import OracleTooLarge

MAX_ORACLE_BITS = 8


class ExplicitTree:
    """All node weights of the ``bits``-level tree over the multiset ``values``."""

    def __init__(self, values, bits: int):
        if bits > MAX_ORACLE_BITS:
            raise OracleTooLarge(f"explicit tree limited to {MAX_ORACLE_BITS} bits, got {bits}")
        self.bits = bits
        counts = Counter(int(v) for v in values)
        leaves = [counts.get(x, 0) for x in range(1 << bits)]
        # levels[l][p] is the weight of node (l, p); built bottom-up by pair sums.
        levels = [leaves]
        for _ in range(bits):
            below = levels[0]
            levels.insert(0, [below[2 * i] + below[2 * i + 1] for i in range(len(below) // 2)])
        self.levels = levels

    def weight(self, level: int, prefix: int) -> int:
        return self.levels[level][prefix]

    def total(self) -> int:
        return self.levels[0][0]


def reference_trim(values, t: int) -> list[int]:
    ordered = sorted(int(v) for v in values)
    return ordered[t:len(ordered) - t]


def reference_heavy_path(trimmed, bits: int, t: int) -> list[tuple[int, int]]:
    """Heavier-child walk from the root; ties go to the left child."""
    tree = ExplicitTree(trimmed, bits)
    level, prefix = 0, 0
    path = [(0, 0)]
    while level < bits and tree.weight(level, prefix) > t:
        left = tree.weight(level + 1, 2 * prefix)
        right = tree.weight(level + 1, 2 * prefix + 1)
        prefix = 2 * prefix + (1 if right > left else 0)
        level += 1
        path.append((level, prefix))
    return path


def reference_falloff(trimmed, bits: int, path, target: int) -> list[int]:
    """Levels at which points leave ``path``, cut to ``target`` entries, padded with the last level."""
    tree = ExplicitTree(trimmed, bits)
    out: list[int] = []
    for (level, prefix), nxt in zip(path, path[1:]):
        sibling = nxt[1] ^ 1
        out.extend([level] * tree.weight(level + 1, sibling))
    out = out[:target]
    out.extend([path[-1][0]] * (target - len(out)))
    return out


def _bits_for(size: int) -> int:
    b = 0
    while (1 << b) < size:
        b += 1
    return b


def reference_construct_paths(values, bits: int, t: int, base_case_size: int, halt_multiple: int = 10):
    """List of ``(bits_d, sorted S_d, path_d or None)`` mirroring the fast construction."""
    out = []
    current = sorted(int(v) for v in values)
    while True:
        n = len(current)
        if n <= halt_multiple * t or (1 << bits) <= max(base_case_size, 4):
            out.append((bits, current, None))
            return out
        trimmed = reference_trim(current, t)
        path = reference_heavy_path(trimmed, bits, t)
        out.append((bits, current, path))
        current = sorted(reference_falloff(trimmed, bits, path, n - 3 * t))
        bits = _bits_for(bits + 1)
