"""Synthetic database families for benchmarks and tests.

Every generator returns a sorted :class:`Database` over a domain of up to 128
bits. Wide domains are built from two 64-bit words per value.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .domain import Database, OrderedDomain
from .errors import ConfigError


def _uniform(g: np.random.Generator, lo: int, hi: int, size: int, domain: OrderedDomain) -> np.ndarray:
    """``size`` uniform integers in ``[lo, hi)`` in the domain's storage dtype."""
    span = hi - lo
    if span <= 0:
        raise ConfigError("empty sampling range")
    if domain.dtype is not object:
        return g.integers(0, span - 1, size=size, dtype=np.uint64, endpoint=True) + np.uint64(lo)
    if span <= 1 << 63:
        raw = g.integers(0, span, size=size, dtype=np.int64)
        return np.array([lo + int(v) for v in raw], dtype=object)
    words = g.integers(0, 2**64 - 1, size=(size, 2), dtype=np.uint64, endpoint=True)
    return np.array([lo + ((int(a) << 64 | int(b)) % span) for a, b in words], dtype=object)


def _finish(values: np.ndarray, domain: OrderedDomain) -> Database:
    return Database._trusted(np.sort(values, kind="stable"), domain)


def uniform(g, n, domain):
    return _finish(_uniform(g, 0, domain.size, n, domain), domain)


def clustered(g, n, domain):
    """Gaussian cloud of width ``2**(b/3)`` around a random centre in the middle half."""
    size = domain.size
    spread = 2.0 ** (domain.bit_width / 3)
    centre = int(_uniform(g, size // 4, max(size // 4 + 1, 3 * size // 4), 1, domain)[0])
    offsets = np.round(g.normal(0.0, spread, size=n)).astype(np.int64)
    if domain.dtype is not object and domain.bit_width >= 16:
        # Six-sigma tails stay inside the middle half, so no clipping is needed.
        offsets = np.clip(offsets, -(size // 8), size // 8)
        c = np.uint64(centre)
        vals = np.where(offsets >= 0, c + np.abs(offsets).astype(np.uint64), c - np.abs(offsets).astype(np.uint64))
        return _finish(vals, domain)
    vals = [min(size - 1, max(0, centre + int(o))) for o in offsets]
    return _finish(np.array(vals, dtype=domain.dtype), domain)


def logspaced(g, n, domain):
    """Magnitudes spread evenly over every scale of the domain."""
    b = domain.bit_width
    exps = g.integers(0, max(b, 1), size=n)
    fracs = g.random(n)
    if domain.dtype is not object:
        vals = (np.uint64(1) << exps.astype(np.uint64)) + (fracs * np.exp2(exps)).astype(np.uint64)
        return _finish(np.minimum(vals, np.uint64(domain.size - 1)), domain)
    vals = [(1 << int(e)) + int(f * (1 << int(e))) for e, f in zip(exps, fracs)]
    return _finish(np.array([min(v, domain.size - 1) for v in vals], dtype=object), domain)


def twopoint(g, n, domain):
    lo, hi = domain.size // 7, domain.size - 1 - domain.size // 9
    pick = g.random(n) < 0.5
    if domain.dtype is not object:
        return _finish(np.where(pick, np.uint64(lo), np.uint64(hi)), domain)
    return _finish(np.array([lo if p else hi for p in pick], dtype=object), domain)


def constant(g, n, domain, value: int | None = None):
    value = domain.size // 3 if value is None else domain.check(value)
    return _finish(np.full(n, value, dtype=domain.dtype), domain)


def narrow(g, n, domain):
    """Fifty adjacent values in the middle of the domain."""
    base = domain.size // 3
    width = min(50, domain.size - base)
    return _finish(_uniform(g, base, base + width, n, domain), domain)


def staircase(g, n, domain):
    """Powers of two: equal mass falls off the leftmost path at every level."""
    b = domain.bit_width
    if b == 0:
        return _finish(np.zeros(n, dtype=domain.dtype), domain)
    levels = g.integers(0, b, size=n)
    if domain.dtype is not object:
        return _finish(np.uint64(1) << (b - 1 - levels).astype(np.uint64), domain)
    return _finish(np.array([1 << (b - 1 - int(lv)) for lv in levels], dtype=object), domain)


FAMILIES: dict[str, Callable[[np.random.Generator, int, OrderedDomain], Database]] = {
    "uniform": uniform,
    "clustered": clustered,
    "logspaced": logspaced,
    "twopoint": twopoint,
    "constant": constant,
    "narrow": narrow,
    "staircase": staircase,
}


def generate(family: str, n: int, domain: OrderedDomain, seed: int) -> Database:
    try:
        gen = FAMILIES[family]
    except KeyError:
        raise ConfigError(f"unknown data family {family!r}; choose from {sorted(FAMILIES)}") from None
    return gen(np.random.default_rng(seed), n, domain)
