"""Randomized equivalence and invariant checks, shared by the CLI and the test suite."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import Database, NodeId, OrderedDomain, Path, PrivacyBudget, trim, weight
from .heavy_paths import HeavyParams, construct_paths, f_query, heavy_paths_min_size, split_budget
from .oracle import ExplicitTree, reference_construct_paths, reference_falloff, reference_heavy_path
from .treelog import falloff_database


@dataclass
class CheckResult:
    name: str
    instances: int
    mismatches: int
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.mismatches == 0

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        return f"{status} {self.name}: {self.mismatches} mismatches in {self.instances} instances{extra}"


def _small_db(g: np.random.Generator, max_bits: int = 8, max_n: int = 60) -> Database:
    bits = int(g.integers(1, max_bits + 1))
    n = int(g.integers(0, max_n + 1))
    # Mix clumped and spread values so ties and empty subtrees both occur.
    if g.random() < 0.5:
        vals = g.integers(0, 1 << bits, size=n)
    else:
        centres = g.integers(0, 1 << bits, size=3)
        vals = np.clip(g.choice(centres, size=n) + g.integers(-2, 3, size=n), 0, (1 << bits) - 1)
    return Database.from_values(vals.tolist(), OrderedDomain(bits))


def check_weights(count: int, seed: int = 0) -> CheckResult:
    g = np.random.default_rng(seed)
    bad = 0
    for _ in range(count):
        db = _small_db(g)
        bits = db.domain.bit_width
        tree = ExplicitTree(db.to_list(), bits)
        level = int(g.integers(0, bits + 1))
        prefix = int(g.integers(0, 1 << level))
        bad += weight(db, NodeId(level, prefix)) != tree.weight(level, prefix)
    return CheckResult("weight vs explicit tree", count, bad)


def _random_path(g: np.random.Generator, bits: int) -> Path:
    depth = int(g.integers(0, bits + 1))
    return Path.to_node(NodeId(depth, int(g.integers(0, 1 << depth))))


def check_falloff(count: int, seed: int = 1) -> CheckResult:
    g = np.random.default_rng(seed)
    bad = 0
    done = 0
    while done < count:
        db = _small_db(g)
        n = len(db)
        t = int(g.integers(1, 4))
        if n <= 3 * t:
            continue
        done += 1
        db_hat = trim(db, t)
        bits = db.domain.bit_width
        path = _random_path(g, bits)
        fast = falloff_database(db_hat, path, n, t).to_list()
        ref = sorted(reference_falloff(db_hat.to_list(), bits, [(v.level, v.prefix) for v in path], n - 3 * t))
        bad += fast != ref
    return CheckResult("falloff_database vs explicit tree", count, bad)


def check_construct_paths(count: int, seed: int = 2) -> CheckResult:
    g = np.random.default_rng(seed)
    bad = 0
    for _ in range(count):
        db = _small_db(g, max_n=120)
        t = int(g.integers(1, 4))
        base = int(g.choice([2, 4, 16]))
        halt = int(g.integers(3, 11))
        fast = construct_paths(db, t, base, halt)
        ref = reference_construct_paths(db.to_list(), db.domain.bit_width, t, base, halt)
        same = len(fast) == len(ref) and all(
            r.domain.bit_width == rb and r.database.to_list() == rs
            and (r.path is None if rp is None else [(v.level, v.prefix) for v in r.path] == rp)
            for r, (rb, rs, rp) in zip(fast, ref)
        )
        # The deterministic walk on its own, checked against the oracle on the trimmed data.
        if len(db) > 2 * t:
            trimmed = trim(db, t).to_list()
            ref_path = reference_heavy_path(trimmed, db.domain.bit_width, t)
            fast_rec = construct_paths(db, t, 2, 3)[0]
            if fast_rec.path is not None:
                same &= [(v.level, v.prefix) for v in fast_rec.path] == ref_path
        bad += not same
    return CheckResult("construct_paths vs explicit tree", count, bad)


# ------------------------------------------------- neighbor-chain invariants

def staircase_sorted(g: np.random.Generator, n: int, bits: int) -> np.ndarray:
    """Sorted powers of two with random per-level counts (no full sort needed)."""
    counts = g.multinomial(n, np.full(bits, 1.0 / bits))
    values = np.array([1 << (bits - 1 - lv) for lv in range(bits)], dtype=np.uint64)
    return np.repeat(values[::-1], counts[::-1])


def uniform_sorted(g: np.random.Generator, n: int, bits: int) -> np.ndarray:
    """Sorted uniform sample via normalized exponential spacings."""
    gaps = g.exponential(size=n + 1)
    pos = np.cumsum(gaps)[:-1] / gaps.sum()
    return np.minimum((pos * float(1 << bits)).astype(np.uint64), np.uint64((1 << bits) - 1))


def operating_scale(bits: int, epsilon: float = 1.0, delta: float = 1e-6) -> tuple[int, HeavyParams]:
    """Minimum size and per-call parameters the public solver would use."""
    domain = OrderedDomain(bits)
    budget = PrivacyBudget(epsilon, delta)
    n = heavy_paths_min_size(domain, budget)
    step = split_budget(budget, domain, n)
    return n, HeavyParams.for_domain(domain, step.epsilon, step.delta)


def heavy_depth(records, k: int) -> int:
    """First depth whose database has an element of multiplicity at least ``k`` (records + 1 if none)."""
    for r in records:
        if f_query(r.database, r.depth, 1, records=records) >= k:
            return r.depth
    return len(records) + 1


def neighbor_pair(g: np.random.Generator, n: int, bits: int) -> tuple[Database, Database]:
    domain = OrderedDomain(bits)
    base = staircase_sorted(g, n, bits) if g.random() < 0.5 else uniform_sorted(g, n, bits)
    extra = np.uint64(g.integers(0, 1 << bits, dtype=np.uint64))
    bigger = np.insert(base, int(np.searchsorted(base, extra)), extra)
    return Database._trusted(base, domain), Database._trusted(bigger, domain)


def _one_insertion_apart(a: np.ndarray, b: np.ndarray) -> bool:
    """Whether sorted ``b`` equals sorted ``a`` with exactly one element inserted."""
    if b.size != a.size + 1:
        return False
    diff = np.flatnonzero(a != b[:-1])
    i = int(diff[0]) if diff.size else a.size
    return bool(np.array_equal(a[i:], b[i + 1:]))


def multiset_difference(a: Database, b: Database) -> int:
    """Size of the symmetric multiset difference."""
    if _one_insertion_apart(a.elements, b.elements) or _one_insertion_apart(b.elements, a.elements):
        return 1
    values = np.union1d(a.elements, b.elements)

    def counts(x: np.ndarray) -> np.ndarray:
        return np.searchsorted(x, values, side="right") - np.searchsorted(x, values, side="left")

    return int(np.abs(counts(a.elements) - counts(b.elements)).sum())


def check_neighbor_chains(count: int, bits: int = 32, seed: int = 3) -> tuple[CheckResult, CheckResult]:
    """Per depth before the heavy depth: databases differ by one insertion and ``f_d`` moves by at most 1."""
    g = np.random.default_rng(seed)
    n, hp = operating_scale(bits)
    bad_chain = bad_f = deep = 0
    for _ in range(count):
        s, s2 = neighbor_pair(g, n, bits)
        rec, rec2 = construct_paths(s, hp.t), construct_paths(s2, hp.t)
        d_star = heavy_depth(rec, hp.k)
        for d in range(1, min(d_star - 1, len(rec), len(rec2)) + 1):
            bad_chain += multiset_difference(rec[d - 1].database, rec2[d - 1].database) != 1
        deep += d_star >= 3
        for d in range(1, min(d_star, len(rec), len(rec2)) + 1):
            bad_f += abs(f_query(s, d, hp.t, records=rec) - f_query(s2, d, hp.t, records=rec2)) > 1
    note = f"t={hp.t}, n={n}, {deep} pairs reach depth >= 3"
    return (CheckResult(f"neighbor chains differ by one element (b={bits})", count, bad_chain, note),
            CheckResult(f"f_d sensitivity <= 1 (b={bits})", count, bad_f, note))


def run_all(scale: float = 1.0, seed: int = 0) -> list[CheckResult]:
    k = max(1, int(round(scale * 100)))
    chain, sens = check_neighbor_chains(k, seed=seed + 3)
    return [
        check_weights(100 * k, seed),
        check_falloff(10 * k, seed + 1),
        check_construct_paths(10 * k, seed + 2),
        chain,
        sens,
    ]
