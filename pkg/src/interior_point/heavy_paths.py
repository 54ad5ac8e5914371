"""Decomposed interior point algorithm (``HeavyPaths``).

``construct_paths`` follows the heavier child deterministically and produces
the whole chain of re-encoded databases. A sparse-vector stopping rule picks
the first depth where some encoded value is heavy; one randomized step runs
there, and ``level_up`` translates the answer back one depth at a time.
Every stage recomputes the chain from the raw input.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .domain import (
    ROOT,
    Database,
    OrderedDomain,
    Path,
    PrivacyBudget,
    log_star,
    trim,
    weight,
)
from .errors import DepthError, DomainError, InsufficientData, NoSolution, NoStoppingPoint, ParamError
from .mechanisms import RandomSource, SvtSession, choosing_mechanism, multiplicity_query
from .treelog import (
    DEFAULT_BASE_CASE,
    choose_leaf,
    domain_chain,
    falloff_database,
    is_base_case,
    sample_path,
)

DEFAULT_LAMBDA = 32.0
DEFAULT_CALIBRATION = 1.0
HALT_MULTIPLE = 10
# Multiples of t beyond the 10t halting size that heavy_paths_min_size reserves.
EXTRA_SLACK = 1


@dataclass(frozen=True)
class LevelRecord:
    depth: int
    domain: OrderedDomain
    database: Database
    # None on the terminal record, where the halting rule fired before a path was built.
    path: Optional[Path]


@dataclass(frozen=True)
class HeavyParams:
    """``k = ceil((lam/eps) log2(log*|X| / delta))``, ``t = 2k``, ``c = k/2``."""

    lam: float
    epsilon: float
    delta: float
    domain_log_star: int
    base_case_domain: int = DEFAULT_BASE_CASE

    def __post_init__(self):
        if not self.lam > 0:
            raise ParamError(f"lambda must be positive, got {self.lam}")
        PrivacyBudget(self.epsilon, self.delta)

    @classmethod
    def for_domain(cls, domain: OrderedDomain, epsilon: float, delta: float, lam: float = DEFAULT_LAMBDA,
                   base_case_domain: int = DEFAULT_BASE_CASE) -> "HeavyParams":
        return cls(lam, epsilon, delta, max(1, log_star(domain.size)), base_case_domain)

    @property
    def k(self) -> int:
        return max(1, math.ceil(self.lam / self.epsilon * math.log2(self.domain_log_star / self.delta)))

    @property
    def t(self) -> int:
        return 2 * self.k

    @property
    def threshold(self) -> float:
        return self.k / 2

    @property
    def budget(self) -> PrivacyBudget:
        return PrivacyBudget(self.epsilon, self.delta)


def split_budget(budget: PrivacyBudget, domain: OrderedDomain, n: int,
                 calibration: float = DEFAULT_CALIBRATION) -> PrivacyBudget:
    """Per-call budget whose composition follows the square-root profile.

    ``eps = eps_tot / (C (sqrt(L log2(1/(delta_tot L))) + log2 n))`` and
    ``delta = delta_tot / (C (n + L))`` with ``L = log*|X|``.
    """
    L = max(1, log_star(domain.size))
    root_term = math.sqrt(L * max(1.0, math.log2(1.0 / (budget.delta * L))))
    log_n = max(1.0, math.log2(max(n, 2)))
    eps = budget.epsilon / (calibration * (root_term + log_n))
    delta = budget.delta / (calibration * (n + L))
    return PrivacyBudget(eps, min(delta, 0.5))


def heavy_paths_min_size(domain: OrderedDomain, budget: PrivacyBudget, lam: float = DEFAULT_LAMBDA,
                         calibration: float = DEFAULT_CALIBRATION,
                         base_case_domain: int = DEFAULT_BASE_CASE) -> int:
    """Smallest ``n`` such that every non-base depth still holds more than ``10t`` points.

    Solved as a fixed point because ``t`` depends on ``n`` via the budget split.
    """
    paths_needed = max(1, len(domain_chain(domain, base_case_domain)) - 1)
    n = 2
    for _ in range(100):
        step = split_budget(budget, domain, n, calibration)
        t = HeavyParams.for_domain(domain, step.epsilon, step.delta, lam, base_case_domain).t
        need = (10 + 3 * (paths_needed - 1) + EXTRA_SLACK) * t + 1
        if need <= n:
            return n
        n = need
    raise ParamError("minimum database size did not converge")


def _heavy_path(db_hat: Database, t: int) -> Path:
    """Follow the heavier child (ties go left) until a leaf or weight <= t."""
    bits = db_hat.domain.bit_width
    node = ROOT
    nodes = [node]
    w = len(db_hat)
    while not node.is_leaf(bits) and w > t:
        left, right = node.children()
        w0 = weight(db_hat, left)
        w1 = w - w0
        node, w = (right, w1) if w1 > w0 else (left, w0)
        nodes.append(node)
    return Path(tuple(nodes))


def construct_paths(db: Database, t: int, base_case_domain: int = DEFAULT_BASE_CASE,
                    halt_multiple: int = HALT_MULTIPLE) -> list[LevelRecord]:
    """Deterministic chain of ``(X_d, S_d, pi_d)`` records, ``S_1 = db``.

    The last record is where ``|S_d| <= halt_multiple * t`` or the domain
    reached the base size; it carries no path. ``halt_multiple`` below 3
    is rejected since every step consumes ``3t`` points.
    """
    if t < 1:
        raise ParamError(f"t must be >= 1, got {t}")
    if halt_multiple < 3:
        raise ParamError(f"halt_multiple must be >= 3, got {halt_multiple}")
    records = []
    current = db
    depth = 1
    while True:
        n = len(current)
        if n <= halt_multiple * t or is_base_case(current.domain, base_case_domain):
            records.append(LevelRecord(depth, current.domain, current, None))
            return records
        db_hat = trim(current, t)
        path = _heavy_path(db_hat, t)
        records.append(LevelRecord(depth, current.domain, current, path))
        current = falloff_database(db_hat, path, n, t)
        depth += 1


def max_multiplicity(db: Database) -> int:
    _, counts = multiplicity_query()(db)
    return int(counts.max()) if len(counts) else 0


def _record(records: Sequence[LevelRecord], d: int) -> LevelRecord:
    if not 1 <= d <= len(records):
        raise DepthError(f"depth {d} outside the {len(records)} produced records")
    return records[d - 1]


def f_query(db: Database, d: int, t: int, base_case_domain: int = DEFAULT_BASE_CASE,
            records: Optional[Sequence[LevelRecord]] = None) -> int:
    """Largest multiplicity of any value in ``S_d``.

    ``records`` may carry the (pure, bit-identical) output of
    ``construct_paths(db, t)`` to avoid recomputing it.
    """
    if d < 1:
        raise DepthError(f"depth must be >= 1, got {d}")
    if records is None:
        records = construct_paths(db, t, base_case_domain)
    return max_multiplicity(_record(records, d).database)


def stopping_point(db: Database, params: HeavyParams, rng: RandomSource,
                   records: Optional[Sequence[LevelRecord]] = None) -> int:
    """First depth whose ``f_d`` AboveThreshold reports above ``k/2``."""
    if records is None:
        records = construct_paths(db, params.t, params.base_case_domain)
    m = params.domain_log_star
    session = SvtSession(params.epsilon, params.threshold, m, rng, db_size=len(db))
    for d in range(1, min(m, len(records)) + 1):
        if session.query(f_query(db, d, params.t, records=records)):
            return d
    raise NoStoppingPoint(f"no depth in 1..{min(m, len(records))} crossed the threshold {params.threshold}")


def one_random_path(db: Database, params: HeavyParams, d: int, rng: RandomSource,
                    records: Optional[Sequence[LevelRecord]] = None) -> int:
    """One randomized TreeLog step on ``S_d`` with the recursion replaced by a heavy-level pick."""
    if records is None:
        records = construct_paths(db, params.t, params.base_case_domain)
    s_d = _record(records, d).database
    t = params.t
    n = len(s_d)
    if n <= 3 * t:
        raise InsufficientData(f"S_{d} has {n} <= 3t = {3 * t} elements")
    budget = params.budget
    db_hat = trim(s_d, t)
    path = sample_path(db_hat, params.epsilon, t, rng)
    encoded = falloff_database(db_hat, path, n, t)
    level = choosing_mechanism(multiplicity_query(), encoded, budget, budget.delta, rng)
    if level is None:
        raise NoSolution(f"no heavy level in the fall-off database at depth {d}")
    level = min(int(level), s_d.domain.bit_width)
    return choose_leaf(s_d, db_hat, level, budget, rng)


def level_up(db: Database, params: HeavyParams, d: int, i: int, rng: RandomSource,
             records: Optional[Sequence[LevelRecord]] = None) -> int:
    """Translate a level ``i`` of ``T_d`` (an interior point of ``S_{d+1}``) into a point of ``X_d``."""
    if records is None:
        records = construct_paths(db, params.t, params.base_case_domain)
    s_d = _record(records, d).database
    if not 0 <= i <= s_d.domain.bit_width:
        raise DomainError(f"level {i} outside [0, {s_d.domain.bit_width}]")
    db_hat = trim(s_d, params.t)
    return choose_leaf(s_d, db_hat, i, params.budget, rng)


def run_heavy_paths(db: Database, params: HeavyParams, rng: RandomSource) -> int:
    """The full pipeline with explicit per-call parameters."""
    records = construct_paths(db, params.t, params.base_case_domain)
    d_star = stopping_point(db, params, rng, records)
    if d_star == 1:
        # No level above depth 1 to run the random-path step on; the heavy
        # element itself is an interior point.
        choice = choosing_mechanism(multiplicity_query(), db, params.budget, params.delta, rng)
        if choice is None:
            raise NoSolution("no heavy element at depth 1")
        return int(choice)
    y = one_random_path(db, params, d_star - 1, rng, records)
    for d in range(d_star - 2, 0, -1):
        y = min(y, records[d - 1].domain.bit_width)
        y = level_up(db, params, d, y, rng, records)
    return y


def heavy_paths(db: Database, budget: PrivacyBudget, rng: RandomSource, *, lam: float = DEFAULT_LAMBDA,
                calibration: float = DEFAULT_CALIBRATION, base_case_domain: int = DEFAULT_BASE_CASE) -> int:
    """Privately find an interior point of ``db`` under a total ``budget``."""
    n = len(db)
    n_min = heavy_paths_min_size(db.domain, budget, lam, calibration, base_case_domain)
    if n < n_min:
        raise InsufficientData(
            f"heavy_paths needs at least {n_min} elements on a {db.domain.bit_width}-bit domain, got {n}")
    step = split_budget(budget, db.domain, n, calibration)
    params = HeavyParams.for_domain(db.domain, step.epsilon, step.delta, lam, base_case_domain)
    return run_heavy_paths(db, params, rng)
