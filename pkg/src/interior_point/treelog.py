"""Recursive domain-shrinking interior point algorithm (``TreeLog``).

Each call trims the database, samples a random heavy path through the
implicit tree, re-encodes the database as "level at which each point falls
off the path" (a domain of size about ``log |X|``), recurses on that, and
translates the returned level back into a point of the original domain.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .domain import (
    ROOT,
    Database,
    NodeId,
    OrderedDomain,
    Path,
    PrivacyBudget,
    extend_to_power_of_two,
    interior_score,
    leaf_candidates,
    log_star,
    trim,
    weight,
)
from .errors import DomainError, InsufficientData, NoSolution, ParamError
from .mechanisms import (
    RandomSource,
    ScoredCandidates,
    choosing_mechanism,
    exponential_mechanism,
    node_weight_query,
    two_way_exp_choice,
)

DEFAULT_BASE_CASE = 16
# Levels {0, 1, 2} re-extend to a 4-element domain, so recursion must stop by then.
MIN_EFFECTIVE_BASE = 4
TRIM_CONSTANT = 4.0
# Multiples of t left over for the base case by treelog_min_size.
BASE_SLACK = 8


def trim_parameter(epsilon: float, delta: float) -> int:
    """``ceil((4/eps) log2(1/delta))``."""
    return max(1, math.ceil(TRIM_CONSTANT / epsilon * math.log2(1.0 / delta)))


def is_base_case(domain: OrderedDomain, base_case_domain: int) -> bool:
    return domain.size <= max(base_case_domain, MIN_EFFECTIVE_BASE)


def next_domain(domain: OrderedDomain) -> OrderedDomain:
    """Domain of tree levels ``{0..b}``, extended to a power of two."""
    return extend_to_power_of_two(domain.bit_width + 1)


def domain_chain(domain: OrderedDomain, base_case_domain: int = DEFAULT_BASE_CASE) -> list[OrderedDomain]:
    """Domains visited by the recursion, ending with the base-case domain."""
    chain = [domain]
    while not is_base_case(chain[-1], base_case_domain):
        chain.append(next_domain(chain[-1]))
    return chain


def recursion_depth(domain: OrderedDomain, base_case_domain: int = DEFAULT_BASE_CASE) -> int:
    """Number of recursive calls made on ``domain``."""
    return len(domain_chain(domain, base_case_domain)) - 1


@dataclass(frozen=True)
class AlgoParams:
    trim: int
    per_step_epsilon: float
    per_step_delta: float
    base_case_domain: int = DEFAULT_BASE_CASE

    def __post_init__(self):
        if self.trim < 1:
            raise ParamError(f"trim must be >= 1, got {self.trim}")
        if self.base_case_domain < 2:
            raise ParamError(f"base_case_domain must be >= 2, got {self.base_case_domain}")
        PrivacyBudget(self.per_step_epsilon, self.per_step_delta)

    @classmethod
    def from_budget(
        cls,
        budget: PrivacyBudget,
        domain: OrderedDomain,
        n: int,
        base_case_domain: int = DEFAULT_BASE_CASE,
    ) -> "AlgoParams":
        """Split a total budget over the recursion.

        Per step: ``eps = eps_tot / (5 log*|X| log n)`` and
        ``delta = delta_tot / (3 n log*|X| e^eps_tot)``.
        """
        depth_bound = max(1, log_star(domain.size))
        log_n = max(1.0, math.log2(max(n, 2)))
        eps = budget.epsilon / (5.0 * depth_bound * log_n)
        delta = budget.delta / (3.0 * max(n, 1) * depth_bound * math.exp(budget.epsilon))
        return cls(trim_parameter(eps, delta), eps, delta, base_case_domain)

    @property
    def budget(self) -> PrivacyBudget:
        return PrivacyBudget(self.per_step_epsilon, self.per_step_delta)


def treelog_min_size(
    domain: OrderedDomain,
    budget: PrivacyBudget,
    base_case_domain: int = DEFAULT_BASE_CASE,
) -> int:
    """Smallest ``n`` the public entry point accepts.

    Every recursive call consumes ``3t`` elements and the base case keeps
    ``BASE_SLACK * t``. Since ``t`` itself depends on ``n`` through the budget
    split, this is solved as a fixed point.
    """
    depth = recursion_depth(domain, base_case_domain)
    n = 2
    for _ in range(100):
        t = AlgoParams.from_budget(budget, domain, n, base_case_domain).trim
        need = (3 * depth + BASE_SLACK) * t + 1
        if need <= n:
            return n
        n = need
    raise ParamError("minimum database size did not converge")


def base_case_solve(db: Database, epsilon: float, rng: RandomSource) -> int:
    """Exponential mechanism over the whole (small) domain with the interior score."""
    size = db.domain.size
    if size > 1 << 16:
        raise DomainError(f"base case over {size} elements is not supported")
    ys = list(range(size))
    scores = [interior_score(db, y) for y in ys]
    return int(exponential_mechanism(ScoredCandidates(ys, scores), epsilon, rng))


def sample_path(db_hat: Database, epsilon: float, t: int, rng: RandomSource) -> Path:
    """Random root path; stops at a leaf or at a node of weight at most ``t``."""
    bits = db_hat.domain.bit_width
    node = ROOT
    nodes = [node]
    w = len(db_hat)
    while not node.is_leaf(bits) and w > t:
        left, right = node.children()
        w0 = weight(db_hat, left)
        w1 = w - w0
        assert w0 or w1, "both children empty below a node of positive weight"
        if w0 == 0:
            b = 1
        elif w1 == 0:
            b = 0
        else:
            b = two_way_exp_choice(w0, w1, epsilon, rng)
        node, w = (right, w1) if b else (left, w0)
        nodes.append(node)
    return Path(tuple(nodes))


def falloff_counts(db_hat: Database, path: Path, n: int, t: int) -> list[tuple[int, int]]:
    """``(level, copies)`` pairs making up the fall-off database, in level order."""
    if n <= 3 * t:
        raise InsufficientData(f"need more than 3t = {3 * t} elements, got {n}")
    target = n - 3 * t
    size = 0
    out = []
    nodes = path.nodes
    for i, node in enumerate(nodes):
        if size >= target:
            break
        if i == len(nodes) - 1:
            out.append((node.level, target - size))
            size = target
            break
        nxt = nodes[i + 1]
        left, right = node.children()
        other = right if nxt == left else left
        copies = min(weight(db_hat, other), target - size)
        if copies:
            out.append((node.level, copies))
            size += copies
    return out


def falloff_database(db_hat: Database, path: Path, n: int, t: int) -> Database:
    """Database over the tree levels recording where points fall off ``path``."""
    counts = falloff_counts(db_hat, path, n, t)
    domain = next_domain(db_hat.domain)
    levels = np.array([lvl for lvl, _ in counts], dtype=domain.dtype)
    copies = np.array([c for _, c in counts], dtype=np.int64)
    return Database._trusted(np.repeat(levels, copies), domain)


def choose_leaf(
    db: Database,
    db_hat: Database,
    level: int,
    budget: PrivacyBudget,
    rng: RandomSource,
) -> int:
    """Pick a heavy node at ``level`` of ``db_hat``'s tree, then the best boundary leaf for ``db``."""
    bits = db.domain.bit_width
    if not 0 <= level <= bits:
        raise DomainError(f"level {level} outside [0, {bits}]")
    prefix = choosing_mechanism(node_weight_query(level), db_hat, budget, budget.delta, rng)
    if prefix is None:
        raise NoSolution(f"no heavy node found at level {level}")
    leaves = leaf_candidates(NodeId(level, int(prefix)), bits)
    scores = [interior_score(db, y) for y in leaves]
    return int(exponential_mechanism(ScoredCandidates(leaves, scores), budget.epsilon, rng))


def run_treelog(db: Database, params: AlgoParams, rng: RandomSource, _depth: int = 0, _limit=None) -> int:
    """The recursion itself, with explicit per-step parameters."""
    domain = db.domain
    if _limit is None:
        _limit = log_star(max(domain.size, 1)) + 2
    assert _depth <= _limit, f"recursion depth {_depth} exceeds log* bound {_limit}"
    eps = params.per_step_epsilon
    if is_base_case(domain, params.base_case_domain):
        return base_case_solve(db, eps, rng)

    t = params.trim
    n = len(db)
    if n <= 3 * t:
        raise InsufficientData(f"need more than 3t = {3 * t} elements at depth {_depth}, got {n}")
    db_hat = trim(db, t)
    path = sample_path(db_hat, eps, t, rng)
    encoded = falloff_database(db_hat, path, n, t)
    level = run_treelog(encoded, params, rng, _depth + 1, _limit)
    # A failed recursion may return a padding value beyond the last level.
    level = min(level, domain.bit_width)
    return choose_leaf(db, db_hat, level, params.budget, rng)


def treelog(
    db: Database,
    budget: PrivacyBudget,
    rng: RandomSource,
    *,
    base_case_domain: int = DEFAULT_BASE_CASE,
) -> int:
    """Privately find an interior point of ``db`` under a total ``budget``."""
    n = len(db)
    n_min = treelog_min_size(db.domain, budget, base_case_domain)
    if n < n_min:
        raise InsufficientData(f"treelog needs at least {n_min} elements on a {db.domain.bit_width}-bit domain, got {n}")
    params = AlgoParams.from_budget(budget, db.domain, n, base_case_domain)
    if params.per_step_delta > params.per_step_epsilon / (4 * n):
        warnings.warn("delta > epsilon / (4n): the path-sampling privacy argument does not apply", stacklevel=2)
    return run_treelog(db, params, rng)
