"""Differentially private selection primitives.

Exponential Mechanism, Choosing Mechanism, the AboveThreshold sparse-vector
session, and the Laplace / two-way sampling helpers they share. All sampling
goes through an injected :class:`RandomSource` and is done in log space.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .domain import Database, PrivacyBudget
from .errors import EmptyChoice, ParamError, SessionClosed

NOISELESS_ENV = "INTERIOR_POINT_ALLOW_NOISELESS"


def noiseless_allowed() -> bool:
    return os.environ.get(NOISELESS_ENV) == "1"


class RandomSource:
    """Seedable pseudorandom stream (PCG64).

    ``noiseless=True`` turns every noise draw into its degenerate value
    (Laplace -> 0, samplers -> argmax). It only exists for deterministic tests
    and is refused unless the ``INTERIOR_POINT_ALLOW_NOISELESS=1`` environment
    variable is set.
    """

    def __init__(self, seed=None, *, noiseless: bool = False):
        if noiseless and not noiseless_allowed():
            raise ParamError(f"noiseless mode requires {NOISELESS_ENV}=1 (test builds only)")
        self.seed = seed
        self.noiseless = noiseless
        self._gen = np.random.default_rng(seed)

    @classmethod
    def for_trial(cls, master_seed: int, index: int, **kwargs) -> "RandomSource":
        return cls(trial_seed(master_seed, index), **kwargs)

    def uniform(self) -> float:
        return float(self._gen.random())

    def laplace(self, scale: float) -> float:
        return 0.0 if self.noiseless else float(self._gen.laplace(0.0, scale))

    def choice(self, probabilities: np.ndarray) -> int:
        return int(self._gen.choice(len(probabilities), p=probabilities))

    def integers(self, low, high, size=None, dtype=np.int64):
        return self._gen.integers(low, high, size=size, dtype=dtype)

    @property
    def generator(self) -> np.random.Generator:
        return self._gen


def trial_seed(master_seed: int, index: int) -> int:
    """A 64-bit seed derived from ``(master_seed, index)``."""
    words = np.random.SeedSequence([int(master_seed), int(index)]).generate_state(2, dtype=np.uint32)
    return int(words[0]) << 32 | int(words[1])


def laplace(scale: float, rng: RandomSource) -> float:
    if not scale > 0:
        raise ParamError(f"Laplace scale must be positive, got {scale}")
    return rng.laplace(scale)


def _logistic(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def two_way_exp_choice(w0: float, w1: float, epsilon: float, rng: RandomSource) -> int:
    """Return ``b`` with probability proportional to ``exp(epsilon * w_b)``."""
    if w0 < 0 or w1 < 0:
        raise ParamError("weights must be nonnegative")
    if rng.noiseless:
        return 1 if w1 > w0 else 0
    p1 = _logistic(epsilon * (float(w1) - float(w0)))
    return 1 if rng.uniform() < p1 else 0


@dataclass(frozen=True)
class ScoredCandidates:
    """Candidates with integer qualities of sensitivity ``sensitivity``."""

    candidates: Sequence[Any]
    qualities: np.ndarray
    sensitivity: float = 1.0

    def __post_init__(self):
        q = np.asarray(self.qualities, dtype=np.float64)
        object.__setattr__(self, "qualities", q)
        if len(self.candidates) != q.size:
            raise ParamError("candidates and qualities differ in length")
        if not self.sensitivity > 0:
            raise ParamError("sensitivity must be positive")
        if q.size and not np.all(np.isfinite(q)):
            raise ParamError("qualities must be finite")

    @classmethod
    def from_pairs(cls, pairs, sensitivity: float = 1.0) -> "ScoredCandidates":
        pairs = list(pairs)
        return cls([c for c, _ in pairs], [q for _, q in pairs], sensitivity)

    def __len__(self):
        return len(self.candidates)

    def probabilities(self, epsilon: float) -> np.ndarray:
        """Closed-form output distribution of the exponential mechanism."""
        logits = epsilon * self.qualities / (2.0 * self.sensitivity)
        logits -= logits.max()
        p = np.exp(logits)
        return p / p.sum()


def exponential_mechanism(cands: ScoredCandidates, epsilon: float, rng: RandomSource):
    if not len(cands):
        raise EmptyChoice("exponential mechanism needs at least one candidate")
    if not epsilon > 0:
        raise ParamError(f"epsilon must be positive, got {epsilon}")
    if rng.noiseless:
        idx = int(np.argmax(cands.qualities))
    elif len(cands) == 1:
        idx = 0
    else:
        idx = rng.choice(cands.probabilities(epsilon))
    return cands.candidates[idx]


@dataclass(frozen=True)
class BoundedGrowthQuery:
    """Quality function of ``growth_bound``-bounded growth.

    ``positive_scores(db)`` returns the candidates with strictly positive
    score and their scores; every other candidate implicitly scores 0.
    """

    positive_scores: Callable[[Database], tuple[np.ndarray, np.ndarray]]
    growth_bound: int = 1
    name: str = field(default="query", compare=False)

    def __call__(self, db: Database):
        return self.positive_scores(db)


def _runs(arr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Distinct values and run lengths of a sorted array."""
    if arr.size == 0:
        return arr[:0], np.zeros(0, dtype=np.int64)
    starts = np.concatenate(([0], np.flatnonzero(arr[1:] != arr[:-1]) + 1))
    counts = np.diff(np.append(starts, arr.size))
    return arr[starts], counts


def multiplicity_query() -> BoundedGrowthQuery:
    """Score of an element is its multiplicity in the database."""
    return BoundedGrowthQuery(lambda db: _runs(db.elements), 1, "multiplicity")


def node_weight_query(level: int) -> BoundedGrowthQuery:
    """Score of a level-``level`` node (by prefix) is its weight."""

    def scores(db: Database):
        shift = db.domain.bit_width - level
        if shift < 0:
            raise ParamError(f"level {level} below the leaves of a {db.domain.bit_width}-bit tree")
        arr = db.elements
        if shift:
            arr = arr >> (np.uint64(shift) if arr.dtype != object else shift)
        return _runs(arr)

    return BoundedGrowthQuery(scores, 1, f"node-weight@{level}")


def choosing_threshold(epsilon: float, delta: float, beta: float, k: int, n: int) -> float:
    """Noisy-maximum cutoff ``(8/eps) ln(4kn / (beta eps delta))`` of the first phase."""
    return 8.0 / epsilon * math.log(4.0 * k * max(n, 1) / (beta * epsilon * delta))


def choosing_utility_loss(epsilon: float, delta: float, beta: float, k: int, n: int) -> float:
    """Additive loss ``(16/eps) ln(4kn / (beta eps delta))`` in the utility guarantee."""
    return 16.0 / epsilon * math.log(4.0 * k * max(n, 1) / (beta * epsilon * delta))


def choosing_mechanism(
    query: BoundedGrowthQuery,
    db: Database,
    budget: PrivacyBudget,
    beta: float,
    rng: RandomSource,
):
    """Choosing Mechanism; returns a candidate or ``None`` for "no answer".

    Phase one compares the noisy optimum ``OPT + Lap(4/eps)`` with
    :func:`choosing_threshold`; phase two runs the exponential mechanism with
    budget ``eps/2`` over the candidates of positive score.
    """
    eps, delta = budget.epsilon, budget.delta
    if not 0 < eps <= 2:
        raise ParamError(f"the Choosing Mechanism requires 0 < epsilon <= 2, got {eps}")
    if not 0 < beta < 1:
        raise ParamError(f"beta must lie in (0, 1), got {beta}")
    candidates, scores = query(db)
    if len(candidates) == 0:
        return None
    opt = float(scores.max())
    threshold = choosing_threshold(eps, delta, beta, query.growth_bound, len(db))
    if opt + rng.laplace(4.0 / eps) < threshold:
        return None
    return exponential_mechanism(ScoredCandidates(candidates, scores), eps / 2.0, rng)


def svt_accuracy(epsilon: float, max_queries: int, beta: float) -> float:
    """Additive accuracy ``(8/eps) ln(2m/beta)`` of AboveThreshold."""
    return 8.0 / epsilon * math.log(2.0 * max_queries / beta)


class SvtSession:
    """AboveThreshold: reports the first sensitivity-1 query above ``threshold``.

    Threshold noise ``Lap(2/eps)`` is drawn once; each query gets ``Lap(4/eps)``.
    Not safe for concurrent use.
    """

    def __init__(self, epsilon: float, threshold: float, max_queries: int, rng: RandomSource, db_size=None):
        if not epsilon > 0:
            raise ParamError(f"epsilon must be positive, got {epsilon}")
        if max_queries < 1:
            raise ParamError(f"max_queries must be positive, got {max_queries}")
        self.epsilon = epsilon
        self.threshold = threshold
        self.max_queries = max_queries
        self.db_size = db_size
        self.asked = 0
        self.halted = False
        self._rng = rng
        self._noisy_threshold = threshold + rng.laplace(2.0 / epsilon)

    def query(self, value: float) -> bool:
        """``True`` for above-threshold (the session then halts), ``False`` otherwise."""
        if self.halted:
            raise SessionClosed("AboveThreshold already answered above threshold")
        if self.asked >= self.max_queries:
            raise ParamError(f"session allows at most {self.max_queries} queries")
        self.asked += 1
        if value + self._rng.laplace(4.0 / self.epsilon) >= self._noisy_threshold:
            self.halted = True
            return True
        return False


def svt_open(db_size: int, budget: PrivacyBudget, threshold: float, max_queries: int, rng: RandomSource) -> SvtSession:
    return SvtSession(budget.epsilon, threshold, max_queries, rng, db_size=db_size)


def svt_query(session: SvtSession, value: float) -> bool:
    return session.query(value)
