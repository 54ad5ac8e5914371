"""Proper private learner for threshold functions on top of an interior point solver.

The learner keeps the largest tenth of the 1-labeled points and the smallest
tenth of the 0-labeled points. Any interior point of that set separates the
two groups well, so ``x <= y`` is returned as the hypothesis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .domain import Database, OrderedDomain, PrivacyBudget
from .errors import DomainError, InsufficientData, ParamError, ParseError
from .heavy_paths import heavy_paths, heavy_paths_min_size
from .mechanisms import RandomSource, laplace
from .treelog import treelog, treelog_min_size

SELECT_FRACTION = 10
# Share of epsilon spent on the noisy label counts; the rest goes to the solver.
TEST_SHARE = 0.1
SOLVERS = ("treelog", "heavy-paths")


class LabeledDatabase:
    """Examples ``(x, label)`` with ``x`` in the domain and ``label`` in {0, 1}."""

    def __init__(self, elements, labels, domain: OrderedDomain):
        if isinstance(elements, np.ndarray) and elements.dtype == domain.dtype:
            xs = elements
        else:
            xs = np.array([domain.check(x) for x in elements], dtype=domain.dtype)
        ys = np.asarray(labels, dtype=np.int8)
        if xs.shape != ys.shape or xs.ndim != 1:
            raise ParamError("elements and labels must be 1-d and of equal length")
        if ys.size and not np.all((ys == 0) | (ys == 1)):
            raise DomainError("labels must be 0 or 1")
        if xs.size and domain.dtype is not object and domain.bit_width < 64 and int(xs.max()) >= domain.size:
            raise DomainError(f"elements must lie in [0, 2**{domain.bit_width})")
        self.elements = xs
        self.labels = ys
        self.domain = domain

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, int]], domain: OrderedDomain) -> "LabeledDatabase":
        pairs = list(pairs)
        for x, _ in pairs:
            domain.check(x)
        return cls([x for x, _ in pairs], [y for _, y in pairs], domain)

    def __len__(self) -> int:
        return int(self.labels.size)

    def pairs(self) -> list[tuple[int, int]]:
        return [(int(x), int(y)) for x, y in zip(self.elements, self.labels)]

    def with_label(self, label: int) -> np.ndarray:
        """Sorted elements carrying ``label``."""
        return np.sort(self.elements[self.labels == label], kind="stable")

    def extreme(self, label: int, m: int, largest: bool) -> np.ndarray:
        """The ``m`` largest (or smallest) elements carrying ``label``, unsorted."""
        xs = self.elements[self.labels == label]
        if m <= 0:
            return xs[:0]
        if m >= xs.size:
            return xs
        if xs.dtype == object:
            xs = np.sort(xs)
            return xs[-m:] if largest else xs[:m]
        return np.partition(xs, xs.size - m)[-m:] if largest else np.partition(xs, m - 1)[:m]


@dataclass(frozen=True)
class ThresholdHypothesis:
    """``x -> 1 if x <= threshold else 0``, or one of the two constant functions."""

    kind: str
    threshold: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("threshold", "all_ones", "all_zeros"):
            raise ParamError(f"unknown hypothesis kind {self.kind!r}")
        if (self.kind == "threshold") != (self.threshold is not None):
            raise ParamError("only threshold hypotheses carry a threshold")

    @classmethod
    def at(cls, threshold: int) -> "ThresholdHypothesis":
        return cls("threshold", int(threshold))

    def predict(self, x) -> int:
        if self.kind == "all_ones":
            return 1
        if self.kind == "all_zeros":
            return 0
        return int(int(x) <= self.threshold)

    def predict_many(self, xs: np.ndarray) -> np.ndarray:
        if self.kind != "threshold":
            return np.full(len(xs), 1 if self.kind == "all_ones" else 0, dtype=np.int8)
        if xs.dtype == object:
            return np.array([int(x) <= self.threshold for x in xs], dtype=np.int8)
        return (xs <= np.uint64(self.threshold)).astype(np.int8)

    def to_json(self) -> dict:
        return {"kind": self.kind, "threshold": self.threshold}


def empirical_error(h: ThresholdHypothesis, data: LabeledDatabase) -> float:
    if not len(data):
        return 0.0
    return float(np.mean(h.predict_many(data.elements) != data.labels))


def solver_min_size(solver: str, domain: OrderedDomain, budget: PrivacyBudget) -> int:
    if solver == "treelog":
        return treelog_min_size(domain, budget)
    if solver == "heavy-paths":
        return heavy_paths_min_size(domain, budget)
    raise ParamError(f"unknown solver {solver!r}; expected one of {SOLVERS}")


def learner_min_size(solver: str, domain: OrderedDomain, budget: PrivacyBudget) -> int:
    """Smallest labeled sample for which the selected subset meets the solver's minimum."""
    inner = PrivacyBudget(budget.epsilon * (1 - TEST_SHARE), budget.delta)
    return SELECT_FRACTION * math.ceil(solver_min_size(solver, domain, inner) / 2)


def learn_threshold(data: LabeledDatabase, budget: PrivacyBudget, rng: RandomSource,
                    solver: str = "heavy-paths") -> ThresholdHypothesis:
    """Privately learn a threshold function from labeled examples."""
    if solver not in SOLVERS:
        raise ParamError(f"unknown solver {solver!r}; expected one of {SOLVERS}")
    eps_test = budget.epsilon * TEST_SHARE
    inner = PrivacyBudget(budget.epsilon - eps_test, budget.delta)
    m = len(data) // SELECT_FRACTION
    n_min = solver_min_size(solver, data.domain, inner)
    if 2 * m < n_min:
        raise InsufficientData(
            f"learning needs at least {learner_min_size(solver, data.domain, budget)} labeled examples, "
            f"got {len(data)}")

    # Two sensitivity-1 counts, each released with half of eps_test.
    scale = 2.0 / eps_test
    margin = scale * math.log(1.0 / budget.delta)
    ones = int(np.count_nonzero(data.labels))
    zeros = len(data) - ones
    if ones + laplace(scale, rng) < m + margin:
        return ThresholdHypothesis("all_zeros")
    if zeros + laplace(scale, rng) < m + margin:
        return ThresholdHypothesis("all_ones")
    # Rare: the noise let a short label class through; fall back like the branch above.
    if ones < m:
        return ThresholdHypothesis("all_zeros")
    if zeros < m:
        return ThresholdHypothesis("all_ones")

    top_ones = data.extreme(1, m, largest=True)
    low_zeros = data.extreme(0, m, largest=False)
    selected = np.sort(np.concatenate([top_ones, low_zeros]), kind="stable")
    db = Database._trusted(selected, data.domain)
    if solver == "treelog":
        y = treelog(db, inner, rng)
    else:
        y = heavy_paths(db, inner, rng)
    return ThresholdHypothesis.at(y)


def parse_labeled(lines: Iterable[str], domain: OrderedDomain) -> LabeledDatabase:
    """Parse ``value,label`` lines; blank lines are skipped."""
    xs, ys = [], []
    for lineno, raw in enumerate(lines, 1):
        text = raw.strip()
        if not text:
            continue
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 2 or not parts[0].isdigit() or parts[1] not in ("0", "1"):
            raise ParseError(f"line {lineno}: expected 'value,label' with label 0 or 1, got {text!r}")
        value = int(parts[0])
        if not domain.contains(value):
            raise DomainError(f"line {lineno}: value {value} outside [0, 2**{domain.bit_width})")
        xs.append(value)
        ys.append(int(parts[1]))
    return LabeledDatabase(xs, ys, domain)
