"""Implicit complete binary tree over a huge ordered domain.

The domain is always the integer range ``0 .. 2**b - 1``. Nothing about the
tree is ever materialized: a node is a ``(level, prefix)`` pair and its weight
is an interval count obtained with two binary searches on the sorted database.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import DomainError, InsufficientData, ParamError, ParseError

MAX_BITS = 128


@dataclass(frozen=True)
class OrderedDomain:
    """The ordered domain ``{0, ..., 2**bit_width - 1}``."""

    bit_width: int
    max_bits: int = MAX_BITS

    def __post_init__(self):
        if not isinstance(self.bit_width, (int, np.integer)) or isinstance(self.bit_width, bool):
            raise DomainError(f"bit width must be an integer, got {self.bit_width!r}")
        if self.bit_width < 0:
            raise DomainError(f"bit width must be nonnegative, got {self.bit_width}")
        if self.bit_width > self.max_bits:
            raise DomainError(f"bit width {self.bit_width} exceeds the maximum of {self.max_bits}")
        object.__setattr__(self, "bit_width", int(self.bit_width))

    @property
    def size(self) -> int:
        return 1 << self.bit_width

    @property
    def dtype(self):
        # uint64 covers every domain up to 64 bits; wider ones fall back to Python ints.
        return np.uint64 if self.bit_width <= 64 else object

    def contains(self, x) -> bool:
        return 0 <= int(x) < self.size

    def check(self, x) -> int:
        x = int(x)
        if not 0 <= x < self.size:
            raise DomainError(f"{x} is outside the domain [0, 2**{self.bit_width})")
        return x


class Database:
    """A sorted multiset of domain elements.

    ``elements`` is a read-only numpy array (``uint64`` for domains of at most
    64 bits, ``object`` otherwise) in nondecreasing order.
    """

    __slots__ = ("_elements", "_domain")

    def __init__(self, elements, domain: OrderedDomain):
        arr = _as_array(elements, domain)
        if arr.size and (int(arr[0]) < 0 or int(arr[-1]) >= domain.size):
            raise DomainError(f"database values must lie in [0, 2**{domain.bit_width})")
        if arr.size > 1 and np.any(arr[1:] < arr[:-1]):
            raise DomainError("database elements must be sorted in nondecreasing order")
        self._init(arr, domain)

    @classmethod
    def from_values(cls, values: Iterable[int], domain: OrderedDomain) -> "Database":
        """Build a database from unsorted values, validating the range."""
        values = [int(v) for v in values]
        for v in values:
            domain.check(v)
        values.sort()
        return cls._trusted(np.array(values, dtype=domain.dtype), domain)

    @classmethod
    def _trusted(cls, arr: np.ndarray, domain: OrderedDomain) -> "Database":
        obj = cls.__new__(cls)
        obj._init(arr, domain)
        return obj

    def _init(self, arr: np.ndarray, domain: OrderedDomain):
        if arr.flags.writeable:
            arr = arr.view()
            arr.flags.writeable = False
        self._elements = arr
        self._domain = domain

    @property
    def elements(self) -> np.ndarray:
        return self._elements

    @property
    def domain(self) -> OrderedDomain:
        return self._domain

    def __len__(self) -> int:
        return int(self._elements.size)

    def __iter__(self) -> Iterator[int]:
        return (int(x) for x in self._elements)

    def __eq__(self, other):
        if not isinstance(other, Database):
            return NotImplemented
        return self._domain == other._domain and np.array_equal(self._elements, other._elements)

    __hash__ = None

    def __repr__(self):
        head = ", ".join(str(int(x)) for x in self._elements[:8])
        tail = ", ..." if len(self) > 8 else ""
        return f"Database(b={self._domain.bit_width}, n={len(self)}, [{head}{tail}])"

    def to_list(self) -> list[int]:
        return [int(x) for x in self._elements]

    def min(self) -> int:
        if not len(self):
            raise InsufficientData("empty database has no minimum")
        return int(self._elements[0])

    def max(self) -> int:
        if not len(self):
            raise InsufficientData("empty database has no maximum")
        return int(self._elements[-1])

    def _key(self, x: int):
        return np.uint64(x) if self._domain.bit_width <= 64 else x

    def count_below(self, x: int) -> int:
        """Number of elements strictly smaller than ``x`` (any integer ``x``)."""
        if x <= 0:
            return 0
        if x >= self._domain.size:
            return len(self)
        return int(np.searchsorted(self._elements, self._key(x), side="left"))

    def count_at_most(self, x: int) -> int:
        """Number of elements smaller than or equal to ``x``."""
        return self.count_below(x + 1)

    def count_between(self, lo: int, hi_exclusive: int) -> int:
        return self.count_below(hi_exclusive) - self.count_below(lo)

    def slice(self, start: int, stop: int) -> "Database":
        return Database._trusted(self._elements[start:stop], self._domain)


def _as_array(elements, domain: OrderedDomain) -> np.ndarray:
    if isinstance(elements, np.ndarray) and elements.dtype == domain.dtype:
        return elements
    if domain.dtype is object:
        return np.array([int(x) for x in elements], dtype=object)
    items = [int(x) for x in elements]
    if any(x < 0 for x in items):
        raise DomainError("database values must be nonnegative")
    return np.array(items, dtype=np.uint64)


@dataclass(frozen=True, order=True)
class NodeId:
    """A node of the implicit tree: ``level`` bits of ``prefix`` from the root."""

    level: int
    prefix: int

    def __post_init__(self):
        if self.level < 0 or not 0 <= self.prefix < (1 << self.level):
            raise DomainError(f"invalid node (level={self.level}, prefix={self.prefix})")

    def validate(self, bits: int) -> "NodeId":
        if self.level > bits:
            raise DomainError(f"node level {self.level} exceeds tree height {bits}")
        return self

    def interval(self, bits: int) -> tuple[int, int]:
        """Inclusive leaf interval ``(lo, hi)`` covered by this node."""
        shift = bits - self.level
        return self.prefix << shift, ((self.prefix + 1) << shift) - 1

    def children(self) -> tuple["NodeId", "NodeId"]:
        return NodeId(self.level + 1, 2 * self.prefix), NodeId(self.level + 1, 2 * self.prefix + 1)

    def is_leaf(self, bits: int) -> bool:
        return self.level == bits


ROOT = NodeId(0, 0)


@dataclass(frozen=True)
class Path:
    """A root-anchored sequence of nodes, each a child of its predecessor."""

    nodes: tuple[NodeId, ...]

    def __post_init__(self):
        nodes = tuple(self.nodes)
        object.__setattr__(self, "nodes", nodes)
        if not nodes or nodes[0] != ROOT:
            raise DomainError("a path must start at the root")
        for parent, child in zip(nodes, nodes[1:]):
            if child.level != parent.level + 1 or child.prefix >> 1 != parent.prefix:
                raise DomainError(f"{child} is not a child of {parent}")

    @classmethod
    def to_node(cls, node: NodeId) -> "Path":
        """The unique root-to-``node`` path."""
        return cls(tuple(NodeId(lvl, node.prefix >> (node.level - lvl)) for lvl in range(node.level + 1)))

    @property
    def last(self) -> NodeId:
        return self.nodes[-1]

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self) -> Iterator[NodeId]:
        return iter(self.nodes)


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float
    delta: float

    def __post_init__(self):
        if not self.epsilon > 0 or math.isinf(self.epsilon):
            raise ParamError(f"epsilon must be a positive real, got {self.epsilon}")
        if not 0 < self.delta < 1:
            raise ParamError(f"delta must lie in (0, 1), got {self.delta}")


def log_star(x) -> int:
    """Iterated base-2 logarithm: applications of log2 until the value is <= 1."""
    if isinstance(x, bool) or not x >= 1:
        raise DomainError(f"log* is defined for x >= 1, got {x}")
    count = 0
    while x > 1:
        x = math.log2(x)
        count += 1
    return count


def weight(db: Database, node: NodeId) -> int:
    """Number of database elements inside the leaf interval of ``node``."""
    bits = db.domain.bit_width
    node.validate(bits)
    lo, hi = node.interval(bits)
    return db.count_between(lo, hi + 1)


def trim(db: Database, t: int) -> Database:
    """Drop the ``t`` smallest and ``t`` largest entries (by position)."""
    if t < 1:
        raise DomainError(f"trim parameter must be positive, got {t}")
    n = len(db)
    if n <= 2 * t:
        raise InsufficientData(f"cannot trim {t} from each side of a database of size {n}")
    return db.slice(t, n - t)


def interior_score(db: Database, y: int) -> int:
    """``min(#{x <= y}, #{x >= y})``; ``y`` is an interior point iff this is >= 1."""
    y = db.domain.check(y)
    return min(db.count_at_most(y), len(db) - db.count_below(y))


def extend_to_power_of_two(raw_size: int) -> OrderedDomain:
    if raw_size < 1:
        raise DomainError(f"domain size must be positive, got {raw_size}")
    return OrderedDomain((int(raw_size) - 1).bit_length())


def leaf_candidates(node: NodeId, bits: int) -> list[int]:
    """Outer and inner boundary leaves of ``node``'s subtree, deduplicated.

    Order: left-most, right-most, inner-left, inner-right. A leaf yields itself.
    """
    lo, hi = node.interval(bits)
    if node.is_leaf(bits):
        return [lo]
    mid = (lo + hi) // 2
    out = []
    for leaf in (lo, hi, mid, mid + 1):
        if leaf not in out:
            out.append(leaf)
    return out


def parse_database(lines: Iterable[str], domain: OrderedDomain) -> Database:
    """Parse one unsigned decimal integer per line; blank lines are skipped."""
    values = []
    for lineno, raw in enumerate(lines, 1):
        text = raw.strip()
        if not text:
            continue
        if not text.isdigit():
            raise ParseError(f"line {lineno}: expected an unsigned integer, got {text!r}")
        value = int(text)
        if not domain.contains(value):
            raise DomainError(f"line {lineno}: value {value} outside [0, 2**{domain.bit_width})")
        values.append(value)
    return Database.from_values(values, domain)


def format_database(db: Database) -> str:
    return "".join(f"{x}\n" for x in db)


def sorted_array(values: Sequence[int], domain: OrderedDomain) -> np.ndarray:
    """Sort arbitrary values into the database storage dtype (no range check)."""
    arr = np.asarray(values, dtype=domain.dtype)
    return np.sort(arr, kind="stable")
