import math
from collections import Counter

import numpy as np
import pytest

from interior_point import datagen
from interior_point.domain import ROOT, Database, NodeId, OrderedDomain, Path, PrivacyBudget, log_star, trim
from interior_point.errors import InsufficientData
from interior_point.mechanisms import RandomSource
from interior_point.oracle import reference_falloff
from interior_point.treelog import (
    BASE_SLACK,
    AlgoParams,
    base_case_solve,
    choose_leaf,
    domain_chain,
    falloff_counts,
    falloff_database,
    recursion_depth,
    run_treelog,
    sample_path,
    treelog,
    treelog_min_size,
    trim_parameter,
)


def db_of(values, bits):
    return Database.from_values(values, OrderedDomain(bits))


class TestParameters:
    def test_trim_formula(self):
        assert trim_parameter(1.0, 2**-10) == 40
        assert trim_parameter(0.5, 0.5) == 8

    def test_budget_split(self):
        dom = OrderedDomain(64)
        p = AlgoParams.from_budget(PrivacyBudget(1.0, 1e-6), dom, 1024)
        assert p.per_step_epsilon == pytest.approx(1.0 / (5 * 5 * 10))
        assert p.per_step_delta == pytest.approx(1e-6 / (3 * 1024 * 5 * math.e))

    def test_domain_chain(self):
        assert [d.bit_width for d in domain_chain(OrderedDomain(64))] == [64, 7, 3]
        assert [d.bit_width for d in domain_chain(OrderedDomain(128))] == [128, 8, 4]
        assert recursion_depth(OrderedDomain(4)) == 0

    def test_depth_within_log_star(self):
        for bits in (8, 16, 32, 64, 128):
            assert recursion_depth(OrderedDomain(bits)) <= log_star(2**bits)

    def test_min_size_is_a_fixed_point(self):
        dom, budget = OrderedDomain(64), PrivacyBudget(1.0, 1e-6)
        n = treelog_min_size(dom, budget)
        t = AlgoParams.from_budget(budget, dom, n).trim
        assert (3 * recursion_depth(dom) + BASE_SLACK) * t < n


class TestBaseCase:
    def test_matches_closed_form(self):
        # Only y = 2 scores (q = 3); exp(eps q / 2) with eps = 2 is e^q.
        db = db_of([2, 2, 2], 3)
        expected = math.e**3 / (math.e**3 + 7)
        rng = RandomSource(0)
        hits = sum(base_case_solve(db, 2.0, rng) == 2 for _ in range(20000))
        assert abs(hits / 20000 - expected) < 0.01

    def test_empty_is_uniform(self):
        rng = RandomSource(1)
        counts = Counter(base_case_solve(db_of([], 2), 1.0, rng) for _ in range(8000))
        assert set(counts) == {0, 1, 2, 3}
        assert max(abs(c / 8000 - 0.25) for c in counts.values()) < 0.02

    def test_large_epsilon_mode(self):
        rng = RandomSource(2)
        counts = Counter(base_case_solve(db_of([5] * 10, 4), 20.0, rng) for _ in range(200))
        assert counts.most_common(1)[0][0] == 5


class TestSamplePath:
    def test_constant_goes_to_its_leaf(self):
        db = db_of([5] * 20, 3)
        path = sample_path(db, 0.1, 2, RandomSource(0))
        assert path.last == NodeId(3, 5)

    def test_equal_children_split_evenly(self):
        db = db_of([0] * 5 + [7] * 5, 3)
        rng = RandomSource(3)
        lefts = sum(sample_path(db, 1.0, 1, rng).nodes[1].prefix == 0 for _ in range(10000))
        assert abs(lefts / 10000 - 0.5) < 0.02

    def test_unequal_children(self):
        db = db_of([0] * 10 + [7] * 5, 3)
        expected = math.e / (math.e + math.exp(0.5))
        rng = RandomSource(4)
        heavy = sum(sample_path(db, 0.1, 14, rng).nodes[1].prefix == 0 for _ in range(20000))
        assert abs(heavy / 20000 - expected) < 0.012

    def test_stops_at_light_node(self):
        db = db_of([0] * 10 + [7] * 5, 3)
        path = sample_path(db, 0.1, 14, RandomSource(5))
        assert len(path) == 2


class TestFalloff:
    def test_constant_pads_at_leaf_level(self):
        n, t = 20, 2
        db_hat = trim(db_of([6] * n, 3), t)
        d = falloff_database(db_hat, Path.to_node(NodeId(3, 6)), n, t)
        assert d.to_list() == [3] * (n - 3 * t)
        assert d.domain.bit_width == 2

    def test_worked_example(self):
        db = db_of([0] * 5 + [7] * 5, 3)
        db_hat = trim(db, 1)
        assert db_hat.to_list() == [0, 0, 0, 0, 7, 7, 7, 7]
        d = falloff_database(db_hat, Path.to_node(NodeId(3, 7)), 10, 1)
        assert d.to_list() == [0, 0, 0, 0, 3, 3, 3]
        oracle = reference_falloff(db_hat.to_list(), 3, [(n.level, n.prefix) for n in Path.to_node(NodeId(3, 7))], 7)
        assert sorted(oracle) == d.to_list()

    def test_cap_at_first_level(self):
        # After trimming, the right subtree alone holds n - 3t points.
        db = db_of([0] * 2 + [7] * 40, 3)
        db_hat = trim(db, 1)
        assert falloff_counts(db_hat, Path.to_node(NodeId(3, 0)), 42, 1) == [(0, 39)]

    def test_requires_more_than_3t(self):
        db = db_of([1] * 9, 3)
        with pytest.raises(InsufficientData):
            falloff_database(trim(db, 3), Path((ROOT,)), 9, 3)

    def test_size_is_n_minus_3t(self):
        g = np.random.default_rng(0)
        for _ in range(50):
            n, t = int(g.integers(10, 80)), int(g.integers(1, 3))
            db = db_of(g.integers(0, 64, size=n).tolist(), 6)
            path = sample_path(trim(db, t), 1.0, t, RandomSource(int(g.integers(1000))))
            assert len(falloff_database(trim(db, t), path, n, t)) == n - 3 * t


class TestChooseLeaf:
    def test_output_is_a_boundary_leaf(self):
        db = db_of(list(range(0, 256, 3)) * 200, 8)
        budget = PrivacyBudget(1.0, 1e-6)
        for i in range(20):
            y = choose_leaf(db, trim(db, 5), 4, budget, RandomSource(i))
            lo = (y >> 4) << 4
            assert y in (lo, lo + 15, lo + 7, lo + 8)


class TestTreelog:
    budget = PrivacyBudget(1.0, 1e-6)

    def test_refuses_small_databases(self):
        with pytest.raises(InsufficientData):
            treelog(db_of([1, 2, 3], 64), self.budget, RandomSource(0))

    def test_boundary_three_t(self):
        params = AlgoParams(4, 0.5, 1e-3)
        db = db_of(list(range(12)), 8)
        with pytest.raises(InsufficientData):
            run_treelog(db, params, RandomSource(0))

    def test_constant_database_returns_constant(self):
        dom = OrderedDomain(8)
        n = treelog_min_size(dom, self.budget)
        db = datagen.constant(None, n, dom, value=201)
        for i in range(5):
            assert treelog(db, self.budget, RandomSource(i)) == 201

    def test_uniform_wide_domain(self):
        dom = OrderedDomain(128)
        n = treelog_min_size(dom, self.budget)
        db = datagen.generate("uniform", n, dom, 11)
        y = treelog(db, self.budget, RandomSource(11))
        assert db.min() <= y <= db.max()

    def test_warns_when_delta_is_large(self):
        dom, budget = OrderedDomain(2), PrivacyBudget(0.05, 0.5)
        n = treelog_min_size(dom, budget)
        db = datagen.constant(None, n, dom, value=1)
        with pytest.warns(UserWarning):
            treelog(db, budget, RandomSource(0))

    def test_noiseless_run_is_reproducible(self):
        dom = OrderedDomain(16)
        n = treelog_min_size(dom, self.budget)
        db = datagen.generate("uniform", n, dom, 3)
        ys = {treelog(db, self.budget, RandomSource(i, noiseless=True)) for i in range(3)}
        assert len(ys) == 1 and db.min() <= ys.pop() <= db.max()
