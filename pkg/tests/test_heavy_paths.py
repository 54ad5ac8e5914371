import hashlib

import numpy as np
import pytest
from hypothesis import given, strategies as st

from interior_point import datagen
from interior_point.domain import Database, NodeId, OrderedDomain, PrivacyBudget, leaf_candidates, trim
from interior_point.errors import (
    DepthError,
    DomainError,
    InsufficientData,
    NoSolution,
    NoStoppingPoint,
    ParamError,
)
from interior_point.heavy_paths import (
    HeavyParams,
    construct_paths,
    f_query,
    heavy_paths,
    heavy_paths_min_size,
    level_up,
    one_random_path,
    run_heavy_paths,
    split_budget,
    stopping_point,
)
from interior_point.mechanisms import RandomSource
from interior_point.oracle import reference_construct_paths
from interior_point.selftest import operating_scale


def db_of(values, bits):
    return Database.from_values(values, OrderedDomain(bits))


def digest(records):
    h = hashlib.sha256()
    for r in records:
        h.update(repr((r.depth, r.domain.bit_width, r.path)).encode())
        h.update(r.database.elements.tobytes())
    return h.hexdigest()


BUDGET = PrivacyBudget(1.0, 1e-6)


class TestParams:
    @given(st.floats(0.1, 64), st.floats(1e-3, 2.0), st.floats(1e-12, 0.1), st.integers(1, 6))
    def test_t_and_threshold(self, lam, eps, delta, ls):
        hp = HeavyParams(lam, eps, delta, ls)
        assert hp.t == 2 * hp.k
        assert hp.threshold == hp.k / 2

    def test_k_formula(self):
        hp = HeavyParams(4.0, 0.5, 2**-20, 2)
        assert hp.k == 8 * 21

    def test_rejects_bad_lambda(self):
        with pytest.raises(ParamError):
            HeavyParams(0.0, 1.0, 0.1, 1)

    def test_split_shrinks_with_n(self):
        dom = OrderedDomain(64)
        a, b = split_budget(BUDGET, dom, 1000), split_budget(BUDGET, dom, 10**6)
        assert b.epsilon < a.epsilon and b.delta < a.delta


class TestConstructPaths:
    def test_constant_database(self):
        n, t = 200, 5
        records = construct_paths(db_of([13] * n, 8), t)
        assert records[0].path.last == NodeId(8, 13)
        assert records[1].database.to_list() == [8] * (n - 3 * t)
        ref = reference_construct_paths([13] * n, 8, t, 16)
        assert ref[1][1] == [8] * (n - 3 * t)

    def test_deterministic(self):
        g = np.random.default_rng(0)
        for _ in range(100):
            values = g.integers(0, 2**16, size=int(g.integers(50, 400))).tolist()
            db = db_of(values, 16)
            t = int(g.integers(1, 6))
            assert digest(construct_paths(db, t)) == digest(construct_paths(db_of(values, 16), t))

    def test_sizes_drop_by_three_t(self):
        g = np.random.default_rng(1)
        db = db_of(g.integers(0, 2**32, size=3000).tolist(), 32)
        records = construct_paths(db, 20)
        sizes = [len(r.database) for r in records]
        assert len(sizes) >= 2
        assert all(b == a - 60 for a, b in zip(sizes, sizes[1:]))

    def test_single_record_when_small(self):
        records = construct_paths(db_of([1, 2, 3], 8), 1)
        assert len(records) == 1 and records[0].path is None

    def test_tie_goes_left(self):
        records = construct_paths(db_of([0] * 5 + [7] * 5, 3), 1, base_case_domain=2, halt_multiple=3)
        assert records[0].path.nodes[1] == NodeId(1, 0)

    def test_rejects_bad_t(self):
        with pytest.raises(ParamError):
            construct_paths(db_of([1], 3), 0)


class TestFQuery:
    def test_constant_depth_one(self):
        assert f_query(db_of([4] * 30, 3), 1, 2) == 30

    def test_distinct_depth_one(self):
        assert f_query(db_of(list(range(40)), 8), 1, 2) == 1

    def test_worked_example_depth_two(self):
        # The worked instance halts at once under the 10t rule, so the
        # records are built with a smaller halting size.
        db = db_of([0] * 5 + [7] * 5, 3)
        records = construct_paths(db, 1, base_case_domain=2, halt_multiple=3)
        assert records[1].database.to_list() == [0, 0, 0, 0, 3, 3, 3]
        assert f_query(db, 2, 1, records=records) == 4

    def test_depth_errors(self):
        db = db_of([1, 2, 3], 8)
        with pytest.raises(DepthError):
            f_query(db, 2, 1)
        with pytest.raises(DepthError):
            f_query(db, 0, 1)


class TestStoppingPoint:
    def test_noiseless_first_heavy_depth(self):
        g = np.random.default_rng(2)
        db = db_of(g.integers(0, 2**32, size=4000).tolist(), 32)
        hp = HeavyParams(1.0, 1.0, 0.01, 4)
        records = construct_paths(db, hp.t)
        expected = next(r.depth for r in records if f_query(db, r.depth, hp.t, records=records) >= hp.threshold)
        assert stopping_point(db, hp, RandomSource(0, noiseless=True)) == expected

    def test_no_heavy_depth(self):
        # f_1 = 1 and construct_paths halts at once, so no query can reach c.
        db = db_of(list(range(50)), 8)
        hp = HeavyParams(1.0, 1.0, 1e-3, 3)
        assert f_query(db, 1, hp.t) < hp.threshold
        with pytest.raises(NoStoppingPoint):
            stopping_point(db, hp, RandomSource(0, noiseless=True))

    def test_constant_stops_at_one(self):
        n, hp = operating_scale(64)
        db = datagen.constant(None, n, OrderedDomain(64))
        records = construct_paths(db, hp.t)
        ones = sum(stopping_point(db, hp, RandomSource(i), records) == 1 for i in range(200))
        assert ones == 200


class TestOneRandomPath:
    def test_constant_database(self):
        dom = OrderedDomain(8)
        n = heavy_paths_min_size(dom, BUDGET)
        step = split_budget(BUDGET, dom, n)
        hp = HeavyParams.for_domain(dom, step.epsilon, step.delta)
        db = datagen.constant(None, n, dom, value=99)
        records = construct_paths(db, hp.t)
        outs = [one_random_path(db, hp, 1, RandomSource(i), records) for i in range(1000)]
        assert max(set(outs), key=outs.count) == 99

    def test_requires_more_than_3t(self):
        hp = HeavyParams(1.0, 1.0, 0.1, 2)
        db = db_of([1] * (3 * hp.t), 8)
        with pytest.raises(InsufficientData):
            one_random_path(db, hp, 1, RandomSource(0))


class TestLevelUp:
    def test_rejects_bad_level(self):
        hp = HeavyParams(1.0, 1.0, 0.1, 2)
        db = db_of([1] * 100, 4)
        with pytest.raises(DomainError):
            level_up(db, hp, 1, 5, RandomSource(0))

    def test_output_is_candidate_leaf(self):
        g = np.random.default_rng(3)
        hp = HeavyParams(1.0, 1.0, 1e-6, 3)
        db = db_of(g.integers(0, 256, size=20000).tolist(), 8)
        answered = 0
        for i in range(0, 9):
            try:
                y = level_up(db, hp, 1, i, RandomSource(i))
            except NoSolution:
                # Deep levels hold too little weight for the Choosing threshold.
                continue
            answered += 1
            assert y in leaf_candidates(NodeId(i, y >> (8 - i)), 8)
        assert answered >= 6

    def test_spanning_node_picks_inner_leaf(self):
        # All mass strictly inside [0, 127]: the outer leaves score 0, the inner ones about n/2.
        g = np.random.default_rng(4)
        hp = HeavyParams(1.0, 1.0, 1e-6, 3)
        db = db_of(g.integers(1, 127, size=20000).tolist(), 8)
        assert trim(db, hp.t).max() <= 127
        outs = {level_up(db, hp, 1, 1, RandomSource(i)) for i in range(100)}
        assert outs <= {63, 64}


class TestHeavyPaths:
    def test_refuses_small(self):
        with pytest.raises(InsufficientData):
            heavy_paths(db_of([1, 2, 3], 64), BUDGET, RandomSource(0))

    def test_constant_returns_constant(self):
        dom = OrderedDomain(8)
        db = datagen.constant(None, heavy_paths_min_size(dom, BUDGET), dom, value=17)
        assert all(heavy_paths(db, BUDGET, RandomSource(i)) == 17 for i in range(5))

    def test_heavy_element_takes_depth_one_branch(self):
        dom = OrderedDomain(64)
        n = heavy_paths_min_size(dom, BUDGET)
        g = np.random.default_rng(5)
        spread = g.integers(0, 2**64 - 1, size=n // 2, dtype=np.uint64, endpoint=True)
        values = np.sort(np.concatenate([spread, np.full(n - n // 2, 2**40, dtype=np.uint64)]))
        db = Database(values, dom)
        step = split_budget(BUDGET, dom, n)
        hp = HeavyParams.for_domain(dom, step.epsilon, step.delta)
        assert stopping_point(db, hp, RandomSource(0, noiseless=True)) == 1
        ok = 0
        for i in range(50):
            y = heavy_paths(db, BUDGET, RandomSource(i))
            ok += db.min() <= y <= db.max()
        assert ok / 50 >= 0.9

    def test_no_stopping_point_propagates(self):
        db = db_of(list(range(50)), 8)
        with pytest.raises(NoStoppingPoint):
            run_heavy_paths(db, HeavyParams(1.0, 1.0, 1e-3, 3), RandomSource(0, noiseless=True))
