import numpy as np
import pytest
from hypothesis import given, strategies as st

from interior_point.domain import OrderedDomain, PrivacyBudget
from interior_point.errors import DomainError, InsufficientData, ParamError, ParseError
from interior_point.learner import (
    LabeledDatabase,
    ThresholdHypothesis,
    empirical_error,
    learn_threshold,
    learner_min_size,
    parse_labeled,
)
from interior_point.mechanisms import RandomSource

BUDGET = PrivacyBudget(1.0, 1e-6)
DOM64 = OrderedDomain(64)


def labeled_uniform(n, u, seed, domain=DOM64):
    g = np.random.default_rng(seed)
    xs = g.integers(0, domain.size - 1, size=n, dtype=np.uint64, endpoint=True)
    return LabeledDatabase(xs, (xs <= np.uint64(u)).astype(np.int8), domain)


class TestHypothesis:
    def test_threshold_semantics(self):
        h = ThresholdHypothesis.at(10)
        assert [h.predict(x) for x in (0, 10, 11)] == [1, 1, 0]

    def test_constants(self):
        assert ThresholdHypothesis("all_ones").predict(2**63) == 1
        assert ThresholdHypothesis("all_zeros").predict(0) == 0

    def test_invalid(self):
        with pytest.raises(ParamError):
            ThresholdHypothesis("threshold")
        with pytest.raises(ParamError):
            ThresholdHypothesis("all_ones", 5)
        with pytest.raises(ParamError):
            ThresholdHypothesis("staircase")


class TestEmpiricalError:
    def test_consistent_data(self):
        data = LabeledDatabase([1, 5, 9, 12], [1, 1, 0, 0], OrderedDomain(4))
        assert empirical_error(ThresholdHypothesis.at(7), data) == 0.0

    def test_all_ones_on_half_zeros(self):
        data = LabeledDatabase([1, 2, 3, 4], [1, 0, 1, 0], OrderedDomain(4))
        assert empirical_error(ThresholdHypothesis("all_ones"), data) == 0.5

    def test_empty(self):
        assert empirical_error(ThresholdHypothesis.at(3), LabeledDatabase([], [], OrderedDomain(4))) == 0.0

    @given(st.lists(st.tuples(st.integers(0, 2**70 - 1), st.integers(0, 1)), max_size=40),
           st.integers(0, 2**70 - 1))
    def test_matches_linear_scan(self, pairs, u):
        dom = OrderedDomain(70)
        data = LabeledDatabase.from_pairs(pairs, dom)
        expected = sum((1 if x <= u else 0) != y for x, y in pairs) / len(pairs) if pairs else 0.0
        assert empirical_error(ThresholdHypothesis.at(u), data) == pytest.approx(expected)


class TestLabeledDatabase:
    def test_rejects_bad_labels(self):
        with pytest.raises(DomainError):
            LabeledDatabase([1, 2], [0, 2], OrderedDomain(4))

    def test_rejects_out_of_domain(self):
        with pytest.raises(DomainError):
            LabeledDatabase([1, 16], [0, 1], OrderedDomain(4))

    def test_extremes(self):
        data = LabeledDatabase([5, 1, 9, 3, 7, 2], [1, 1, 0, 1, 0, 0], OrderedDomain(4))
        assert sorted(data.extreme(1, 2, largest=True).tolist()) == [3, 5]
        assert sorted(data.extreme(0, 2, largest=False).tolist()) == [2, 7]


class TestParse:
    def test_format(self):
        data = parse_labeled(["3,1", "", " 9 , 0"], OrderedDomain(4))
        assert data.pairs() == [(3, 1), (9, 0)]

    @pytest.mark.parametrize("line", ["3", "3,2", "x,1", "3,1,0", "-1,0"])
    def test_rejects(self, line):
        with pytest.raises(ParseError):
            parse_labeled([line], OrderedDomain(4))

    def test_out_of_domain(self):
        with pytest.raises(DomainError):
            parse_labeled(["16,1"], OrderedDomain(4))


class TestLearn:
    def test_tiny_input(self):
        data = LabeledDatabase(list(range(10)), [1] * 5 + [0] * 5, OrderedDomain(8))
        with pytest.raises(InsufficientData):
            learn_threshold(data, BUDGET, RandomSource(0))

    def test_unknown_solver(self):
        with pytest.raises(ParamError):
            learn_threshold(LabeledDatabase([], [], DOM64), BUDGET, RandomSource(0), solver="magic")

    def test_all_ones(self):
        dom = OrderedDomain(8)
        n = learner_min_size("heavy-paths", dom, BUDGET)
        data = LabeledDatabase(np.zeros(n, dtype=np.uint64), np.ones(n, dtype=np.int8), dom)
        assert learn_threshold(data, BUDGET, RandomSource(0)) == ThresholdHypothesis("all_ones")

    def test_all_zeros(self):
        dom = OrderedDomain(8)
        n = learner_min_size("treelog", dom, BUDGET)
        data = LabeledDatabase(np.zeros(n, dtype=np.uint64), np.zeros(n, dtype=np.int8), dom)
        assert learn_threshold(data, BUDGET, RandomSource(0), solver="treelog") == ThresholdHypothesis("all_zeros")

    @pytest.mark.parametrize("solver", ["heavy-paths", "treelog"])
    def test_threshold_lies_between_selected_groups(self, solver):
        n = learner_min_size(solver, DOM64, BUDGET)
        u = 2**63 + 12345
        data = labeled_uniform(n, u, seed=1)
        h = learn_threshold(data, BUDGET, RandomSource(1), solver=solver)
        assert h.kind == "threshold"
        m = n // 10
        low = int(np.sort(data.elements[data.labels == 1])[-m])
        high = int(np.sort(data.elements[data.labels == 0])[m - 1])
        assert low <= h.threshold <= high
        assert empirical_error(h, labeled_uniform(10**4, u, seed=2)) <= 0.1
