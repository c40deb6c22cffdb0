import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from kddselect.dataset import CONTINUOUS, DISCRETE, Category
from kddselect.entropy import (
    EQUAL_FREQUENCY, EQUAL_WIDTH, DiscretizationSpec, GainTable, build_gain_table,
    class_entropy, contingency, discretize, expected_info, information_gain, per_class_gain,
    rank_features, read_gain_csv, write_gain_csv,
)

# Entropy of the 10% training label counts; computed once with mpmath at 40 digits.
TRAIN_10PCT_ENTROPY = 0.8064941378450265


def small_instance(rng, max_bins=6, max_classes=5, max_rows=50):
    n = int(rng.integers(1, max_rows + 1))
    bins = rng.integers(0, rng.integers(1, max_bins + 1), n)
    labels = rng.integers(0, rng.integers(1, max_classes + 1), n)
    return bins, labels


instances = st.integers(1, 50).flatmap(lambda n: st.tuples(
    st.lists(st.integers(0, 5), min_size=n, max_size=n),
    st.lists(st.integers(0, 4), min_size=n, max_size=n)))


class TestClassEntropy:
    def test_pure(self):
        assert class_entropy([Category.DOS] * 7) == 0.0

    def test_fair_coin_is_one_bit(self):
        assert class_entropy([0, 1] * 5) == 1.0

    def test_ten_percent_training_counts(self):
        counts = [97277, 4107, 391458, 1126, 52]
        labels = np.repeat(np.arange(5), counts)
        assert class_entropy(labels) == pytest.approx(oracles.entropy(counts), abs=1e-12)
        assert class_entropy(labels) == pytest.approx(TRAIN_10PCT_ENTROPY, abs=1e-12)

    def test_empty(self):
        with pytest.raises(ValueError):
            class_entropy([])


class TestDiscretize:
    def test_constant_column_one_bin(self):
        for method in (EQUAL_FREQUENCY, EQUAL_WIDTH):
            assert set(discretize([3.0] * 9, CONTINUOUS, DiscretizationSpec(method))) == {0}

    def test_equal_width_ends(self):
        b = discretize(np.arange(1, 101), CONTINUOUS, DiscretizationSpec(EQUAL_WIDTH, 10))
        assert b[0] == 0 and b[-1] == 9
        assert np.bincount(b).tolist() == [10] * 10

    def test_equal_frequency_median_cut(self):
        values = [1, 1, 1, 1, 2, 2, 3, 9]
        b = discretize(values, CONTINUOUS, DiscretizationSpec(EQUAL_FREQUENCY, 2))
        assert b.tolist() == [0, 0, 0, 0, 1, 1, 1, 1]
        assert b.tolist() == oracles.equal_frequency_bins(values, 2)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.integers(-5, 5) | st.floats(-1e3, 1e3), min_size=1, max_size=60),
           st.integers(2, 12))
    def test_equal_frequency_matches_rank_oracle(self, values, bins):
        got = discretize(values, CONTINUOUS, DiscretizationSpec(EQUAL_FREQUENCY, bins))
        assert got.tolist() == oracles.equal_frequency_bins(values, bins)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=60), st.integers(2, 12),
           st.sampled_from([EQUAL_FREQUENCY, EQUAL_WIDTH]))
    def test_bins_are_monotone_and_bounded(self, values, bins, method):
        got = discretize(values, CONTINUOUS, DiscretizationSpec(method, bins))
        order = np.argsort(values, kind="stable")
        assert np.all(np.diff(got[order]) >= 0)
        assert got.min() >= 0 and got.max() < bins

    def test_discrete_uses_codes(self):
        assert discretize([4, 0, 2], DISCRETE).tolist() == [4, 0, 2]

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            DiscretizationSpec(bins=1)
        with pytest.raises(ValueError):
            DiscretizationSpec("mdl")


class TestGain:
    def test_expected_info_hand_value(self):
        labels = [Category.DOS, Category.DOS, Category.NORMAL, Category.DOS]
        assert expected_info([0, 0, 1, 1], labels) == 0.5

    def test_single_bin(self):
        labels = [0, 1, 1, 2, 2, 2]
        assert expected_info([7] * 6, labels) == class_entropy(labels)
        assert information_gain([7] * 6, labels) == 0.0

    def test_perfect_predictor(self):
        labels = [0, 1, 1, 2, 2, 2, 3]
        assert expected_info(labels, labels) == 0.0
        assert information_gain(labels, labels) == pytest.approx(class_entropy(labels), abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            information_gain([0, 1], [0])

    def test_contingency(self):
        t = contingency([0, 0, 1], ["a", "b", "b"])
        assert t.tolist() == [[1, 1], [0, 1]]

    def test_random_instances_match_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(300):
            bins, labels = small_instance(rng)
            assert information_gain(bins, labels) == pytest.approx(oracles.gain(bins, labels), abs=1e-12)

    def test_per_class_target_absent(self):
        assert per_class_gain([0, 1, 2], [0, 0, 1], target=4) == 0.0

    def test_per_class_indicator_bins(self):
        labels = np.array([0, 1, 2, 1, 1, 3])
        ind = (labels == 1).astype(int)
        assert per_class_gain(ind, labels, 1) == pytest.approx(class_entropy(ind), abs=1e-12)

    def test_per_class_random_matches_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            bins, labels = small_instance(rng)
            target = int(rng.integers(0, 5))
            expected = oracles.gain(bins.tolist(), [int(y == target) for y in labels])
            assert per_class_gain(bins, labels, target) == pytest.approx(expected, abs=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(instances)
    def test_bounds(self, inst):
        bins, labels = inst
        g = information_gain(bins, labels)
        assert 0.0 <= g <= class_entropy(labels) + 1e-9

    @settings(max_examples=100, deadline=None)
    @given(instances, st.randoms(use_true_random=False))
    def test_row_permutation_invariance(self, inst, rnd):
        bins, labels = inst
        idx = list(range(len(bins)))
        rnd.shuffle(idx)
        shuffled = information_gain([bins[i] for i in idx], [labels[i] for i in idx])
        assert shuffled == pytest.approx(information_gain(bins, labels), abs=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(instances, st.permutations(range(5)))
    def test_label_renaming_invariance(self, inst, perm):
        bins, labels = inst
        renamed = [perm[y] for y in labels]
        assert information_gain(bins, renamed) == pytest.approx(information_gain(bins, labels), abs=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(instances, st.integers(0, 5), st.integers(0, 5))
    def test_merging_bins_never_increases_gain(self, inst, a, b):
        bins, labels = inst
        merged = [a if x == b else x for x in bins]
        assert oracles.gain(merged, labels) <= oracles.gain(bins, labels) + 1e-12
        assert information_gain(merged, labels) <= information_gain(bins, labels) + 1e-12


class TestGainTable:
    def test_label_copy_first_constant_last(self, dataset_factory):
        rng = np.random.default_rng(0)
        labels = rng.integers(0, 5, 200)
        values = np.column_stack([rng.normal(size=200), labels, np.ones(200)])
        g = build_gain_table(dataset_factory(values, labels, kinds=[CONTINUOUS, DISCRETE, CONTINUOUS]))
        assert g.ranking[0] == 2 and g.ranking[-1] == 3
        assert g.gain_of(3) == 0.0
        assert g.gain_of(2) == pytest.approx(g.class_entropy, abs=1e-12)

    def test_ties_by_index(self, dataset_factory):
        labels = [0, 1, 0, 1]
        values = np.column_stack([[0, 0, 0, 0], labels, [5, 5, 5, 5], labels])
        g = build_gain_table(dataset_factory(values, labels, kinds=[DISCRETE] * 4))
        assert g.ranking == [2, 4, 1, 3]
        assert rank_features({3: 0.5, 1: 0.5, 2: 0.9}) == [2, 1, 3]

    def test_random_dataset_matches_oracle_ranking(self, dataset_factory):
        rng = np.random.default_rng(8)
        labels = rng.integers(0, 4, 150)
        values = rng.normal(size=(150, 8)) + labels[:, None] * rng.uniform(0, 1, 8)
        spec = DiscretizationSpec(EQUAL_FREQUENCY, 6)
        g = build_gain_table(dataset_factory(values, labels), spec)
        expected = {j + 1: oracles.gain(oracles.equal_frequency_bins(values[:, j].tolist(), 6),
                                        labels.tolist()) for j in range(8)}
        for f in g.features:
            assert f.gain == pytest.approx(expected[f.index], abs=1e-12)
        assert g.ranking == sorted(expected, key=lambda i: (-expected[i], i))

    def test_threads_are_bit_identical(self, dataset_factory):
        rng = np.random.default_rng(2)
        labels = rng.integers(0, 5, 300)
        ds = dataset_factory(rng.normal(size=(300, 12)) + labels[:, None] * 0.3, labels)
        a, b = build_gain_table(ds), build_gain_table(ds, threads=4)
        assert a.to_dict() == b.to_dict()

    def test_per_class_gains_reported(self, dataset_factory):
        labels = np.array([0, 1, 2, 3, 4] * 10)
        ds = dataset_factory(np.column_stack([labels == 4, labels]).astype(float), labels)
        g = build_gain_table(ds, DiscretizationSpec(EQUAL_WIDTH, 2))
        f1 = g.features[0]
        assert f1.per_class_gain[Category.U2R] == pytest.approx(class_entropy(labels == 4), abs=1e-12)
        assert f1.per_class_gain[Category.NORMAL] < f1.per_class_gain[Category.U2R]

    def test_too_small(self, dataset_factory):
        with pytest.raises(ValueError):
            build_gain_table(dataset_factory([[1.0]], [0]))

    def test_csv_round_trip(self, dataset_factory):
        rng = np.random.default_rng(4)
        labels = rng.integers(0, 5, 100)
        ds = dataset_factory(rng.normal(size=(100, 5)) + labels[:, None], labels)
        g = build_gain_table(ds)
        buf = io.StringIO()
        write_gain_csv(g, buf)
        back = read_gain_csv(io.StringIO(buf.getvalue()), g.class_entropy)
        assert back.to_dict() == g.to_dict()

    def test_dict_round_trip(self, dataset_factory):
        labels = np.arange(20) % 3
        g = build_gain_table(dataset_factory(np.column_stack([labels, labels * 0]), labels))
        assert GainTable.from_dict(g.to_dict()).to_dict() == g.to_dict()
