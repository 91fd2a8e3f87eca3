"""Data types, class means, and class proportions."""

import numpy as np
import pytest

from otconf import ValidationError, class_means, class_proportions
from otconf.data import ClassProportions, DiscreteMeasure, FeatureTable


def test_feature_table_basic():
    table = FeatureTable(features=[[1.0, 2.0], [3.0, 4.0]])
    assert table.n == 2 and table.d == 2
    assert table.labels is None


def test_feature_table_rejects_non_finite():
    with pytest.raises(ValidationError, match="non-finite"):
        FeatureTable(features=[[1.0, np.nan]])


def test_feature_table_rejects_negative_labels():
    with pytest.raises(ValidationError, match="negative"):
        FeatureTable(features=[[1.0], [2.0]], labels=[0, -1])


def test_feature_table_is_immutable():
    table = FeatureTable(features=[[1.0, 2.0]])
    with pytest.raises(ValueError):
        table.features[0, 0] = 9.0


def test_discrete_measure_weight_sum_checked():
    DiscreteMeasure(points=[[0.0], [1.0]], weights=[0.5, 0.5])
    with pytest.raises(ValidationError, match="sum to 1"):
        DiscreteMeasure(points=[[0.0], [1.0]], weights=[0.5, 0.6])
    with pytest.raises(ValidationError, match="negative"):
        DiscreteMeasure(points=[[0.0], [1.0]], weights=[-0.1, 1.1])


def test_discrete_measure_renormalizes_small_drift():
    drift = 1e-10
    measure = DiscreteMeasure(points=[[0.0], [1.0]], weights=[0.5 + drift, 0.5])
    assert abs(measure.weights.sum() - 1.0) <= 1e-12


def test_class_means_pair():
    table = FeatureTable(features=[[0.0, 0.0], [2.0, 0.0]], labels=[0, 0])
    measure = class_means(table)
    assert measure.m == 1
    np.testing.assert_allclose(measure.points, [[1.0, 0.0]])
    np.testing.assert_allclose(measure.weights, [1.0])


def test_class_means_two_classes():
    table = FeatureTable(features=[[0.0, 0.0], [2.0, 0.0], [5.0, 5.0]], labels=[0, 0, 1])
    measure = class_means(table)
    np.testing.assert_allclose(measure.points, [[1.0, 0.0], [5.0, 5.0]])
    np.testing.assert_allclose(measure.weights, [2 / 3, 1 / 3])


def test_class_means_matches_accumulation_oracle(rng):
    # Independent per-class accumulation over a random 4-class table.
    features = rng.normal(size=(50, 3))
    labels = rng.integers(0, 4, size=50)
    labels[:4] = [0, 1, 2, 3]
    table = FeatureTable(features=features, labels=labels)
    measure = class_means(table)
    for c in range(4):
        total = np.zeros(3)
        count = 0
        for i in range(50):
            if labels[i] == c:
                total += features[i]
                count += 1
        np.testing.assert_allclose(measure.points[c], total / count, atol=1e-12)
        assert measure.weights[c] == count / 50


def test_class_means_requires_every_class():
    table = FeatureTable(features=[[0.0], [1.0]], labels=[0, 2])
    with pytest.raises(ValidationError, match="class 1"):
        class_means(table)


def test_class_means_requires_labels():
    with pytest.raises(ValidationError, match="label"):
        class_means(FeatureTable(features=[[0.0]]))


@pytest.mark.parametrize("labels,k,expected", [
    ([0, 0, 1, 1], 2, [0.5, 0.5]),
    ([0, 0, 0, 1], 2, [0.75, 0.25]),
    ([0, 1, 2, 2, 2], 4, [0.2, 0.2, 0.6, 0.0]),
])
def test_class_proportions_examples(labels, k, expected):
    np.testing.assert_allclose(class_proportions(labels, k).proportions, expected)


def test_class_proportions_rejects_out_of_range():
    with pytest.raises(ValidationError, match=r"labels\[2\]"):
        class_proportions([0, 1, 5], 2)


def test_class_proportions_sum_and_relabeling(rng):
    for _ in range(20):
        k = int(rng.integers(2, 8))
        labels = rng.integers(0, k, size=int(rng.integers(1, 60)))
        props = class_proportions(labels, k).proportions
        assert abs(props.sum() - 1.0) <= 1e-12
        # permutation equivariance under relabeling
        perm = rng.permutation(k)
        permuted = class_proportions(perm[labels], k).proportions
        np.testing.assert_allclose(permuted[perm], props)


def test_class_proportions_needs_two_classes():
    with pytest.raises(ValidationError):
        class_proportions([0, 0], 1)
    with pytest.raises(ValidationError):
        ClassProportions(proportions=[1.0])
