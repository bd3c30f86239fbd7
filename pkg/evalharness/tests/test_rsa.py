import numpy as np
import pytest

from evalharness.errors import ParameterError
from evalharness.rsa import rsa

from conftest import mean_preserving_rotation


def test_self_similarity_is_exactly_one():
    X = np.random.default_rng(0).standard_normal((40, 25))
    assert rsa(X, X).score == 1.0


def test_orthogonal_map_invariance():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((50, 30))
    Q = mean_preserving_rotation(30, seed=2)
    assert abs(rsa(X, X @ Q).score - 1.0) <= 1e-6


def test_feature_permutation_is_not_invariant():
    # Independently permuting each row's feature dimension destroys the
    # pairwise geometry, unlike a shared rotation.
    rng = np.random.default_rng(3)
    X = rng.standard_normal((40, 30))
    Y = np.stack([row[rng.permutation(30)] for row in X])
    assert rsa(X, Y).score < 0.9


def test_noise_scores_near_zero_over_seeds():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((60, 40))
    scores = []
    for seed in range(20):
        noise = np.random.default_rng(100 + seed).standard_normal((60, 35))
        scores.append(rsa(X, noise).score)
    assert abs(np.mean(scores)) < 0.15
    assert all(abs(s) < 0.4 for s in scores)


def test_constant_rows_excluded_with_report():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((10, 8))
    Y = X.copy()
    X[3] = 1.0                      # constant stimulus row
    result = rsa(X, Y)
    assert result.excluded_rows == [3]
    assert np.isfinite(result.score)


def test_validation():
    X = np.random.default_rng(0).standard_normal((10, 5))
    with pytest.raises(ParameterError):
        rsa(X, X[:-1])
    with pytest.raises(ParameterError):
        rsa(X[:2], X[:2])
    with pytest.raises(ParameterError):
        rsa(X.ravel(), X.ravel())
