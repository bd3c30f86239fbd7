"""Cross-validated PLS neural predictivity."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.cross_decomposition import PLSRegression

from .errors import ParameterError

DEFAULT_COMPONENTS = 25
DEFAULT_FOLDS = 10


def _check_matrix(name: str, m) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ParameterError(f"{name} must be 2-D (stimuli x dimensions)")
    if not np.all(np.isfinite(m)):
        raise ParameterError(f"{name} has non-finite entries")
    return m


def canonical_folds(features: np.ndarray, responses: np.ndarray,
                    folds: int, seed: int) -> np.ndarray:
    """Content-addressed fold assignment.

    Rows are placed in a canonical order (lexicographic over their bytes),
    that order is permuted by the seed, and folds are contiguous blocks of
    it. The partition is therefore deterministic in the seed and invariant
    to any shuffling of the input rows.
    """
    n = len(features)
    keys = [features[i].tobytes() + responses[i].tobytes() for i in range(n)]
    canonical = sorted(range(n), key=keys.__getitem__)
    rng = np.random.default_rng(seed)
    shuffled = [canonical[i] for i in rng.permutation(n)]
    fold_of = np.empty(n, dtype=np.int64)
    sizes = np.full(folds, n // folds)
    sizes[: n % folds] += 1
    start = 0
    for k, size in enumerate(sizes):
        for i in shuffled[start:start + size]:
            fold_of[i] = k
        start += size
    return fold_of


@dataclass
class PredictivityResult:
    per_channel: np.ndarray          # Pearson r per response channel (nan = excluded)
    mean: float
    excluded_channels: list = field(default_factory=list)
    folds: int = DEFAULT_FOLDS
    components: int = DEFAULT_COMPONENTS

    def to_json(self) -> dict:
        return {
            "per_channel": [None if np.isnan(v) else float(v) for v in self.per_channel],
            "mean": self.mean,
            "excluded_channels": self.excluded_channels,
            "folds": self.folds,
            "components": self.components,
        }


def neural_predictivity(features, responses, folds: int = DEFAULT_FOLDS,
                        components: int = DEFAULT_COMPONENTS,
                        seed: int = 0) -> PredictivityResult:
    """Cross-validated linear mapping from features to responses.

    Per fold, a PLS regression (component count capped at the training rank)
    is fit on the training rows and predicts the held-out rows; predictions
    are concatenated and scored per channel as the Pearson correlation with
    the true responses. Zero-variance channels are excluded and reported.
    """
    X = _check_matrix("features", features)
    Y = _check_matrix("responses", responses)
    if len(X) != len(Y):
        raise ParameterError("features and responses need equal row counts")
    if folds < 2:
        raise ParameterError("folds must be >= 2")
    if len(X) < folds:
        raise ParameterError("need at least one stimulus per fold")

    fold_of = canonical_folds(X, Y, folds, seed)
    preds = np.zeros_like(Y)
    for k in range(folds):
        test = fold_of == k
        train = ~test
        if not test.any():
            continue
        cap = min(components, int(train.sum()) - 1, X.shape[1])
        if cap < 1:
            raise ParameterError("training folds too small for any PLS component")
        model = PLSRegression(n_components=cap, scale=True)
        model.fit(X[train], Y[train])
        preds[test] = model.predict(X[test])

    per_channel = np.full(Y.shape[1], np.nan)
    excluded = []
    for c in range(Y.shape[1]):
        if Y[:, c].std() == 0.0 or preds[:, c].std() == 0.0:
            excluded.append(c)
            continue
        per_channel[c] = np.corrcoef(preds[:, c], Y[:, c])[0, 1]
    kept = per_channel[~np.isnan(per_channel)]
    mean = float(kept.mean()) if len(kept) else float("nan")
    return PredictivityResult(per_channel, mean, excluded, folds, components)


def synthetic_responses(features, channels: int, noise_sigma: float,
                        seed: int):
    """Planted-linear-map responses for validating the pipeline.

    Returns (responses, record): responses = features @ W + noise with W and
    the noise drawn from the recorded seed.
    """
    X = _check_matrix("features", features)
    rng = np.random.default_rng(seed)
    w = rng.standard_normal((X.shape[1], channels)) / np.sqrt(X.shape[1])
    responses = X @ w + noise_sigma * rng.standard_normal((len(X), channels))
    record = {"generator": "linear-readout", "channels": channels,
              "noise_sigma": noise_sigma, "seed": seed}
    return responses, record
