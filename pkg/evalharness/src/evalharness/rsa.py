"""Representational similarity analysis."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import ParameterError


@dataclass
class RsaResult:
    score: float
    excluded_rows: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"score": self.score, "excluded_rows": self.excluded_rows}


def _dissimilarity(m: np.ndarray) -> np.ndarray:
    """1 - Pearson correlation between stimulus row vectors."""
    return 1.0 - np.corrcoef(m)


def rsa(features, responses) -> RsaResult:
    """Spearman correlation of the two dissimilarity matrices' upper triangles.

    Constant rows make their correlation distances undefined; those stimuli
    are excluded from both matrices and reported.
    """
    X = np.asarray(features, dtype=np.float64)
    Y = np.asarray(responses, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2:
        raise ParameterError("inputs must be 2-D (stimuli x dimensions)")
    if len(X) != len(Y):
        raise ParameterError("row counts must match")

    constant = (X.std(axis=1) == 0.0) | (Y.std(axis=1) == 0.0)
    excluded = np.nonzero(constant)[0].tolist()
    keep = ~constant
    if keep.sum() < 3:
        raise ParameterError("need at least 3 non-constant stimuli")
    Xk, Yk = X[keep], Y[keep]

    iu = np.triu_indices(len(Xk), k=1)
    d1 = _dissimilarity(Xk)[iu]
    d2 = _dissimilarity(Yk)[iu]
    # Spearman = Pearson on ranks (average ties); identical rankings are
    # exactly 1 by definition, short-circuited to avoid float residue.
    r1, r2 = rankdata(d1), rankdata(d2)
    if np.array_equal(r1, r2):
        return RsaResult(1.0, excluded)
    return RsaResult(float(np.corrcoef(r1, r2)[0, 1]), excluded)
