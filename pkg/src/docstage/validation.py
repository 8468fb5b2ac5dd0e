"""Input validation helpers shared by the estimators."""
from __future__ import annotations

import numpy as np

__all__ = ["as_float_matrix", "as_label_vector", "check_same_length"]


def as_float_matrix(X) -> np.ndarray:
    """Coerce to a 2-D float64 array with finite values."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={X.ndim}")
    if not np.isfinite(X).all():
        raise ValueError("feature matrix contains NaN or infinity")
    return X


def as_label_vector(y) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError(f"expected a 1-D label vector, got ndim={y.ndim}")
    return y.astype(np.int64)


def check_same_length(*arrays) -> None:
    lengths = {len(a) for a in arrays}
    if len(lengths) > 1:
        raise ValueError(f"inconsistent lengths: {sorted(lengths)}")
