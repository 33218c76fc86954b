"""Input validation helpers shared by the store, retrieval and estimators."""
from __future__ import annotations

import numpy as np

from .exceptions import DegenerateInputError, DimensionError, NormError

UNIT_TOL = 1e-6


def check_vector(v, dim: int, *, name: str = "vector", unit: bool = True) -> np.ndarray:
    """Return ``v`` as a 1-d float64 array of length ``dim``.

    With ``unit=True`` the L2 norm must be within ``UNIT_TOL`` of 1.
    """
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if arr.shape[0] != dim:
        raise DimensionError(f"{name} has dimension {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise NormError(f"{name} contains non-finite values")
    if unit:
        norm = float(np.linalg.norm(arr))
        if abs(norm - 1.0) > UNIT_TOL:
            raise NormError(f"{name} is not unit-norm (|v| = {norm:.9f})")
    return arr


def check_unit_rows(X, dim: int, *, name: str = "vectors") -> np.ndarray:
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if arr.shape[1] != dim:
        raise DimensionError(f"{name} have dimension {arr.shape[1]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise NormError(f"{name} contain non-finite values")
    norms = np.linalg.norm(arr, axis=1)
    bad = np.flatnonzero(np.abs(norms - 1.0) > UNIT_TOL)
    if bad.size:
        raise NormError(f"{name}[{bad[0]}] is not unit-norm (|v| = {norms[bad[0]]:.9f})")
    return arr


def normalize_rows(X) -> np.ndarray:
    arr = np.asarray(X, dtype=np.float64)
    norms = np.linalg.norm(arr, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise DegenerateInputError("cannot normalize a zero vector")
    return arr / norms


def as_float32_exact(X) -> np.ndarray:
    """Round to float32 precision but keep float64 storage.

    Stored vectors are float32-representable so snapshots round-trip
    bit-exactly while similarity math still runs in float64.
    """
    return np.asarray(X, dtype=np.float32).astype(np.float64)
