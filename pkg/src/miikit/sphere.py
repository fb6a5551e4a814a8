"""Geometry on the unit hypersphere S^{d-1}.

Embeddings are plain numpy arrays: a single embedding is a 1-D float64 array
of length d with unit Euclidean norm, a batch is a 2-D array with one
embedding per row. All angles are radians.
"""

from __future__ import annotations

import numpy as np

from .errors import AntipodalError, ContractError

NORM_TOL = 1e-9
ANTIPODAL_TOL = 1e-6


def as_embedding(x, tol: float = NORM_TOL) -> np.ndarray:
    """Validate ``x`` as a unit-norm vector (or batch of them) and return float64."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2):
        raise ContractError(f"embedding must be 1-D or 2-D, got shape {x.shape}")
    if x.shape[-1] < 2:
        raise ContractError(f"embedding dimension must be >= 2, got {x.shape[-1]}")
    norms = np.linalg.norm(x, axis=-1)
    if np.any(np.abs(norms - 1.0) > tol):
        worst = float(np.max(np.abs(norms - 1.0)))
        raise ContractError(f"embedding is not unit-norm (max deviation {worst:.3g})")
    return x


def normalize(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def _check_dims(*xs: np.ndarray) -> None:
    d = xs[0].shape[-1]
    for x in xs[1:]:
        if x.shape[-1] != d:
            raise ContractError(f"dimension mismatch: {d} vs {x.shape[-1]}")


def angle_from_dot(dot) -> np.ndarray | float:
    """arccos with the argument clamped to [-1, 1]."""
    return np.arccos(np.clip(dot, -1.0, 1.0))


def angular_distance(p, q) -> float:
    p = as_embedding(p)
    q = as_embedding(q)
    _check_dims(p, q)
    return float(angle_from_dot(np.dot(p, q)))


def angular_distances(P, Q) -> np.ndarray:
    """Row-wise angular distances between two equally shaped batches."""
    P = as_embedding(P)
    Q = as_embedding(Q)
    _check_dims(P, Q)
    if P.shape != Q.shape:
        raise ContractError(f"batch shape mismatch: {P.shape} vs {Q.shape}")
    return angle_from_dot(np.einsum("...i,...i->...", P, Q))


def mii_distance(a, b, c) -> float:
    """Max of the angles from ``c`` to ``a`` and to ``b``."""
    a, b, c = as_embedding(a), as_embedding(b), as_embedding(c)
    _check_dims(a, b, c)
    return max(float(angle_from_dot(np.dot(a, c))), float(angle_from_dot(np.dot(b, c))))


def mii_distances(A, B, C) -> np.ndarray:
    return np.maximum(angular_distances(A, C), angular_distances(B, C))


def spherical_midpoint(p, q) -> np.ndarray:
    """(p + q) / ||p + q||, for a single pair or row-wise for batches.

    Raises AntipodalError if any pair lies within ANTIPODAL_TOL of pi.
    """
    p = as_embedding(p)
    q = as_embedding(q)
    _check_dims(p, q)
    if p.shape != q.shape:
        raise ContractError(f"shape mismatch: {p.shape} vs {q.shape}")
    theta = angle_from_dot(np.einsum("...i,...i->...", p, q))
    if np.any(theta >= np.pi - ANTIPODAL_TOL):
        raise AntipodalError("midpoint undefined for (near-)antipodal points")
    return normalize(p + q)


def sample_uniform_sphere(d: int, n: int, seed) -> np.ndarray:
    """``n`` points uniform on S^{d-1}: normalized standard normal draws, shape (n, d)."""
    if d < 2:
        raise ContractError(f"d must be >= 2, got {d}")
    if n < 1:
        raise ContractError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    return normalize(rng.standard_normal((n, d)))


def to_degrees(rad):
    return np.degrees(rad)
