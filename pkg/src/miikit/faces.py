"""Toy face rasters with landmarks, for exercising the morph attack end to end.

Each identity is a set of 68 landmark positions plus colored Gaussian blobs
rendered at those positions over a smooth background. Captures of one
identity jitter the landmarks, lighting and pixel noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .morph import N_FACIAL

_FACES = 31


def _template(size: int) -> np.ndarray:
    """68 points: a 17-point jaw arc and 51 interior points on a loose grid."""
    c = (size - 1) / 2.0
    t = np.linspace(np.pi * 0.05, np.pi * 0.95, 17)
    jaw = np.stack([c - 0.36 * size * np.cos(t), c - 0.05 * size + 0.36 * size * np.sin(t)], axis=1)
    gx, gy = np.meshgrid(np.linspace(0.28, 0.72, 9), np.linspace(0.25, 0.72, 6))
    inner = np.stack([gx.ravel(), gy.ravel()], axis=1)[:51] * (size - 1)
    return np.concatenate([jaw, inner])


@dataclass(frozen=True)
class FaceCapture:
    image: np.ndarray  # (size, size, 3) in [0, 1]
    landmarks: np.ndarray  # (68, 2)


def _render(size, lms, colors, widths, light, rng) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    img = np.empty((size, size, 3))
    img[:] = 0.25 + 0.2 * (yy / size)[..., None]
    for (x, y), col, s in zip(lms, colors, widths):
        g = np.exp(-((xx - x) ** 2 + (yy - y) ** 2) / (2 * s * s))
        img += g[..., None] * (col - 0.25)
    img = img * light + rng.normal(0.0, 0.01, img.shape)
    return np.clip(img, 0.0, 1.0)


def synth_identity_captures(label: int, n_captures: int, size: int = 64,
                            seed=0) -> list[FaceCapture]:
    rng = np.random.default_rng([seed, _FACES, label])
    base = _template(size) + rng.normal(0.0, 0.03 * size, (N_FACIAL, 2))
    colors = rng.uniform(0.1, 0.9, (N_FACIAL, 3))
    widths = rng.uniform(0.02, 0.05, N_FACIAL) * size
    out = []
    for k in range(n_captures):
        crng = np.random.default_rng([seed, _FACES, label, k])
        lms = np.clip(base + crng.normal(0.0, 0.01 * size, base.shape), 1.0, size - 2.0)
        img = _render(size, lms, colors, widths, crng.uniform(0.9, 1.1), crng)
        out.append(FaceCapture(img, lms))
    return out
