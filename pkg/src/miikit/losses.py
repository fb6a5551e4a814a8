"""Representation-space attack: midpoint target, decoder losses, stub decoders.

Discriminator outputs enter as per-image scalars already reduced by the
caller; no network lives here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .errors import ContractError
from .sphere import as_embedding, mii_distances, normalize, spherical_midpoint


@dataclass(frozen=True)
class LossWeights:
    lambda_pix: float = 10.0
    lambda_adv: float = 1.0
    lambda_feat: float = 300.0

    def __post_init__(self):
        if min(self.lambda_pix, self.lambda_adv, self.lambda_feat) < 0:
            raise ContractError("loss weights must be >= 0")


def rs_target(p_ref, q_ref) -> np.ndarray:
    """The decoder's input: the spherical midpoint of the references."""
    return spherical_midpoint(p_ref, q_ref)


def _scores(x, what) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64).ravel()
    if a.size == 0:
        raise ContractError(f"empty {what}")
    return a


def loss_pixel_l1(recon, target) -> float:
    """Mean over the batch of each image's summed absolute deviation."""
    recon = np.asarray(recon, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if recon.shape != target.shape:
        raise ContractError(f"shape mismatch {recon.shape} vs {target.shape}")
    if recon.ndim == 3:
        recon, target = recon[None], target[None]
    if recon.ndim != 4 or recon.shape[0] == 0:
        raise ContractError("expected a nonempty (n, h, w, c) batch")
    per_image = np.abs(recon - target).reshape(recon.shape[0], -1).sum(axis=1)
    return float(per_image.mean())


def loss_discriminator(d_real, d_fake) -> float:
    r, f = _scores(d_real, "d_real"), _scores(d_fake, "d_fake")
    if r.size != f.size:
        raise ContractError("d_real and d_fake differ in length")
    return float(np.mean((r - 1.0) ** 2 + f ** 2))


def loss_adversarial(d_fake) -> float:
    f = _scores(d_fake, "d_fake")
    return float(np.mean((f - 1.0) ** 2))


def loss_feature(recon_emb, target_emb) -> float:
    """Mean squared Euclidean distance between paired embeddings."""
    a = np.atleast_2d(np.asarray(recon_emb, dtype=np.float64))
    b = np.atleast_2d(np.asarray(target_emb, dtype=np.float64))
    if a.shape != b.shape or a.shape[0] == 0:
        raise ContractError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.mean(np.sum((a - b) ** 2, axis=1)))


def loss_total(w: LossWeights, l_pix: float, l_adv: float, l_feat: float) -> float:
    if min(l_pix, l_adv, l_feat) < 0:
        raise ContractError("loss components must be >= 0")
    return w.lambda_pix * l_pix + w.lambda_adv * l_adv + w.lambda_feat * l_feat


# -- decoders ------------------------------------------------------------------------

class DecoderOracle(Protocol):
    """Maps embeddings to images; ``shape`` is fixed per instance."""
    shape: tuple[int, ...]

    def decode(self, embeddings: np.ndarray) -> np.ndarray: ...


@dataclass(eq=False)
class PassThroughOracle:
    """Decodes an embedding to its own latent vector, the 'image' of a synthetic world.

    With the attacker's comparator supplied, the rotation is undone, so
    re-embedding under that comparator (without tangent noise) is exact.
    """
    d: int
    comparator: object = None

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.d,)

    def decode(self, embeddings) -> np.ndarray:
        E = np.atleast_2d(embeddings)
        if self.comparator is None:
            return normalize(E)
        return self.comparator.invert_rotation(E)


@dataclass(eq=False)
class TableOracle:
    """Returns the stored image whose key embedding is nearest (largest dot)."""
    keys: np.ndarray
    images: np.ndarray

    def __post_init__(self):
        self.keys = as_embedding(np.atleast_2d(self.keys))
        self.images = np.asarray(self.images)
        if len(self.images) != len(self.keys):
            raise ContractError("keys and images differ in length")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.images.shape[1:]

    def decode(self, embeddings) -> np.ndarray:
        E = np.atleast_2d(embeddings)
        return self.images[np.argmax(E @ self.keys.T, axis=1)]


@dataclass(frozen=True)
class RSResult:
    targets: np.ndarray
    decoded: np.ndarray
    reembedded: np.ndarray
    ref_mii_dists: np.ndarray
    feature_loss: float


def rs_attack(p_ref, q_ref, oracle: DecoderOracle, embed_fn) -> RSResult:
    """Midpoint, decode, re-embed. ``embed_fn`` maps decoded images to embeddings."""
    P, Q = np.atleast_2d(p_ref), np.atleast_2d(q_ref)
    T = rs_target(P, Q)
    imgs = oracle.decode(T)
    E = normalize(np.atleast_2d(embed_fn(imgs)))
    return RSResult(T, imgs, E, mii_distances(P, Q, E), loss_feature(E, T))
