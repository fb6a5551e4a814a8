"""Synthetic representation spaces.

Identities are von Mises-Fisher clouds around uniformly drawn mean
directions. A comparator maps latent captures onto its own sphere by a fixed
rotation followed by an identity-level tangent displacement: each identity's
mean is pushed by ``noise_scale`` along a comparator-specific random tangent
direction (then renormalized) and all of that identity's captures are carried
along rigidly. Within-identity geometry is therefore shared by every
comparator while the arrangement of different identities differs, which is
what makes matching-pair distances transfer better than non-matching ones.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import asdict, dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import io
from .errors import ContractError
from .sphere import angle_from_dot, as_embedding, normalize, sample_uniform_sphere

# RNG stream tags, combined with user seeds as np.random.default_rng([seed, TAG, ...]).
_MEANS = 1
_CAPTURE = 2
_COMP_ROTATION = 3
_COMP_NOISE = 4
_FREE = 5
_CALIBRATION = 6
_PROJECTION = 7

LOW_VAR = "low-intra-class-var"
HIGH_VAR = "high-intra-class-var"
EXPLICIT = "explicit"

# Regime targets on the median matching-pair distance (radians).
REGIME_TARGETS = {LOW_VAR: 0.93, HIGH_VAR: 1.14}
CALIBRATION_PAIRS = 4000
CALIBRATION_SEED = 0


# -- von Mises-Fisher sampling ------------------------------------------------

def _sample_vmf_cosines(kappa: float, d: int, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Wood's rejection sampler for w = mu . x. Returns (w, 1 - w)."""
    m = d - 1
    b = m / (2.0 * kappa + np.sqrt(4.0 * kappa**2 + m**2))
    one_minus_x0 = 2.0 * b / (1.0 + b)
    x0 = 1.0 - one_minus_x0
    log_c = m * np.log(4.0 * b / (1.0 + b) ** 2)

    out = np.empty(n)
    filled = 0
    while filled < n:
        k = n - filled
        z = rng.beta(m / 2.0, m / 2.0, size=k)
        u = rng.uniform(size=k)
        omw = 2.0 * b * z / (1.0 - (1.0 - b) * z)
        # kappa*(w - x0) + m*log(1 - x0*w) - m*log(1 - x0^2) >= log(u), written stably
        lhs = kappa * (one_minus_x0 - omw) + m * np.log(one_minus_x0 + x0 * omw) - log_c
        acc = omw[lhs >= np.log(u)]
        out[filled:filled + acc.size] = acc
        filled += acc.size
    return 1.0 - out, out


def sample_vmf(mu, kappa: float, n: int, rng) -> np.ndarray:
    """Draw ``n`` samples from vMF(mu, kappa); kappa=inf returns copies of mu."""
    mu = as_embedding(mu)
    if kappa < 0:
        raise ContractError(f"concentration must be >= 0, got {kappa}")
    d = mu.size
    if np.isinf(kappa):
        return np.tile(mu, (n, 1))
    w, omw = _sample_vmf_cosines(float(kappa), d, n, rng)
    v = rng.standard_normal((n, d))
    v -= np.outer(v @ mu, mu)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    sin = np.sqrt(omw * (2.0 - omw))
    return normalize(w[:, None] * mu + sin[:, None] * v)


# -- identities and worlds -----------------------------------------------------

@dataclass(frozen=True, eq=False)
class IdentityModel:
    mean_direction: np.ndarray
    concentration: float
    label: int = 0
    world_seed: int = 0

    def __post_init__(self):
        as_embedding(self.mean_direction)
        if not self.concentration >= 0:
            raise ContractError(f"concentration must be >= 0, got {self.concentration}")


@dataclass(frozen=True)
class WorldConfig:
    d: int = 128
    n_identities: int = 1000
    images_per_identity: int = 2
    concentration_regime: str = LOW_VAR
    kappa: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.d < 2:
            raise ContractError(f"d must be >= 2, got {self.d}")
        if self.n_identities < 2:
            raise ContractError(f"n_identities must be >= 2, got {self.n_identities}")
        if self.images_per_identity < 2:
            raise ContractError(
                f"images_per_identity must be >= 2, got {self.images_per_identity}")
        if self.concentration_regime == EXPLICIT:
            if self.kappa is None or not self.kappa >= 0:
                raise ContractError("explicit regime needs a kappa >= 0")
        elif self.concentration_regime not in REGIME_TARGETS:
            raise ContractError(f"unknown regime {self.concentration_regime!r}")


def draw_capture(identity: IdentityModel, capture_index: int) -> np.ndarray:
    rng = np.random.default_rng([identity.world_seed, _CAPTURE, identity.label, capture_index])
    return sample_vmf(identity.mean_direction, identity.concentration, 1, rng)[0]


def median_matching_distance(kappa: float, d: int, n_pairs: int = CALIBRATION_PAIRS,
                             seed: int = CALIBRATION_SEED) -> float:
    rng = np.random.default_rng([seed, _CALIBRATION])
    mu = np.zeros(d)
    mu[0] = 1.0
    x = sample_vmf(mu, kappa, 2 * n_pairs, rng)
    dots = np.einsum("ij,ij->i", x[:n_pairs], x[n_pairs:])
    return float(np.median(angle_from_dot(dots)))


@lru_cache(maxsize=64)
def calibrate_kappa(d: int, target_median: float, n_pairs: int = CALIBRATION_PAIRS,
                    seed: int = CALIBRATION_SEED, iters: int = 48) -> float:
    """Bisect log-kappa until the sampled median matching distance hits the target."""
    lo, hi = np.log(1e-3), np.log(1e7)
    f_lo = median_matching_distance(np.exp(lo), d, n_pairs, seed)
    f_hi = median_matching_distance(np.exp(hi), d, n_pairs, seed)
    if not f_hi < target_median < f_lo:
        raise ContractError(
            f"target median {target_median} outside reachable range ({f_hi:.4f}, {f_lo:.4f})")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if median_matching_distance(np.exp(mid), d, n_pairs, seed) > target_median:
            lo = mid
        else:
            hi = mid
    return float(np.exp(0.5 * (lo + hi)))


def resolve_kappa(cfg: WorldConfig) -> float:
    if cfg.concentration_regime == EXPLICIT:
        return float(cfg.kappa)
    return calibrate_kappa(cfg.d, REGIME_TARGETS[cfg.concentration_regime])


@dataclass(eq=False)
class World:
    config: WorldConfig
    kappa: float
    identities: list[IdentityModel]
    captures: np.ndarray  # (n_identities, images_per_identity, d)

    @property
    def d(self) -> int:
        return self.captures.shape[2]

    @property
    def means(self) -> np.ndarray:
        return np.stack([i.mean_direction for i in self.identities])

    def flat(self) -> tuple[np.ndarray, np.ndarray]:
        """All captures as (n*m, d) with parallel identity labels."""
        n, m, d = self.captures.shape
        return self.captures.reshape(n * m, d), np.repeat(np.arange(n), m)

    def save(self, directory) -> dict:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        io.write_embeddings(directory / "captures.miie", self.flat()[0])
        io.write_embeddings(directory / "means.miie", self.means)
        meta = {
            "format": "miikit-world",
            "version": 1,
            "config": asdict(self.config),
            "kappa": self.kappa,
            "layout": "identity-major",
            "files": {"captures": "captures.miie", "means": "means.miie"},
            "regime_targets_rad": REGIME_TARGETS,
            "calibration": {"pairs": CALIBRATION_PAIRS, "seed": CALIBRATION_SEED},
        }
        (directory / "world.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
        return meta

    @classmethod
    def load(cls, directory) -> "World":
        directory = Path(directory)
        try:
            meta = json.loads((directory / "world.json").read_text())
        except FileNotFoundError as exc:
            raise FileNotFoundError(f"{directory}: not a world directory") from exc
        cfg = WorldConfig(**meta["config"])
        caps = io.read_embeddings(directory / meta["files"]["captures"])
        means = io.read_embeddings(directory / meta["files"]["means"])
        n, m = cfg.n_identities, cfg.images_per_identity
        if caps.shape != (n * m, cfg.d) or means.shape != (n, cfg.d):
            raise ContractError(f"{directory}: file shapes disagree with world.json")
        ids = [IdentityModel(means[i], meta["kappa"], i, cfg.seed) for i in range(n)]
        return cls(cfg, float(meta["kappa"]), ids, caps.reshape(n, m, cfg.d))


def generate_world(cfg: WorldConfig) -> World:
    kappa = resolve_kappa(cfg)
    means = sample_uniform_sphere(cfg.d, cfg.n_identities, [cfg.seed, _MEANS])
    ids = [IdentityModel(means[i], kappa, i, cfg.seed) for i in range(cfg.n_identities)]
    caps = np.empty((cfg.n_identities, cfg.images_per_identity, cfg.d))
    for ident in ids:
        for k in range(cfg.images_per_identity):
            caps[ident.label, k] = draw_capture(ident, k)
    return World(cfg, kappa, ids, caps)


# -- comparators ----------------------------------------------------------------

def _rotate_toward(x, anchor, direction, phi):
    """Rotate rows of x by phi in the plane of (anchor, tangent part of direction)."""
    t = direction - np.sum(direction * anchor, axis=-1, keepdims=True) * anchor
    t /= np.linalg.norm(t, axis=-1, keepdims=True)
    xa = np.sum(x * anchor, axis=-1, keepdims=True)
    xt = np.sum(x * t, axis=-1, keepdims=True)
    out = x + (np.cos(phi) - 1.0) * (xa * anchor + xt * t) + np.sin(phi) * (xa * t - xt * anchor)
    return normalize(out)


@dataclass(frozen=True, eq=False)
class SyntheticComparator:
    id: str
    rotation: np.ndarray
    noise_scale: float = 0.0
    seed: int = 0

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64)
        if R.ndim != 2 or R.shape[0] != R.shape[1]:
            raise ContractError("rotation must be a square matrix")
        if np.max(np.abs(R @ R.T - np.eye(R.shape[0]))) > 1e-6:
            raise ContractError("rotation is not orthogonal")
        if self.noise_scale < 0:
            raise ContractError("noise_scale must be >= 0")

    @classmethod
    def make(cls, id: str, d: int, noise_scale: float = 0.0, seed: int = 0,
             rotate: bool = True) -> "SyntheticComparator":
        if rotate:
            from scipy.stats import ortho_group
            R = ortho_group.rvs(d, random_state=np.random.default_rng([seed, _COMP_ROTATION]))
        else:
            R = np.eye(d)
        return cls(id, R, float(noise_scale), seed)

    @property
    def d(self) -> int:
        return self.rotation.shape[0]

    @property
    def phi(self) -> float:
        # normalize(y + s*t) for unit tangent t sits at angle arctan(s) from y
        return float(np.arctan(self.noise_scale))

    def noise_direction(self, label: int) -> np.ndarray:
        rng = np.random.default_rng([self.seed, _COMP_NOISE, int(label)])
        return rng.standard_normal(self.d)

    def embed_identity_points(self, latents, means, labels) -> np.ndarray:
        """Embed captures whose identities have the given mean directions and labels."""
        x = np.atleast_2d(latents) @ self.rotation.T
        if self.noise_scale == 0:
            return normalize(x)
        a = np.atleast_2d(means) @ self.rotation.T
        labels = np.atleast_1d(labels)
        uniq, inv = np.unique(labels, return_inverse=True)
        dirs = np.stack([self.noise_direction(k) for k in uniq])[inv]
        return _rotate_toward(x, a, dirs, self.phi)

    def embed_free(self, latents, stream) -> np.ndarray:
        """Embed latents that belong to no world identity (gallery faces, decoded images).

        Each row is its own single-capture identity; its displacement direction
        is row ``i`` of a normal draw keyed by ``stream``.
        """
        x = np.atleast_2d(latents) @ self.rotation.T
        if self.noise_scale == 0:
            return normalize(x)
        key = [self.seed, _FREE, *np.atleast_1d(stream).tolist()]
        dirs = np.random.default_rng(key).standard_normal(x.shape)
        return _rotate_toward(x, x, dirs, self.phi)

    def invert_rotation(self, embeddings) -> np.ndarray:
        """Best noise-free preimage: undo the rotation only."""
        return normalize(np.atleast_2d(embeddings) @ self.rotation)


def embed(c: SyntheticComparator, identity: IdentityModel, capture_index: int) -> np.ndarray:
    latent = draw_capture(identity, capture_index)
    return c.embed_identity_points(latent, identity.mean_direction, [identity.label])[0]


def embed_world(world: World, c: SyntheticComparator) -> np.ndarray:
    """All captures under ``c``, shape (n_identities, images_per_identity, d)."""
    if c.d != world.d:
        raise ContractError(f"comparator dimension {c.d} != world dimension {world.d}")
    n, m, d = world.captures.shape
    flat, labels = world.flat()
    means = world.means[labels]
    return c.embed_identity_points(flat, means, labels).reshape(n, m, d)


def comparator_seed(cid: str, base_seed: int = 0) -> int:
    return base_seed * 2**32 + zlib.crc32(cid.encode())


def comparator_family(specs, d: int, base_seed: int = 0) -> list[SyntheticComparator]:
    """Build comparators from ``(id, noise_scale)`` or ``(id, noise_scale, seed)`` tuples.

    Without an explicit seed, the seed derives from the id, so repeating an id
    repeats the comparator exactly.
    """
    out = []
    for spec in specs:
        cid, noise = spec[0], spec[1]
        seed = spec[2] if len(spec) > 2 else comparator_seed(cid, base_seed)
        out.append(SyntheticComparator.make(cid, d, noise, seed=seed))
    return out


DEFAULT_FAMILY = (("A", 0.1), ("B", 0.15), ("C", 0.5))


@dataclass(frozen=True, eq=False)
class ProjectionComparator:
    """Image comparator: centered pixels through a fixed random projection.

    Members of a family share a base projection; ``noise_scale`` mixes in a
    comparator-specific one, so small noise gives strongly correlated
    comparators.
    """
    id: str
    d: int
    noise_scale: float = 0.0
    seed: int = 0
    base_seed: int = 0

    def _matrix(self, n_pixels: int) -> np.ndarray:
        base = np.random.default_rng([self.base_seed, _PROJECTION, n_pixels])
        W = base.standard_normal((self.d, n_pixels))
        if self.noise_scale:
            own = np.random.default_rng([self.seed, _PROJECTION, n_pixels])
            W += self.noise_scale * own.standard_normal((self.d, n_pixels))
        return W

    def embed_images(self, imgs) -> np.ndarray:
        imgs = np.asarray(imgs, dtype=np.float64)
        if imgs.ndim == 3:
            imgs = imgs[None]
        X = imgs.reshape(imgs.shape[0], -1)
        X = X - X.mean(axis=1, keepdims=True)
        return normalize(X @ self._matrix(X.shape[1]).T)


def projection_family(specs, d: int, base_seed: int = 0) -> list[ProjectionComparator]:
    return [ProjectionComparator(s[0], d, float(s[1]),
                                 s[2] if len(s) > 2 else comparator_seed(s[0], base_seed),
                                 base_seed) for s in specs]
