"""The ideal generator: MIIs placed exactly at the midpoint of the references."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .sphere import as_embedding, mii_distances, spherical_midpoint


@dataclass(frozen=True, eq=False)
class AttackQuad:
    p_ref: np.ndarray
    p_live: np.ndarray
    q_ref: np.ndarray
    q_live: np.ndarray
    p_label: int = 0
    q_label: int = 1

    def __post_init__(self):
        if self.p_label == self.q_label:
            raise ContractError("adversary and accomplice must be distinct identities")


@dataclass(eq=False)
class QuadBatch:
    """Column-stacked quads: each field is (n, d), labels are (n,)."""
    p_ref: np.ndarray
    p_live: np.ndarray
    q_ref: np.ndarray
    q_live: np.ndarray
    p_label: np.ndarray
    q_label: np.ndarray

    def __len__(self):
        return self.p_ref.shape[0]

    def __iter__(self):
        for i in range(len(self)):
            yield AttackQuad(self.p_ref[i], self.p_live[i], self.q_ref[i], self.q_live[i],
                             int(self.p_label[i]), int(self.q_label[i]))

    @classmethod
    def from_quads(cls, quads) -> "QuadBatch":
        quads = list(quads)
        if not quads:
            raise ContractError("no quads")
        return cls(*(np.stack([getattr(q, f) for q in quads])
                     for f in ("p_ref", "p_live", "q_ref", "q_live")),
                   np.array([q.p_label for q in quads]), np.array([q.q_label for q in quads]))

    @classmethod
    def from_embeddings(cls, E, pairs, ref_capture: int = 0, live_capture: int = 1) -> "QuadBatch":
        """Quads from per-identity embeddings E (n_identities, m, d) and (p, q) label pairs."""
        pairs = np.asarray(pairs)
        p, q = pairs[:, 0], pairs[:, 1]
        return cls(E[p, ref_capture], E[p, live_capture], E[q, ref_capture], E[q, live_capture],
                   p.copy(), q.copy())

    def stacked(self) -> np.ndarray:
        """Rows in p_ref, p_live, q_ref, q_live order, shape (4n, d)."""
        return np.stack([self.p_ref, self.p_live, self.q_ref, self.q_live], axis=1).reshape(
            -1, self.p_ref.shape[1])

    @classmethod
    def from_stacked(cls, X) -> "QuadBatch":
        X = np.asarray(X)
        if X.shape[0] % 4:
            raise ContractError("quad file must hold a multiple of 4 embeddings")
        Y = X.reshape(-1, 4, X.shape[1])
        n = Y.shape[0]
        return cls(Y[:, 0], Y[:, 1], Y[:, 2], Y[:, 3], 2 * np.arange(n), 2 * np.arange(n) + 1)


def _batch(quads) -> QuadBatch:
    return quads if isinstance(quads, QuadBatch) else QuadBatch.from_quads(quads)


def sample_identity_pairs(n_identities: int, n_pairs: int, seed) -> np.ndarray:
    """Unique unordered identity pairs, in random (adversary, accomplice) order."""
    total = n_identities * (n_identities - 1) // 2
    if not 1 <= n_pairs <= total:
        raise ContractError(f"cannot draw {n_pairs} unique pairs from {n_identities} identities")
    rng = np.random.default_rng([seed, 0x9A1])
    if n_pairs > total // 2:
        I, J = np.triu_indices(n_identities, 1)
        pick = rng.permutation(total)[:n_pairs]
        pairs = np.stack([I[pick], J[pick]], axis=1)
    else:
        seen: set[int] = set()
        out = []
        while len(out) < n_pairs:
            a = rng.integers(n_identities, size=2 * (n_pairs - len(out)) + 16)
            b = rng.integers(n_identities, size=a.size)
            for x, y in zip(a.tolist(), b.tolist()):
                if x == y:
                    continue
                key = min(x, y) * n_identities + max(x, y)
                if key in seen:
                    continue
                seen.add(key)
                out.append((x, y))
                if len(out) == n_pairs:
                    break
        return np.array(out, dtype=np.int64)
    flip = rng.random(n_pairs) < 0.5
    pairs[flip] = pairs[flip][:, ::-1]
    return pairs


def ideal_mii(quad: AttackQuad) -> np.ndarray:
    return spherical_midpoint(quad.p_ref, quad.q_ref)


def ideal_miis(quads) -> np.ndarray:
    b = _batch(quads)
    return spherical_midpoint(b.p_ref, b.q_ref)


def ideal_attack_distances(quads) -> np.ndarray:
    """MII distance of each reference midpoint against its live pair."""
    b = _batch(quads)
    if len(b) == 0:
        raise ContractError("no quads")
    m = spherical_midpoint(as_embedding(b.p_ref), as_embedding(b.q_ref))
    return mii_distances(b.p_live, b.q_live, m)


def halved_negative_distribution(neg_dists) -> np.ndarray:
    return np.asarray(neg_dists, dtype=np.float64) / 2.0


def histogram_rows(values, bins: int, lo: float = 0.0, hi: float = np.pi):
    """(bin_left_rad, bin_right_rad, density) rows over [lo, hi]."""
    dens, edges = np.histogram(np.asarray(values), bins=bins, range=(lo, hi), density=True)
    return [(float(edges[i]), float(edges[i + 1]), float(dens[i])) for i in range(bins)]
