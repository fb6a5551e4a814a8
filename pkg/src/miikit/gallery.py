"""Gallery search MIIs: pick the gallery face closest to both references.

The objective for a gallery embedding g is max(theta(p, g), theta(q, g)),
equivalently the largest min(p . g, q . g). Bulk scoring runs through BLAS;
the winner is then re-scored with an exactly rounded dot product
(``math.fsum``) over every candidate within a small band of the BLAS
maximum, so exhaustive and indexed searches agree bit for bit regardless of
how BLAS blocked the arithmetic. Ties go to the lowest gallery index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .evaluation import HEADLINE_INDEX, ThresholdTable
from .ideal import QuadBatch, sample_identity_pairs
from .sphere import angle_from_dot, as_embedding, mii_distances, normalize
from .world import embed_world

_GALLERY = 11
_FILE_STREAM = 12
DEFAULT_CHUNK = 1 << 16


@dataclass(eq=False)
class Gallery:
    embeddings: np.ndarray
    ids: np.ndarray | None = None

    def __post_init__(self):
        E = np.asarray(self.embeddings)
        if E.ndim != 2 or E.shape[0] == 0:
            raise ContractError("gallery must be a nonempty 2-D batch")
        self.embeddings = E
        if self.ids is None:
            self.ids = np.arange(E.shape[0])
        elif len(self.ids) != E.shape[0]:
            raise ContractError("ids must parallel embeddings")

    def __len__(self):
        return self.embeddings.shape[0]

    @property
    def d(self) -> int:
        return self.embeddings.shape[1]


def _band(dtype) -> float:
    return 1e-5 if np.dtype(dtype) == np.float32 else 1e-10


def exact_score(g, p, q) -> float:
    """min(p . g, q . g) with correctly rounded sums."""
    g = np.asarray(g, dtype=np.float64)
    return min(math.fsum(g * p), math.fsum(g * q))


class _Tracker:
    """Running best per query plus every candidate within ``band`` of it."""

    def __init__(self, P, Q, band: float):
        self.P = np.asarray(P, dtype=np.float64)
        self.Q = np.asarray(Q, dtype=np.float64)
        self.band = band
        self.best = np.full(self.P.shape[0], -np.inf)
        self.cands: list[list[tuple[int, float, np.ndarray]]] = [[] for _ in range(self.P.shape[0])]

    def update(self, G, index, S=None, cols=None):
        """Feed gallery rows G with global indices ``index``; S are their BLAS scores."""
        cols = np.arange(self.P.shape[0]) if cols is None else cols
        if S is None:
            S = _scores(G, self.P[cols], self.Q[cols])
        best = np.maximum(self.best[cols], S.max(axis=0))
        self.best[cols] = best
        rows, hit = np.nonzero(S >= (best - self.band)[None, :])
        for r, h in zip(rows.tolist(), hit.tolist()):
            self.cands[cols[h]].append((int(index[r]), float(S[r, h]), G[r]))

    def finalize(self, j: int) -> tuple[int, float, np.ndarray]:
        """(gallery index, exact score, row) of the winner for query j."""
        floor = self.best[j] - self.band
        kept = [c for c in self.cands[j] if c[1] >= floor]
        self.cands[j] = kept
        best = None
        for idx, _, row in kept:
            s = exact_score(row, self.P[j], self.Q[j])
            if best is None or s > best[1] or (s == best[1] and idx < best[0]):
                best = (idx, s, row)
        return best


def _scores(G, P, Q) -> np.ndarray:
    R = np.concatenate([P, Q]).astype(G.dtype, copy=False)
    S = G @ R.T
    n = P.shape[0]
    return np.minimum(S[:, :n], S[:, n:]).astype(np.float64)


def _check_refs(g: Gallery, P, Q):
    P, Q = as_embedding(np.atleast_2d(P)), as_embedding(np.atleast_2d(Q))
    if P.shape != Q.shape or P.shape[1] != g.d:
        raise ContractError(f"reference shapes {P.shape}/{Q.shape} do not match gallery d={g.d}")
    return P, Q


def gs_search_exact_batch(g: Gallery, P, Q, chunk: int = DEFAULT_CHUNK):
    """Exhaustive search for many reference pairs; returns (indices, angles)."""
    P, Q = _check_refs(g, P, Q)
    tr = _Tracker(P, Q, _band(g.embeddings.dtype))
    for s in range(0, len(g), chunk):
        G = g.embeddings[s:s + chunk]
        tr.update(G, np.arange(s, s + G.shape[0]))
    res = [tr.finalize(j) for j in range(P.shape[0])]
    idx = np.array([r[0] for r in res])
    return idx, angle_from_dot(np.array([r[1] for r in res]))


def gs_search_exact(g: Gallery, p_ref, q_ref) -> tuple[int, float]:
    idx, ang = gs_search_exact_batch(g, p_ref, q_ref)
    return int(idx[0]), float(ang[0])


# -- coarse index ------------------------------------------------------------------

@dataclass(eq=False)
class GalleryIndex:
    gallery: Gallery
    centroids: np.ndarray
    members: list[np.ndarray]
    member_dots: list[np.ndarray]
    radius: np.ndarray = field(init=False)

    def __post_init__(self):
        self.radius = np.array([float(angle_from_dot(md.min())) if md.size else 0.0
                                for md in self.member_dots])

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @classmethod
    def build(cls, gallery: Gallery, k: int | None = None, iters: int = 10, seed=0,
              chunk: int = DEFAULT_CHUNK) -> "GalleryIndex":
        """Spherical k-means with k = ceil(sqrt(n)) centroids by default."""
        from scipy import sparse

        G = gallery.embeddings
        n = len(gallery)
        k = int(math.ceil(math.sqrt(n))) if k is None else int(k)
        k = max(1, min(k, n))
        rng = np.random.default_rng([seed, 0x1DE])
        C = np.asarray(G[np.sort(rng.choice(n, size=k, replace=False))], dtype=np.float64)
        for _ in range(iters):
            assign, _ = _assign(G, C, chunk)
            M = sparse.csr_matrix((np.ones(n), (assign, np.arange(n))), shape=(k, n))
            S = np.asarray(M @ G, dtype=np.float64)
            norms = np.linalg.norm(S, axis=1)
            live = norms > 0
            C[live] = S[live] / norms[live, None]
        assign, dots = _assign(G, C, chunk)
        order = np.argsort(assign, kind="stable")
        bounds = np.searchsorted(assign[order], np.arange(k + 1))
        members = [order[bounds[c]:bounds[c + 1]] for c in range(k)]
        return cls(gallery, C, members, [dots[m] for m in members])


def _assign(G, C, chunk):
    n = G.shape[0]
    assign = np.empty(n, dtype=np.int64)
    dots = np.empty(n)
    Ct = C.T.astype(G.dtype, copy=False)
    for s in range(0, n, chunk):
        D = G[s:s + chunk] @ Ct
        a = np.argmax(D, axis=1)
        assign[s:s + chunk] = a
        dots[s:s + chunk] = D[np.arange(D.shape[0]), a]
    return assign, dots


_PRUNE_MARGIN = 1e-4


def gs_search_indexed_batch(idx: GalleryIndex, P, Q, n_probe: int):
    """Probe the n_probe centroids nearest (by max angle) to each reference pair."""
    if n_probe < 1:
        raise ContractError("n_probe must be >= 1")
    g = idx.gallery
    P, Q = _check_refs(g, P, Q)
    n_probe = min(n_probe, idx.k)
    tr = _Tracker(P, Q, _band(g.embeddings.dtype))
    cang = np.maximum(angle_from_dot(idx.centroids @ P.T), angle_from_dot(idx.centroids @ Q.T))
    out_i, out_s = [], []
    for j in range(P.shape[0]):
        order = np.argsort(cang[:, j], kind="stable")[:n_probe]
        col = np.array([j])
        for c in order:
            m = idx.members[c]
            if m.size == 0:
                continue
            best_ang = float(angle_from_dot(tr.best[j])) if np.isfinite(tr.best[j]) else np.inf
            if cang[c, j] - idx.radius[c] > best_ang + _PRUNE_MARGIN:
                continue
            G = g.embeddings[m]
            tr.update(G, m, cols=col)
        i, s, _ = tr.finalize(j)
        out_i.append(i)
        out_s.append(s)
    return np.array(out_i), angle_from_dot(np.array(out_s))


def gs_search_indexed(idx: GalleryIndex, p_ref, q_ref, n_probe: int) -> tuple[int, float]:
    i, a = gs_search_indexed_batch(idx, p_ref, q_ref, n_probe)
    return int(i[0]), float(a[0])


# -- synthetic galleries and the size curve ---------------------------------------

class _LatentGallery:
    """Latent faces in fixed chunks; comparators see each row as a free image."""
    size: int
    chunk: int

    def _latent_chunk(self, j: int) -> np.ndarray:
        raise NotImplementedError

    def _stream(self, j: int) -> list[int]:
        raise NotImplementedError

    def _embed_chunk(self, j, comparator):
        X = self._latent_chunk(j)
        return X if comparator is None else comparator.embed_free(X, self._stream(j))

    def chunks(self, comparator=None, dtype=np.float32):
        """Yield (start, embeddings) under ``comparator`` (latent space if None)."""
        for j in range((self.size + self.chunk - 1) // self.chunk):
            yield j * self.chunk, self._embed_chunk(j, comparator).astype(dtype)

    def rows(self, indices, comparator=None) -> np.ndarray:
        """Float64 embeddings of selected members under ``comparator``."""
        indices = np.asarray(indices)
        out = np.empty((indices.size, self.d))
        for j in np.unique(indices // self.chunk):
            X = self._embed_chunk(int(j), comparator)
            sel = indices // self.chunk == j
            out[sel] = X[indices[sel] - j * self.chunk]
        return out

    def materialize(self, comparator=None, dtype=np.float32) -> Gallery:
        return Gallery(np.concatenate([X for _, X in self.chunks(comparator, dtype)]))


@dataclass(frozen=True)
class SyntheticGallery(_LatentGallery):
    """Uniform single-capture faces generated chunk by chunk, so prefixes nest."""
    d: int
    size: int
    seed: int = 0
    chunk: int = DEFAULT_CHUNK

    def _latent_chunk(self, j: int) -> np.ndarray:
        rng = np.random.default_rng([self.seed, _GALLERY, j])
        n = min(self.chunk, self.size - j * self.chunk)
        return normalize(rng.standard_normal((n, self.d)))

    def _stream(self, j: int) -> list[int]:
        return [self.seed, j]


@dataclass(frozen=True, eq=False)
class ArrayGallery(_LatentGallery):
    """Latent faces held in memory, e.g. loaded from an embedding file."""
    latents: np.ndarray
    chunk: int = DEFAULT_CHUNK

    @property
    def size(self) -> int:
        return self.latents.shape[0]

    @property
    def d(self) -> int:
        return self.latents.shape[1]

    def _latent_chunk(self, j: int) -> np.ndarray:
        return self.latents[j * self.chunk:(j + 1) * self.chunk]

    def _stream(self, j: int) -> list[int]:
        return [_FILE_STREAM, j]


@dataclass(frozen=True)
class CurvePoint:
    """Scores at one gallery size.

    ``success_rate`` and the distance summaries score each pick against the
    live images, as every attack is scored. The ``ref_`` fields score it
    against the references, the quantity the search optimizes; only those are
    guaranteed monotone in nested gallery size.
    """
    gallery_size: int
    success_rate: float
    mean_mii_dist: float
    median_mii_dist: float
    ref_success_rate: float
    ref_mean_mii_dist: float


def nested_search(chunks, P, Q, sizes, dtype=np.float32):
    """Best gallery member for each reference pair at each nested prefix size.

    ``chunks`` yields (start, rows) in gallery order. Returns, per size, the
    (indices, exact scores, rows) triple.
    """
    sizes = list(sizes)
    if sizes != sorted(sizes) or sizes[0] < 1:
        raise ContractError("sizes must be ascending and >= 1")
    tr = _Tracker(P, Q, _band(dtype))
    results = []
    si = 0
    for start, G in chunks:
        pos = 0
        while pos < G.shape[0] and si < len(sizes):
            stop = min(G.shape[0], sizes[si] - start)
            if stop > pos:
                tr.update(G[pos:stop], np.arange(start + pos, start + stop))
                pos = stop
            if start + pos == sizes[si]:
                fin = [tr.finalize(j) for j in range(P.shape[0])]
                results.append((np.array([f[0] for f in fin]), np.array([f[1] for f in fin]),
                                np.stack([np.asarray(f[2], dtype=np.float64) for f in fin])))
                si += 1
        if si == len(sizes):
            break
    if si != len(sizes):
        raise ContractError("gallery exhausted before the largest size")
    return results


def gallery_size_curve(world, sizes, n_attacks: int, table: ThresholdTable, comparator=None,
                       seed=0, eps_index: int = HEADLINE_INDEX,
                       chunk: int = DEFAULT_CHUNK) -> list[CurvePoint]:
    """Gallery-search success versus gallery size on fixed quads.

    ``world`` is a World (embedded under ``comparator`` when one is given) or
    an already embedded (n_identities, m, d) array. Galleries are drawn under
    the same comparator.
    """
    if hasattr(world, "captures"):
        E = world.captures if comparator is None else embed_world(world, comparator)
    else:
        E = np.asarray(world)
    pairs = sample_identity_pairs(E.shape[0], n_attacks, seed)
    quads = QuadBatch.from_embeddings(E, pairs)
    gal = SyntheticGallery(E.shape[2], max(sizes), seed=seed, chunk=chunk)
    found = nested_search(gal.chunks(comparator), quads.p_ref, quads.q_ref, sizes)
    out = []
    eps = table[eps_index]
    for size, (_, score, rows) in zip(sizes, found):
        ref = angle_from_dot(score)
        live = mii_distances(quads.p_live, quads.q_live, normalize(rows))
        out.append(CurvePoint(int(size), float(np.mean(live <= eps)), float(np.mean(live)),
                              float(np.median(live)), float(np.mean(ref <= eps)),
                              float(np.mean(ref))))
    return out


def _loglinear_crossing(sizes, values, target, fit_range, increasing: bool) -> float:
    s = np.asarray(sizes, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    keep = (s >= fit_range[0]) & (s <= fit_range[1])
    if keep.sum() < 2:
        raise ContractError("need at least two sizes inside the fit range")
    slope, icept = np.polyfit(np.log10(s[keep]), v[keep], 1)
    if (slope <= 0) if increasing else (slope >= 0):
        return math.inf
    exponent = (target - icept) / slope
    return math.inf if exponent > 300 else float(10 ** exponent)


def size_for_success(curve, target: float = 0.5, fit_range=(1e3, 1e6)) -> float:
    """Gallery size where a straight-line fit of success rate vs log10(size) reaches target.

    Returns inf when the fitted slope is not positive.
    """
    return _loglinear_crossing([c.gallery_size for c in curve], [c.success_rate for c in curve],
                               target, fit_range, increasing=True)


def size_for_median(curve, eps: float, fit_range=(1e3, 1e6)) -> float:
    """Gallery size where a log-linear fit of the median MII distance falls to ``eps``.

    The median MII distance equals eps exactly when half the attacks succeed.
    """
    return _loglinear_crossing([c.gallery_size for c in curve],
                               [c.median_mii_dist for c in curve], eps, fit_range,
                               increasing=False)
