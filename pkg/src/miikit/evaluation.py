"""Verification metrics: FAR/TAR, thresholds, AUROC, Pearson, attack scoring.

Counting conventions: FAR and TAR count distances strictly below the
threshold; an attack succeeds when its MII distance is at or below it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, UndefinedCorrelationError
from .sphere import angle_from_dot, as_embedding, mii_distance

FAR_TARGETS = (1e-5, 1e-4, 1e-3, 1e-2, 1e-1)
HEADLINE_INDEX = 2  # FAR 0.1%
DEFAULT_PAIR_CAP = 10**7


def _nonempty(dists, what="distance list") -> np.ndarray:
    a = np.asarray(dists, dtype=np.float64).ravel()
    if a.size == 0:
        raise ContractError(f"empty {what}")
    return a


def far(dists, eps: float) -> float:
    a = _nonempty(dists)
    return np.count_nonzero(a < eps) / a.size


def tar(dists, eps: float) -> float:
    a = _nonempty(dists)
    return np.count_nonzero(a < eps) / a.size


def threshold_at_far(neg_dists, far_target: float) -> float:
    """Largest eps with far(neg_dists, eps) <= far_target.

    That is the order statistic at index k, where k is the largest count with
    k / n <= far_target (computed in the same floating arithmetic as ``far``).
    """
    if not 0.0 < far_target < 1.0:
        raise ContractError(f"far_target must lie in (0, 1), got {far_target}")
    s = np.sort(_nonempty(neg_dists))
    n = s.size
    k = int(np.floor(far_target * n))
    while k + 1 < n and (k + 1) / n <= far_target:
        k += 1
    while k > 0 and k / n > far_target:
        k -= 1
    return float(s[k])


@dataclass(frozen=True)
class ThresholdTable:
    far_targets: tuple[float, ...]
    epsilons: tuple[float, ...]
    tars: tuple[float, ...] | None = None

    def __post_init__(self):
        if len(self.far_targets) != len(self.epsilons):
            raise ContractError("far_targets and epsilons differ in length")
        if any(b < a for a, b in zip(self.epsilons, self.epsilons[1:])):
            raise ContractError("epsilons must be nondecreasing in far_target")

    def __len__(self):
        return len(self.epsilons)

    def __getitem__(self, i) -> float:
        return self.epsilons[i]

    def rows(self):
        tars = self.tars or (None,) * len(self)
        for f, e, t in zip(self.far_targets, self.epsilons, tars):
            yield f, e, float(np.degrees(e)), t

    @classmethod
    def from_rows(cls, rows) -> "ThresholdTable":
        rows = sorted(rows, key=lambda r: float(r["far_target"]))
        tars = tuple(float(r["tar"]) for r in rows) if all(
            r.get("tar") not in (None, "") for r in rows) else None
        return cls(tuple(float(r["far_target"]) for r in rows),
                   tuple(float(r["epsilon_rad"]) for r in rows), tars)


def threshold_table(neg_dists, pos_dists=None, far_targets=FAR_TARGETS) -> ThresholdTable:
    eps = tuple(threshold_at_far(neg_dists, t) for t in far_targets)
    tars = None if pos_dists is None else tuple(tar(pos_dists, e) for e in eps)
    return ThresholdTable(tuple(far_targets), eps, tars)


def auroc(pos_dists, neg_dists) -> float:
    """P(pos < neg) + 0.5 P(pos == neg), counted exactly over all pairs."""
    pos = _nonempty(pos_dists, "positive list")
    neg = np.sort(_nonempty(neg_dists, "negative list"))
    left = np.searchsorted(neg, pos, side="left")
    right = np.searchsorted(neg, pos, side="right")
    wins = int(np.sum(neg.size - right))
    ties = int(np.sum(right - left))
    return (2 * wins + ties) / (2 * pos.size * neg.size)


def roc_curve(pos_dists, neg_dists) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(far, tar, eps) at every distinct observed distance, strict-< counting."""
    pos = np.sort(_nonempty(pos_dists))
    neg = np.sort(_nonempty(neg_dists))
    eps = np.unique(np.concatenate([pos, neg, [np.inf]]))
    fars = np.searchsorted(neg, eps, side="left") / neg.size
    tars = np.searchsorted(pos, eps, side="left") / pos.size
    return fars, tars, eps


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size != y.size or x.size < 2:
        raise ContractError("pearson needs two equal-length lists of at least 2 values")
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(xc @ xc)
    syy = float(yc @ yc)
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedCorrelationError("zero variance input")
    return float(np.clip((xc @ yc) / np.sqrt(sxx * syy), -1.0, 1.0))


@dataclass(frozen=True)
class AttackOutcome:
    p_live_dist: float
    q_live_dist: float
    mii_dist: float
    success_at: tuple[bool, ...] = field(default=())


def score_attack(p_live, q_live, mii, table: ThresholdTable) -> AttackOutcome:
    p_live, q_live, mii = as_embedding(p_live), as_embedding(q_live), as_embedding(mii)
    dp = float(angle_from_dot(np.dot(p_live, mii)))
    dq = float(angle_from_dot(np.dot(q_live, mii)))
    m = mii_distance(p_live, q_live, mii)
    return AttackOutcome(dp, dq, m, tuple(m <= e for e in table.epsilons))


def success_matrix(mii_dists, table: ThresholdTable) -> np.ndarray:
    """Boolean (n_attacks, n_eps) success grid for precomputed MII distances."""
    m = np.asarray(mii_dists, dtype=np.float64).reshape(-1, 1)
    return m <= np.asarray(table.epsilons)[None, :]


def success_rate(outcomes, eps_index: int) -> float:
    if len(outcomes) == 0:
        raise ContractError("no outcomes")
    n_eps = len(outcomes[0].success_at)
    if not 0 <= eps_index < n_eps:
        raise ContractError(f"eps_index {eps_index} out of range for {n_eps} thresholds")
    return sum(o.success_at[eps_index] for o in outcomes) / len(outcomes)


# -- pair sets -------------------------------------------------------------------

def positive_pairs(labels) -> tuple[np.ndarray, np.ndarray]:
    """All (i, j), i < j, with equal labels."""
    labels = np.asarray(labels)
    I, J = [], []
    order = np.argsort(labels, kind="stable")
    bounds = np.flatnonzero(np.diff(labels[order])) + 1
    for grp in np.split(order, bounds):
        grp = np.sort(grp)
        a, b = np.triu_indices(grp.size, 1)
        I.append(grp[a])
        J.append(grp[b])
    return np.concatenate(I), np.concatenate(J)


def negative_pairs(labels, cap: int = DEFAULT_PAIR_CAP, seed=0) -> tuple[np.ndarray, np.ndarray]:
    """All (i, j), i < j, with distinct labels, or a seeded sample of ``cap`` of them.

    The sample is drawn with replacement once the full cross product exceeds ``cap``.
    """
    labels = np.asarray(labels)
    n = labels.size
    _, counts = np.unique(labels, return_counts=True)
    total = (n * n - int(np.sum(counts.astype(np.int64) ** 2))) // 2
    if total <= cap:
        I, J = np.triu_indices(n, 1)
        keep = labels[I] != labels[J]
        return I[keep], J[keep]
    rng = np.random.default_rng([seed, 0x9E1])
    I = np.empty(0, dtype=np.int64)
    J = np.empty(0, dtype=np.int64)
    while I.size < cap:
        a = rng.integers(n, size=cap)
        b = rng.integers(n, size=cap)
        ok = labels[a] != labels[b]
        a, b = np.minimum(a[ok], b[ok]), np.maximum(a[ok], b[ok])
        I = np.concatenate([I, a])
        J = np.concatenate([J, b])
    return I[:cap], J[:cap]


def pair_distances(X, I, J, chunk: int = 1 << 18) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    out = np.empty(len(I))
    for s in range(0, len(I), chunk):
        a, b = I[s:s + chunk], J[s:s + chunk]
        out[s:s + chunk] = angle_from_dot(np.einsum("ij,ij->i", X[a], X[b]))
    return out


@dataclass
class PairSets:
    """Index pairs into a flat embedding batch: matching (P+) and non-matching (P-)."""
    pos: tuple[np.ndarray, np.ndarray]
    neg: tuple[np.ndarray, np.ndarray]

    @classmethod
    def build(cls, labels, cap: int = DEFAULT_PAIR_CAP, seed=0) -> "PairSets":
        return cls(positive_pairs(labels), negative_pairs(labels, cap, seed))

    def distances(self, X) -> tuple[np.ndarray, np.ndarray]:
        return pair_distances(X, *self.pos), pair_distances(X, *self.neg)


@dataclass
class ComparatorReport:
    comparator: str
    table: ThresholdTable
    auroc: float
    pos_dists: np.ndarray
    neg_dists: np.ndarray


def evaluate_embeddings(cid: str, X, pairs: PairSets) -> ComparatorReport:
    pos, neg = pairs.distances(X)
    return ComparatorReport(cid, threshold_table(neg, pos), auroc(pos, neg), pos, neg)


def correlation_matrix(named) -> list[tuple[str, str, float]]:
    """Pearson correlation for each unordered pair of ``(name, distances)`` entries."""
    named = list(named.items()) if isinstance(named, dict) else list(named)
    return [(a, b, pearson(x, y))
            for i, (a, x) in enumerate(named) for b, y in named[i + 1:]]
