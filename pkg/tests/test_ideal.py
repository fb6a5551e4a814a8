import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from miikit.errors import ContractError
from miikit.evaluation import PairSets, success_matrix, threshold_table
from miikit.ideal import (AttackQuad, QuadBatch, halved_negative_distribution, histogram_rows,
                          ideal_attack_distances, ideal_mii, ideal_miis, sample_identity_pairs)
from miikit.sphere import angular_distance, angular_distances
from miikit.world import EXPLICIT, WorldConfig, generate_world

from conftest import unit_rows


def test_quad_needs_distinct_identities(rng):
    p = unit_rows(rng, 1, 4)[0]
    with pytest.raises(ContractError):
        AttackQuad(p, p, p, p, 3, 3)


def test_ideal_mii_is_midpoint(rng):
    a, b, c, d = unit_rows(rng, 4, 8)
    q = AttackQuad(a, b, c, d)
    m = ideal_mii(q)
    assert angular_distance(a, m) == pytest.approx(angular_distance(a, c) / 2, abs=1e-9)


def test_lives_equal_refs_gives_half_angle(rng):
    P, Q = unit_rows(rng, 200, 16), unit_rows(rng, 200, 16)
    qb = QuadBatch(P, P, Q, Q, np.zeros(200), np.ones(200))
    np.testing.assert_allclose(ideal_attack_distances(qb), angular_distances(P, Q) / 2, atol=1e-9)


def test_batch_and_list_agree(rng):
    quads = [AttackQuad(*unit_rows(rng, 4, 5), 0, 1) for _ in range(10)]
    qb = QuadBatch.from_quads(quads)
    np.testing.assert_array_equal(ideal_miis(quads), ideal_miis(qb))
    assert len(list(qb)) == 10
    np.testing.assert_array_equal(QuadBatch.from_stacked(qb.stacked()).q_live, qb.q_live)
    with pytest.raises(ContractError):
        QuadBatch.from_stacked(np.zeros((5, 3)))


@settings(max_examples=50, deadline=None)
@given(n=st.integers(2, 60), seed=st.integers(0, 1000), frac=st.floats(0.01, 1.0))
def test_identity_pairs_unique_and_distinct(n, seed, frac):
    total = n * (n - 1) // 2
    k = max(1, int(frac * total))
    pairs = sample_identity_pairs(n, k, seed)
    assert pairs.shape == (k, 2)
    assert np.all(pairs[:, 0] != pairs[:, 1])
    keys = {tuple(sorted(p)) for p in pairs.tolist()}
    assert len(keys) == k
    np.testing.assert_array_equal(pairs, sample_identity_pairs(n, k, seed))


def test_identity_pairs_too_many():
    with pytest.raises(ContractError):
        sample_identity_pairs(4, 7, 0)


def test_zero_variance_world_succeeds_above_half_negative_support():
    w = generate_world(WorldConfig(d=32, n_identities=150, concentration_regime=EXPLICIT,
                                   kappa=np.inf))
    X, labels = w.flat()
    pos, neg = PairSets.build(labels).distances(X)
    quads = QuadBatch.from_embeddings(w.captures, sample_identity_pairs(150, 1000, 0))
    dist = ideal_attack_distances(quads)
    tab = threshold_table(neg, pos)
    half = halved_negative_distribution(neg)
    S = success_matrix(dist, tab)
    for i, e in enumerate(tab.epsilons):
        if e >= half.max():
            assert S[:, i].all()


def test_histogram_rows_integrate_to_one(rng):
    rows = histogram_rows(rng.uniform(0, np.pi, 1000), 50)
    assert len(rows) == 50 and rows[0][0] == 0.0 and rows[-1][1] == pytest.approx(np.pi)
    assert sum((r - l) * dens for l, r, dens in rows) == pytest.approx(1.0)
