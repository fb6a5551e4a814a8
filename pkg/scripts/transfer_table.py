"""Correlations and ideal-attack transfer across a comparator family.

    python3 scripts/transfer_table.py --comparators A:0.1,B:0.15,C:0.5
"""

import argparse

import numpy as np

from miikit.cli import TRANSFER_STREAM, parse_comparators, transfer_mii
from miikit.evaluation import PairSets, correlation_matrix, success_matrix, threshold_table
from miikit.ideal import QuadBatch, sample_identity_pairs
from miikit.sphere import mii_distances, spherical_midpoint
from miikit.world import LOW_VAR, WorldConfig, comparator_family, embed_world, generate_world


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--comparators", default="A:0.1,B:0.15,C:0.5")
    ap.add_argument("--regime", default=LOW_VAR)
    ap.add_argument("--d", type=int, default=128)
    ap.add_argument("--n-identities", type=int, default=1000)
    ap.add_argument("--n-attacks", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    w = generate_world(WorldConfig(d=args.d, n_identities=args.n_identities,
                                   images_per_identity=3, concentration_regime=args.regime,
                                   seed=args.seed))
    comps = comparator_family(parse_comparators(args.comparators), w.d)
    _, labels = w.flat()
    pairs = PairSets.build(labels, seed=args.seed)
    qpairs = sample_identity_pairs(args.n_identities, args.n_attacks, args.seed)
    emb, tables, pos_named, neg_named = {}, {}, [], []
    for c in comps:
        E = embed_world(w, c)
        pos, neg = pairs.distances(E.reshape(-1, w.d))
        emb[c.id] = QuadBatch.from_embeddings(E[:, :2], qpairs)
        tables[c.id] = threshold_table(neg, pos)
        pos_named.append((c.id, pos))
        neg_named.append((c.id, neg))

    print("pair    P+ pearson  P- pearson")
    for (a, b, rp), (_, _, rn) in zip(correlation_matrix(pos_named), correlation_matrix(neg_named)):
        print(f"{a}-{b}     {rp:8.4f}    {rn:8.4f}")

    print("\nideal success at eps2 (rows: attacker, columns: attacked)")
    print("      " + "".join(f"{c.id:>9s}" for c in comps))
    for ca in comps:
        qa = emb[ca.id]
        m_att = spherical_midpoint(qa.p_ref, qa.q_ref)
        cells = []
        for ct in comps:
            qt = emb[ct.id]
            m = transfer_mii(ca, ct, m_att, [args.seed, TRANSFER_STREAM])
            dist = mii_distances(qt.p_live, qt.q_live, m)
            cells.append(100 * np.mean(success_matrix(dist, tables[ct.id])[:, 2]))
        print(f"{ca.id:6s}" + "".join(f"{v:8.2f}%" for v in cells))


if __name__ == "__main__":
    main()
