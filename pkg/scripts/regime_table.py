"""Ideal-attack success per threshold in both calibrated worlds.

    python3 scripts/regime_table.py --n-attacks 10000
"""

import argparse

from miikit.evaluation import FAR_TARGETS, PairSets, success_matrix, threshold_table
from miikit.ideal import (QuadBatch, halved_negative_distribution, ideal_attack_distances,
                          sample_identity_pairs)
from miikit.world import HIGH_VAR, LOW_VAR, WorldConfig, generate_world


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d", type=int, default=128)
    ap.add_argument("--n-identities", type=int, default=1000)
    ap.add_argument("--n-attacks", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print("regime                 kappa    " + "  ".join(f"FAR {f:.0e}" for f in FAR_TARGETS)
          + "  P-/2<eps2")
    for regime in (LOW_VAR, HIGH_VAR):
        w = generate_world(WorldConfig(d=args.d, n_identities=args.n_identities,
                                       concentration_regime=regime, seed=args.seed))
        X, labels = w.flat()
        pos, neg = PairSets.build(labels, seed=args.seed).distances(X)
        table = threshold_table(neg, pos)
        pairs = sample_identity_pairs(args.n_identities, args.n_attacks, args.seed)
        dist = ideal_attack_distances(QuadBatch.from_embeddings(w.captures, pairs))
        rates = 100 * success_matrix(dist, table).mean(axis=0)
        half = 100 * (halved_negative_distribution(neg) < table[2]).mean()
        print(f"{regime:22s} {w.kappa:7.1f}  " + "  ".join(f"{r:8.2f}%" for r in rates)
              + f"  {half:8.2f}%")


if __name__ == "__main__":
    main()
