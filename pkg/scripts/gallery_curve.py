"""Gallery-search success versus gallery size, with log-linear extrapolation.

    python3 scripts/gallery_curve.py --regime high-intra-class-var --max-size 1000000
"""

import argparse

from miikit.evaluation import PairSets, threshold_table
from miikit.gallery import gallery_size_curve, size_for_median, size_for_success
from miikit.world import HIGH_VAR, LOW_VAR, WorldConfig, generate_world


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--regime", choices=(LOW_VAR, HIGH_VAR), default=HIGH_VAR)
    ap.add_argument("--d", type=int, default=128)
    ap.add_argument("--n-identities", type=int, default=1000)
    ap.add_argument("--n-attacks", type=int, default=2000)
    ap.add_argument("--max-size", type=int, default=10**6)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    w = generate_world(WorldConfig(d=args.d, n_identities=args.n_identities,
                                   concentration_regime=args.regime, seed=args.seed))
    X, labels = w.flat()
    pos, neg = PairSets.build(labels, seed=args.seed).distances(X)
    table = threshold_table(neg, pos)
    sizes = [10**k for k in range(0, 10) if 10**k <= args.max_size]
    curve = gallery_size_curve(w, sizes, args.n_attacks, table, seed=args.seed)
    print(f"eps2 = {table[2]:.4f} rad")
    print("      size   live succ   live median   ref succ   ref mean")
    for p in curve:
        print(f"{p.gallery_size:>10d}  {100 * p.success_rate:8.2f}%  {p.median_mii_dist:10.4f}  "
              f"{100 * p.ref_success_rate:8.2f}%  {p.ref_mean_mii_dist:8.4f}")
    if sum(1 for s in sizes if 1e3 <= s <= 1e6) >= 2:
        print(f"size for 50% success (rate fit):   {size_for_success(curve):.3g}")
        print(f"size for median = eps2 (dist fit): {size_for_median(curve, table[2]):.3g}")


if __name__ == "__main__":
    main()
