#!/usr/bin/env python3
"""Census of SPD patterns at desk scale.

Enumerates all SPD patterns for L in {2, 3}, cross-checks the enumerator
against the closed-form count, and classifies a sample (or all of them at
L=2) by restricted-frame rank.

Usage: python scripts/pattern_census.py [--L 2] [--classify-sample 200]
"""

import argparse
import sys
from collections import Counter

import numpy as np

from stochop.patterns import enumerate_spd, spd_census
from stochop.tensor import classify_pattern


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--L", type=int, default=2, choices=(2, 3))
    ap.add_argument("--budget", type=int, default=None)
    ap.add_argument("--classify-sample", type=int, default=200)
    ap.add_argument("--trials", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    budget = args.budget if args.budget is not None else args.L * args.L
    patterns = list(enumerate_spd(args.L, budget))
    by_size = Counter(p.size for p in patterns)
    formula = spd_census(args.L, budget)
    print(f"L={args.L}, cell budget {budget}: {len(patterns)} SPD patterns")
    for size in sorted(by_size):
        mark = "ok" if by_size[size] == formula.get(size) else "MISMATCH"
        print(f"  size {size:>2d}: enumerated {by_size[size]:>6d}  closed-form {formula.get(size):>6d}  [{mark}]")

    rng = np.random.default_rng(args.seed)
    if args.classify_sample >= len(patterns):
        sample = patterns
    else:
        idx = rng.choice(len(patterns), size=args.classify_sample, replace=False)
        sample = [patterns[i] for i in idx]
    verdicts = Counter()
    for p in sample:
        res = classify_pattern(p, trials=args.trials, seed=int(rng.integers(2**31)))
        verdicts[res.report_verdict] += 1
    print(f"classified {len(sample)} patterns with {args.trials} trials each:")
    for v, count in verdicts.most_common():
        print(f"  {v}: {count}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
