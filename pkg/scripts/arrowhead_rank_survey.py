#!/usr/bin/env python3
"""Rank survey for the 16-cell arrowhead pattern on L=5.

The pattern (six diagonal cells, the first correlated to the other five)
is defective for every window: its restricted tensored frame carries one
row and one column dependency from the kernel of the six-atom subframe,
leaving rank 14 for windows in general position.  Special windows can lose
more: the Alltop chirp drops to 13.  This script measures the rank across
window families and leaf placements.

Usage: python scripts/arrowhead_rank_survey.py [--trials 50]
"""

import argparse
import sys
from collections import Counter

import numpy as np

from stochop.gabor import build_frame, random_window, window
from stochop.patterns import pattern_from_graph
from stochop.tensor import rank_and_left_inverse, restricted_tensor_frame


def arrowhead(leaves):
    cells = [(0, 0)] + list(leaves)
    return pattern_from_graph(5, cells, [((0, 0), c) for c in cells[1:]])


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    j = np.arange(5)
    families = {
        "gaussian": lambda: random_window(5, seed=int(rng.integers(2**31))),
        "unimodular": lambda: random_window(5, unimodular=True, seed=int(rng.integers(2**31))),
        "real gaussian": lambda: window(rng.standard_normal(5)),
        "alltop chirp": lambda: window(np.exp(1j * np.pi * 6 * j**2 / 5)),
    }
    leaf_sets = {
        "column leaves": [(0, 1), (0, 2), (0, 3), (0, 4), (1, 0)],
        "scattered leaves": [(1, 2), (2, 4), (3, 1), (4, 3), (2, 2)],
    }
    for leaf_name, leaves in leaf_sets.items():
        p = arrowhead(leaves)
        print(f"{leaf_name} ({p.size} cells):")
        for fam, draw in families.items():
            counts = Counter()
            for _ in range(args.trials):
                G = build_frame(draw())
                counts[rank_and_left_inverse(restricted_tensor_frame(G, p)).rank] += 1
            dist = ", ".join(f"rank {r}: {n}" for r, n in sorted(counts.items()))
            print(f"  {fam:>14s}: {dist}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
