"""Shared fixtures: canonical defective patterns and random SPD draws."""

import itertools

import numpy as np

from stochop.gabor import TorusIndex
from stochop.patterns import Pattern, pattern, pattern_from_graph


def arrowhead_pattern() -> Pattern:
    """L=5, six diagonal cells with the first correlated to the other five."""
    cells = [(0, 0), (0, 1), (0, 2), (0, 3), (0, 4), (1, 0)]
    return pattern_from_graph(5, cells, [((0, 0), c) for c in cells[1:]])


def two_squares_pattern() -> Pattern:
    """L=3 union of two disjoint 2x2 squares (|G1| + |G2| = 4 > 3)."""
    g1 = [(0, 0), (0, 1)]
    g2 = [(0, 2), (1, 0)]
    return pattern(
        3, list(itertools.product(g1, g1)) + list(itertools.product(g2, g2))
    )


def random_spd_pattern(
    L: int, seed: int, force_permissible_shape: bool = False
) -> Pattern:
    """Random SPD pattern with at most L^2 cells via the graph form.

    force_permissible_shape caps row heights at L and keeps components
    small, which avoids the provably defective shapes (it does not prove
    permissibility; callers still classify).
    """
    rng = np.random.default_rng(seed)
    cells = [TorusIndex(k, n) for k in range(L) for n in range(L)]
    d = int(rng.integers(1, L * L))
    diag = sorted(
        cells[i] for i in rng.choice(len(cells), size=d, replace=False)
    )
    budget = (L * L - d) // 2
    all_edges = list(itertools.combinations(diag, 2))
    rng.shuffle(all_edges)
    edges = []
    heights = {c: 1 for c in diag}
    cap = L if force_permissible_shape else L * L
    for e in all_edges:
        if len(edges) >= budget:
            break
        a, b = e
        if heights[a] + 1 <= cap and heights[b] + 1 <= cap:
            edges.append(e)
            heights[a] += 1
            heights[b] += 1
    return pattern_from_graph(L, diag, edges)
