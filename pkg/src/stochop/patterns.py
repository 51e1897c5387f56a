"""Autocorrelation support patterns on the index torus.

A pattern is a set of ordered cell pairs (lam, lam') in I x I.  Supports of
positive-semidefinite matrices obey the closure rule

    (lam, lam') present  =>  (lam', lam), (lam, lam), (lam', lam') present,

and sets satisfying it are called SPD patterns.  This module validates and
builds patterns, enumerates all SPD patterns at desk scale, applies the
three torus transformations that provably preserve permissibility
(translation, quarter rotation, horizontal reflection), detects the two
structural defects (two large squares; a row taller than L), and rectifies
fine 4D support masks into box patterns.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import struct
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Optional, Sequence, Union

import numpy as np

from .errors import AsymmetricMask, BudgetExceeded, CollisionModL, FormatError
from .gabor import TorusIndex, Window, conjugate_window, inverse_fourier_window, modulate, torus_indices, translate

Pair = tuple[TorusIndex, TorusIndex]

_MASK_MAGIC = b"SOPMASK1"


def _as_pair(raw) -> Pair:
    (k, n), (kp, np_) = raw
    return (TorusIndex(int(k), int(n)), TorusIndex(int(kp), int(np_)))


@dataclass(frozen=True)
class Pattern:
    """Raw set of cell pairs; SPD closure is checked by validate_spd."""

    L: int
    pairs: frozenset

    def __post_init__(self):
        pairs = frozenset(_as_pair(p) for p in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        for lam, lamp in pairs:
            for k, n in (lam, lamp):
                if not (0 <= k < self.L and 0 <= n < self.L):
                    raise ValueError(f"cell ({k},{n}) outside Z_{self.L} x Z_{self.L}")

    @property
    def size(self) -> int:
        return len(self.pairs)

    @property
    def sorted_pairs(self) -> list[Pair]:
        return sorted(self.pairs)

    @property
    def diagonal_cells(self) -> list[TorusIndex]:
        return sorted(lam for lam, lamp in self.pairs if lam == lamp)

    @property
    def edges(self) -> list[tuple[TorusIndex, TorusIndex]]:
        """Unordered off-diagonal correlations, each reported once."""
        return sorted(
            (lam, lamp) for lam, lamp in self.pairs if lam < lamp
        )

    def canonical_key(self) -> tuple:
        return tuple(self.sorted_pairs)

    def __contains__(self, pair) -> bool:
        return _as_pair(pair) in self.pairs


def pattern(L: int, pairs: Iterable) -> Pattern:
    return Pattern(L=L, pairs=frozenset(_as_pair(p) for p in pairs))


def validate_spd(p: Pattern) -> bool:
    """SPD closure: every pair drags in its mirror and both diagonals."""
    if not p.pairs:
        return False
    for lam, lamp in p.pairs:
        if (lamp, lam) not in p.pairs:
            return False
        if (lam, lam) not in p.pairs or (lamp, lamp) not in p.pairs:
            return False
    return True


def diagonal_pattern(L: int) -> Pattern:
    """All L^2 diagonal cells (lam, lam); always permissible."""
    if L < 2:
        raise ValueError("L must be >= 2")
    return pattern(L, ((lam, lam) for lam in torus_indices(L)))


def tensor_pattern(L: int, gamma: Iterable) -> Pattern:
    """Rank-1 product pattern Gamma x Gamma."""
    cells = [TorusIndex(int(k), int(n)) for k, n in gamma]
    if not cells:
        raise ValueError("gamma must be nonempty")
    if len(set(cells)) != len(cells):
        raise ValueError("gamma elements must be distinct")
    return pattern(L, itertools.product(cells, cells))


def pattern_from_graph(
    L: int,
    diagonal: Iterable,
    edges: Iterable = (),
) -> Pattern:
    """Build an SPD pattern from diagonal cells plus unordered correlations."""
    cells = {TorusIndex(int(k), int(n)) for k, n in diagonal}
    pairs = {(lam, lam) for lam in cells}
    for a, b in edges:
        lam, lamp = TorusIndex(*a), TorusIndex(*b)
        if lam not in cells or lamp not in cells:
            raise ValueError(f"edge ({lam},{lamp}) touches a cell off the diagonal set")
        pairs.add((lam, lamp))
        pairs.add((lamp, lam))
    return pattern(L, pairs)


# ---------------------------------------------------------------------------
# enumeration


def spd_count(L: int, size: int) -> int:
    """Closed-form count of SPD patterns with exactly `size` cells.

    A pattern is a diagonal set D plus e unordered correlations among D,
    with |D| + 2e = size; the count is sum_d C(L^2, d) * C(C(d,2), e).
    Serves as an independent oracle for the enumerator.
    """
    n = L * L
    total = 0
    for d in range(1, min(size, n) + 1):
        rem = size - d
        if rem < 0 or rem % 2:
            continue
        total += math.comb(n, d) * math.comb(math.comb(d, 2), rem // 2)
    return total


def spd_census(L: int, cell_budget: int) -> dict[int, int]:
    """Counts of SPD patterns by size, for sizes 1..cell_budget."""
    return {s: spd_count(L, s) for s in range(1, cell_budget + 1) if spd_count(L, s)}


def enumerate_spd(
    L: int, cell_budget: int, max_patterns: int = 1_000_000
) -> Iterator[Pattern]:
    """Yield every SPD pattern with at most cell_budget cells, exactly once.

    Output is canonically ordered (lexicographic on the sorted pair list).
    Exhaustive enumeration is only budgeted for L <= 3.
    """
    if L > 3:
        raise BudgetExceeded(f"exhaustive SPD enumeration not budgeted for L={L} > 3")
    total = sum(spd_census(L, cell_budget).values())
    if total > max_patterns:
        raise BudgetExceeded(f"{total} patterns exceed the cap {max_patterns}")
    cells = torus_indices(L)
    out: list[Pattern] = []
    for d in range(1, min(cell_budget, L * L) + 1):
        max_e = (cell_budget - d) // 2
        for diag in itertools.combinations(cells, d):
            all_edges = list(itertools.combinations(diag, 2))
            for e in range(0, min(max_e, len(all_edges)) + 1):
                for edges in itertools.combinations(all_edges, e):
                    out.append(pattern_from_graph(L, diag, edges))
    out.sort(key=Pattern.canonical_key)
    yield from out


# ---------------------------------------------------------------------------
# homology transformations


@dataclass(frozen=True)
class Translate:
    """sigma(k, n) = (k + q, n + p) mod L."""

    q: int
    p: int


@dataclass(frozen=True)
class FourierRotate:
    """sigma(k, n) = (-n, k) mod L; quarter rotation of the torus."""


@dataclass(frozen=True)
class ConjugateReflect:
    """sigma(k, n) = (k, -n) mod L; horizontal reflection of the torus."""


HomologyTransform = Union[Translate, FourierRotate, ConjugateReflect]


def torus_map(sigma: HomologyTransform, L: int) -> Callable[[TorusIndex], TorusIndex]:
    if isinstance(sigma, Translate):
        return lambda lam: TorusIndex((lam.k + sigma.q) % L, (lam.n + sigma.p) % L)
    if isinstance(sigma, FourierRotate):
        return lambda lam: TorusIndex((-lam.n) % L, lam.k % L)
    if isinstance(sigma, ConjugateReflect):
        return lambda lam: TorusIndex(lam.k % L, (-lam.n) % L)
    raise TypeError(f"unknown transform {sigma!r}")


def _as_transforms(sigma) -> tuple[HomologyTransform, ...]:
    if isinstance(sigma, (Translate, FourierRotate, ConjugateReflect)):
        return (sigma,)
    return tuple(sigma)


def homology_apply(p: Pattern, sigma) -> Pattern:
    """Apply a transform (or composition, applied left to right) to both
    coordinates of every pair."""
    pairs = set(p.pairs)
    for s in _as_transforms(sigma):
        f = torus_map(s, p.L)
        pairs = {(f(lam), f(lamp)) for lam, lamp in pairs}
    return Pattern(L=p.L, pairs=frozenset(pairs))


def homology_inverse(sigma) -> tuple[HomologyTransform, ...]:
    """Generator sequence undoing `sigma` (composition inverts in reverse)."""
    inv: list[HomologyTransform] = []
    for s in reversed(_as_transforms(sigma)):
        if isinstance(s, Translate):
            inv.append(Translate(-s.q, -s.p))
        elif isinstance(s, FourierRotate):
            inv.extend([FourierRotate(), FourierRotate(), FourierRotate()])
        else:
            inv.append(ConjugateReflect())
    return tuple(inv)


def companion_window(c: Window, sigma) -> Window:
    """Window transform tracking a pattern transform.

    For every window c and pattern p, the restricted tensored frame built
    from (companion_window(c, sigma), homology_apply(p, sigma)) has exactly
    the same rank as the one built from (c, p): translation by (q, p)
    composes with M^{-p} T^{-q}, the quarter rotation with the inverse DFT,
    and the reflection with conjugation.
    """
    w = c
    for s in _as_transforms(sigma):
        if isinstance(s, Translate):
            w = modulate(translate(w, -s.q), -s.p)
        elif isinstance(s, FourierRotate):
            w = inverse_fourier_window(w)
        elif isinstance(s, ConjugateReflect):
            w = conjugate_window(w)
        else:
            raise TypeError(f"unknown transform {s!r}")
    return w


def _homology_group(L: int) -> list[tuple[HomologyTransform, ...]]:
    """All 8 L^2 compositions: point group (rotations/reflection) then a
    translation."""
    group = []
    for rot in range(4):
        for refl in range(2):
            base: tuple[HomologyTransform, ...] = tuple(
                [FourierRotate()] * rot + [ConjugateReflect()] * refl
            )
            for q in range(L):
                for p in range(L):
                    group.append(base + (Translate(q, p),))
    return group


def orbit_canonical_key(p: Pattern) -> tuple:
    """Minimal canonical key over the homology group orbit of the pattern."""
    best = None
    for sigma in _homology_group(p.L):
        key = homology_apply(p, sigma).canonical_key()
        if best is None or key < best:
            best = key
    return best


def homology_orbit_id(p: Pattern) -> str:
    """Stable identifier shared by every pattern of one homology orbit."""
    digest = hashlib.sha1(repr(orbit_canonical_key(p)).encode()).hexdigest()
    return f"orbit-{digest[:8]}"


# ---------------------------------------------------------------------------
# structural defect detectors


@dataclass(frozen=True)
class TallWitness:
    cell: TorusIndex
    height: int

    def to_json(self) -> dict:
        return {"kind": "tall", "cell": list(self.cell), "height": self.height}


@dataclass(frozen=True)
class TwoSquaresWitness:
    gamma1: tuple
    gamma2: tuple

    def to_json(self) -> dict:
        return {
            "kind": "two_squares",
            "gamma1": [list(c) for c in self.gamma1],
            "gamma2": [list(c) for c in self.gamma2],
        }


def detect_tall(p: Pattern) -> Optional[TallWitness]:
    """Cell correlated to more than L cells; certifies defectiveness."""
    if not validate_spd(p):
        raise ValueError("detect_tall expects an SPD pattern")
    L = p.L
    heights: dict[TorusIndex, int] = {}
    for lam, _ in p.pairs:
        heights[lam] = heights.get(lam, 0) + 1
    for lam in sorted(heights):
        if heights[lam] > L:
            return TallWitness(cell=lam, height=heights[lam])
    return None


def _bron_kerbosch(adj: dict, R: set, P: set, X: set, out: list):
    if not P and not X:
        out.append(frozenset(R))
        return
    pivot = max(P | X, key=lambda v: len(adj[v] & P), default=None)
    candidates = P - adj[pivot] if pivot is not None else set(P)
    for v in list(candidates):
        _bron_kerbosch(adj, R | {v}, P & adj[v], X & adj[v], out)
        P.remove(v)
        X.add(v)


def _maximal_cliques(vertices: set, adj: dict) -> list[frozenset]:
    out: list[frozenset] = []
    _bron_kerbosch(adj, set(), set(vertices), set(), out)
    return out


def correlation_graph(p: Pattern) -> tuple[set, dict]:
    """Vertices = diagonal cells, edges = off-diagonal correlated pairs."""
    vertices = set(p.diagonal_cells)
    adj: dict = {v: set() for v in vertices}
    for lam, lamp in p.pairs:
        if lam != lamp:
            adj[lam].add(lamp)
            adj[lamp].add(lam)
    return vertices, adj


def detect_two_squares(p: Pattern, rank_G: int) -> Optional[TwoSquaresWitness]:
    """Disjoint complete squares Gamma1 x Gamma1, Gamma2 x Gamma2 inside the
    pattern with |Gamma1| + |Gamma2| > rank_G; certifies defectiveness.

    Complete squares are cliques of the correlation graph, so the search
    pairs each maximal clique with a maximum clique of the rest.
    """
    if not validate_spd(p):
        raise ValueError("detect_two_squares expects an SPD pattern")
    vertices, adj = correlation_graph(p)
    if not vertices:
        return None
    for c1 in sorted(_maximal_cliques(vertices, adj), key=len, reverse=True):
        rest = vertices - c1
        if len(c1) > rank_G:
            return TwoSquaresWitness(tuple(sorted(c1)), ())
        if not rest:
            continue
        sub_adj = {v: adj[v] & rest for v in rest}
        c2 = max(_maximal_cliques(rest, sub_adj), key=len)
        if len(c1) + len(c2) > rank_G:
            return TwoSquaresWitness(tuple(sorted(c1)), tuple(sorted(c2)))
    return None


# ---------------------------------------------------------------------------
# 4D support masks and rectification


@dataclass(frozen=True)
class SupportMask:
    """Boolean occupancy on a fine 4D grid of (t, nu, t', nu').

    Axes subdivide boxes of size a x b into M cells per edge; boxes_t and
    boxes_nu give the number of boxes per t / nu axis (>= L allows covers
    that leave the fundamental domain, which rectify_support reduces mod L).
    """

    grid: np.ndarray
    a: float
    b: float
    M: int
    boxes_t: int
    boxes_nu: int

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=bool)
        object.__setattr__(self, "grid", g)
        expect = (
            self.boxes_t * self.M,
            self.boxes_nu * self.M,
            self.boxes_t * self.M,
            self.boxes_nu * self.M,
        )
        if g.shape != expect:
            raise ValueError(f"grid shape {g.shape} != {expect}")
        if self.M < 1 or self.a <= 0 or self.b <= 0:
            raise ValueError("require M >= 1 and a, b > 0")

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.grid, self.grid.transpose(2, 3, 0, 1)))

    def box_view(self) -> np.ndarray:
        """Per-box occupancy (any cell set), shape (boxes_t, boxes_nu) x 2."""
        M = self.M
        g = self.grid.reshape(
            self.boxes_t, M, self.boxes_nu, M, self.boxes_t, M, self.boxes_nu, M
        )
        return g.any(axis=(1, 3, 5, 7))


def mask_from_boxes(
    boxes: Iterable, a: float, b: float, M: int, boxes_t: int, boxes_nu: int
) -> SupportMask:
    """Mask fully occupying the listed 4D boxes ((kt, kn), (kt', kn'))."""
    shape = (boxes_t * M, boxes_nu * M, boxes_t * M, boxes_nu * M)
    grid = np.zeros(shape, dtype=bool)
    for (kt, kn), (ktp, knp) in boxes:
        grid[
            kt * M : (kt + 1) * M,
            kn * M : (kn + 1) * M,
            ktp * M : (ktp + 1) * M,
            knp * M : (knp + 1) * M,
        ] = True
    return SupportMask(grid=grid, a=a, b=b, M=M, boxes_t=boxes_t, boxes_nu=boxes_nu)


def rectify_support(mask: SupportMask, L: int) -> Pattern:
    """Minimal set of covering boxes, reduced to torus index pairs.

    Raises AsymmetricMask for non-symmetric masks and CollisionModL when two
    distinct covering boxes agree mod L in the paired coordinates (the
    caller must then refine a, b, L rather than have boxes silently merged).
    """
    if not mask.is_symmetric():
        raise AsymmetricMask("mask must be symmetric under (t,nu) <-> (t',nu')")
    occupied = np.argwhere(mask.box_view())
    reduced: dict[Pair, tuple] = {}
    for kt, kn, ktp, knp in occupied:
        key = (
            TorusIndex(int(kt) % L, int(kn) % L),
            TorusIndex(int(ktp) % L, int(knp) % L),
        )
        raw = (int(kt), int(kn), int(ktp), int(knp))
        if key in reduced and reduced[key] != raw:
            raise CollisionModL(
                f"boxes {reduced[key]} and {raw} are congruent mod {L}"
            )
        reduced[key] = raw
    return Pattern(L=L, pairs=frozenset(reduced))


# ---------------------------------------------------------------------------
# serialization


def pattern_to_json(p: Pattern) -> str:
    pairs = [[[lam.k, lam.n], [lamp.k, lamp.n]] for lam, lamp in p.sorted_pairs]
    return json.dumps({"L": p.L, "pairs": pairs}, sort_keys=True)


def pattern_from_json(text: str) -> Pattern:
    data = json.loads(text)
    return pattern(int(data["L"]), data["pairs"])


def mask_to_rle_json(mask: SupportMask) -> str:
    flat = mask.grid.reshape(-1)
    runs = []
    diff = np.flatnonzero(np.diff(flat.astype(np.int8)))
    starts = np.concatenate(([0], diff + 1))
    ends = np.concatenate((diff + 1, [flat.size]))
    for s, e in zip(starts, ends):
        if flat[s]:
            runs.append([int(s), int(e - s)])
    return json.dumps(
        {
            "magic": _MASK_MAGIC.decode(),
            "dims": list(mask.grid.shape),
            "a": mask.a,
            "b": mask.b,
            "M": mask.M,
            "boxes": [mask.boxes_t, mask.boxes_nu],
            "runs": runs,
        },
        sort_keys=True,
    )


def mask_from_rle_json(text: str) -> SupportMask:
    data = json.loads(text)
    if data.get("magic") != _MASK_MAGIC.decode():
        raise FormatError("not a support mask JSON")
    flat = np.zeros(int(np.prod(data["dims"])), dtype=bool)
    for start, length in data["runs"]:
        flat[start : start + length] = True
    bt, bn = data["boxes"]
    return SupportMask(
        grid=flat.reshape(data["dims"]),
        a=float(data["a"]),
        b=float(data["b"]),
        M=int(data["M"]),
        boxes_t=int(bt),
        boxes_nu=int(bn),
    )


def mask_to_binary(mask: SupportMask) -> bytes:
    """16-byte header (magic + 4 uint16 dims) followed by dense uint8 cells.

    Geometry (a, b, M) is not part of the binary format; pass it on load.
    """
    dims = mask.grid.shape
    if max(dims) >= 1 << 16:
        raise FormatError("mask dimension too large for binary header")
    header = _MASK_MAGIC + struct.pack("<4H", *dims)
    return header + mask.grid.astype(np.uint8).tobytes()


def mask_from_binary(blob: bytes, a: float, b: float, M: int) -> SupportMask:
    if blob[:8] != _MASK_MAGIC:
        raise FormatError("bad magic for binary support mask")
    dims = struct.unpack("<4H", blob[8:16])
    n = int(np.prod(dims))
    grid = np.frombuffer(blob[16 : 16 + n], dtype=np.uint8).astype(bool).reshape(dims)
    return SupportMask(
        grid=grid, a=a, b=b, M=M, boxes_t=dims[0] // M, boxes_nu=dims[1] // M
    )
