import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochop.errors import AsymmetricMask, BudgetExceeded, CollisionModL, FormatError
from stochop.gabor import TorusIndex
from stochop.patterns import (
    ConjugateReflect,
    FourierRotate,
    Pattern,
    Translate,
    detect_tall,
    detect_two_squares,
    diagonal_pattern,
    enumerate_spd,
    homology_apply,
    homology_inverse,
    homology_orbit_id,
    mask_from_binary,
    mask_from_boxes,
    mask_from_rle_json,
    mask_to_binary,
    mask_to_rle_json,
    pattern,
    pattern_from_graph,
    pattern_from_json,
    pattern_to_json,
    rectify_support,
    spd_census,
    spd_count,
    tensor_pattern,
    validate_spd,
)

# random SPD patterns with |pairs| <= L^2, drawn through the graph form
spd_patterns = st.builds(
    lambda L, seed: _random_spd(L, seed),
    L=st.integers(2, 4),
    seed=st.integers(0, 2**31),
)


def _random_spd(L: int, seed: int) -> Pattern:
    rng = np.random.default_rng(seed)
    cells = [TorusIndex(k, n) for k in range(L) for n in range(L)]
    d = int(rng.integers(1, L * L))
    diag = [cells[i] for i in rng.choice(len(cells), size=d, replace=False)]
    budget = (L * L - d) // 2
    edges = []
    if d >= 2 and budget > 0:
        all_edges = list(itertools.combinations(sorted(diag), 2))
        rng.shuffle(all_edges)
        edges = all_edges[: int(rng.integers(0, min(budget, len(all_edges)) + 1))]
    return pattern_from_graph(L, diag, edges)


def test_validate_spd_examples():
    assert validate_spd(pattern(2, [(((0, 0)), ((0, 0)))]))
    assert not validate_spd(pattern(2, [(((0, 0)), ((0, 1)))]))
    assert validate_spd(diagonal_pattern(2))
    assert not validate_spd(Pattern(L=2, pairs=frozenset()))


def test_pattern_cell_range_checked():
    with pytest.raises(ValueError):
        pattern(2, [((0, 2), (0, 2))])


def test_diagonal_pattern():
    for L in (2, 3, 5):
        p = diagonal_pattern(L)
        assert p.size == L * L
        assert validate_spd(p)
        assert len(p.diagonal_cells) == L * L
        assert not p.edges


def test_tensor_pattern():
    p1 = tensor_pattern(2, [(0, 0)])
    assert p1.size == 1 and validate_spd(p1)
    p2 = tensor_pattern(2, [(0, 0), (1, 0)])
    assert p2.size == 4 and validate_spd(p2)
    with pytest.raises(ValueError):
        tensor_pattern(2, [])
    with pytest.raises(ValueError):
        tensor_pattern(2, [(0, 0), (0, 0)])


@given(spd_patterns)
@settings(max_examples=40, deadline=None)
def test_random_graph_patterns_are_spd(p):
    assert validate_spd(p)
    assert p.size == len(p.diagonal_cells) + 2 * len(p.edges)


def test_enumerate_l2_counts():
    all_p = list(enumerate_spd(2, 4))
    sizes = {}
    for p in all_p:
        sizes[p.size] = sizes.get(p.size, 0) + 1
    assert sizes[1] == 4
    assert sizes[4] == 7
    assert sizes == {s: spd_count(2, s) for s in (1, 2, 3, 4)}
    # exactly 6 tensor squares + the diagonal among the size-4 patterns
    four = [p for p in all_p if p.size == 4]
    tensors = [p for p in four if len(p.diagonal_cells) == 2]
    assert len(tensors) == 6
    assert diagonal_pattern(2).pairs in {p.pairs for p in four}


def test_enumerate_no_duplicates_all_spd_sorted():
    all_p = list(enumerate_spd(2, 16))
    keys = [p.canonical_key() for p in all_p]
    assert len(set(keys)) == len(keys)
    assert keys == sorted(keys)
    assert all(validate_spd(p) for p in all_p)
    assert len(all_p) == sum(spd_census(2, 16).values())


def test_enumerate_budget():
    with pytest.raises(BudgetExceeded):
        list(enumerate_spd(5, 4))


def test_census_l3_size9():
    assert spd_count(3, 9) == 6511


@given(spd_patterns)
@settings(max_examples=40, deadline=None)
def test_homology_preserves_spd_and_inverts(p):
    transforms = [Translate(1, 2), FourierRotate(), ConjugateReflect(),
                  (Translate(1, 0), FourierRotate(), ConjugateReflect())]
    for sigma in transforms:
        q = homology_apply(p, sigma)
        assert validate_spd(q)
        assert q.size == p.size
        back = homology_apply(q, homology_inverse(sigma))
        assert back.pairs == p.pairs


def test_homology_diagonal_invariant():
    p = diagonal_pattern(3)
    for sigma in (Translate(2, 1), FourierRotate(), ConjugateReflect()):
        assert homology_apply(p, sigma).pairs == p.pairs


def test_homology_tensor_maps_to_tensor():
    gamma = [(0, 0), (1, 2), (2, 1)]
    p = tensor_pattern(3, gamma)
    sigma = FourierRotate()
    mapped = homology_apply(p, sigma)
    rotated = [((-n) % 3, k % 3) for k, n in gamma]
    assert mapped.pairs == tensor_pattern(3, rotated).pairs


def test_homology_orbit_ids():
    base = pattern_from_graph(
        3,
        [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1)],
        [((0, 0), (0, 1)), ((0, 0), (0, 2))],
    )
    # homologous variants of the same 5-diagonal-2-edge shape share the orbit
    variant1 = homology_apply(base, Translate(1, 1))
    variant2 = homology_apply(base, (FourierRotate(), ConjugateReflect(), Translate(0, 2)))
    ids = {homology_orbit_id(q) for q in (base, variant1, variant2)}
    assert len(ids) == 1
    assert homology_orbit_id(diagonal_pattern(3)) != homology_orbit_id(base)


def test_detect_tall_arrowhead():
    cells = [(0, 0), (0, 1), (0, 2), (0, 3), (0, 4), (1, 0)]
    p = pattern_from_graph(5, cells, [((0, 0), c) for c in cells[1:]])
    assert p.size == 16
    w = detect_tall(p)
    assert w is not None
    assert w.cell == TorusIndex(0, 0)
    assert w.height == 6


def test_detect_tall_negative_cases():
    assert detect_tall(diagonal_pattern(4)) is None
    assert detect_tall(tensor_pattern(3, [(0, 0), (1, 1), (2, 2)])) is None


def test_detect_two_squares_witness():
    g1 = [(0, 0), (0, 1)]
    g2 = [(0, 2), (1, 0)]
    p = pattern(3, list(itertools.product(g1, g1)) + list(itertools.product(g2, g2)))
    w = detect_two_squares(p, rank_G=3)
    assert w is not None
    assert set(w.gamma1) | set(w.gamma2) == {TorusIndex(*c) for c in g1 + g2}
    assert len(w.gamma1) + len(w.gamma2) == 4
    assert not (set(w.gamma1) & set(w.gamma2))


def test_detect_two_squares_negative_cases():
    for L in (2, 3, 4):
        assert detect_two_squares(diagonal_pattern(L), rank_G=L) is None
    for size in (1, 2, 3):
        gamma = [(0, n) for n in range(size)]
        assert detect_two_squares(tensor_pattern(3, gamma), rank_G=3) is None


def test_detect_two_squares_overlapping_cliques():
    # two triangles sharing a vertex: best disjoint pair is 3 + 2 > 4
    diag = [(0, 0), (0, 1), (0, 2), (0, 3), (1, 0)]
    edges = [((0, 0), (0, 1)), ((0, 0), (0, 2)), ((0, 1), (0, 2)),
             ((0, 2), (0, 3)), ((0, 2), (1, 0)), ((0, 3), (1, 0))]
    p = pattern_from_graph(4, diag, edges)
    w = detect_two_squares(p, rank_G=4)
    assert w is not None
    assert len(w.gamma1) + len(w.gamma2) == 5


def test_detectors_require_spd():
    broken = pattern(3, [((0, 0), (0, 1))])
    with pytest.raises(ValueError):
        detect_tall(broken)
    with pytest.raises(ValueError):
        detect_two_squares(broken, rank_G=3)


def test_rectify_single_box():
    m = mask_from_boxes([(((0, 0)), ((0, 0)))], a=0.5, b=1.0, M=4, boxes_t=2, boxes_nu=2)
    p = rectify_support(m, 2)
    assert p.pairs == pattern(2, [((0, 0), (0, 0))]).pairs


def test_rectify_tensor_square():
    gamma = [(0, 0), (1, 2)]
    boxes = list(itertools.product(gamma, gamma))
    m = mask_from_boxes(boxes, a=1 / 3, b=1.0, M=2, boxes_t=3, boxes_nu=3)
    p = rectify_support(m, 3)
    assert p.pairs == tensor_pattern(3, gamma).pairs
    assert validate_spd(p)


def test_rectify_diagonal_tube():
    boxes = [((k, n), (k, n)) for k in range(3) for n in range(3)]
    m = mask_from_boxes(boxes, a=1 / 3, b=1.0, M=2, boxes_t=3, boxes_nu=3)
    p = rectify_support(m, 3)
    assert p.pairs == diagonal_pattern(3).pairs


def test_rectify_asymmetric_raises():
    grid = np.zeros((4, 4, 4, 4), dtype=bool)
    grid[0, 0, 2, 2] = True  # no mirrored cell
    from stochop.patterns import SupportMask

    m = SupportMask(grid=grid, a=0.5, b=1.0, M=2, boxes_t=2, boxes_nu=2)
    with pytest.raises(AsymmetricMask):
        rectify_support(m, 2)


def test_rectify_collision_mod_l():
    # boxes (0,0) and (2,0) on a 3-box axis collide mod 2
    boxes = [((0, 0), (0, 0)), ((2, 0), (2, 0))]
    m = mask_from_boxes(boxes, a=0.5, b=1.0, M=2, boxes_t=3, boxes_nu=2)
    with pytest.raises(CollisionModL):
        rectify_support(m, 2)


def test_pattern_json_roundtrip():
    p = pattern_from_graph(3, [(0, 0), (1, 2)], [((0, 0), (1, 2))])
    back = pattern_from_json(pattern_to_json(p))
    assert back.L == p.L and back.pairs == p.pairs


def test_mask_serialization_roundtrips():
    m = mask_from_boxes(
        [((0, 0), (1, 1)), ((1, 1), (0, 0)), ((0, 0), (0, 0)), ((1, 1), (1, 1))],
        a=0.5,
        b=1.0,
        M=3,
        boxes_t=2,
        boxes_nu=2,
    )
    back = mask_from_rle_json(mask_to_rle_json(m))
    assert np.array_equal(back.grid, m.grid)
    assert back.a == m.a and back.M == m.M
    blob = mask_to_binary(m)
    assert blob[:8] == b"SOPMASK1"
    assert len(blob) == 16 + m.grid.size
    back2 = mask_from_binary(blob, a=m.a, b=m.b, M=m.M)
    assert np.array_equal(back2.grid, m.grid)
    with pytest.raises(FormatError):
        mask_from_binary(b"WRONGMAG" + blob[8:], a=0.5, b=1.0, M=3)
    with pytest.raises(FormatError):
        mask_from_rle_json('{"magic": "nope"}')
