import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from dofw import sets
from dofw.errors import DimensionError, NonFiniteError, UnsupportedSetError

from conftest import all_sets

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_lmo_examples():
    assert np.array_equal(sets.lmo(sets.simplex(3), [0.5, -1, 2]), [0, 1, 0])
    assert np.array_equal(sets.lmo(sets.simplex(3), [1, 1, 1]), [1, 0, 0])
    assert np.array_equal(sets.lmo(sets.l1_ball(2, 2.0), [3, -4]), [0, 2])


def test_lmo_box_and_l1_ties():
    b = sets.box(3, [0, -1, 2], [1, 1, 3])
    assert np.array_equal(sets.lmo(b, [1, -1, 0]), [0, 1, 2])
    assert np.array_equal(sets.lmo(sets.l1_ball(3, 1.0), [2, -2, 1]), [-1, 0, 0])


def test_project_examples():
    s3 = sets.simplex(3)
    assert np.array_equal(sets.project(s3, [0.2, 0.3, 0.5]), [0.2, 0.3, 0.5])
    assert np.allclose(sets.project(sets.simplex(2), [1, 1]), [0.5, 0.5], atol=0, rtol=0)
    # threshold theta = 1, derived by hand
    assert np.array_equal(sets.project(s3, [2, 0, 0]), [1, 0, 0])


def test_diameter_examples():
    assert sets.diameter(sets.simplex(5)) == pytest.approx(np.sqrt(2))
    assert sets.diameter(sets.l1_ball(4, 1.5)) == 3.0
    assert sets.diameter(sets.box(2, 0.0, 1.0)) == pytest.approx(np.sqrt(2))


def test_diameter_is_max_vertex_distance():
    for fset in all_sets(4):
        V = sets.vertices(fset)
        D = np.linalg.norm(V[:, None] - V[None], axis=2).max()
        assert sets.diameter(fset) == pytest.approx(D)


@pytest.mark.parametrize("op", [sets.lmo, sets.project])
def test_errors(op):
    s = sets.simplex(3)
    with pytest.raises(DimensionError):
        op(s, [1.0, 2.0])
    with pytest.raises(NonFiniteError):
        op(s, [1.0, np.nan, 0.0])
    with pytest.raises(NonFiniteError):
        op(s, [1.0, np.inf, 0.0])


def test_bad_sets():
    with pytest.raises(ValueError):
        sets.l1_ball(3, 0.0)
    with pytest.raises(ValueError):
        sets.box(2, 1.0, 1.0)
    with pytest.raises(ValueError):
        sets.FeasibleSet("sphere", 3)
    with pytest.raises(UnsupportedSetError):
        sets.vertices(sets.box(sets.MAX_BOX_VERTEX_DIM + 1))


def test_config_round_trip():
    for fset in all_sets(3):
        back = sets.from_config(fset.to_config())
        assert back.kind == fset.kind and back.d == fset.d and back.radius == fset.radius
        assert np.array_equal(back.lo, fset.lo) and np.array_equal(back.hi, fset.hi)


def test_lmo_optimal_against_feasible_samples(rng):
    # 1000 random gradients, 100 feasible points each, for every set kind
    for fset in all_sets(6):
        X = sets.sample(fset, 100, rng)
        assert sets.violation(fset, X) <= 1e-12
        for _ in range(1000):
            g = rng.normal(size=6)
            v = sets.lmo(fset, g)
            assert v @ g <= (X @ g).min() + 1e-12


@given(arrays(float, 7, elements=finite), st.sampled_from(range(3)))
def test_lmo_is_vertex(g, which):
    fset = all_sets(7)[which]
    v = sets.lmo(fset, g)
    V = sets.vertices(fset) if fset.kind != sets.BOX else None
    if fset.kind == sets.BOX:
        assert np.all((v == fset.lo) | (v == fset.hi))
    else:
        assert np.count_nonzero(v) == 1
        assert any(np.array_equal(v, u) for u in V)
    assert (v @ g) <= min(u @ g for u in sets.vertices(fset)) + 1e-9 * (1 + np.abs(g).sum())


@given(arrays(float, 6, elements=finite), st.sampled_from(range(3)))
def test_projection_feasible_idempotent_obtuse(y, which):
    fset = all_sets(6)[which]
    p = sets.project(fset, y)
    if fset.kind == sets.SIMPLEX:
        assert p.min() >= 0.0
        assert abs(p.sum() - 1.0) <= 1e-12
    assert sets.violation(fset, p) <= 1e-12 * max(1.0, np.abs(y).max())
    assert np.array_equal(sets.project(fset, p), p)
    X = sets.sample(fset, 50, np.random.default_rng(0))
    assert ((X - p) @ (y - p)).max() <= 1e-10 * max(1.0, np.abs(y).max())


@given(arrays(float, 4, elements=finite))
def test_simplex_projection_matches_qp_oracle(y):
    # brute-force oracle: for every support set, solve the equality-constrained
    # problem and keep the feasible solution closest to y
    best, best_dist = None, np.inf
    for mask in range(1, 16):
        S = [k for k in range(4) if mask >> k & 1]
        theta = (y[S].sum() - 1.0) / len(S)
        x = np.zeros(4)
        x[S] = y[S] - theta
        if x.min() >= -1e-12:
            dist = np.linalg.norm(x - y)
            if dist < best_dist:
                best, best_dist = x, dist
    p = sets.project(sets.simplex(4), y)
    assert np.allclose(p, best, atol=1e-9 * max(1.0, np.abs(y).max()))


def test_fw_gap_zero_at_optimum():
    s = sets.simplex(3)
    # linear objective: optimum is the argmin vertex, gap zero there
    g = np.array([3.0, -1.0, 2.0])
    assert sets.fw_gap(s, g, sets.lmo(s, g)) == 0.0
    assert sets.fw_gap(s, g, np.full(3, 1 / 3)) == pytest.approx(g.mean() + 1.0)


def test_contains_and_violation():
    s = sets.simplex(3)
    assert sets.contains(s, [0.5, 0.5, 0.0])
    assert not sets.contains(s, [0.6, 0.5, 0.0])
    assert sets.violation(s, [[-0.1, 1.1, 0.0]]) == pytest.approx(0.1)
