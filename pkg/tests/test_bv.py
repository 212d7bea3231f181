import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hyplab.bv import (
    Interval,
    PiecewiseConstantFn,
    from_text,
    l1_distance,
    partition,
    project_piecewise,
    refine_partition,
    to_text,
    total_variation,
    w_functional,
)


def step(breaks, vals):
    return PiecewiseConstantFn(breaks, vals)


def riemann_sum_l1(f, g, lo, hi, dx=1e-5):
    xs = np.arange(lo, hi, dx) + dx / 2
    fv = f.values_at(xs)
    gv = g.values_at(xs)
    return float(np.sum(np.linalg.norm(fv - gv, axis=1)) * dx)


# -- evaluation and construction -------------------------------------------

def test_right_continuity():
    f = step([0.0], [[1.0], [2.0]])
    assert f.value(0.0) == pytest.approx(2.0)
    assert f.left_value(0.0) == pytest.approx(1.0)
    assert f.value(-1e-12) == pytest.approx(1.0)


def test_zero_jumps_are_canonicalized():
    f = step([0.0, 1.0], [[1.0], [1.0], [2.0]])
    assert f.xs.tolist() == [1.0]


def test_from_sorted_merges_duplicates():
    f = PiecewiseConstantFn.from_sorted([0.0, 0.0, 1.0], [[0.0], [9.0], [1.0], [0.0]])
    assert f.xs.tolist() == [0.0, 1.0]
    assert f.value(0.0) == pytest.approx(1.0)


def test_bad_breakpoints_rejected():
    with pytest.raises(ValueError):
        step([1.0, 0.0], [[1.0], [2.0], [3.0]])
    with pytest.raises(ValueError):
        step([0.0], [[1.0]])


# -- L1 distance -------------------------------------------------------------

def test_l1_identity():
    f = step([0.0, 1.0], [[0.0], [1.0], [0.0]])
    assert l1_distance(f, f) == 0.0


def test_l1_unit_box():
    f = step([0.0, 1.0], [[0.0], [1.0], [0.0]])
    g = PiecewiseConstantFn.constant([0.0])
    assert l1_distance(f, g) == pytest.approx(1.0)


def test_l1_matches_riemann_sum():
    f = step([-0.5, 0.2, 0.9], [[0.3], [-1.0], [0.7], [0.3]])
    g = step([-0.2, 0.5, 1.1], [[0.3], [1.2], [-0.4], [0.3]])
    exact = l1_distance(f, g)
    approx = riemann_sum_l1(f, g, -2.0, 2.0)
    assert exact == pytest.approx(approx, abs=1e-4)


def test_l1_distinct_tails_error():
    f = PiecewiseConstantFn.constant([0.0])
    g = PiecewiseConstantFn.constant([1.0])
    with pytest.raises(ValueError):
        l1_distance(f, g)
    # but restricted to a window it is fine
    assert l1_distance(f, g, Interval(0.0, 2.0)) == pytest.approx(2.0)


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_l1_metric_properties(vals):
    a, b, c = vals
    f = step([0.0], [[0.0], [a]])
    g = step([0.25], [[0.0], [b]])
    h = step([0.5], [[0.0], [c]])
    window = Interval(-1.0, 2.0)
    dfg = l1_distance(f, g, window)
    assert dfg == pytest.approx(l1_distance(g, f, window))
    assert dfg <= l1_distance(f, h, window) + l1_distance(h, g, window) + 1e-12


# -- total variation ----------------------------------------------------------

def test_tv_constant_zero():
    f = PiecewiseConstantFn.constant([3.0])
    assert total_variation(f) == 0.0
    assert total_variation(f, Interval(-10, 10)) == 0.0


def test_tv_endpoint_closure():
    f = step([0.0], [[1.0], [3.0]])
    assert total_variation(f, Interval(-1.0, 1.0)) == pytest.approx(2.0)
    assert total_variation(f, Interval(0.0, 1.0)) == 0.0
    assert total_variation(f, Interval(0.0, 1.0, include_a=True)) == pytest.approx(2.0)
    assert total_variation(f, Interval(-1.0, 0.0, include_b=True)) == pytest.approx(2.0)


def test_tv_matches_partition_sup(rng):
    # brute force: sup over sampled partitions of sum |f(x_{i+1}) - f(x_i)|
    breaks = np.sort(rng.uniform(-1, 1, 5))
    vals = rng.normal(size=(6, 1))
    f = step(breaks, vals)
    exact = total_variation(f, Interval(-2.0, 2.0))
    best = 0.0
    for _ in range(200):
        pts = np.sort(rng.uniform(-2, 2, 40))
        fv = f.values_at(pts)
        best = max(best, float(np.sum(np.abs(np.diff(fv, axis=0)))))
    assert best <= exact + 1e-12
    assert best == pytest.approx(exact, rel=1e-6)


def test_tv_additive_over_adjacent_intervals(rng):
    breaks = np.sort(rng.uniform(-1, 1, 6))
    f = step(breaks, rng.normal(size=(7, 2)))
    mid = 0.123456  # not a breakpoint
    left = total_variation(f, Interval(-2.0, mid, include_b=True))
    right = total_variation(f, Interval(mid, 2.0))
    assert left + right == pytest.approx(total_variation(f, Interval(-2.0, 2.0)))


# -- W functional -------------------------------------------------------------

def test_w_functional_empty_interval():
    f = step([0.0], [[0.0], [1.0]])
    assert w_functional(f, 1.0, -0.5, 0.5) == 0.0


def test_w_functional_t0_reduction():
    f = step([-0.3, 0.1, 0.4], [[0.0], [1.0], [-0.5], [0.0]])
    assert w_functional(f, 0.0, -1e6, 1e6) == pytest.approx(total_variation(f))


def test_w_functional_shrinking_cone():
    f = step([-0.3, 0.1, 0.4], [[0.0], [1.0], [-0.5], [0.0]])
    t = 0.2
    direct = total_variation(f, Interval(-1.0 + t, 1.0 - t))
    assert w_functional(f, t, -1.0, 1.0) == pytest.approx(direct)


# -- partition ----------------------------------------------------------------

def test_partition_small_variation():
    f = step([0.0], [[0.0], [0.5]])
    pts, n = partition(f, 1.0)
    assert pts == () and n == 0


def test_partition_lands_on_jumps():
    eps = 0.5
    f = step([0.0, 1.0, 2.0], [[0.0], [eps], [2 * eps], [3 * eps]])
    pts, n = partition(f, eps)
    assert n == 1 and pts == (1.0,)
    # half-open interval through the point carries >= eps
    assert total_variation(f, Interval(-np.inf, 1.0, include_b=True)) >= eps


def test_partition_error_on_bad_eps():
    f = step([0.0], [[0.0], [1.0]])
    with pytest.raises(ValueError):
        partition(f, 0.0)


@given(st.integers(0, 2**32 - 1))
def test_partition_clauses(seed):
    rng = np.random.Generator(np.random.Philox(seed))
    k = int(rng.integers(1, 20))
    breaks = np.sort(rng.uniform(-1, 1, k))
    breaks = np.unique(breaks)
    vals = rng.normal(size=(breaks.size + 1, 1))
    f = step(breaks, vals)
    eps = 0.1
    pts, n = partition(f, eps)
    assert n <= total_variation(f) / eps + 1e-9
    edges = [-np.inf, *pts, np.inf]
    for a, b in zip(edges, edges[1:]):
        assert total_variation(f, Interval(a, b)) <= eps + 1e-12
    for a, b in zip(edges, pts):
        assert total_variation(f, Interval(a, b, include_b=True)) >= eps - 1e-12


# -- refine_partition ---------------------------------------------------------

def test_refine_constant_neighborhoods():
    f = step([0.0, 1.0, 2.0], [[0.0], [1.0], [2.0], [3.0]])
    yp, yd = refine_partition(f, [1.0], 0.3)
    assert yp[0] < 1.0 < yd[0]
    assert total_variation(f, Interval(yp[0], 1.0)) <= 0.09 + 1e-12
    assert total_variation(f, Interval(1.0, yd[0])) <= 0.09 + 1e-12


def test_refine_preserves_chain():
    f = step(np.linspace(0, 1, 11), np.cumsum(np.ones((12, 1)) * 0.3, axis=0))
    pts, _ = partition(f, 0.5)
    assert len(pts) >= 2
    yp, yd = refine_partition(f, pts, 0.5)
    chain = []
    for k in range(len(pts)):
        chain.extend([yp[k], pts[k], yd[k]])
    for k in range(len(pts) - 1):
        assert yd[k] <= yp[k + 1]
    for k in range(len(pts)):
        assert yp[k] < pts[k] < yd[k]
        assert total_variation(f, Interval(yp[k], pts[k])) <= 0.25 + 1e-12
        assert total_variation(f, Interval(pts[k], yd[k])) <= 0.25 + 1e-12


def test_refine_dense_small_jumps():
    # many 0.004-size jumps left of the partition point at 1.0
    eps = 0.1  # budget eps^2 = 0.01 allows two jumps strictly inside
    breaks = [0.96, 0.97, 0.98, 0.99, 1.0]
    vals = np.array([[0.0], [0.004], [0.008], [0.012], [0.016], [1.016]])
    f = step(breaks, vals)
    yp, _ = refine_partition(f, [1.0], eps)
    assert total_variation(f, Interval(yp[0], 1.0)) <= eps**2 + 1e-15
    # pushed as far left as the budget allows: at most 2 jumps inside
    assert yp[0] <= 0.98


# -- projection ---------------------------------------------------------------

def test_project_constant():
    f = PiecewiseConstantFn.constant([2.0])
    p = project_piecewise(f, 0.0, 1.0, 0.2)
    assert np.allclose(p.values_at(np.linspace(0.21, 0.79, 10)), 2.0)


def test_project_single_jump_straddled_once():
    f = step([0.5], [[0.0], [1.0]])
    t = 0.25
    p = project_piecewise(f, 0.0, 1.0, t)
    # samples at 0.25, 0.5, 0.75: values 0, 1, 1 -> one jump in the projection
    assert p.xs.size == 1
    assert p.value(0.3) == pytest.approx(0.0)
    assert p.value(0.6) == pytest.approx(1.0)


def test_project_error_bound(rng):
    # integral of |u - proj| over [a+t, b-t] <= t * TV over ]a,b[
    for _ in range(100):
        k = int(rng.integers(1, 8))
        breaks = np.sort(rng.uniform(-1, 1, k))
        f = step(np.unique(breaks), rng.normal(size=(np.unique(breaks).size + 1, 1)))
        a, b = -1.5, 1.5
        t = float(rng.uniform(0.05, (b - a) / 2 * 0.9))
        p = project_piecewise(f, a, b, t)
        lhs = l1_distance(f, p, Interval(a + t, b - t))
        rhs = t * total_variation(f, Interval(a, b))
        assert lhs <= rhs + 1e-12


def test_project_precondition():
    f = PiecewiseConstantFn.constant([0.0])
    with pytest.raises(ValueError):
        project_piecewise(f, 0.0, 1.0, 0.6)


# -- serialization ------------------------------------------------------------

def test_text_round_trip():
    f = step([-0.25, 1.0 / 3.0], [[0.1, -2.0], [3.0, 4.0], [0.1, -2.0]])
    g = from_text(to_text(f))
    assert np.array_equal(g.xs, f.xs)
    assert np.array_equal(g.vals, f.vals)


def test_text_parse_errors():
    with pytest.raises(ValueError):
        from_text("")
    with pytest.raises(ValueError):
        from_text("n=1 pieces=2\n-inf 0.0\n")  # missing a piece line count
    with pytest.raises(ValueError):
        from_text("n=2 pieces=1\n-inf 0.0\n")  # wrong component count
