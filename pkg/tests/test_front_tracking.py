import numpy as np
import pytest

import hyplab.bv as bv
from hyplab.bv import Interval, PiecewiseConstantFn, l1_distance, total_variation
from hyplab.front_tracking import (
    FrontTrackingRun,
    event_log_csv,
    init_fronts,
    lipschitz_probe,
    semigroup,
    time_lipschitz_probe,
)
from hyplab.models import Box, Burgers
from hyplab.riemann import rh_residual


def box_datum():
    """1 on [0,1), 0 elsewhere: rarefaction at 0, shock at 1."""
    return PiecewiseConstantFn([0.0, 1.0], [[0.0], [1.0], [0.0]])


def burgers_box_exact_l1_error(snapshot, t):
    """Exact L1 distance of a snapshot to the closed-form solution of the
    box datum, valid for t < 2: ramp x/t on [0,t], 1 on [t, 1+t/2), 0 after.

    Characteristics give the solution directly; each constant piece of the
    snapshot is integrated against it in closed form.
    """
    assert t < 2.0
    shock = 1.0 + t / 2.0

    def exact_piece_integral(lo, hi, c):
        # integral of |c - exact(x)| over [lo, hi]
        total = 0.0
        # region x < 0: exact 0
        a, b = lo, min(hi, 0.0)
        if b > a:
            total += abs(c) * (b - a)
        # ramp region [0, t]: exact x/t
        a, b = max(lo, 0.0), min(hi, t)
        if b > a:
            xc = np.clip(c * t, a, b)  # the ramp crosses c at x = c t
            for p, q in ((a, xc), (xc, b)):
                if q > p:
                    total += abs(c * (q - p) - (q * q - p * p) / (2 * t))
        # plateau [t, shock): exact 1
        a, b = max(lo, t), min(hi, shock)
        if b > a:
            total += abs(c - 1.0) * (b - a)
        # after the shock: exact 0
        a, b = max(lo, shock), hi
        if b > a:
            total += abs(c) * (b - a)
        return total

    edges = np.concatenate(([-1.0], snapshot.xs, [3.0]))
    total = 0.0
    for lo, hi, val in zip(edges[:-1], edges[1:], snapshot.vals):
        total += exact_piece_integral(lo, hi, float(val[0]))
    return total


# -- initialization -------------------------------------------------------------

def test_init_single_shock(burgers):
    u0 = PiecewiseConstantFn([0.0], [[1.0], [0.0]])
    run = init_fronts(burgers, u0, 0.1)
    (f,) = run.fronts
    assert f.kind == "shock" and f.speed == pytest.approx(0.5)


def test_init_rarefaction_split(burgers):
    u0 = PiecewiseConstantFn([0.0], [[0.0], [1.0]])
    run = init_fronts(burgers, u0, 0.25)
    assert [f.speed for f in run.fronts] == pytest.approx([0.25, 0.5, 0.75, 1.0])
    assert all(f.strength == pytest.approx(0.25) for f in run.fronts)


def test_init_constant_datum(burgers):
    run = init_fronts(burgers, PiecewiseConstantFn.constant([0.2]), 0.1)
    assert run.fronts == []


def test_init_domain_guard(burgers):
    with pytest.raises(ValueError):
        init_fronts(burgers, PiecewiseConstantFn([0.0], [[0.0], [7.0]]), 0.1)


# -- collisions ------------------------------------------------------------------

def test_two_shock_merge(burgers_wide):
    u0 = PiecewiseConstantFn([0.0, 0.5], [[2.0], [1.0], [0.0]])
    run = init_fronts(burgers_wide, u0, 0.1)
    run.advance_to(1.0)
    assert run.events_processed == 1
    t, x, fl, fr, tv = run.event_log[0]
    assert t == pytest.approx(0.5) and x == pytest.approx(0.75)
    (f,) = run.fronts
    assert f.speed == pytest.approx(1.0)
    assert tv == pytest.approx(2.0)


def test_single_shock_translation(burgers):
    u0 = PiecewiseConstantFn([0.0], [[1.0], [0.0]])
    snap = semigroup(burgers, u0, 0.8, 0.1)
    assert snap.xs.tolist() == pytest.approx([0.4])
    assert run_values(snap) == [1.0, 0.0]


def run_values(f):
    return [float(v[0]) for v in f.vals]


def test_shock_eats_rarefaction_tv_nonincreasing(burgers):
    u0 = PiecewiseConstantFn([-1.0, 0.0], [[0.0], [1.0], [0.0]])
    run = init_fronts(burgers, u0, 0.2)
    tv0 = run.tv()
    run.advance_to(3.0)
    assert run.events_processed > 0
    assert run.tv() <= tv0 + 1e-12
    history = [tv for _, tv in run.tv_history]
    assert all(b <= a + 1e-12 for a, b in zip(history, history[1:]))


# -- semigroup ---------------------------------------------------------------------

def test_semigroup_t0_identity(burgers):
    u0 = box_datum()
    assert semigroup(burgers, u0, 0.0, 0.1) is u0


def test_semigroup_property(burgers, rng):
    xs = np.sort(rng.uniform(-1, 1, 5))
    vals = rng.uniform(-0.8, 0.8, (6, 1))
    vals[-1] = vals[0]
    u0 = PiecewiseConstantFn(xs, vals)
    one = semigroup(burgers, u0, 0.7, 0.05)
    two = semigroup(burgers, semigroup(burgers, u0, 0.3, 0.05), 0.4, 0.05)
    assert l1_distance(one, two) < 1e-10


def test_box_datum_against_characteristics(burgers):
    u0 = box_datum()
    for delta in (0.1, 0.05):
        snap = semigroup(burgers, u0, 1.0, delta)
        err = burgers_box_exact_l1_error(snap, 1.0)
        assert err < 1.2 * delta
    # leading shock position is exact: 1 + t/2
    snap = semigroup(burgers, u0, 1.0, 0.05)
    assert snap.xs[-1] == pytest.approx(1.5, abs=1e-12)


def test_conservation(burgers, linear, rng):
    # exact for shock-only scalar data and for the linear model;
    # rarefaction fronts at right-state speed leak O(delta * TV * t)
    u0 = PiecewiseConstantFn([0.0, 0.5], [[1.0], [0.0], [1.0]])
    snap = semigroup(burgers, u0, 0.2, 0.1)
    assert abs(bv.signed_integral(snap, u0)[0]) < 1e-12

    ul = PiecewiseConstantFn([0.0, 0.7], [[0.5, 0.0], [-0.3, 0.2], [0.5, 0.0]])
    snapl = semigroup(linear, ul, 0.5, 0.1)
    assert np.max(np.abs(bv.signed_integral(snapl, ul))) < 1e-12

    u0r = box_datum()
    for delta in (0.2, 0.1, 0.05):
        snapr = semigroup(burgers, u0r, 1.0, delta)
        drift = abs(bv.signed_integral(snapr, u0r)[0])
        assert drift < 1.0 * delta  # scales linearly with delta


def test_fronts_satisfy_rh_or_are_weak_rarefactions(burgers, psystem, rng):
    for model in (burgers, psystem):
        if model.n == 1:
            u0 = box_datum()
        else:
            u0 = PiecewiseConstantFn(
                [0.0, 0.3, 0.6],
                [[1.0, 0.0], [1.05, 0.02], [0.97, -0.03], [1.0, 0.0]],
            )
        run = init_fronts(model, u0, 0.05)
        for t in (0.0, 0.2, 0.5):
            run.advance_to(t)
            for f in run.fronts:
                assert abs(f.speed) <= model.lambda_hat
                if f.kind == "rarefaction":
                    assert f.strength <= 0.05 + 1e-12
                else:
                    assert rh_residual(model, f.left, f.right, f.speed) < 1e-8


def test_psystem_tv_bounded(psystem):
    u0 = PiecewiseConstantFn(
        [0.0, 0.3, 0.6],
        [[1.0, 0.0], [1.02, 0.01], [0.99, -0.01], [1.0, 0.0]],
    )
    run = init_fronts(psystem, u0, 0.02)
    tv_start = run.tv()  # after resolution into elementary waves
    assert tv_start <= 0.1
    run.advance_to(1.0)
    worst = max(tv for _, tv in run.tv_history)
    assert worst <= 1.1 * tv_start


# -- probes -----------------------------------------------------------------------

def test_lipschitz_probe_translation_contraction(burgers):
    u0 = box_datum()
    ratio = lipschitz_probe(burgers, u0, u0.shift(0.1), 0.5, 0.5, 0.05)
    assert ratio <= 1.0 + 1e-9


def test_lipschitz_probe_degenerate(burgers):
    u0 = box_datum()
    with pytest.raises(ValueError):
        lipschitz_probe(burgers, u0, u0, 0.5, 0.5, 0.05)


def test_time_lipschitz_single_shock(burgers):
    u0 = PiecewiseConstantFn([0.0], [[1.0], [0.0]])
    run = init_fronts(burgers, u0, 0.1)
    assert time_lipschitz_probe(run, 0.1, 0.7) == pytest.approx(0.5)


def test_time_lipschitz_constant_zero(burgers):
    run = init_fronts(burgers, PiecewiseConstantFn.constant([0.3]), 0.1)
    assert time_lipschitz_probe(run, 0.0, 1.0) == 0.0


def test_time_lipschitz_bounded_by_speed_times_tv(burgers, rng):
    for _ in range(20):
        xs = np.sort(rng.uniform(-1, 1, 4))
        vals = rng.uniform(-0.9, 0.9, (5, 1))
        vals[-1] = vals[0]
        u0 = PiecewiseConstantFn(xs, vals)
        run = init_fronts(burgers, u0, 0.05)
        ratio = time_lipschitz_probe(run, 0.05, 0.4)
        assert ratio <= burgers.lambda_hat * total_variation(u0) + 1e-9


def test_event_log_csv(burgers_wide):
    u0 = PiecewiseConstantFn([0.0, 0.5], [[2.0], [1.0], [0.0]])
    run = init_fronts(burgers_wide, u0, 0.1)
    run.advance_to(1.0)
    csv = event_log_csv(run)
    lines = csv.strip().splitlines()
    assert lines[0] == "time,x,left_family,right_family,tv_after"
    assert len(lines) == 2
    fields = lines[1].split(",")
    assert float(fields[0]) == pytest.approx(0.5)
    assert float(fields[1]) == pytest.approx(0.75)


def test_blowup_guard(burgers):
    u0 = box_datum()
    run = FrontTrackingRun(burgers, u0, 0.01, max_events=2)
    # the box datum interacts more than twice at fine delta
    from hyplab.front_tracking import InteractionBlowupError

    with pytest.raises(InteractionBlowupError) as exc:
        run.advance_to(3.0)
    assert len(exc.value.tv_history) >= 2
