"""Event-driven wave-front tracking realizing the solution semigroup.

Every jump of the piecewise-constant datum is replaced by its exact Riemann
fan; rarefactions are split into jump-fronts of strength at most `delta`,
each travelling at the characteristic speed of its right state.  Fronts move
on straight lines between collisions; at a collision the local Riemann
problem is re-solved exactly and outgoing rarefactions are re-discretized.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field

import numpy as np

from .bv import Interval, PiecewiseConstantFn, l1_distance
from .models import DomainError, PSystem, SystemModel
from .riemann import Wave, WaveFan, solve_riemann

__all__ = [
    "Front",
    "FrontTrackingRun",
    "InteractionBlowupError",
    "init_fronts",
    "advance",
    "semigroup",
    "lipschitz_probe",
    "time_lipschitz_probe",
    "event_log_csv",
]

# position tolerance for grouping simultaneous collisions into one cluster
POSITION_TOL = 1e-12


class InteractionBlowupError(RuntimeError):
    def __init__(self, message, tv_history):
        super().__init__(message)
        self.tv_history = tv_history


@dataclass
class Front:
    """A straight-line discontinuity; immutable after birth."""

    uid: int
    x_ref: float
    t_ref: float
    speed: float
    family: int
    kind: str
    left: np.ndarray
    right: np.ndarray

    def position(self, t: float) -> float:
        return self.x_ref + self.speed * (t - self.t_ref)

    @property
    def strength(self) -> float:
        return float(np.linalg.norm(self.right - self.left))


def _rarefaction_partition(model: SystemModel, wave: Wave, delta: float):
    """Split a rarefaction into states no more than delta apart."""
    pieces = max(1, int(np.ceil(wave.strength / delta)))
    if model.n == 1:
        us = np.linspace(wave.left[0], wave.right[0], pieces + 1)
        return [np.array([u]) for u in us]
    if isinstance(model, PSystem):
        from .riemann import _forward1, _backward2  # curve parameterizations

        while True:
            vs = np.linspace(wave.left[0], wave.right[0], pieces + 1)
            if wave.family == 1:
                us = [_forward1(model, wave.left[0], wave.left[1], v) for v in vs]
            else:
                us = [_backward2(model, wave.right[0], wave.right[1], v) for v in vs]
            states = [np.array([v, float(u)]) for v, u in zip(vs, us)]
            # uniform volume steps may overshoot delta in state norm
            worst = max(
                float(np.linalg.norm(b - a)) for a, b in zip(states, states[1:])
            )
            if worst <= delta or pieces >= 10_000:
                return states
            pieces = int(np.ceil(pieces * worst / delta)) + 1
    raise NotImplementedError(f"no rarefaction splitting for {model.name}")


class FrontTrackingRun:
    """Single-owner mutable evolution state for one piecewise-constant datum."""

    def __init__(self, model: SystemModel, u0: PiecewiseConstantFn, delta: float,
                 max_events: int = 10**6, tv_budget: float | None = None):
        if delta <= 0:
            raise ValueError("delta must be positive")
        for v in u0.vals:
            if not model.domain.contains(v):
                raise DomainError(f"datum value {v} outside {model.domain}")
        tv0 = float(np.sum(np.linalg.norm(np.diff(u0.vals, axis=0), axis=1)))
        if tv_budget is not None and tv0 > tv_budget:
            raise ValueError(f"datum variation {tv0} exceeds budget {tv_budget}")
        self.model = model
        self.u0 = u0
        self.delta = float(delta)
        self.max_events = max_events
        self.current_time = 0.0
        self.left_value = u0.vals[0].copy()
        self.fronts: list[Front] = []
        self.event_log: list[tuple] = []
        self.tv_history: list[tuple] = [(0.0, tv0)]
        self._uid = itertools.count()
        self._heap: list[tuple] = []
        self._counter = itertools.count()
        self.events_processed = 0

        for x, ul, ur in zip(u0.xs, u0.vals[:-1], u0.vals[1:]):
            fan = solve_riemann(model, ul, ur)
            self.fronts.extend(self._fan_to_fronts(fan, float(x), 0.0))
        for i in range(len(self.fronts) - 1):
            self._schedule(self.fronts[i], self.fronts[i + 1])

    # -- construction helpers ------------------------------------------------

    def _fan_to_fronts(self, fan: WaveFan, x: float, t: float) -> list[Front]:
        out = []
        for w in fan.waves:
            if w.kind != "rarefaction":
                out.append(Front(next(self._uid), x, t, float(w.speed), w.family,
                                 w.kind, w.left, w.right))
                continue
            states = _rarefaction_partition(self.model, w, self.delta)
            for a, b in zip(states, states[1:]):
                lam = float(self.model.eigenvalues(b)[w.family - 1])
                out.append(Front(next(self._uid), x, t, lam, w.family,
                                 "rarefaction", a, b))
        return out

    def _schedule(self, fl: Front, fr: Front):
        if fl.speed <= fr.speed:
            return
        t = (fr.x_ref - fr.speed * fr.t_ref - fl.x_ref + fl.speed * fl.t_ref) / (
            fl.speed - fr.speed
        )
        if t < self.current_time - 1e-9:
            return
        t = max(t, self.current_time)
        x = fl.position(t)
        heapq.heappush(self._heap, (t, x, next(self._counter), fl.uid, fr.uid))

    # -- evolution -----------------------------------------------------------

    def tv(self) -> float:
        return float(
            sum(np.linalg.norm(f.right - f.left) for f in self.fronts)
        )

    def _index_of(self, uid: int) -> int | None:
        for i, f in enumerate(self.fronts):
            if f.uid == uid:
                return i
        return None

    def advance_to(self, t_target: float) -> None:
        if t_target < self.current_time:
            raise ValueError("front tracking cannot run backwards")
        while self._heap and self._heap[0][0] <= t_target:
            t_ev, x_ev, _, uid_l, uid_r = heapq.heappop(self._heap)
            i = self._index_of(uid_l)
            if i is None or i + 1 >= len(self.fronts) or self.fronts[i + 1].uid != uid_r:
                continue  # stale event
            self._process_collision(t_ev, x_ev, i)
        self.current_time = t_target

    def _process_collision(self, t_ev: float, x_ev: float, i: int) -> None:
        self.current_time = t_ev
        tol = POSITION_TOL * (1.0 + abs(x_ev))
        lo = i
        while lo > 0 and abs(self.fronts[lo - 1].position(t_ev) - x_ev) <= tol:
            lo -= 1
        hi = i + 1
        while hi + 1 < len(self.fronts) and abs(
            self.fronts[hi + 1].position(t_ev) - x_ev
        ) <= tol:
            hi += 1
        incoming = self.fronts[lo:hi + 1]
        fan = solve_riemann(self.model, incoming[0].left, incoming[-1].right)
        born = self._fan_to_fronts(fan, x_ev, t_ev)
        self.fronts[lo:hi + 1] = born

        self.events_processed += 1
        tv_after = self.tv()
        self.tv_history.append((t_ev, tv_after))
        self.event_log.append(
            (t_ev, x_ev, incoming[0].family, incoming[-1].family, tv_after)
        )
        if self.events_processed > self.max_events:
            raise InteractionBlowupError(
                f"more than {self.max_events} interactions", self.tv_history
            )
        if lo > 0 and lo < len(self.fronts):
            self._schedule(self.fronts[lo - 1], self.fronts[lo])
        right_edge = lo + len(born)
        if born and right_edge < len(self.fronts):
            self._schedule(self.fronts[right_edge - 1], self.fronts[right_edge])

    def snapshot(self) -> PiecewiseConstantFn:
        """Current state as a piecewise-constant function."""
        t = self.current_time
        xs = np.array([f.position(t) for f in self.fronts])
        vals = np.concatenate(
            ([self.left_value], [f.right for f in self.fronts])
        ) if self.fronts else np.array([self.left_value])
        order = np.argsort(xs, kind="stable")
        if not np.array_equal(order, np.arange(xs.size)):  # defensive: float ties
            xs = xs[order]
            vals = np.concatenate(([self.left_value], vals[1:][order]))
        return PiecewiseConstantFn.from_sorted(xs, vals)

    def state_at(self, t: float) -> PiecewiseConstantFn:
        """Snapshot at any time >= 0, replaying from the datum if t is in the past."""
        if t < 0:
            raise ValueError("negative time")
        if t < self.current_time:
            fresh = FrontTrackingRun(self.model, self.u0, self.delta, self.max_events)
            return fresh.state_at(t)
        self.advance_to(t)
        return self.snapshot()


# -- functional interface ------------------------------------------------------

def init_fronts(model: SystemModel, u0: PiecewiseConstantFn, delta: float,
                **kwargs) -> FrontTrackingRun:
    return FrontTrackingRun(model, u0, delta, **kwargs)


def advance(run: FrontTrackingRun, t_target: float) -> FrontTrackingRun:
    run.advance_to(t_target)
    return run


def semigroup(model: SystemModel, u0: PiecewiseConstantFn, t: float,
              delta: float) -> PiecewiseConstantFn:
    """Approximation of S_t u0 at rarefaction resolution delta."""
    if t == 0:
        return u0
    return FrontTrackingRun(model, u0, delta).state_at(t)


def lipschitz_probe(model: SystemModel, u0: PiecewiseConstantFn,
                    v0: PiecewiseConstantFn, s: float, t: float,
                    delta: float) -> float:
    """||S_t u0 - S_s v0|| / (|t-s| + ||u0 - v0||)."""
    den = abs(t - s) + l1_distance(u0, v0)
    if den == 0.0:
        raise ValueError("identical data and times: Lipschitz ratio undefined")
    num = l1_distance(semigroup(model, u0, t, delta), semigroup(model, v0, s, delta))
    return num / den


def time_lipschitz_probe(run: FrontTrackingRun, t1: float, t2: float) -> float:
    """||u(t2) - u(t1)|| / (t2 - t1) along a run."""
    if not t1 < t2:
        raise ValueError("need t1 < t2")
    u1 = run.state_at(t1)
    u2 = run.state_at(t2)
    return l1_distance(u1, u2) / (t2 - t1)


def event_log_csv(run: FrontTrackingRun) -> str:
    lines = ["time,x,left_family,right_family,tv_after"]
    for t, x, fl, fr, tv in run.event_log:
        lines.append(f"{t!r},{x!r},{fl},{fr},{tv!r}")
    return "\n".join(lines) + "\n"
