"""Time-indexed piecewise-constant solution families.

Estimate checks consume anything with an ``at(t) -> PiecewiseConstantFn``
method (optionally accepting a ``window`` resolution hint).  This module
collects the implementations used throughout: front-tracking trajectories,
travelling discontinuities (with or without the correct speed), self-similar
fans, and snapshot tables.
"""

from __future__ import annotations

import bisect

import numpy as np

from .bv import PiecewiseConstantFn
from .front_tracking import FrontTrackingRun
from .models import SystemModel
from .riemann import WaveFan, fan_to_piecewise, solve_riemann

__all__ = [
    "SemigroupEvolution",
    "TravellingJump",
    "FanEvolution",
    "SnapshotTable",
]


class SemigroupEvolution:
    """Front-tracking trajectory of a datum, sampled lazily and memoized."""

    def __init__(self, model: SystemModel, u0: PiecewiseConstantFn, delta: float):
        self.model = model
        self.u0 = u0
        self.delta = delta
        self._run = FrontTrackingRun(model, u0, delta)
        self._cache: dict[float, PiecewiseConstantFn] = {0.0: u0}

    def at(self, t: float, window=None) -> PiecewiseConstantFn:
        t = float(t)
        if t not in self._cache:
            if t < self._run.current_time:
                self._run = FrontTrackingRun(self.model, self.u0, self.delta)
            self._cache[t] = self._run.state_at(t)
        return self._cache[t]


class TravellingJump:
    """A single discontinuity moving at a prescribed speed.

    With the Rankine-Hugoniot speed this is an exact solution; any other
    speed yields a non-solution used to probe the error functionals.
    """

    def __init__(self, left, right, speed: float, x0: float = 0.0):
        self.left = np.atleast_1d(np.asarray(left, dtype=float))
        self.right = np.atleast_1d(np.asarray(right, dtype=float))
        self.speed = float(speed)
        self.x0 = float(x0)

    def at(self, t: float, window=None) -> PiecewiseConstantFn:
        return PiecewiseConstantFn([self.x0 + self.speed * t],
                                   [self.left, self.right])


class FanEvolution:
    """Exact self-similar solution spreading from (t0, x0)."""

    def __init__(self, model: SystemModel, left, right, x0: float = 0.0,
                 t0: float = 0.0, pieces: int = 4096):
        self.model = model
        self.fan: WaveFan = solve_riemann(model, left, right)
        self.x0 = float(x0)
        self.t0 = float(t0)
        self.pieces = pieces

    def at(self, t: float, window=None) -> PiecewiseConstantFn:
        dt = t - self.t0
        if dt <= 0:
            return PiecewiseConstantFn([self.x0], [self.fan.left, self.fan.right])
        if window is not None:
            window = (window[0] - self.x0, window[1] - self.x0)
        return fan_to_piecewise(self.fan, dt, window=window,
                                max_pieces=self.pieces).shift(self.x0)


class SnapshotTable:
    """Evolution backed by stored snapshots; queries snap to the nearest time."""

    def __init__(self, snapshots: dict):
        if not snapshots:
            raise ValueError("need at least one snapshot")
        self.times = sorted(snapshots)
        self.table = {float(t): snapshots[t] for t in self.times}
        self.last_snap_error = 0.0

    def nearest_time(self, t: float) -> float:
        i = bisect.bisect_left(self.times, t)
        candidates = self.times[max(0, i - 1):i + 1]
        return min(candidates, key=lambda s: abs(s - t))

    def at(self, t: float, window=None) -> PiecewiseConstantFn:
        s = self.nearest_time(t)
        self.last_snap_error = abs(s - t)
        return self.table[s]
