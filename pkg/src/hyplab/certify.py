"""A-posteriori certification of time-discretized approximate solutions.

An approximate solution is a table of piecewise-constant snapshots with a
declared time step.  The certifier measures approximate Lipschitz continuity,
weak conservation residuals, and entropy residuals against compactly
supported C^1 bumps, then reports the smallest constant making each condition
hold rather than inventing a threshold.  Space integrals are exact; in time
the snapshots on each slab are averaged (trapezoid convention) and the bump
derivatives are integrated in closed form, so the only quadrature error comes
from in-slab variation of the solution itself.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .bv import Interval, PiecewiseConstantFn, from_text, l1_distance, total_variation
from .front_tracking import FrontTrackingRun
from .models import SystemModel

__all__ = [
    "ApproxSolution",
    "TestFunction",
    "bump_family",
    "ResidualReport",
    "al_check",
    "weak_residual",
    "entropy_residual",
    "certify",
    "convergence_rate",
    "RateTable",
    "upwind_burgers",
    "sample_evolution",
    "load_manifest",
]

# |B'| attains 8/(3*sqrt(3)) at s^2 = 1/3 for the quartic bump (1-s^2)^2
_BUMP_DMAX = 8.0 / (3.0 * np.sqrt(3.0))


def _bump(s):
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1.0
    return np.where(inside, (1.0 - s * s) ** 2, 0.0)


def _bump_prime(s):
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1.0
    return np.where(inside, -4.0 * s * (1.0 - s * s), 0.0)


def _bump_int(s):
    """Integral of the bump from -1 to s (clipped); total mass 16/15."""
    s = np.clip(np.asarray(s, dtype=float), -1.0, 1.0)
    anti = s - (2.0 / 3.0) * s**3 + 0.2 * s**5
    return anti + 8.0 / 15.0


@dataclass(frozen=True)
class TestFunction:
    """Tensor bump phi(t,x) = B((t-t0)/st) * B((x-x0)/sx), B(s) = (1-s^2)^2."""

    t0: float
    x0: float
    st: float
    sx: float

    def __post_init__(self):
        if self.st <= 0 or self.sx <= 0:
            raise ValueError("bump scales must be positive")

    def value(self, t, x):
        return _bump((t - self.t0) / self.st) * _bump((x - self.x0) / self.sx)

    def dt(self, t, x):
        return (_bump_prime((t - self.t0) / self.st) / self.st
                * _bump((x - self.x0) / self.sx))

    def dx(self, t, x):
        return (_bump((t - self.t0) / self.st)
                * _bump_prime((x - self.x0) / self.sx) / self.sx)

    @property
    def w1inf_norm(self) -> float:
        """max of sup|phi|, sup|phi_t|, sup|phi_x| (all closed form)."""
        return max(1.0, _BUMP_DMAX / self.st, _BUMP_DMAX / self.sx)

    def x_mass(self, t, lo, hi):
        """Integral of phi(t, .) over [lo, hi]."""
        return (_bump((t - self.t0) / self.st) * self.sx
                * (_bump_int((hi - self.x0) / self.sx)
                   - _bump_int((lo - self.x0) / self.sx)))

    def t_mass(self, x, t1, t2):
        """Integral of phi(., x) over [t1, t2]."""
        return (_bump((x - self.x0) / self.sx) * self.st
                * (_bump_int((t2 - self.t0) / self.st)
                   - _bump_int((t1 - self.t0) / self.st)))

    def supported_in(self, tau: float, tau_prime: float) -> bool:
        return tau <= self.t0 - self.st and self.t0 + self.st <= tau_prime


def bump_family(tau: float, tau_prime: float, x_lo: float, x_hi: float,
                n_t: int = 3, n_x: int = 5, scale_factors=(1.0, 0.5)) -> list:
    """Deterministic lattice of bumps supported inside the strip."""
    out = []
    for factor in scale_factors:
        st = 0.5 * (tau_prime - tau) * factor
        sx = max((x_hi - x_lo) / (n_x + 1), 1e-12) * factor * 2.0
        for t0 in np.linspace(tau + st, tau_prime - st, n_t):
            for x0 in np.linspace(x_lo, x_hi, n_x):
                out.append(TestFunction(float(t0), float(x0), float(st), float(sx)))
    return out


class ApproxSolution:
    """Snapshot table of an eps-approximate solution supported in [-R, R]."""

    def __init__(self, eps: float, snapshots: dict, support_radius: float):
        if eps <= 0:
            raise ValueError("eps must be positive")
        if not snapshots:
            raise ValueError("no snapshots")
        self.eps = float(eps)
        self.times = np.array(sorted(snapshots))
        self.table = {float(t): snapshots[t] for t in snapshots}
        self.support_radius = float(support_radius)
        self.snap_errors: list[float] = []

    def at(self, t: float, window=None) -> PiecewiseConstantFn:
        i = int(np.argmin(np.abs(self.times - t)))
        s = float(self.times[i])
        self.snap_errors.append(abs(s - t))
        return self.table[s]

    def times_in(self, tau: float, tau_prime: float) -> np.ndarray:
        mask = (self.times >= tau - 1e-12) & (self.times <= tau_prime + 1e-12)
        return self.times[mask]

    def sup_tv(self, tau: float, tau_prime: float) -> float:
        ts = self.times_in(tau, tau_prime)
        if ts.size == 0:
            raise ValueError("no snapshots in the window")
        return max(total_variation(self.table[float(t)]) for t in ts)


def al_check(sol: ApproxSolution) -> float:
    """Approximate Lipschitz constant: sup over snapshot pairs of
    ||u(t)-u(s)|| / ((|t-s| + eps) * sup TV on [s,t])."""
    ts = sol.times
    if ts.size < 2:
        raise ValueError("need at least two snapshots")
    tvs = np.array([total_variation(sol.table[float(t)]) for t in ts])
    worst = 0.0
    for i in range(ts.size):
        fi = sol.table[float(ts[i])]
        running_tv = tvs[i]
        for j in range(i + 1, ts.size):
            running_tv = max(running_tv, tvs[j])
            if running_tv == 0.0:
                continue
            num = l1_distance(fi, sol.table[float(ts[j])])
            worst = max(
                worst, num / ((float(ts[j] - ts[i]) + sol.eps) * running_tv)
            )
    return worst


def _grid_times(sol: ApproxSolution, tau: float, tau_prime: float) -> np.ndarray:
    ts = sol.times_in(tau, tau_prime)
    if ts.size < 2 or abs(ts[0] - tau) > 1e-9 or abs(ts[-1] - tau_prime) > 1e-9:
        raise ValueError("strip endpoints must carry snapshots")
    return ts


def _average(f: PiecewiseConstantFn, g: PiecewiseConstantFn) -> PiecewiseConstantFn:
    from .bv import merge_values

    edges, fv, gv = merge_values(f, g)
    return PiecewiseConstantFn(edges, 0.5 * (fv + gv))


def _strip_integrals(sol: ApproxSolution, tau, tau_prime, phi: TestFunction,
                     g_of_u, gf_of_u):
    """Boundary terms and slab-exact space-time integral of
    g(u) phi_t + gf(u) phi_x, with u averaged per slab."""
    ts = _grid_times(sol, tau, tau_prime)
    u_tau = sol.table[float(ts[0])]
    u_tau_p = sol.table[float(ts[-1])]

    def boundary(u, t):
        lo = np.concatenate(([-np.inf], u.xs))
        hi = np.concatenate((u.xs, [np.inf]))
        lo = np.clip(lo, phi.x0 - phi.sx, phi.x0 + phi.sx)
        hi = np.clip(hi, phi.x0 - phi.sx, phi.x0 + phi.sx)
        masses = phi.x_mass(t, lo, hi)
        return float(np.sum(masses * g_of_u(u.vals)))

    bracket = boundary(u_tau, tau) - boundary(u_tau_p, tau_prime)
    for t1, t2 in zip(ts[:-1], ts[1:]):
        u_bar = _average(sol.table[float(t1)], sol.table[float(t2)])
        lo = np.concatenate(([-np.inf], u_bar.xs))
        hi = np.concatenate((u_bar.xs, [np.inf]))
        lo_c = np.clip(lo, phi.x0 - phi.sx, phi.x0 + phi.sx)
        hi_c = np.clip(hi, phi.x0 - phi.sx, phi.x0 + phi.sx)
        # integral over slab of g(u) phi_t: exact t-antiderivative is phi itself
        dphi = (phi.x_mass(t2, lo_c, hi_c) - phi.x_mass(t1, lo_c, hi_c))
        bracket += float(np.sum(dphi * g_of_u(u_bar.vals)))
        # integral over slab of gf(u) phi_x: exact x-antiderivative in each piece
        tm = phi.t_mass(np.concatenate((u_bar.xs, [phi.x0 + phi.sx])), t1, t2)
        tm_lo = phi.t_mass(np.concatenate(([phi.x0 - phi.sx], u_bar.xs)), t1, t2)
        bracket += float(np.sum((tm - tm_lo) * gf_of_u(u_bar.vals)))
    return bracket


def weak_residual(model: SystemModel, sol: ApproxSolution, tau: float,
                  tau_prime: float, phis) -> np.ndarray:
    """Normalized conservation residuals, one per test function.

    Each raw bracket (Euclidean over components) is divided by
    eps * ||phi||_W1inf * (tau'-tau) * sup TV; the smallest admissible
    constant in the approximate conservation law is the maximum over phis.
    """
    sup_tv = sol.sup_tv(tau, tau_prime)
    out = []
    for phi in phis:
        comps = [
            _strip_integrals(sol, tau, tau_prime, phi,
                             lambda vals, k=k: vals[:, k],
                             lambda vals, k=k: np.atleast_2d(model.flux(vals))[:, k])
            for k in range(model.n)
        ]
        bracket = float(np.linalg.norm(comps))
        den = sol.eps * phi.w1inf_norm * (tau_prime - tau) * sup_tv
        out.append(bracket / den if den > 0 else (0.0 if bracket == 0 else np.inf))
    return np.array(out)


def entropy_residual(model: SystemModel, sol: ApproxSolution, tau: float,
                     tau_prime: float, phis) -> np.ndarray:
    """Signed entropy balances, one per (nonnegative) test function.

    Positive values mean dissipation; the condition fails when a value drops
    below -C * eps * ||phi|| * (tau'-tau) * sup TV.
    """
    out = []
    for phi in phis:
        signed = _strip_integrals(
            sol, tau, tau_prime, phi,
            lambda vals: model.entropy(vals),
            lambda vals: model.entropy_flux(vals),
        )
        out.append(signed)
    return np.array(out)


@dataclass(frozen=True)
class ResidualReport:
    """Certification summary for one strip of an approximate solution."""

    eps: float
    tau: float
    tau_prime: float
    al_constant: float
    weak_residuals: tuple
    entropy_residuals: tuple
    entropy_denominators: tuple
    threshold: float
    context: dict = field(default_factory=dict)

    @property
    def certified_weak_constant(self) -> float:
        return max(self.weak_residuals)

    @property
    def certified_entropy_constant(self) -> float:
        deficits = [max(0.0, -s) / d for s, d in
                    zip(self.entropy_residuals, self.entropy_denominators)]
        return max(deficits)

    @property
    def weak_ok(self) -> bool:
        return self.certified_weak_constant <= self.threshold

    @property
    def entropy_ok(self) -> bool:
        return self.certified_entropy_constant <= self.threshold

    @property
    def passed(self) -> bool:
        return self.weak_ok and self.entropy_ok

    def to_json(self) -> str:
        payload = {
            "eps": self.eps,
            "tau": self.tau,
            "tau_prime": self.tau_prime,
            "al_constant": self.al_constant,
            "weak_residuals": list(self.weak_residuals),
            "entropy_residuals": list(self.entropy_residuals),
            "certified_weak_constant": self.certified_weak_constant,
            "certified_entropy_constant": self.certified_entropy_constant,
            "threshold": self.threshold,
            "weak_ok": self.weak_ok,
            "entropy_ok": self.entropy_ok,
            "passed": self.passed,
            "context": self.context,
        }
        return json.dumps(payload, sort_keys=True, indent=2)

    def to_csv(self) -> str:
        lines = ["condition,index,value,denominator"]
        for i, w in enumerate(self.weak_residuals):
            lines.append(f"weak,{i},{w!r},1.0")
        for i, (s, d) in enumerate(zip(self.entropy_residuals,
                                       self.entropy_denominators)):
            lines.append(f"entropy,{i},{s!r},{d!r}")
        return "\n".join(lines) + "\n"


def certify(model: SystemModel, sol: ApproxSolution, tau: float, tau_prime: float,
            phis=None, threshold: float = 10.0) -> ResidualReport:
    """Run all three conditions on one strip and collect a report."""
    if phis is None:
        r = sol.support_radius
        phis = bump_family(tau, tau_prime, -r, r)
    sup_tv = sol.sup_tv(tau, tau_prime)
    weak = weak_residual(model, sol, tau, tau_prime, phis)
    signed = entropy_residual(model, sol, tau, tau_prime, phis)
    dens = np.array([sol.eps * p.w1inf_norm * (tau_prime - tau) * sup_tv
                     for p in phis])
    return ResidualReport(
        eps=sol.eps, tau=tau, tau_prime=tau_prime,
        al_constant=al_check(sol),
        weak_residuals=tuple(float(w) for w in weak),
        entropy_residuals=tuple(float(s) for s in signed),
        entropy_denominators=tuple(float(d) for d in dens),
        threshold=threshold,
        context={"n_phis": len(phis), "sup_tv": sup_tv},
    )


# -- schemes and convergence ---------------------------------------------------

def sample_evolution(ev, eps: float, T: float, support_radius: float,
                     substeps: int = 1) -> ApproxSolution:
    """Snapshot a time-indexed solution on the eps-grid (optionally refined)."""
    dt = eps / substeps
    n = int(round(T / dt))
    snaps = {}
    for k in range(n + 1):
        t = k * dt
        snaps[t] = ev.at(t)
    return ApproxSolution(eps, snaps, support_radius)


def _godunov_flux_burgers(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # exact scalar Godunov flux for f(u) = u^2/2 (convex, minimum at 0)
    fa = 0.5 * np.maximum(a, 0.0) ** 2
    fb = 0.5 * np.minimum(b, 0.0) ** 2
    return np.maximum(fa, fb)


def upwind_burgers(u0: PiecewiseConstantFn, eps: float, T: float,
                   support_radius: float, cfl: float = 0.9,
                   speed_bound: float = 1.1) -> ApproxSolution:
    """First-order Godunov/upwind scheme projected to piecewise constants.

    The time step is the declared eps; the cell width follows from the CFL
    condition.  Snapshots are stored at every multiple of eps.
    """
    dx = eps * speed_bound / cfl
    r = support_radius
    edges = np.arange(-r, r + dx, dx)
    centers = 0.5 * (edges[:-1] + edges[1:])
    # project the datum to cell averages, exactly
    samples = u0.values_at(centers)[:, 0]
    cells = np.empty_like(samples)
    for i, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
        from .bv import integrate_piecewise

        cells[i] = integrate_piecewise(u0, Interval(lo, hi),
                                       lambda v: v[:, 0]) / dx
    left_bc = float(u0.vals[0, 0])
    right_bc = float(u0.vals[-1, 0])

    def to_fn(c):
        vals = np.concatenate(([left_bc], c, [right_bc]))
        return PiecewiseConstantFn.from_sorted(edges, vals.reshape(-1, 1))

    n = int(round(T / eps))
    snaps = {0.0: to_fn(cells)}
    for k in range(1, n + 1):
        padded = np.concatenate(([left_bc], cells, [right_bc]))
        flux = _godunov_flux_burgers(padded[:-1], padded[1:])
        cells = cells - (eps / dx) * (flux[1:] - flux[:-1])
        snaps[k * eps] = to_fn(cells)
    return ApproxSolution(eps, snaps, support_radius)


@dataclass(frozen=True)
class RateTable:
    """Distances to the reference semigroup per eps, with fitted behaviour."""

    rows: tuple                  # (eps, sup_t distance)
    slope: float                 # log-log fit of distance vs eps
    sqrt_log_coeff: float        # least-squares A in dist ~ A sqrt(eps)|ln eps|
    sqrt_log_relerr: float

    def to_csv(self) -> str:
        lines = ["eps,distance"]
        for e, d in self.rows:
            lines.append(f"{e!r},{d!r}")
        return "\n".join(lines) + "\n"


def convergence_rate(model: SystemModel, scheme, eps_grid, T: float,
                     delta_ref: float, samples_per_run: int = 9) -> RateTable:
    """Universal-rate measurement: distance from scheme output to the semigroup.

    `scheme` maps eps to an ApproxSolution; the reference trajectory is front
    tracking at resolution delta_ref started from the scheme's own datum.
    """
    eps_grid = [float(e) for e in eps_grid]
    if any(b >= a for a, b in zip(eps_grid, eps_grid[1:])):
        raise ValueError("eps_grid must be strictly decreasing")
    if delta_ref >= min(eps_grid):
        raise ValueError("reference resolution must be finer than min(eps_grid)")
    rows = []
    for eps in eps_grid:
        sol = scheme(eps)
        u0 = sol.at(0.0)
        run = FrontTrackingRun(model, u0, delta_ref)
        ts = [t for t in np.linspace(0.0, T, samples_per_run) if t > 0]
        worst = 0.0
        for t in ts:
            ref = run.state_at(float(t))
            worst = max(worst, l1_distance(sol.at(float(t)), ref))
        rows.append((eps, worst))
    es = np.array([r[0] for r in rows])
    ds = np.array([max(r[1], 1e-300) for r in rows])
    slope = float(np.polyfit(np.log(es), np.log(ds), 1)[0])
    basis = np.sqrt(es) * np.abs(np.log(es))
    coeff = float(np.dot(basis, ds) / np.dot(basis, basis))
    relerr = float(np.linalg.norm(coeff * basis - ds) / np.linalg.norm(ds))
    return RateTable(tuple(rows), slope, coeff, relerr)


def load_manifest(path) -> ApproxSolution:
    """Read an external solution: manifest JSON listing snapshot files.

    Format: {"eps": dt, "R": radius, "snapshots": [{"time": t, "file": name}]}
    with files in the piecewise-constant text format, relative to the
    manifest.  Timestamps are snapped to the nearest eps-multiple; the snap
    errors are recorded on the result.
    """
    import pathlib

    p = pathlib.Path(path)
    spec = json.loads(p.read_text())
    eps = float(spec["eps"])
    radius = float(spec["R"])
    snapshots = {}
    snap_errors = []
    for entry in spec["snapshots"]:
        t_raw = float(entry["time"])
        t = round(t_raw / eps) * eps
        snap_errors.append(abs(t - t_raw))
        snapshots[float(t)] = from_text((p.parent / entry["file"]).read_text())
    sol = ApproxSolution(eps, snapshots, radius)
    sol.snap_errors.extend(snap_errors)
    return sol
