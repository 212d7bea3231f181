"""Quantitative local stability estimates for entropy-weak solutions.

Each check computes both sides of one inequality exactly (piecewise-constant
integrands, breakpoint merging) and returns an :class:`EstimateReport`; the
multiplicative constants are measured or configured, never trusted blindly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .bv import Interval, PiecewiseConstantFn, integrate_piecewise, l1_distance
from .front_tracking import lipschitz_probe, semigroup
from .models import Constants, SystemModel, estimate_constants
from .riemann import _evolution_at

__all__ = [
    "TrapezoidSpec",
    "EstimateReport",
    "entropy_propagation_check",
    "local_l1_check",
    "local_l1_constant",
    "linear_evolve",
    "linear_comparison_check",
    "error_integrand",
    "error_estimate_check",
    "estimate_lipschitz",
    "reports_to_csv",
]


@dataclass(frozen=True)
class TrapezoidSpec:
    """Space-time trapezoid with sides of slope +-slope, base [a,b] at tau."""

    a: float
    b: float
    tau: float
    tau_prime: float
    slope: float

    def __post_init__(self):
        if not self.tau <= self.tau_prime:
            raise ValueError("need tau <= tau_prime")
        if not 2.0 * self.slope * (self.tau_prime - self.tau) < self.b - self.a:
            raise ValueError("trapezoid too tall: 2*slope*(tau'-tau) >= b-a")

    @property
    def top(self) -> Interval:
        shift = self.slope * (self.tau_prime - self.tau)
        return Interval(self.a + shift, self.b - shift)


@dataclass(frozen=True)
class EstimateReport:
    """One inequality instance: passed iff lhs <= constant*rhs + tol."""

    check: str
    lhs: float
    rhs: float
    constant: float
    passed: bool
    context: dict = field(default_factory=dict)
    tol: float = 1e-12

    @staticmethod
    def build(check: str, lhs: float, rhs: float, constant: float,
              context: dict | None = None, tol: float = 1e-12) -> "EstimateReport":
        return EstimateReport(check, float(lhs), float(rhs), float(constant),
                              bool(lhs <= constant * rhs + tol),
                              context or {}, tol)

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else (0.0 if self.lhs == 0 else np.inf)


def reports_to_csv(reports) -> str:
    lines = ["check,lhs,rhs,constant,pass,params"]
    for r in reports:
        params = json.dumps(r.context, sort_keys=True, separators=(",", ":"))
        lines.append(
            f"{r.check},{r.lhs!r},{r.rhs!r},{r.constant!r},"
            f"{str(r.passed).lower()},\"{params}\""
        )
    return "\n".join(lines) + "\n"


def _sq_distance_to(model: SystemModel, ustar):
    ustar = np.atleast_1d(np.asarray(ustar, dtype=float))

    def f(vals):
        return np.sum((vals - ustar) ** 2, axis=1)

    return f


def entropy_propagation_check(model: SystemModel, u_evolution, spec: TrapezoidSpec,
                              ustar, chat: float | None = None,
                              constants_samples: int = 10_000,
                              seed: int = 0) -> EstimateReport:
    """Squared-distance propagation through a trapezoid with speed-bound sides.

    lhs integrates |u(tau') - ustar|^2 over the shrunk top interval, rhs over
    the base at tau; the admissible amplification is chat = cprime/c0.
    """
    if chat is None:
        k: Constants = estimate_constants(model, constants_samples, seed)
        chat = k.cprime_hat / k.c0_hat
    dist2 = _sq_distance_to(model, ustar)
    base = Interval(spec.a, spec.b)
    u_tau = _evolution_at(u_evolution, spec.tau, window=(spec.a, spec.b))
    u_tau_p = _evolution_at(u_evolution, spec.tau_prime, window=(spec.a, spec.b))
    lhs = integrate_piecewise(u_tau_p, spec.top, dist2)
    rhs = integrate_piecewise(u_tau, base, dist2)
    return EstimateReport.build(
        "entropy_propagation", lhs, rhs, chat,
        {"a": spec.a, "b": spec.b, "tau": spec.tau, "tau_prime": spec.tau_prime,
         "slope": spec.slope, "ustar": np.atleast_1d(ustar).tolist()},
    )


def local_l1_constant(chat: float) -> float:
    """Admissible constant for the local L1 comparison, from the trapezoid chain."""
    return 3.0 * np.sqrt(3.0 * chat) + 1.0


def local_l1_check(model: SystemModel, u_evolution, tau: float, t: float,
                   a: float, b: float, chat: float | None = None,
                   constant: float | None = None,
                   constants_samples: int = 10_000, seed: int = 0) -> EstimateReport:
    """Local L1 distance between times against elapsed time * local variation.

    lhs integrates |u(t) - u(tau)| over the cone interval
    ]a + lam*(t-tau), b - lam*(t-tau)[, rhs is (t-tau) * TV{u(tau); ]a,b[}.
    """
    lam = model.lambda_hat
    if not tau <= t:
        raise ValueError("need tau <= t")
    if not 2.0 * lam * (t - tau) < b - a:
        raise ValueError("cone of dependence is empty")
    if constant is None:
        if chat is None:
            k = estimate_constants(model, constants_samples, seed)
            chat = k.cprime_hat / k.c0_hat
        constant = local_l1_constant(chat)
    shift = lam * (t - tau)
    cone = Interval(a + shift, b - shift)
    u_tau = _evolution_at(u_evolution, tau, window=(a, b))
    u_t = _evolution_at(u_evolution, t, window=(a, b))
    lhs = l1_distance(u_t, u_tau, cone)
    from .bv import total_variation

    rhs = (t - tau) * total_variation(u_tau, Interval(a, b))
    return EstimateReport.build(
        "local_l1", lhs, rhs, constant,
        {"tau": tau, "t": t, "a": a, "b": b, "slope": lam},
    )


def linear_evolve(model: SystemModel, u_tau: PiecewiseConstantFn, anchor,
                  t_minus_tau: float) -> PiecewiseConstantFn:
    """Exact solution of v_t + A v_x = 0, A frozen at the anchor state.

    Each characteristic component l_i . v translates rigidly at the anchor
    eigenvalue; the result is piecewise constant on the union of the
    translated breakpoint sets.
    """
    if t_minus_tau < 0:
        raise ValueError("need t - tau >= 0")
    model.require_in_domain(anchor)
    eig = model.eigen(np.atleast_1d(np.asarray(anchor, dtype=float)))
    if t_minus_tau == 0 or u_tau.xs.size == 0:
        return u_tau
    shifts = [lam * t_minus_tau for lam in eig.lambdas]
    edges = np.unique(np.concatenate([u_tau.xs + s for s in shifts]))
    # value on [edges[j], edges[j+1]) assembled from right-continuous samples
    out = np.zeros((edges.size + 1, model.n))
    for lam_shift, l_i, r_i in zip(shifts, eig.left, eig.right):
        comp0 = float(l_i @ u_tau.vals[0])
        comps = u_tau.values_at(edges - lam_shift) @ l_i
        out[0] += comp0 * r_i
        out[1:] += np.outer(comps, r_i)
    return PiecewiseConstantFn(edges, out)


def linear_comparison_check(model: SystemModel, u_evolution, tau: float, t: float,
                            k_interval: Interval, anchor, v_tau: float, eps: float,
                            constant: float = 50.0) -> EstimateReport:
    """Defect of the frozen-coefficient linear prediction on a low-variation zone.

    lhs is (1/(t-tau)) * integral over k_interval of |u(t) - U_lin(t)|, with
    U_lin evolved linearly from u(tau) around the anchor; rhs is
    v_tau*(v_tau + eps).
    """
    if not t > tau:
        raise ValueError("need t > tau")
    if not (np.isfinite(k_interval.a) and np.isfinite(k_interval.b)):
        raise ValueError("comparison interval must be bounded")
    pad = model.lambda_hat * (t - tau) + 1.0
    u_tau = _evolution_at(u_evolution, tau, window=(k_interval.a - pad,
                                                    k_interval.b + pad))
    u_t = _evolution_at(u_evolution, t, window=(k_interval.a, k_interval.b))
    linear = linear_evolve(model, u_tau, anchor, t - tau)
    lhs = l1_distance(u_t, linear, k_interval) / (t - tau)
    rhs = v_tau * (v_tau + eps)
    return EstimateReport.build(
        "linear_comparison", lhs, rhs, constant,
        {"tau": tau, "t": t, "a": k_interval.a, "b": k_interval.b,
         "v_tau": v_tau, "eps": eps},
    )


def error_integrand(model: SystemModel, u_evolution, tau: float, h: float,
                    delta: float) -> float:
    """||u(tau+h) - S_h u(tau)|| / h with the front-tracking semigroup."""
    if h <= 0:
        raise ValueError("h must be positive")
    u_tau = _evolution_at(u_evolution, tau)
    u_next = _evolution_at(u_evolution, tau + h)
    evolved = semigroup(model, u_tau, h, delta)
    return l1_distance(u_next, evolved) / h


def estimate_lipschitz(model: SystemModel, u0: PiecewiseConstantFn, delta: float,
                       seed: int = 0, probes: int = 8,
                       horizon: float = 0.5) -> float:
    """Probed semigroup Lipschitz constant (never below 1)."""
    rng = np.random.Generator(np.random.Philox(seed))
    worst = 1.0
    for _ in range(probes):
        dx = rng.uniform(0.05, 0.3)
        s = rng.uniform(0.0, horizon)
        t = rng.uniform(0.0, horizon)
        ratio = lipschitz_probe(model, u0, u0.shift(dx), s, t, delta)
        worst = max(worst, ratio)
    return worst


def error_estimate_check(model: SystemModel, u_evolution, T: float, h_grid,
                         delta: float, l_hat: float | None = None,
                         tau_points: int = 64, tol: float = 1e-9,
                         seed: int = 0) -> EstimateReport:
    """Distance to the semigroup against the integrated instantaneous defect.

    lhs = ||u(T) - S_T u(0)||; rhs = l_hat * trapezoid sum over a uniform tau
    grid of min over h_grid of the instantaneous defect.  The grid minimum
    over-estimates the vanishing-h limit, so a pass is conservative.
    """
    h_grid = [float(h) for h in h_grid]
    if not h_grid or min(h_grid) <= 0:
        raise ValueError("h_grid must contain positive steps")
    u0 = _evolution_at(u_evolution, 0.0)
    if l_hat is None:
        l_hat = estimate_lipschitz(model, u0, delta, seed=seed)
    lhs = l1_distance(_evolution_at(u_evolution, T),
                      semigroup(model, u0, T, delta))
    taus = np.linspace(0.0, T, tau_points)
    vals = []
    for tau in taus:
        usable = [h for h in h_grid if tau + h <= T + 1e-12]
        if not usable:
            usable = [min(h_grid)]
        vals.append(min(error_integrand(model, u_evolution, tau, h, delta)
                        for h in usable))
    integral = float(np.trapezoid(vals, taus))
    return EstimateReport.build(
        "error_estimate", lhs, integral, l_hat,
        {"T": T, "h_grid": h_grid, "delta": delta, "tau_points": tau_points},
        tol=tol,
    )
