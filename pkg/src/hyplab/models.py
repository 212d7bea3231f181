"""Conservation-law models: flux, eigenstructure, entropy pair, relative entropy.

Three desk-scale systems are shipped:

* ``Burgers``      -- scalar, genuinely nonlinear, quadratic entropy;
* ``PSystem``      -- 2x2 Lagrangian gas dynamics with p(v) = v^(-gamma),
                      both fields genuinely nonlinear;
* ``LinearSystem`` -- 2x2 constant symmetric coefficients, both fields
                      linearly degenerate.

All state evaluations are closed form and vectorized over a leading axis;
finite differences appear only in tests, as independent cross-checks.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

__all__ = [
    "DomainError",
    "HyperbolicityError",
    "Box",
    "EigenData",
    "SystemModel",
    "Burgers",
    "PSystem",
    "LinearSystem",
    "relative_entropy",
    "relative_entropy_pairs",
    "estimate_constants",
    "check_entropy_compatibility",
    "make_model",
]

GNL = "gnl"
LD = "ld"

# margin applied to grid-sampled speed bounds; the bound is measured, not proven
_SPEED_MARGIN = 1.05


class DomainError(ValueError):
    """A state left the admissible box."""


class HyperbolicityError(ValueError):
    """Eigenvalues collided within tolerance."""


class Box:
    """Axis-aligned box of admissible states."""

    def __init__(self, lo, hi):
        self.lo = np.atleast_1d(np.asarray(lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if self.lo.shape != self.hi.shape or not np.all(self.lo < self.hi):
            raise ValueError("box needs lo < hi componentwise")

    @property
    def n(self) -> int:
        return self.lo.size

    def contains(self, u, atol: float = 1e-12) -> bool:
        u = np.asarray(u, dtype=float)
        return bool(np.all(u >= self.lo - atol) and np.all(u <= self.hi + atol))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=(size, self.n))

    def grid(self, per_dim: int) -> np.ndarray:
        axes = [np.linspace(a, b, per_dim) for a, b in zip(self.lo, self.hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def shrink(self, factor: float) -> "Box":
        mid = 0.5 * (self.lo + self.hi)
        half = 0.5 * factor * (self.hi - self.lo)
        return Box(mid - half, mid + half)

    def __repr__(self):
        return f"Box({self.lo.tolist()}, {self.hi.tolist()})"


class EigenData(NamedTuple):
    """Eigenstructure at a state: sorted eigenvalues, biorthonormal rows l_i, r_i."""

    lambdas: np.ndarray
    left: np.ndarray   # left[i] is the covector l_i
    right: np.ndarray  # right[i] is the vector r_i
    kinds: tuple


def _rows(u, n):
    """View input as (m, n) plus a flag for whether it was a single state."""
    u = np.asarray(u, dtype=float)
    single = u.ndim == 1
    return np.atleast_2d(u), single


class SystemModel:
    """Common interface; subclasses fill in closed-form physics."""

    name: str = "?"
    n: int = 0

    def __init__(self, domain: Box):
        if domain.n != self.n:
            raise ValueError(f"{self.name}: domain dimension {domain.n} != {self.n}")
        self.domain = domain
        self.c0 = self._convexity_constant()
        self.lambda_hat = self._speed_bound()

    # physics, vectorized over a leading axis
    def flux(self, u):
        raise NotImplementedError

    def jacobian(self, u):
        raise NotImplementedError

    def entropy(self, u):
        raise NotImplementedError

    def entropy_flux(self, u):
        raise NotImplementedError

    def entropy_gradient(self, u):
        raise NotImplementedError

    def eigenvalues(self, u):
        raise NotImplementedError

    def eigen(self, u) -> EigenData:
        raise NotImplementedError

    def char_derivative(self, i: int, u) -> float:
        """Directional derivative of lambda_i along r_i (0 for LD fields)."""
        raise NotImplementedError

    @property
    def field_kinds(self) -> tuple:
        raise NotImplementedError

    def _convexity_constant(self) -> float:
        raise NotImplementedError

    def _check_separation(self, lams):
        scale = 1.0 + float(np.max(np.abs(lams)))
        if lams.size > 1 and np.min(np.diff(lams)) < 1e-10 * scale:
            raise HyperbolicityError(f"{self.name}: eigenvalue collision at {lams}")

    def require_in_domain(self, u):
        if not self.domain.contains(u):
            raise DomainError(f"{self.name}: state {np.asarray(u)} outside {self.domain}")

    def _speed_bound(self) -> float:
        """Measured bound dominating char speeds and |q_rel|/eta_rel on the box."""
        grid = self.domain.grid(15)
        lam = np.max(np.abs(self.eigenvalues(grid)))
        omega = np.repeat(grid, grid.shape[0], axis=0)
        ustar = np.tile(grid, (grid.shape[0], 1))
        eta, q = relative_entropy_pairs(self, omega, ustar)
        keep = eta > 1e-14
        ratio = np.max(np.abs(q[keep]) / eta[keep]) if keep.any() else 0.0
        return float(_SPEED_MARGIN * max(lam, ratio))

    def __repr__(self):
        return f"{type(self).__name__}(domain={self.domain})"


class Burgers(SystemModel):
    """u_t + (u^2/2)_x = 0 with eta = u^2/2, q = u^3/3."""

    name = "burgers"
    n = 1

    def __init__(self, domain: Box | None = None):
        super().__init__(domain or Box([-1.0], [1.0]))

    def flux(self, u):
        return 0.5 * np.asarray(u, dtype=float) ** 2

    def jacobian(self, u):
        u = np.asarray(u, dtype=float)
        return u.reshape(u.shape + (1,)).copy()

    def entropy(self, u):
        u2, single = _rows(u, 1)
        out = 0.5 * u2[:, 0] ** 2
        return float(out[0]) if single else out

    def entropy_flux(self, u):
        u2, single = _rows(u, 1)
        out = u2[:, 0] ** 3 / 3.0
        return float(out[0]) if single else out

    def entropy_gradient(self, u):
        return np.asarray(u, dtype=float).copy()

    def eigenvalues(self, u):
        return np.asarray(u, dtype=float).copy()

    def eigen(self, u) -> EigenData:
        u = np.asarray(u, dtype=float).reshape(-1)
        return EigenData(u.copy(), np.ones((1, 1)), np.ones((1, 1)), (GNL,))

    def char_derivative(self, i, u):
        return 1.0

    @property
    def field_kinds(self):
        return (GNL,)

    def _convexity_constant(self):
        return 0.5


class PSystem(SystemModel):
    """v_t - u_x = 0, u_t + p(v)_x = 0 with p(v) = v^(-gamma).

    State is (v, u); entropy is the mechanical energy u^2/2 + P(v) with
    P'(v) = -p(v).  The sound speed is c(v) = sqrt(-p'(v)).
    """

    name = "p_system"
    n = 2

    def __init__(self, gamma: float = 2.0, domain: Box | None = None):
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        self.gamma = float(gamma)
        super().__init__(domain or Box([0.5, -1.0], [2.0, 1.0]))
        if self.domain.lo[0] <= 0:
            raise ValueError("specific volume must stay away from vacuum (v > 0)")

    def pressure(self, v):
        return np.asarray(v, dtype=float) ** (-self.gamma)

    def dpressure(self, v):
        return -self.gamma * np.asarray(v, dtype=float) ** (-self.gamma - 1.0)

    def sound_speed(self, v):
        return np.sqrt(-self.dpressure(v))

    def _pressure_primitive(self, v):
        # P(v) with P' = -p
        v = np.asarray(v, dtype=float)
        g = self.gamma
        if g == 1.0:
            return -np.log(v)
        return v ** (1.0 - g) / (g - 1.0)

    def sound_speed_integral(self, v):
        """Antiderivative of c(v), used by the rarefaction curves."""
        v = np.asarray(v, dtype=float)
        g = self.gamma
        if g == 1.0:
            return np.log(v)  # c(v) = 1/v
        return -(2.0 * np.sqrt(g) / (g - 1.0)) * v ** (-(g - 1.0) / 2.0)

    def flux(self, u):
        w, single = _rows(u, 2)
        out = np.stack([-w[:, 1], self.pressure(w[:, 0])], axis=-1)
        return out[0] if single else out

    def jacobian(self, u):
        w, single = _rows(u, 2)
        m = w.shape[0]
        out = np.zeros((m, 2, 2))
        out[:, 0, 1] = -1.0
        out[:, 1, 0] = self.dpressure(w[:, 0])
        return out[0] if single else out

    def entropy(self, u):
        w, single = _rows(u, 2)
        out = 0.5 * w[:, 1] ** 2 + self._pressure_primitive(w[:, 0])
        return float(out[0]) if single else out

    def entropy_flux(self, u):
        w, single = _rows(u, 2)
        out = w[:, 1] * self.pressure(w[:, 0])
        return float(out[0]) if single else out

    def entropy_gradient(self, u):
        w, single = _rows(u, 2)
        out = np.stack([-self.pressure(w[:, 0]), w[:, 1]], axis=-1)
        return out[0] if single else out

    def eigenvalues(self, u):
        w, single = _rows(u, 2)
        c = self.sound_speed(w[:, 0])
        out = np.stack([-c, c], axis=-1)
        return out[0] if single else out

    def eigen(self, u) -> EigenData:
        u = np.asarray(u, dtype=float)
        c = float(self.sound_speed(u[0]))
        lams = np.array([-c, c])
        self._check_separation(lams)
        right = np.array([[1.0, c], [1.0, -c]])
        left = np.array([[0.5, 0.5 / c], [0.5, -0.5 / c]])
        return EigenData(lams, left, right, (GNL, GNL))

    def char_derivative(self, i, u):
        v = float(np.asarray(u, dtype=float)[0])
        g = self.gamma
        cprime = -np.sqrt(g) * (g + 1.0) / 2.0 * v ** (-(g + 3.0) / 2.0)
        # d lambda_1 . r_1 = -c'(v), d lambda_2 . r_2 = c'(v)
        return -cprime if i == 1 else cprime

    @property
    def field_kinds(self):
        return (GNL, GNL)

    def _convexity_constant(self):
        # Hessian of eta is diag(-p'(v), 1); the box is convex so the
        # segment-minimum eigenvalue over the box gives an exact constant
        vmax = self.domain.hi[0]
        return 0.5 * min(1.0, float(-self.dpressure(vmax)))


class LinearSystem(SystemModel):
    """u_t + A u_x = 0 with constant symmetric A and eta = |u|^2/2."""

    name = "linear"
    n = 2

    def __init__(self, a_matrix=None, domain: Box | None = None):
        a = np.array([[1.0, 0.3], [0.3, -0.5]]) if a_matrix is None else np.asarray(
            a_matrix, dtype=float
        )
        if a.shape != (2, 2):
            raise ValueError("A must be 2x2")
        if not np.allclose(a, a.T, atol=1e-14):
            raise ValueError("A must be symmetric so that eta=|u|^2/2 is an entropy")
        self.a_matrix = a
        lams, vecs = np.linalg.eigh(a)
        self._lams = lams
        self._right = vecs.T          # orthonormal rows
        self._left = vecs.T           # symmetric A: left = right
        super().__init__(domain or Box([-1.0, -1.0], [1.0, 1.0]))
        self._check_separation(self._lams)

    def flux(self, u):
        w, single = _rows(u, 2)
        out = w @ self.a_matrix.T
        return out[0] if single else out

    def jacobian(self, u):
        w, single = _rows(u, 2)
        out = np.broadcast_to(self.a_matrix, (w.shape[0], 2, 2)).copy()
        return out[0] if single else out

    def entropy(self, u):
        w, single = _rows(u, 2)
        out = 0.5 * np.sum(w ** 2, axis=-1)
        return float(out[0]) if single else out

    def entropy_flux(self, u):
        w, single = _rows(u, 2)
        out = 0.5 * np.einsum("mi,ij,mj->m", w, self.a_matrix, w)
        return float(out[0]) if single else out

    def entropy_gradient(self, u):
        return np.asarray(u, dtype=float).copy()

    def eigenvalues(self, u):
        w, single = _rows(u, 2)
        out = np.broadcast_to(self._lams, (w.shape[0], 2)).copy()
        return out[0] if single else out

    def eigen(self, u) -> EigenData:
        return EigenData(self._lams.copy(), self._left.copy(), self._right.copy(),
                         (LD, LD))

    def char_derivative(self, i, u):
        return 0.0

    @property
    def field_kinds(self):
        return (LD, LD)

    def _convexity_constant(self):
        return 0.5


# -- relative entropy --------------------------------------------------------

def relative_entropy_pairs(model: SystemModel, omega, ustar):
    """Vectorized eta(omega|ustar), q(omega|ustar) without domain checks."""
    omega = np.atleast_2d(np.asarray(omega, dtype=float))
    ustar = np.atleast_2d(np.asarray(ustar, dtype=float))
    grad = model.entropy_gradient(ustar)
    eta = (
        model.entropy(omega)
        - model.entropy(ustar)
        - np.sum(grad * (omega - ustar), axis=-1)
    )
    q = (
        model.entropy_flux(omega)
        - model.entropy_flux(ustar)
        - np.sum(grad * (model.flux(omega) - model.flux(ustar)), axis=-1)
    )
    return eta, q


def relative_entropy(model: SystemModel, omega, ustar):
    """Entropy and entropy-flux of omega relative to the constant state ustar."""
    model.require_in_domain(omega)
    model.require_in_domain(ustar)
    eta, q = relative_entropy_pairs(model, omega, ustar)
    return float(eta[0]), float(q[0])


class Constants(NamedTuple):
    c0_hat: float
    cprime_hat: float
    lambda_hat: float


def estimate_constants(model: SystemModel, samples: int, seed: int) -> Constants:
    """Sampled convexity/regularity/speed constants of the relative entropy.

    c0_hat bounds eta_rel from below, cprime_hat bounds eta_rel and |q_rel|
    from above (both per squared distance), and lambda_hat is the smallest
    speed with -lambda_hat*eta_rel +- q_rel <= 0 on every sampled pair.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples")
    rng = np.random.Generator(np.random.Philox(seed))
    omega = model.domain.sample(rng, samples)
    ustar = model.domain.sample(rng, samples)
    d2 = np.sum((omega - ustar) ** 2, axis=-1)
    keep = d2 > 1e-20
    if not keep.any():
        raise ValueError("degenerate sampling: all pairs coincide")
    omega, ustar, d2 = omega[keep], ustar[keep], d2[keep]
    eta, q = relative_entropy_pairs(model, omega, ustar)
    return Constants(
        c0_hat=float(np.min(eta / d2)),
        cprime_hat=float(np.max(np.maximum(eta, np.abs(q)) / d2)),
        lambda_hat=float(np.max(np.abs(q) / eta)),
    )


def check_entropy_compatibility(model: SystemModel, samples: int) -> float:
    """Max residual of grad(q) = grad(eta) Df, gradients by central differences."""
    grid = model.domain.shrink(0.98).grid(max(2, int(np.ceil(samples ** (1.0 / model.n)))))
    h = 1e-6
    worst = 0.0
    for u in grid:
        dq = np.zeros(model.n)
        deta = np.zeros(model.n)
        for j in range(model.n):
            e = np.zeros(model.n)
            e[j] = h
            dq[j] = (model.entropy_flux(u + e) - model.entropy_flux(u - e)) / (2 * h)
            deta[j] = (model.entropy(u + e) - model.entropy(u - e)) / (2 * h)
        resid = np.linalg.norm(dq - deta @ model.jacobian(u))
        worst = max(worst, float(resid))
    return worst


_MODEL_IDS = {"burgers": Burgers, "p_system": PSystem, "linear": LinearSystem}


def make_model(model_id: str, **kwargs) -> SystemModel:
    try:
        cls = _MODEL_IDS[model_id]
    except KeyError:
        raise ValueError(f"unknown model {model_id!r}") from None
    return cls(**kwargs)
