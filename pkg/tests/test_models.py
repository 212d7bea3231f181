import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hyplab.models import (
    Box,
    Burgers,
    DomainError,
    HyperbolicityError,
    LinearSystem,
    PSystem,
    check_entropy_compatibility,
    estimate_constants,
    make_model,
    relative_entropy,
    relative_entropy_pairs,
)


def all_models():
    return [Burgers(), PSystem(), LinearSystem()]


# -- relative entropy ---------------------------------------------------------

def test_relative_entropy_identity(burgers):
    assert relative_entropy(burgers, [0.3], [0.3]) == (0.0, 0.0)


def test_relative_entropy_burgers_anchor(burgers):
    eta, q = relative_entropy(burgers, [1.0], [0.0])
    assert eta == pytest.approx(0.5)
    assert q == pytest.approx(1.0 / 3.0)


def test_relative_entropy_psystem_anchor(psystem):
    # eta(omega|ustar) = 1/v - 1/v* + p(v*)(v - v*) for u = u* = 0
    eta, q = relative_entropy(psystem, [2.0, 0.0], [1.0, 0.0])
    assert eta == pytest.approx(0.5)
    assert q == pytest.approx(0.0)


def test_relative_entropy_domain_error(burgers):
    with pytest.raises(DomainError):
        relative_entropy(burgers, [2.0], [0.0])


@pytest.mark.parametrize("model", all_models(), ids=lambda m: m.name)
def test_relative_entropy_bounds_sampled(model):
    # 10^4 random pairs: eta >= c0 d^2 and -lambda_hat eta +- q <= 0
    rng = np.random.Generator(np.random.Philox(99))
    omega = model.domain.sample(rng, 10_000)
    ustar = model.domain.sample(rng, 10_000)
    eta, q = relative_entropy_pairs(model, omega, ustar)
    d2 = np.sum((omega - ustar) ** 2, axis=1)
    assert np.all(eta >= model.c0 * d2 - 1e-12)
    assert np.all(-model.lambda_hat * eta + np.abs(q) <= 1e-12)


# -- estimated constants ------------------------------------------------------

def test_constants_burgers_exact(burgers):
    k = estimate_constants(burgers, 4000, 5)
    # eta(omega|ustar) = (omega-ustar)^2/2 identically
    assert k.c0_hat == pytest.approx(0.5, abs=1e-9)
    assert k.cprime_hat == pytest.approx(0.5, rel=1e-6)
    assert k.lambda_hat <= burgers.lambda_hat


def test_constants_linear_quadratic(linear):
    k = estimate_constants(linear, 4000, 5)
    assert k.c0_hat == pytest.approx(0.5, abs=1e-9)


def test_constants_psystem_finite(psystem):
    k = estimate_constants(psystem, 4000, 5)
    assert 0 < k.c0_hat < k.cprime_hat < np.inf
    # brute-force grid min/max oracle; exact segment bound is
    # min eig of Hess(eta)/2 over the box = gamma*vmax^(-gamma-1)/2 = 0.125
    grid = psystem.domain.grid(30)
    omega = np.repeat(grid, grid.shape[0], axis=0)
    ustar = np.tile(grid, (grid.shape[0], 1))
    eta, q = relative_entropy_pairs(psystem, omega, ustar)
    d2 = np.sum((omega - ustar) ** 2, axis=1)
    keep = d2 > 1e-12
    lo = float(np.min(eta[keep] / d2[keep]))
    hi = float(np.max(np.maximum(eta, np.abs(q))[keep] / d2[keep]))
    assert lo >= psystem.c0 - 1e-9
    assert lo == pytest.approx(psystem.c0, rel=0.1)
    # the dense grid brackets the sparser random estimates from outside
    assert k.c0_hat >= lo - 1e-9
    assert k.cprime_hat <= hi + 1e-9
    assert hi < 20.0


def test_constants_need_samples(burgers):
    with pytest.raises(ValueError):
        estimate_constants(burgers, 1, 0)


# -- eigenstructure -----------------------------------------------------------

def test_eigen_burgers_scalar(burgers):
    e = burgers.eigen([2.0])
    assert e.lambdas[0] == pytest.approx(2.0)
    assert e.left[0, 0] == 1.0 and e.right[0, 0] == 1.0


def test_eigen_psystem_closed_form_vs_numeric(psystem, rng):
    for _ in range(50):
        u = psystem.domain.sample(rng, 1)[0]
        e = psystem.eigen(u)
        # closed form +-sqrt(-p'(v))
        lam = np.sqrt(-psystem.dpressure(u[0]))
        assert e.lambdas == pytest.approx([-lam, lam])
        numeric = np.sort(np.linalg.eigvals(psystem.jacobian(u)).real)
        assert e.lambdas == pytest.approx(numeric, rel=1e-9)


def test_eigen_linear_state_independent(linear, rng):
    e0 = linear.eigen([0.0, 0.0])
    for _ in range(10):
        u = linear.domain.sample(rng, 1)[0]
        assert np.allclose(linear.eigen(u).lambdas, e0.lambdas)


@pytest.mark.parametrize("model", all_models(), ids=lambda m: m.name)
def test_eigen_biorthonormality(model):
    rng = np.random.Generator(np.random.Philox(3))
    for _ in range(1000):
        u = model.domain.sample(rng, 1)[0]
        e = model.eigen(u)
        gram = e.left @ e.right.T
        assert np.max(np.abs(gram - np.eye(model.n))) < 1e-10


def test_linear_requires_symmetric():
    with pytest.raises(ValueError):
        LinearSystem([[1.0, 0.5], [0.0, -1.0]])


def test_hyperbolicity_guard():
    p = PSystem(domain=Box([0.5, -1.0], [2.0, 1.0]))
    e = p.eigen([1.0, 0.0])
    assert np.diff(e.lambdas)[0] > 1e-10
    with pytest.raises(ValueError):
        LinearSystem([[1.0, 0.0], [0.0, 1.0]])  # collided eigenvalues


# -- field type certificates ----------------------------------------------------

def test_gnl_certificates(burgers, psystem):
    rng = np.random.Generator(np.random.Philox(17))
    for model in (burgers, psystem):
        for _ in range(200):
            u = model.domain.sample(rng, 1)[0]
            for i in range(1, model.n + 1):
                assert abs(model.char_derivative(i, u)) > 0.01


def test_ld_certificates(linear, rng):
    for _ in range(50):
        u = linear.domain.sample(rng, 1)[0]
        for i in (1, 2):
            assert linear.char_derivative(i, u) == 0.0


def test_char_derivative_matches_finite_differences(psystem, rng):
    # independent oracle: directional finite difference of eigenvalues
    h = 1e-6
    for _ in range(20):
        u = psystem.domain.shrink(0.9).sample(rng, 1)[0]
        e = psystem.eigen(u)
        for i in (1, 2):
            r = e.right[i - 1]
            lp = psystem.eigen(u + h * r).lambdas[i - 1]
            lm = psystem.eigen(u - h * r).lambdas[i - 1]
            fd = (lp - lm) / (2 * h)
            assert psystem.char_derivative(i, u) == pytest.approx(fd, rel=1e-4)


# -- entropy compatibility ------------------------------------------------------

@pytest.mark.parametrize("model", all_models(), ids=lambda m: m.name)
def test_entropy_compatibility_residual(model):
    assert check_entropy_compatibility(model, 100) <= 1e-8


def test_entropy_compatibility_detects_corruption(burgers):
    class Corrupted(Burgers):
        def entropy_flux(self, u):
            base = super().entropy_flux(u)
            u = np.atleast_2d(np.asarray(u, dtype=float))
            bump = 0.1 * u[:, 0]
            return base + (float(bump[0]) if np.isscalar(base) else bump)

    assert check_entropy_compatibility(Corrupted(), 100) == pytest.approx(0.1, rel=1e-4)


# -- speed bound ----------------------------------------------------------------

@pytest.mark.parametrize("model", all_models(), ids=lambda m: m.name)
def test_char_speeds_below_lambda_hat(model):
    rng = np.random.Generator(np.random.Philox(12))
    lams = model.eigenvalues(model.domain.sample(rng, 2000))
    assert np.max(np.abs(lams)) <= model.lambda_hat


@given(st.floats(-0.99, 0.99), st.floats(-0.99, 0.99))
def test_burgers_relative_entropy_formula(a, b):
    eta, q = relative_entropy(Burgers(), [a], [b])
    assert eta == pytest.approx(0.5 * (a - b) ** 2, abs=1e-12)
    assert q == pytest.approx((a - b) ** 2 * (2 * a + b) / 6.0, abs=1e-12)


def test_make_model():
    assert make_model("burgers").name == "burgers"
    assert make_model("p_system", gamma=1.4).gamma == 1.4
    with pytest.raises(ValueError):
        make_model("euler")
