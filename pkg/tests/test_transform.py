import numpy as np
import pytest

from rimkit.errors import ParameterError
from rimkit.linear import LinearCocycleSpec, propagate_linear
from rimkit.noise import WienerGrid, ou_stationary, temperedness_slope
from rimkit.nonlinear import NonlinearField, make_cutoff
from rimkit.spectral import SpectralModel, shifted_dirichlet_laplacian
from rimkit.transform import (
    ConjugatedField,
    SPDEModel,
    build_T,
    conjugate_flow,
    effective_B1_tilde,
    integrate_stratonovich,
    conjugation_check,
    make_spde,
    stratonovich_linear_exact,
)

MODEL = shifted_dirichlet_laplacian(4, 2.0)
D = np.random.default_rng(5).uniform(-1, 1, (2, 4))
X = np.array([1.0, 0.5, -0.3, 0.2])
TANH = NonlinearField("lipschitz_componentwise", 1.0, mixing="sine")


@pytest.fixture(scope="module")
def spde():
    return make_spde(MODEL, TANH, D, [1.0, 1.0], 1, 0.0, 200.0, 0.001)


def test_rejects_hoelder_field():
    with pytest.raises(ParameterError):
        make_spde(MODEL, NonlinearField("hoelder_radial", 1.0), D, [1.0, 1.0], 0, 0.0, 1.0, 0.01)


def test_zero_path_gives_identity():
    path = WienerGrid(-10.0, 2.0, 0.01, np.zeros((1201, 1)), seed=0)
    ou = ou_stationary(path, 0, 1.0)
    lin = LinearCocycleSpec(MODEL, [[1.0, 2.0, 3.0, 4.0]], [1.0], (ou,))
    # the stationary start is damped to below 1e-4 after 10 time units
    assert np.allclose(build_T(SPDEModel(lin, TANH), 0.0).scales, 1.0, atol=1e-3)


def test_T_inverse_round_trip(spde):
    for t in (0.0, 0.37, 12.5):
        T = build_T(spde, t)
        assert np.allclose(T.apply(T.apply_inverse(X)), X, rtol=1e-15)
        assert T.norm * T.inverse_norm >= 1.0


def test_T_commutes_with_linear_flow(spde):
    T = build_T(spde, 0.0)
    a = T.apply(propagate_linear(spde.linear, 0.8, X))
    b = propagate_linear(spde.linear, 0.8, T.apply(X))
    assert np.allclose(a, b, rtol=1e-15, atol=0)


def test_inverse_norm_bound(spde):
    for t in np.arange(0, 50, 0.5):
        z = np.array([o(t) for o in spde.linear.ou])
        bound = np.prod(np.exp(np.abs(D).max(axis=1) * np.abs(z)))
        assert build_T(spde, t).inverse_norm <= bound * (1 + 1e-12)


def test_inverse_norm_tempered(spde):
    t = np.arange(0, 200, 1.0)
    x = np.array([build_T(spde, s).inverse_norm for s in t])
    assert abs(temperedness_slope(t, x)) < 0.02


def test_conjugated_field_at(spde):
    F = ConjugatedField(spde)
    u = np.array([0.2, -0.1, 0.4, 0.3])
    assert np.array_equal(F(u, 1.5), F.at(1.5)(u))
    T = build_T(spde, 1.5)
    assert np.allclose(F(u, 1.5), T.apply_inverse(TANH(T.apply(u))))
    assert effective_B1_tilde(spde, 1.5, 1.0, samples=2000) > 0


def test_pure_semigroup():
    spde0 = make_spde(MODEL, NonlinearField("zero"), np.zeros((1, 4)), [1.0], 0, 0.0, 1.0, 0.01)
    assert np.allclose(conjugate_flow(spde0, X, 1.0, 0.01), np.exp(MODEL.mu) * X, rtol=1e-14)


def test_zero_field_closed_form():
    spde0 = make_spde(MODEL, NonlinearField("zero"), D, [1.0, 1.0], 1, 0.0, 1.0, 0.001)
    exact = stratonovich_linear_exact(spde0, X, 1.0)
    assert np.max(np.abs(conjugate_flow(spde0, X, 1.0, 0.001) - exact)) <= 1e-6
    # the Heun reference is only first order, so it gets C dt instead
    heun = [np.max(np.abs(integrate_stratonovich(spde0, X, 1.0, dt) - exact)) for dt in (0.002, 0.001)]
    assert heun[1] <= 2.0 * 0.001
    assert heun[1] < heun[0]


def test_heun_geometric_brownian_order():
    # d = 1 on every mode, N = 1: X(t) = x exp(mu t + w(t)); order 1 in dt
    model = SpectralModel([0.5, -1.0])
    errs = []
    for seed in range(8):
        spde1 = make_spde(model, NonlinearField("zero"), [[1.0, 1.0]], [1.0], seed, 0.0, 1.0, 0.00025)
        exact = stratonovich_linear_exact(spde1, [1.0, 1.0], 1.0)
        errs.append(
            [np.linalg.norm(integrate_stratonovich(spde1, [1.0, 1.0], 1.0, dt) - exact) for dt in (0.004, 0.002, 0.001)]
        )
    mean = np.mean(errs, axis=0)
    assert 1.5 < mean[0] / mean[1] < 2.8
    assert 1.5 < mean[1] / mean[2] < 2.8


def test_noise_free_heun():
    spde0 = make_spde(MODEL, TANH, np.zeros((1, 4)), [1.0], 0, 0.0, 1.0, 0.01)
    dt = 0.01

    def f(x):
        return MODEL.mu * x + TANH(x)

    pred = X + dt * f(X)
    heun = X + 0.5 * dt * (f(X) + f(pred))
    assert np.allclose(integrate_stratonovich(spde0, X, dt, dt), heun, rtol=1e-15)


def test_noise_free_conjugation_agrees():
    spde0 = make_spde(MODEL, TANH, np.zeros((1, 4)), [1.0], 0, 0.0, 1.0, 0.0005)
    gaps = [
        np.linalg.norm(conjugate_flow(spde0, X, 1.0, dt) - integrate_stratonovich(spde0, X, 1.0, dt))
        for dt in (0.004, 0.002)
    ]
    assert gaps[1] < 0.7 * gaps[0]
    assert gaps[0] < 0.05


def test_conjugated_cocycle_residual(spde):
    cf = make_cutoff(TANH, 2.0, dim=4)
    # split on the grid: T(theta_tau omega) cancels against its inverse
    full = conjugate_flow(spde, X, 2.0, 0.01, field=cf)
    mid = conjugate_flow(spde, X, 0.7, 0.01, field=cf)
    assert np.linalg.norm(full - conjugate_flow(spde, mid, 1.3, 0.01, field=cf, at=0.7)) < 1e-12
    # split off the coarse grid: residual <= C dt
    for dt in (0.02, 0.01, 0.004, 0.002):
        h = 0.5 * dt
        full = conjugate_flow(spde, X, 2.0 + h, h, field=cf)
        left = conjugate_flow(spde, X, h, h, field=cf)
        res = np.linalg.norm(full - conjugate_flow(spde, left, 2.0, dt, field=cf, at=h))
        assert res <= 2.0 * dt


def test_lm2_check_report():
    rep = conjugation_check(MODEL, TANH, D, [1.0, 1.0], X, 1.0, [2.5e-3, 1e-2, 5e-3], 4, seed0=7)
    assert rep.per_seed.shape == (4, 3)
    assert rep.dt_levels == (1e-2, 5e-3, 2.5e-3)
    assert np.allclose(rep.mean_errors, rep.per_seed.mean(axis=0))
    slope = np.polyfit(np.log(rep.dt_levels), np.log(rep.mean_errors), 1)[0]
    assert rep.fitted_order == pytest.approx(slope)
    assert rep.passed == (rep.fitted_order >= 0.8)
