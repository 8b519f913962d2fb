"""Conjugation of the Stratonovich SPDE with linear multiplicative noise to a random PDE.

With commuting diagonal D_i the transform T(omega) = prod_i exp(z_i*(omega) D_i)
is a diagonal scaling.  The random PDE

    dpsi/dt = (-A + sum_i nu_i z_i*(theta_t omega) D_i) psi + T^{-1}(theta_t omega) f(T(theta_t omega) psi)

is integrated with the mild integrator, and phi(t) = T(theta_t omega) psi(t)
solves dX = (-A X + f(X)) dt + sum_i D_i X o dw_i.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ParameterError
from .linear import LinearCocycleSpec, noisy_spec
from .noise import WienerGrid, grid_steps
from .nonlinear import NonlinearField, estimate_B1_tilde, integrate_mild
from .spectral import SpectralModel


@dataclass(frozen=True, eq=False)
class SPDEModel:
    """Truncated SPDE: spectral model, nonlinearity f and the shared noise."""

    linear: LinearCocycleSpec
    f: NonlinearField

    def __post_init__(self):
        if self.f.kind == "hoelder_radial":
            raise ParameterError("the conjugation needs a globally Lipschitz f")

    @property
    def model(self) -> SpectralModel:
        return self.linear.model

    @property
    def path(self) -> WienerGrid:
        return self.linear.grid


def make_spde(model: SpectralModel, f: NonlinearField, d, nus, seed: int, t_min: float, t_max: float, dt: float) -> SPDEModel:
    return SPDEModel(noisy_spec(model, d, nus, seed, t_min, t_max, dt), f)


@dataclass(frozen=True, eq=False)
class ConjugationMap:
    """Diagonal factors exp(sum_i z_i* d[i, m]) of T(omega)."""

    scales: np.ndarray

    def apply(self, x) -> np.ndarray:
        return self.scales * np.asarray(x, dtype=float)

    def apply_inverse(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) / self.scales

    @property
    def norm(self) -> float:
        return float(self.scales.max())

    @property
    def inverse_norm(self) -> float:
        return float(1.0 / self.scales.min())


def _log_scales(spde: SPDEModel, t) -> np.ndarray:
    lin = spde.linear
    z = np.stack([o.values[lin.index(t)] for o in lin.ou], axis=-1)  # shape(t) + (N,)
    return z @ lin.d


def build_T(spde: SPDEModel, t: float = 0.0) -> ConjugationMap:
    """T(theta_t omega) = S_{D_1}(z_1*) ... S_{D_N}(z_N*)."""
    return ConjugationMap(np.exp(_log_scales(spde, t)))


class ConjugatedField:
    """F(theta_s omega, u) = T^{-1}(theta_s omega) f(T(theta_s omega) u)."""

    def __init__(self, spde: SPDEModel, f=None):
        self.spde = spde
        self.f = spde.f if f is None else f
        self.eps = getattr(self.f, "eps", 0.0)

    def __call__(self, u, s) -> np.ndarray:
        scale = np.exp(_log_scales(self.spde, s))
        return self.f(scale * u) / scale

    def at(self, s: float):
        """The frozen map u -> F(theta_s omega, u)."""
        scale = np.exp(_log_scales(self.spde, s))
        frozen = lambda u, _s=None: self.f(scale * u) / scale  # noqa: E731
        frozen.eps = self.eps
        return frozen


def effective_B1_tilde(spde: SPDEModel, s: float, rho: float, samples: int = 20000, seed: int = 0) -> float:
    """Hypothesis constant of the conjugated nonlinearity at theta_s omega, estimated."""
    return estimate_B1_tilde(ConjugatedField(spde).at(s), rho, samples, seed, dim=spde.model.J)


def conjugate_flow(spde: SPDEModel, x, t: float, dt: float, field=None, at: float = 0.0) -> np.ndarray:
    """phi(t, omega, x) = T(theta_t omega) psi(t, omega, T^{-1}(omega) x).

    ``field`` replaces f (e.g. by its cut-off) when given.
    """
    F = ConjugatedField(spde, field)
    psi0 = build_T(spde, at).apply_inverse(x)
    psi = integrate_mild(spde.linear, F, psi0, t, dt, at=at)
    return build_T(spde, at + t).apply(psi)


def integrate_stratonovich(spde: SPDEModel, x, t: float, dt: float, path: WienerGrid | None = None, at: float = 0.0) -> np.ndarray:
    """Heun predictor-corrector for dX_m = (mu_m X_m + f(X)_m) dt + sum_i d[i, m] X_m o dw_i.

    Increments over each step are read off the stored Wiener path, so the
    scheme and the conjugated flow see the same noise.
    """
    path = spde.path if path is None else path
    n = grid_steps(t, dt)
    if n < 0:
        raise ParameterError("t must be non-negative")
    grid_steps(dt, path.dt)
    k = np.array([path.index(at + j * dt) for j in range(n + 1)])
    dW = np.diff(path.values[k], axis=0)  # (n, N)
    mu, d, f = spde.model.mu, spde.linear.d, spde.f

    def drift(X):
        return mu * X + f(X)

    X = np.array(x, dtype=float)
    for j in range(n):
        noise = dW[j] @ d
        a0 = drift(X)
        pred = X + a0 * dt + noise * X
        X = X + 0.5 * (a0 + drift(pred)) * dt + 0.5 * noise * (X + pred)
    return X


def stratonovich_linear_exact(spde: SPDEModel, x, t: float, at: float = 0.0) -> np.ndarray:
    """Closed form for f = 0: X_m(t) = x_m exp(mu_m t + sum_i d[i, m] (w_i(at + t) - w_i(at)))."""
    w = spde.path
    dw = w(at + t) - w(at)
    return np.asarray(x, dtype=float) * np.exp(spde.model.mu * t + dw @ spde.linear.d)


@dataclass(frozen=True)
class ConjugationReport:
    dt_levels: tuple[float, ...]
    mean_errors: tuple[float, ...]
    fitted_order: float
    seeds: int
    per_seed: np.ndarray

    @property
    def passed(self) -> bool:
        return self.fitted_order >= 0.8


def conjugation_check(
    model: SpectralModel,
    f: NonlinearField,
    d,
    nus,
    x,
    t: float,
    dt_levels: Sequence[float],
    seeds: int,
    seed0: int = 0,
) -> ConjugationReport:
    """Strong discrepancy between the conjugated flow and direct Stratonovich integration.

    For every seed the noise is sampled once on the finest step and both
    integrators run at each level of ``dt_levels``.  The fitted order is the
    slope of log(mean error) against log(dt).
    """
    dt_levels = tuple(sorted(dt_levels, reverse=True))
    finest = dt_levels[-1]
    errs = np.empty((seeds, len(dt_levels)))
    for s in range(seeds):
        spde = make_spde(model, f, d, nus, seed0 + s, 0.0, t, finest)
        for j, dt in enumerate(dt_levels):
            a = conjugate_flow(spde, x, t, dt)
            b = integrate_stratonovich(spde, x, t, dt)
            errs[s, j] = np.linalg.norm(a - b)
    mean = errs.mean(axis=0)
    if np.all(mean > 0) and len(dt_levels) > 1:
        order = float(np.polyfit(np.log(dt_levels), np.log(mean), 1)[0])
    else:
        order = float("nan")
    return ConjugationReport(dt_levels, tuple(float(e) for e in mean), order, seeds, errs)


lemma_lm2_check = conjugation_check  # interface name
