"""Linear random cocycle U(t, omega) = S_A(t) exp(int_0^t C(theta_s omega) ds).

Everything here is diagonal in the eigenbasis: the noise operators D_i are
stored as coefficient rows ``d[i]`` and C(omega) = sum_i nu_i z_i*(omega) D_i.
Mode m of U(t, theta_tau omega) is multiplied by

    exp(mu_m t + sum_i nu_i d[i, m] (I_i(tau + t) - I_i(tau))),

where I_i is the trapezoid antiderivative of z_i* on the path grid, anchored
at I_i(0) = 0.  The cocycle property therefore holds up to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import AlignmentError, ParameterError, WindowError
from .noise import OUPath, WienerGrid, grid_steps, ou_stationary, sample_wiener
from .spectral import SpectralModel, Splitting

_ALIGN_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class LinearCocycleSpec:
    model: SpectralModel
    d: np.ndarray
    nus: np.ndarray
    ou: tuple[OUPath, ...]
    _cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        d = np.array(self.d, dtype=float).reshape(-1, self.model.J)
        nus = np.array(self.nus, dtype=float).reshape(-1)
        ou = tuple(self.ou)
        if not (d.shape[0] == nus.size == len(ou)) or not ou:
            raise ParameterError("need matching numbers of noise rows, rates and OU paths (N >= 1)")
        base = ou[0].base
        for z in ou[1:]:
            if z.base.dt != base.dt or z.base.values.shape != base.values.shape or z.base.t_min != base.t_min:
                raise ParameterError("all OU paths must share one Wiener grid")
        for nu, z in zip(nus, ou):
            if not np.isclose(nu, z.nu):
                raise ParameterError("rates nus must match the OU paths")
        zs = np.stack([z.values for z in ou])
        cum = np.concatenate(
            [np.zeros((len(ou), 1)), np.cumsum(0.5 * (zs[:, 1:] + zs[:, :-1]) * base.dt, axis=1)], axis=1
        )
        cum -= cum[:, [base.n_left]]
        for name, arr in (("d", d), ("nus", nus), ("_cum", cum)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "ou", ou)

    @property
    def grid(self) -> WienerGrid:
        return self.ou[0].base

    @property
    def dt(self) -> float:
        return self.grid.dt

    @property
    def rates(self) -> np.ndarray:
        """nu_i d[i, m], shape (N, J)."""
        return self.nus[:, None] * self.d

    @property
    def valid_from(self) -> float:
        return max(z.valid_from for z in self.ou)

    def index(self, t) -> np.ndarray:
        """Grid indices of (an array of) absolute times, checked for range."""
        t = np.asarray(t, dtype=float)
        steps = t / self.dt
        k = np.rint(steps)
        if np.any(np.abs(steps - k) > _ALIGN_TOL):
            raise AlignmentError("time not aligned with the noise grid")
        k = k.astype(np.int64) + self.grid.n_left
        lo = int(np.ceil((self.valid_from - self.grid.t_min) / self.dt - _ALIGN_TOL))
        if np.any(k < lo) or np.any(k >= self._cum.shape[1]):
            raise WindowError(
                f"times outside the usable noise window [{self.valid_from:g}, {self.grid.t_max:g}]"
            )
        return k

    def integral(self, t) -> np.ndarray:
        """I_i(t) = int_0^t z_i*(theta_s omega) ds, shape (N,) + shape(t)."""
        return self._cum[:, self.index(t)]

    def log_growth(self, t, at: float = 0.0) -> np.ndarray:
        """Per-mode log multiplier of U(t, theta_at omega); shape(t) + (J,)."""
        t = np.asarray(t, dtype=float)
        dI = self.integral(at + t) - self.integral(at)[:, None].reshape((-1,) + (1,) * t.ndim)
        return t[..., None] * self.model.mu + np.tensordot(np.moveaxis(dI, 0, -1), self.rates, axes=1)

    def c_diagonal(self, s) -> np.ndarray:
        """Diagonal of C(theta_s omega), linearly interpolated between nodes."""
        s = np.asarray(s, dtype=float)
        times = self.grid.times
        z = np.stack([np.interp(s, times, o.values) for o in self.ou], axis=-1)
        return z @ self.rates


def noisy_spec(
    model: SpectralModel,
    d,
    nus,
    seed: int,
    t_min: float,
    t_max: float,
    dt: float,
    burn_in: float | None = None,
) -> LinearCocycleSpec:
    """Sample the noise for ``seed`` and bundle it with the operators.

    ``t_min`` is the left edge of the usable window; the burn-in is added on
    top of it.
    """
    nus = np.atleast_1d(np.asarray(nus, dtype=float))
    if burn_in is None:
        burn_in = 5.0 / float(nus.min())
    n_burn = int(np.ceil(burn_in / dt - _ALIGN_TOL))
    path = sample_wiener(seed, nus.size, t_min - n_burn * dt, t_max, dt)
    ou = tuple(ou_stationary(path, i, float(nu), n_burn * dt) for i, nu in enumerate(nus))
    return LinearCocycleSpec(model, d, nus, ou)


def propagate_linear(spec: LinearCocycleSpec, t: float, x, at: float = 0.0) -> np.ndarray:
    """U(t, theta_at omega) x.  Negative ``t`` runs the diagonal flow backward."""
    return np.exp(spec.log_growth(t, at)) * np.asarray(x, dtype=float)


def propagate_linear_stepped(
    model: SpectralModel,
    c_path: Callable[[float], np.ndarray],
    t: float,
    x,
    dt: float,
    at: float = 0.0,
) -> np.ndarray:
    """Exponential integrator for du/dt = (-A + C(theta_s omega)) u.

    Each step multiplies by exp((mu + c(s_mid)) dt) with C frozen at the step
    midpoint; ``c_path(s)`` returns the diagonal of C at absolute time s.
    """
    if not dt > 0:
        raise ParameterError("dt must be positive")
    n = grid_steps(t, dt)
    if n < 0:
        raise ParameterError("stepped propagation runs forward only")
    u = np.array(x, dtype=float)
    for k in range(n):
        mid = at + (k + 0.5) * dt
        u = np.exp((model.mu + np.asarray(c_path(mid))) * dt) * u
    return u


def estimate_lyapunov(spec: LinearCocycleSpec, horizon: float) -> np.ndarray:
    """Finite-horizon Lyapunov exponents, sorted in descending order.

    For a diagonal cocycle the growth of each eigenmode is exact, so the
    estimate is (1/horizon) log |U(horizon, omega) e_m|.
    """
    if horizon < 10:
        raise ParameterError("horizon must be at least 10 time units")
    lam = spec.log_growth(horizon) / horizon
    return np.sort(lam)[::-1]


@dataclass(frozen=True)
class DichotomyEstimate:
    alpha: float
    beta: float
    gamma: float
    K: float
    epsilon_hat: float
    horizon: float

    def __post_init__(self):
        if not self.alpha > self.gamma > self.beta:
            raise ParameterError("dichotomy rates must satisfy alpha > gamma > beta")
        if self.K < 1:
            raise ParameterError("K must be >= 1")


def default_epsilon(split: Splitting) -> float:
    return split.gap / 10.0


def _dichotomy_rates(split: Splitting, epsilon_hat: float) -> tuple[float, float]:
    if not 0 < epsilon_hat < split.gap / 2:
        raise ParameterError(
            f"epsilon_hat must lie in (0, {split.gap / 2:g}) for a gap of {split.gap:g}"
        )
    return split.alpha_raw - epsilon_hat, split.beta_raw + epsilon_hat


def _slope_bounds(spec: LinearCocycleSpec, starts: np.ndarray, dt_probe: float) -> np.ndarray:
    """max |c_m| over each probe interval [s, s + dt_probe]; shape(starts) + (J,).

    z* is piecewise linear between noise nodes, so its extremes sit on nodes.
    """
    r = grid_steps(dt_probe, spec.dt)
    c = np.abs(np.stack([o.values for o in spec.ou], axis=-1) @ spec.rates)  # (n_grid, J)
    windows = np.lib.stride_tricks.sliding_window_view(c, r + 1, axis=0).max(axis=-1)
    return windows[spec.index(starts)]


def _K_from_growth(
    g: np.ndarray, t: np.ndarray, cmax: np.ndarray, mu: np.ndarray, split: Splitting, alpha: float, beta: float
) -> np.ndarray:
    """K over the probe axis of log growth ``g`` (..., n_t, J).

    Between probe nodes a log-growth curve h with |h'| <= L satisfies
    h <= (h(a) + h(b)) / 2 + L (b - a) / 2, so K bounds the supremum over the
    whole interval [0, horizon], not only over the nodes.  ``cmax`` is the
    per-interval bound on |c_m| with shape (..., n_t - 1, J).
    """
    dt = np.diff(t)[:, None]

    def envelope(h, rate):
        L = np.abs(mu - rate) + cmax
        mid = 0.5 * (h[..., 1:, :] + h[..., :-1, :]) + 0.5 * L * dt
        return np.maximum(h.max(axis=-2), mid.max(axis=-2))

    K = np.zeros(g.shape[:-2])
    if split.stable.any():
        # ||U(t) Pi^s|| e^{-beta t}
        h = g - beta * t[:, None]
        K = np.maximum(K, envelope(h, beta)[..., split.stable].max(axis=-1))
    if split.unstable.any():
        # e^{alpha t} / sigma_min(U^u(t))
        h = alpha * t[:, None] - g
        K = np.maximum(K, envelope(h, alpha)[..., split.unstable].max(axis=-1))
    return np.exp(K)


def estimate_dichotomy(
    spec: LinearCocycleSpec,
    split: Splitting,
    epsilon_hat: float | None = None,
    horizon: float = 50.0,
    dt_probe: float = 0.1,
    at: float = 0.0,
) -> DichotomyEstimate:
    """Fit (alpha, beta, gamma, K) for the pseudo-hyperbolic bounds at theta_at omega.

    K is evaluated on the probe grid t = 0, dt_probe, ..., horizon and padded
    between nodes by a slope bound, so both bounds hold for every t in
    [0, horizon].  It remains a finite-horizon surrogate for the supremum over
    all t >= 0.
    """
    if epsilon_hat is None:
        epsilon_hat = default_epsilon(split)
    alpha, beta = _dichotomy_rates(split, epsilon_hat)
    t = np.arange(grid_steps(horizon, dt_probe) + 1) * dt_probe
    cmax = _slope_bounds(spec, at + t[:-1], dt_probe)
    K = float(_K_from_growth(spec.log_growth(t, at), t, cmax, spec.model.mu, split, alpha, beta))
    return DichotomyEstimate(alpha, beta, 0.5 * (alpha + beta), max(1.0, K), epsilon_hat, horizon)


def dichotomy_K_along_orbit(
    spec: LinearCocycleSpec,
    split: Splitting,
    shifts: Sequence[float],
    epsilon_hat: float | None = None,
    horizon: float = 50.0,
    dt_probe: float = 0.1,
) -> np.ndarray:
    """K(theta_s omega) for every s in ``shifts`` (vectorised estimate_dichotomy)."""
    if epsilon_hat is None:
        epsilon_hat = default_epsilon(split)
    alpha, beta = _dichotomy_rates(split, epsilon_hat)
    s = np.asarray(shifts, dtype=float)
    t = np.arange(grid_steps(horizon, dt_probe) + 1) * dt_probe
    dI = spec.integral(s[:, None] + t[None, :]) - spec.integral(s)[:, :, None]
    g = t[None, :, None] * spec.model.mu + np.einsum("nst,nj->stj", dI, spec.rates)
    cmax = _slope_bounds(spec, s[:, None] + t[None, :-1], dt_probe)
    return np.maximum(1.0, _K_from_growth(g, t, cmax, spec.model.mu, split, alpha, beta))


def dichotomy_violation(
    spec: LinearCocycleSpec, split: Splitting, dich: DichotomyEstimate, t, at: float = 0.0
) -> float:
    """Largest ratio (observed norm) / (K e^{rate t}) over the probe times ``t``.

    A value <= 1 means both pseudo-hyperbolic bounds hold there.
    """
    t = np.asarray(t, dtype=float)
    g = spec.log_growth(t, at)
    worst = -np.inf
    if split.stable.any():
        worst = max(worst, np.max(g[:, split.stable].max(axis=1) - dich.beta * t))
    if split.unstable.any():
        worst = max(worst, np.max(dich.alpha * t - g[:, split.unstable].min(axis=1)))
    return float(np.exp(worst) / dich.K)


def integrability_samples(spec: LinearCocycleSpec, samples: int, seed: int = 0) -> np.ndarray:
    """D(omega) = log+ sup_{t1, t2 in [0, 1]} ||U(t1, theta_t2 omega)|| over fresh seeds.

    Each sample regenerates the noise with the operators, rates and grid step
    of ``spec``.
    """
    if samples < 1:
        raise ParameterError("samples must be >= 1")
    dt = spec.dt
    n1 = grid_steps(1.0, dt)
    t1 = np.arange(n1 + 1) * dt
    burn = max(z.burn_in for z in spec.ou)
    out = np.empty(samples)
    for k, child in enumerate(np.random.SeedSequence(seed).spawn(samples)):
        fresh = noisy_spec(spec.model, spec.d, spec.nus, int(child.generate_state(1)[0]), 0.0, 2.0, dt, burn)
        I = fresh.integral(np.arange(2 * n1 + 1) * dt)  # (N, 2 n1 + 1)
        idx = np.arange(n1 + 1)
        dI = I[:, idx[:, None] + idx[None, :]] - I[:, idx][:, :, None]  # (N, t2, t1)
        g = t1[None, :, None] * spec.model.mu + np.einsum("nab,nj->abj", dI, spec.rates)
        out[k] = max(float(g.max()), 0.0)  # log+ of the sup norm
    return out


def check_integrability(spec: LinearCocycleSpec, samples: int, seed: int = 0) -> float:
    """Monte Carlo estimate of E D(omega); see :func:`integrability_samples`."""
    return float(integrability_samples(spec, samples, seed).mean())
