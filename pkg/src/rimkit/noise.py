"""Two-sided Wiener paths, the shift flow and stationary Ornstein-Uhlenbeck paths.

A sample point is stored as a uniform grid of path values on ``[t_min, t_max]``
that is pinned to zero at ``t = 0``.  Between nodes the path is taken to be
piecewise linear; every quadrature downstream works on the nodes only.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from .errors import AlignmentError, DomainError, ParameterError, WindowError

_ALIGN_TOL = 1e-6


def grid_steps(t: float, dt: float) -> int:
    """Return ``t / dt`` as an integer, raising if ``t`` is off-grid."""
    k = round(t / dt)
    if abs(t / dt - k) > _ALIGN_TOL:
        raise AlignmentError(f"time {t!r} is not a multiple of the grid step {dt!r}")
    return int(k)


@dataclass(frozen=True, eq=False)
class WienerGrid:
    """N independent scalar Wiener paths sampled on a common uniform grid.

    ``values`` has shape ``(n_samples, components)``; row ``n_left`` is t = 0.
    """

    t_min: float
    t_max: float
    dt: float
    values: np.ndarray
    seed: int

    def __post_init__(self):
        self.values.setflags(write=False)

    @property
    def components(self) -> int:
        return self.values.shape[1]

    @property
    def n_left(self) -> int:
        return round(-self.t_min / self.dt)

    @property
    def times(self) -> np.ndarray:
        n = self.values.shape[0]
        return (np.arange(n) - self.n_left) * self.dt

    def index(self, t: float) -> int:
        k = self.n_left + grid_steps(t, self.dt)
        if not 0 <= k < self.values.shape[0]:
            raise WindowError(f"time {t!r} outside path window [{self.t_min}, {self.t_max}]")
        return k

    def __call__(self, t: float) -> np.ndarray:
        """Path value at a grid time, one entry per component."""
        return self.values[self.index(t)]

    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=0)


def sample_wiener(seed: int, components: int, t_min: float, t_max: float, dt: float) -> WienerGrid:
    """Sample a two-sided Wiener path with ``w(0) = 0``.

    The right half (t > 0) and left half (t < 0) come from independent
    substreams of ``seed``; each is generated outward from zero, so enlarging
    one side of the window never changes the other side or the shared prefix.
    """
    if not dt > 0:
        raise ParameterError("dt must be positive")
    if t_min > 0 or t_max < 0:
        raise ParameterError("window must contain 0 (t_min <= 0 <= t_max)")
    if components < 1:
        raise ParameterError("need at least one noise component")
    n_left = round(-t_min / dt)
    n_right = round(t_max / dt)
    right_ss, left_ss = np.random.SeedSequence(seed).spawn(2)
    scale = np.sqrt(dt)
    right = np.random.default_rng(right_ss).standard_normal((n_right, components)) * scale
    left = np.random.default_rng(left_ss).standard_normal((n_left, components)) * scale
    values = np.concatenate(
        [
            -np.cumsum(left, axis=0)[::-1],
            np.zeros((1, components)),
            np.cumsum(right, axis=0),
        ]
    )
    return WienerGrid(-n_left * dt, n_right * dt, dt, values, seed)


def shift(path: WienerGrid, t: float) -> WienerGrid:
    """Wiener shift: ``result(s) = path(s + t) - path(t)``.

    The result lives on the retained window ``[t_min - t, t_max - t]``.
    """
    k = path.index(t)  # alignment and range checks
    values = path.values - path.values[k]
    return WienerGrid(
        -k * path.dt,
        (path.values.shape[0] - 1 - k) * path.dt,
        path.dt,
        values,
        path.seed,
    )


@dataclass(frozen=True, eq=False)
class OUPath:
    """Stationary OU trajectory z*(theta_t omega) on the grid of ``base``.

    Values before ``valid_from`` are still inside the burn-in transient.
    """

    nu: float
    base: WienerGrid
    component: int
    values: np.ndarray
    burn_in: float

    def __post_init__(self):
        self.values.setflags(write=False)

    @property
    def valid_from(self) -> float:
        return self.base.t_min + self.burn_in

    @property
    def times(self) -> np.ndarray:
        return self.base.times

    def __call__(self, t: float) -> float:
        return float(self.values[self.base.index(t)])


def ou_stationary(path: WienerGrid, component: int, nu: float, burn_in: float | None = None) -> OUPath:
    """Stationary OU solution of dz = -nu z dt + dw driven by one path component.

    Uses the exact one-step OU transition driven by the stored increments:
    ``z[n+1] = a z[n] + c dw[n]`` with ``a = exp(-nu dt)`` and ``c`` chosen so
    the transition variance is exactly ``(1 - a^2) / (2 nu)``.  The recursion
    starts at ``t_min`` from a stationary Gaussian draw, so the pathwise gap to
    the improper-integral definition decays like ``exp(-nu (t - t_min))``.
    """
    if not nu > 0:
        raise ParameterError("nu must be positive")
    if burn_in is None:
        burn_in = 5.0 / nu
    if burn_in < 5.0 / nu - 1e-12:
        raise ParameterError(f"burn_in must be at least 5/nu = {5.0 / nu}")
    if not 0 <= component < path.components:
        raise ParameterError(f"component {component} out of range")
    if burn_in > -path.t_min + 1e-12:
        raise WindowError(f"burn_in {burn_in} exceeds the left window {-path.t_min}")

    dt = path.dt
    a = np.exp(-nu * dt)
    c = np.sqrt(-np.expm1(-2.0 * nu * dt) / (2.0 * nu * dt))
    dw = np.diff(path.values[:, component])
    init_rng = np.random.default_rng(np.random.SeedSequence([path.seed, component, 0x0E]))
    z0 = init_rng.standard_normal() * np.sqrt(0.5 / nu)
    # AR(1) recursion z[n+1] = a z[n] + c dw[n]
    tail, _ = lfilter([c], [1.0, -a], dw, zi=[a * z0])
    z = np.concatenate([[z0], tail])
    return OUPath(nu, path, component, z, burn_in)


def ou_residual(ou: OUPath) -> float:
    """Largest integrated-SDE residual over grid intervals after burn-in.

    max over s < t of |z(t) - z(s) + nu int_s^t z - (w(t) - w(s))|, with the
    integral by the trapezoid rule.
    """
    k0 = int(np.ceil(ou.burn_in / ou.base.dt - _ALIGN_TOL))
    z = ou.values[k0:]
    w = ou.base.values[k0:, ou.component]
    integral = np.concatenate([[0.0], np.cumsum(0.5 * (z[1:] + z[:-1]) * ou.base.dt)])
    r = z - z[0] + ou.nu * integral - (w - w[0])
    return float(r.max() - r.min())


def log_plus(x):
    """log+ x = max(log x, 0)."""
    return np.maximum(np.log(x), 0.0)


def temperedness_slope(t: Sequence[float], x: Sequence[float]) -> float:
    """Least-squares slope of log+ X(theta_t omega) against t.

    For a tempered random variable the slope tends to zero as the horizon grows.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if t.shape != x.shape or t.size < 10:
        raise ParameterError("need at least 10 (t, X) samples of matching length")
    if np.any(np.diff(t) <= 0):
        raise ParameterError("sample times must be increasing")
    if np.any(x <= 0) or not np.all(np.isfinite(x)):
        raise DomainError("temperedness samples must be finite and positive")
    return float(np.polyfit(t, log_plus(x), 1)[0])


def paths_to_csv(path: WienerGrid, ou: Sequence[OUPath] = ()) -> str:
    """CSV with columns ``t, w_1..w_N, z_1..z_N`` at 17 significant digits."""
    cols = [path.times] + [path.values[:, i] for i in range(path.components)]
    cols += [z.values for z in ou]
    header = ["t"] + [f"w_{i + 1}" for i in range(path.components)]
    header += [f"z_{z.component + 1}" for z in ou]
    buf = io.StringIO()
    np.savetxt(buf, np.column_stack(cols), fmt="%.17g", delimiter=",", header=",".join(header), comments="")
    return buf.getvalue()
