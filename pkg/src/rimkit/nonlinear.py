"""Nonlinear terms, the smooth cut-off F_rho and the mild-solution integrator."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.special import ndtr

from .errors import DomainError, ParameterError
from .linear import LinearCocycleSpec
from .noise import grid_steps

FIELD_KINDS = ("zero", "lipschitz_componentwise", "hoelder_radial")
MIXINGS = ("none", "sine")

SIGMA_PRIME_MAX = 15.0 / 8.0


def cutoff_sigma(s):
    """Even C^2 cut-off: 1 on |s| <= 1, 0 on |s| >= 2, quintic smoothstep between."""
    r = np.clip(np.abs(np.asarray(s, dtype=float)) - 1.0, 0.0, 1.0)
    return 1.0 - r**3 * (10.0 - 15.0 * r + 6.0 * r**2)


def cutoff_sigma_prime(s):
    s = np.asarray(s, dtype=float)
    r = np.clip(np.abs(s) - 1.0, 0.0, 1.0)
    return -np.sign(s) * 30.0 * r**2 * (1.0 - r) ** 2


def sine_basis(J: int) -> np.ndarray:
    """Orthonormal DST-I matrix: eigen-coefficients to scaled nodal values.

    It is symmetric and its own inverse.
    """
    j = np.arange(1, J + 1)
    return np.sqrt(2.0 / (J + 1)) * np.sin(np.pi * np.outer(j, j) / (J + 1))


@dataclass(frozen=True)
class NonlinearField:
    """A nonlinearity F with F(0) = 0.

    ``lipschitz_componentwise`` is c * tanh applied entrywise; with
    ``mixing='sine'`` the entries are nodal values of the sine expansion,
    i.e. the Nemytskii operator of c tanh(u(x)), which couples the modes.
    ``hoelder_radial`` is c ||u||^eps u.

    ``eps`` is the Hoelder exponent in the hypothesis
    ||F(u) - F(v)|| <= B1_tilde (||u||^eps + ||v||^eps) ||u - v||.  A globally
    Lipschitz field uses eps = 0 with B1_tilde = L_f / 2.
    """

    kind: str = "zero"
    c: float = 1.0
    eps: Optional[float] = None
    B1_tilde: Optional[float] = None
    mixing: str = "none"

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise ParameterError(f"unknown field kind {self.kind!r}; expected one of {FIELD_KINDS}")
        if self.mixing not in MIXINGS:
            raise ParameterError(f"unknown mixing {self.mixing!r}")
        eps = self.eps
        if eps is None:
            eps = 0.0 if self.kind == "lipschitz_componentwise" else 1.0
        if self.kind == "lipschitz_componentwise" and eps != 0.0:
            raise ParameterError("a globally Lipschitz field carries eps = 0")
        if self.kind == "hoelder_radial" and not 0 < eps <= 1:
            raise ParameterError("Hoelder exponent must lie in (0, 1]")
        object.__setattr__(self, "eps", float(eps))
        if self.B1_tilde is None:
            if self.kind == "zero":
                object.__setattr__(self, "B1_tilde", 0.0)
            elif self.kind == "lipschitz_componentwise":
                object.__setattr__(self, "B1_tilde", abs(self.c) / 2.0)

    @property
    def lipschitz_constant(self) -> float:
        """L_f for the globally Lipschitz kinds, inf otherwise."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "lipschitz_componentwise":
            return abs(self.c)
        return float("inf")

    def __call__(self, u, s: float | None = None) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(u)
        if self.kind == "lipschitz_componentwise":
            if self.mixing == "sine":
                Q = sine_basis(u.shape[-1])
                return self.c * np.tanh(u @ Q) @ Q
            return self.c * np.tanh(u)
        norm = np.linalg.norm(u, axis=-1, keepdims=True)
        return self.c * norm**self.eps * u


def cutoff_constants(B1_tilde: float, eps: float, rho: float) -> tuple[float, float]:
    """(B1, B0) for the cut-off field on radius rho.

    Splitting F_rho(u) - F_rho(v) = sigma_v (F(u) - F(v)) + (sigma_u - sigma_v) F(u)
    with ||u|| <= ||v|| and |sigma'| <= 2 gives
    B0 = B1_tilde ((2 rho)^eps + 0^eps) 2 rho and
    B1 rho^eps = 2 (2 rho)^eps B1_tilde + 2 B0 / rho,
    i.e. B1 = 6 2^eps B1_tilde for eps > 0 and 10 B1_tilde for eps = 0.
    """
    zero_pow = 1.0 if eps == 0 else 0.0
    B0 = B1_tilde * ((2 * rho) ** eps + zero_pow) * 2 * rho
    lip = 2 * (2 * rho) ** eps * B1_tilde + 2 * B0 / rho
    return lip / rho**eps, B0


@dataclass(frozen=True)
class CutoffField:
    """F_rho(u) = sigma(||u|| / rho) F(u) with its global constants B1 and B0."""

    base: NonlinearField
    rho: float
    B1: float
    B0: float

    @property
    def eps(self) -> float:
        return self.base.eps

    @property
    def lipschitz(self) -> float:
        """Global Lipschitz bound B1 rho^eps of F_rho."""
        return self.B1 * self.rho**self.eps

    def __call__(self, u, s: float | None = None) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        sig = cutoff_sigma(np.linalg.norm(u, axis=-1, keepdims=True) / self.rho)
        return sig * self.base(u, s)


def make_cutoff(field: NonlinearField, rho: float, dim: int = 2, samples: int = 20000, seed: int = 0) -> CutoffField:
    """Cut-off field on radius ``rho``; estimates B1_tilde when the field has none."""
    if not rho > 0:
        raise ParameterError("rho must be positive")
    B1_tilde = field.B1_tilde
    if B1_tilde is None:
        B1_tilde = estimate_B1_tilde(field, rho, samples, seed, dim=dim)
    B1, B0 = cutoff_constants(B1_tilde, field.eps, rho)
    return CutoffField(field, float(rho), B1, B0)


def apply_cutoff(field: CutoffField, u) -> np.ndarray:
    return field(u)


def _ball_points(rng_rows: np.ndarray, dim: int, radius: float) -> np.ndarray:
    """Map rows of standard normals (dim + 1 columns) to uniform points in a ball."""
    g = rng_rows[:, :dim]
    direction = g / np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * ndtr(rng_rows[:, dim]) ** (1.0 / dim)
    return direction * r[:, None]


def estimate_B1_tilde(field, rho: float, samples: int, seed: int = 0, dim: int = 2) -> float:
    """Empirical hypothesis constant: sup of ||F(u) - F(v)|| / ((||u||^eps + ||v||^eps) ||u - v||).

    Pairs are drawn in the ball of radius 2 rho.  Each pair consumes one row of
    the generator, so a larger ``samples`` extends the same sequence and the
    estimate is non-decreasing in ``samples``.  A quarter of the pairs are
    near-coincident and a quarter collinear with v = s u.
    """
    if samples < 100:
        raise ParameterError("need at least 100 sample pairs")
    eps = field.eps
    rng = np.random.default_rng(seed)
    rows = rng.standard_normal((samples, 2 * dim + 4))
    u = _ball_points(rows[:, : dim + 1], dim, 2 * rho)
    v_far = _ball_points(rows[:, dim + 1 : 2 * dim + 2], dim, 2 * rho)
    mode = np.arange(samples) % 4
    scale = np.abs(rows[:, -2:-1])
    v = np.where((mode == 1)[:, None], u + 1e-3 * rho * v_far / (2 * rho), v_far)
    v = np.where((mode == 2)[:, None], u * np.tanh(scale), v)
    v = np.where((mode == 3)[:, None], -u * np.tanh(scale), v)
    diff = np.linalg.norm(u - v, axis=1)
    keep = diff > 1e-14 * rho
    if not keep.any():
        raise DomainError("all sampled pairs coincide")
    nu = np.linalg.norm(u, axis=1)
    nv = np.linalg.norm(v, axis=1)
    num = np.linalg.norm(field(u) - field(v), axis=1)
    den = (nu**eps + nv**eps) * diff
    ratio = np.where(keep, num / np.where(keep, den, 1.0), 0.0)
    return float(ratio.max())


Nonlinearity = Union[CutoffField, NonlinearField, Callable[[np.ndarray, float], np.ndarray]]


def integrate_mild(
    spec: LinearCocycleSpec,
    field: Nonlinearity,
    x,
    t: float,
    dt: float,
    at: float = 0.0,
    return_path: bool = False,
):
    """Exponential Euler for the mild solution of du/dt + A(theta_s omega) u = F(u).

    u[n+1] = U(dt, theta_{t_n} omega) (u[n] + dt F(u[n])), first order in dt.
    ``field(u, s)`` receives the absolute time s = at + t_n.  Stacks of initial
    states (..., J) are advanced together.
    """
    n = grid_steps(t, dt)
    if n < 0:
        raise ParameterError("t must be non-negative")
    grid_steps(dt, spec.dt)  # the step must land on noise nodes
    nodes = at + np.arange(n + 1) * dt
    L = spec.log_growth(nodes - at, at)  # (n + 1, J)
    factors = np.exp(np.diff(L, axis=0))
    u = np.array(x, dtype=float)
    path = [u] if return_path else None
    for k in range(n):
        u = factors[k] * (u + dt * field(u, nodes[k]))
        if return_path:
            path.append(u)
    if return_path:
        return nodes, np.stack(path)
    return u
