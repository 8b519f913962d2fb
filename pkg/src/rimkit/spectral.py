"""Truncated eigenbasis of -A and the unstable/stable coordinate splitting.

State vectors are plain float arrays of length J holding the coefficients in
the eigenbasis; the Hilbert norm is the Euclidean norm of the coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, SpectralCollisionError


@dataclass(frozen=True, eq=False)
class SpectralModel:
    """Eigenvalues ``mu`` of -A, non-increasing, at least two modes."""

    mu: np.ndarray
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float)
        if mu.ndim != 1 or mu.size < 2:
            raise ParameterError("need at least two modes")
        if np.any(np.diff(mu) > 0):
            raise ParameterError("eigenvalues must be non-increasing")
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)

    @property
    def J(self) -> int:
        return self.mu.size


def shifted_dirichlet_laplacian(J: int, a: float = 0.0) -> SpectralModel:
    """Dirichlet Laplacian on (0, pi) plus ``a * id``: mu_j = a - j^2."""
    if J < 2:
        raise ParameterError("need J >= 2")
    j = np.arange(1, J + 1)
    return SpectralModel(a - j.astype(float) ** 2, tuple(f"sin({k}x)" for k in j))


@dataclass(frozen=True)
class Splitting:
    """E^u = first ``cut`` modes, E^s = the rest.

    ``alpha_raw`` is the smallest unstable eigenvalue and ``beta_raw`` the
    largest stable one; when a block is empty the missing value is ``lam``.
    """

    cut: int
    J: int
    lam: float
    alpha_raw: float
    beta_raw: float
    unstable: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        mask = np.arange(self.J) < self.cut
        mask.setflags(write=False)
        object.__setattr__(self, "unstable", mask)

    @property
    def stable(self) -> np.ndarray:
        return ~self.unstable

    @property
    def gap(self) -> float:
        return self.alpha_raw - self.beta_raw


def make_splitting(model: SpectralModel, lam: float) -> Splitting:
    mu = model.mu
    if np.any(np.isclose(mu, lam, rtol=0.0, atol=1e-12)):
        raise SpectralCollisionError(f"lambda = {lam} is an eigenvalue of -A")
    cut = int(np.sum(mu > lam))
    alpha_raw = float(mu[cut - 1]) if cut > 0 else float(lam)
    beta_raw = float(mu[cut]) if cut < model.J else float(lam)
    return Splitting(cut, model.J, float(lam), alpha_raw, beta_raw)


def project(split: Splitting, side: str, x) -> np.ndarray:
    """Coordinate projection onto E^u (``side='u'``) or E^s (``side='s'``).

    Works on the last axis, so stacks of states are projected row by row.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != split.J:
        raise ParameterError(f"state has {x.shape[-1]} coefficients, model has {split.J}")
    if side == "u":
        mask = split.unstable
    elif side == "s":
        mask = split.stable
    else:
        raise ParameterError(f"side must be 'u' or 's', got {side!r}")
    return np.where(mask, x, 0.0)
