"""Lyapunov-Perron fixed-point solver for pseudo-unstable and pseudo-stable graphs.

Trajectories live on a truncated half-line grid: [-T_lp, 0] for the unstable
side and [0, T_lp] for the stable side, measured from the base point
theta_at omega.  Both sides use the weighted norm

    |u|_gamma = max_k e^{-gamma t_k} ||u(t_k)||,   gamma = (alpha + beta) / 2.

Integrals are composite trapezoid sums on the grid with the diagonal
propagator factors evaluated in closed form.  They are accumulated by the
two-term recurrences

    S_{k+1} = Phi_k S_k + h/2 (Phi_k G_k + G_{k+1}),   Phi_k = U(h, theta_{t_k} omega),

forward for decaying blocks and backward for growing ones, which is the same
trapezoid sum without forming any overflowing products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, ParameterError, PreconditionError
from .linear import DichotomyEstimate, LinearCocycleSpec
from .noise import grid_steps
from .nonlinear import CutoffField, integrate_mild
from .spectral import Splitting, project

SIDES = ("unstable", "stable")


@dataclass(frozen=True)
class RadiusCheck:
    ok: bool
    budget: float
    rho_max: float

    def __bool__(self):
        return self.ok


def check_radius(dich: DichotomyEstimate, B1: float, eps: float, rho: float) -> RadiusCheck:
    """Radius condition rho <= ((alpha - beta) / (8 K B1))^(1/eps).

    Equivalent to the contraction budget 4 K B1 rho^eps / (alpha - beta) <= 1/2.
    With eps = 0 (globally Lipschitz field) the radius drops out and the
    budget alone decides.
    """
    gap = dich.alpha - dich.beta
    if not gap > 0:
        raise ParameterError("invalid dichotomy: alpha <= beta")
    if B1 < 0 or not 0 <= eps <= 1:
        raise ParameterError("need B1 >= 0 and eps in [0, 1]")
    budget = 4.0 * dich.K * B1 * rho**eps / gap
    if B1 == 0:
        rho_max = math.inf
    elif eps == 0:
        rho_max = math.inf if budget <= 0.5 else 0.0
    else:
        rho_max = (gap / (8.0 * dich.K * B1)) ** (1.0 / eps)
    return RadiusCheck(budget <= 0.5, budget, rho_max)


@dataclass(frozen=True)
class LPConfig:
    T_lp: float = 20.0
    dt_lp: float = 0.01
    tol: float = 1e-10
    max_iter: int = 200

    def __post_init__(self):
        if not self.tol > 0:
            raise ParameterError("tol must be positive")
        if not (self.dt_lp > 0 and self.T_lp > 0):
            raise ParameterError("T_lp and dt_lp must be positive")
        grid_steps(self.T_lp, self.dt_lp)

    def validate(self, dich: DichotomyEstimate) -> None:
        need = 20.0 / (dich.alpha - dich.beta)
        if self.T_lp < need - 1e-12:
            raise ParameterError(f"T_lp = {self.T_lp} too short; need at least {need:.4g}")


@dataclass(frozen=True, eq=False)
class LPTrajectory:
    side: str
    times: np.ndarray
    values: np.ndarray
    gamma: float

    @property
    def weighted_norm(self) -> float:
        return weighted_norm(self.times, self.values, self.gamma)


def weighted_norm(times, values, gamma: float) -> float:
    return float(np.max(np.exp(-gamma * times) * np.linalg.norm(values, axis=-1)))


@dataclass(frozen=True, eq=False)
class GraphResult:
    h: np.ndarray
    trajectory: LPTrajectory
    iterations: int
    last_delta: float
    contraction_est: float
    tail_bound: float


def lp_times(cfg: LPConfig, side: str) -> np.ndarray:
    n = grid_steps(cfg.T_lp, cfg.dt_lp)
    k = np.arange(n + 1) * cfg.dt_lp
    if side == "unstable":
        return k - cfg.T_lp
    if side == "stable":
        return k
    raise ParameterError(f"side must be one of {SIDES}")


def _forward(L: np.ndarray, G: np.ndarray, h: float) -> np.ndarray:
    """S(t_k) = trapezoid of int_{t_0}^{t_k} U(t_k - tau, theta_tau) G(tau) dtau."""
    phi = np.exp(np.diff(L, axis=0))
    out = np.zeros_like(G)
    S = out[0]
    for k in range(phi.shape[0]):
        S = phi[k] * (S + 0.5 * h * G[k]) + 0.5 * h * G[k + 1]
        out[k + 1] = S
    return out


def _backward(L: np.ndarray, G: np.ndarray, h: float) -> np.ndarray:
    """V(t_k) = trapezoid of int_{t_k}^{t_n} U(t_k - tau, theta_tau) G(tau) dtau."""
    psi = np.exp(-np.diff(L, axis=0))
    out = np.zeros_like(G)
    V = out[-1]
    for k in range(psi.shape[0] - 1, -1, -1):
        V = psi[k] * (V + 0.5 * h * G[k + 1]) + 0.5 * h * G[k]
        out[k] = V
    return out


class _Problem:
    """Grid, propagator logs and nonlinearity for one side at one base point."""

    def __init__(self, spec, field, split, dich, cfg, side, at):
        self.side = side
        self.split = split
        self.dich = dich
        self.cfg = cfg
        self.field = field
        self.at = at
        grid_steps(cfg.dt_lp, spec.dt)
        self.t = lp_times(cfg, side)
        self.L = spec.log_growth(self.t, at)
        self.h = cfg.dt_lp

    def linear_part(self, anchor: np.ndarray) -> np.ndarray:
        return np.exp(self.L) * anchor

    def apply(self, values: np.ndarray, anchor: np.ndarray) -> np.ndarray:
        G = self.field(values, self.at + self.t)
        u, s = self.split.unstable, self.split.stable
        out = np.exp(self.L) * anchor
        if self.side == "unstable":
            # stable block: int_{-inf}^t, truncated at -T_lp
            out[:, s] = _forward(self.L[:, s], G[:, s], self.h)
            # unstable block: U^u(t) p - int_t^0
            out[:, u] -= _backward(self.L[:, u], G[:, u], self.h)
        else:
            out[:, s] += _forward(self.L[:, s], G[:, s], self.h)
            # unstable block: -int_t^inf, truncated at T_lp
            out[:, u] = -_backward(self.L[:, u], G[:, u], self.h)
        return out

    def norm(self, values: np.ndarray) -> float:
        return weighted_norm(self.t, values, self.dich.gamma)

    def trajectory(self, values: np.ndarray) -> LPTrajectory:
        return LPTrajectory(self.side, self.t, values, self.dich.gamma)

    def tail_bound(self) -> float:
        d = self.dich
        K, B0, T = d.K, self.field.B0, self.cfg.T_lp
        rate = d.gamma - d.beta if self.side == "unstable" else d.alpha - d.gamma
        return B0 * K * math.exp(-rate * T) / rate


def _anchor(split: Splitting, side: str, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    block = "u" if side == "unstable" else "s"
    if not np.allclose(project(split, block, x), x, rtol=0, atol=0):
        raise PreconditionError(f"anchor must lie in the {side} block")
    return x


def lp_apply(spec, field, split, dich, cfg, anchor, traj: LPTrajectory, at: float = 0.0) -> LPTrajectory:
    """One application of the Lyapunov-Perron operator on ``traj.side``."""
    prob = _Problem(spec, field, split, dich, cfg, traj.side, at)
    anchor = _anchor(split, traj.side, anchor)
    if traj.values.shape != (prob.t.size, split.J):
        raise ParameterError("trajectory does not match the LP grid")
    out = prob.apply(traj.values, anchor)
    if not np.all(np.isfinite(out)):
        raise ParameterError("non-finite LP image")
    return prob.trajectory(out)


def lp_apply_unstable(spec, field, split, dich, cfg, p, traj, at: float = 0.0) -> LPTrajectory:
    return lp_apply(spec, field, split, dich, cfg, p, traj, at)


def lp_apply_stable(spec, field, split, dich, cfg, q, traj, at: float = 0.0) -> LPTrajectory:
    return lp_apply(spec, field, split, dich, cfg, q, traj, at)


def linear_trajectory(spec, split, dich, cfg, side, anchor, at: float = 0.0) -> LPTrajectory:
    t = lp_times(cfg, side)
    return LPTrajectory(side, t, np.exp(spec.log_growth(t, at)) * anchor, dich.gamma)


def solve_graph(
    spec: LinearCocycleSpec,
    field: CutoffField,
    split: Splitting,
    dich: DichotomyEstimate,
    cfg: LPConfig,
    anchor,
    side: str,
    at: float = 0.0,
    check_anchor: bool = True,
) -> GraphResult:
    """Iterate the LP operator from the linear flow until the update is below ``tol``.

    Returns the graph value in the complementary block: h^u(omega, p) = Pi^s u(0)
    for the unstable side, h^s(omega, q) = Pi^u u(0) for the stable side.
    """
    radius = check_radius(dich, field.B1, field.eps, field.rho)
    if not radius:
        raise PreconditionError(f"radius condition fails: contraction budget {radius.budget:.4g} > 1/2")
    cfg.validate(dich)
    anchor = _anchor(split, side, anchor)
    if check_anchor and np.linalg.norm(anchor) > field.rho / (4 * dich.K) * (1 + 1e-12):
        raise PreconditionError(f"anchor norm exceeds rho / (4 K) = {field.rho / (4 * dich.K):.4g}")

    prob = _Problem(spec, field, split, dich, cfg, side, at)
    values = prob.linear_part(anchor)
    deltas = []
    for it in range(1, cfg.max_iter + 1):
        new = prob.apply(values, anchor)
        if not np.all(np.isfinite(new)):
            raise ConvergenceError("non-finite LP iterate", _ratio(deltas))
        delta = prob.norm(new - values)
        deltas.append(delta)
        values = new
        if delta <= cfg.tol:
            break
    else:
        raise ConvergenceError(
            f"no convergence in {cfg.max_iter} iterations (last delta {deltas[-1]:.3g})",
            _ratio(deltas),
            deltas[-1],
        )
    zero_idx = -1 if side == "unstable" else 0
    block = "s" if side == "unstable" else "u"
    h = project(split, block, values[zero_idx])
    return GraphResult(h, prob.trajectory(values), it, deltas[-1], _ratio(deltas), prob.tail_bound())


def _ratio(deltas) -> float:
    """Largest ratio of successive updates, ignoring updates at rounding level."""
    d = np.asarray(deltas)
    if d.size < 2:
        return 0.0
    scale = max(d[0], 1e-300)
    prev, nxt = d[:-1], d[1:]
    ok = prev > 1e-12 * scale + 1e-300
    if not ok.any():
        return 0.0
    return float(np.max(nxt[ok] / prev[ok]))


def solve_graph_unstable(spec, field, split, dich, cfg, p, at: float = 0.0, check_anchor: bool = True) -> GraphResult:
    return solve_graph(spec, field, split, dich, cfg, p, "unstable", at, check_anchor)


def solve_graph_stable(spec, field, split, dich, cfg, q, at: float = 0.0, check_anchor: bool = True) -> GraphResult:
    return solve_graph(spec, field, split, dich, cfg, q, "stable", at, check_anchor)


def contraction_ratio(spec, field, split, dich, cfg, anchor, u: np.ndarray, v: np.ndarray, side: str, at: float = 0.0) -> float:
    """|J(u) - J(v)|_gamma / |u - v|_gamma for two trajectories on the LP grid."""
    prob = _Problem(spec, field, split, dich, cfg, side, at)
    anchor = _anchor(split, side, anchor)
    num = prob.norm(prob.apply(u, anchor) - prob.apply(v, anchor))
    return num / prob.norm(u - v)


def verify_invariance(
    spec: LinearCocycleSpec,
    field: CutoffField,
    split: Splitting,
    dich: DichotomyEstimate,
    cfg: LPConfig,
    anchor,
    tau: float,
    dt: float,
    side: str = "unstable",
    at: float = 0.0,
) -> float:
    """Invariance defect of the graph after flowing for time ``tau``.

    x = anchor + h(omega, anchor) is advanced with the mild integrator to
    y = phi(tau, omega, x); the defect is the distance of y from the graph at
    theta_tau omega, measured in the complementary block.
    """
    if not 0 < tau <= 5:
        raise ParameterError("tau must lie in (0, 5]")
    first = solve_graph(spec, field, split, dich, cfg, anchor, side, at)
    x = np.asarray(anchor, dtype=float) + first.h
    y = integrate_mild(spec, field, x, tau, dt, at=at)
    own, other = ("u", "s") if side == "unstable" else ("s", "u")
    second = solve_graph(spec, field, split, dich, cfg, project(split, own, y), side, at + tau, check_anchor=False)
    return float(np.linalg.norm(project(split, other, y) - second.h))
