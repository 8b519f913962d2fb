import math

import numpy as np
import pytest

from rimkit.errors import ConvergenceError, ParameterError, PreconditionError
from rimkit.linear import DichotomyEstimate
from rimkit.lp import (
    LPConfig,
    check_radius,
    contraction_ratio,
    linear_trajectory,
    lp_apply,
    lp_apply_stable,
    lp_apply_unstable,
    lp_times,
    solve_graph,
    solve_graph_stable,
    solve_graph_unstable,
    verify_invariance,
    weighted_norm,
)
from rimkit.nonlinear import NonlinearField, make_cutoff

CFG = LPConfig(20.0, 0.01)


def dich3():
    # alpha - beta = 3
    return DichotomyEstimate(1.0, -2.0, -0.5, 1.0, 0.1, 50.0)


def test_check_radius_examples():
    ok = check_radius(dich3(), 1.0, 1.0, 0.3)
    assert ok and ok.budget == pytest.approx(0.4)
    assert ok.rho_max == pytest.approx(3 / 8)
    bad = check_radius(dich3(), 1.0, 1.0, 0.5)
    assert not bad and bad.budget == pytest.approx(2 / 3)
    assert check_radius(dich3(), 1.0, 1.0, 1e-12)


def test_check_radius_exponent_is_inverse_eps():
    # budget <= 1/2  <=>  rho <= ((alpha - beta) / (8 K B1))^(1 / eps)
    r = check_radius(dich3(), 2.0, 0.5, 0.01)
    assert r.rho_max == pytest.approx((3 / 16) ** 2)
    assert check_radius(dich3(), 2.0, 0.5, r.rho_max * 0.999)
    assert not check_radius(dich3(), 2.0, 0.5, r.rho_max * 1.001)


def test_check_radius_lipschitz_case():
    assert check_radius(dich3(), 0.3, 0.0, 100.0).rho_max == math.inf
    assert not check_radius(dich3(), 0.5, 0.0, 1.0)


def test_config_validation(gap_dich):
    with pytest.raises(ParameterError):
        LPConfig(5.0, 0.01).validate(gap_dich)  # needs 20 / (alpha - beta)
    with pytest.raises(ParameterError):
        LPConfig(tol=0.0)
    assert lp_times(CFG, "unstable")[[0, -1]] == pytest.approx([-20.0, 0.0])
    assert lp_times(CFG, "stable")[[0, -1]] == pytest.approx([0.0, 20.0])


def test_weighted_norm():
    t = np.array([-2.0, -1.0, 0.0])
    vals = np.array([[3.0, 4.0], [0.0, 1.0], [1.0, 0.0]])
    assert weighted_norm(t, vals, -0.5) == pytest.approx(5 * math.exp(-1.0))


def test_zero_field_operator_is_linear_flow(gap_spec, gap_split, gap_dich, zero_cutoff):
    p = np.array([0.5, 0, 0, 0])
    junk = linear_trajectory(gap_spec, gap_split, gap_dich, CFG, "unstable", np.array([0, 1.0, 2.0, 0]))
    out = lp_apply_unstable(gap_spec, zero_cutoff, gap_split, gap_dich, CFG, p, junk)
    lin = linear_trajectory(gap_spec, gap_split, gap_dich, CFG, "unstable", p)
    assert np.allclose(out.values, lin.values, rtol=0, atol=1e-15)


@pytest.mark.parametrize("side", ["unstable", "stable"])
def test_zero_field_graphs_vanish(gap_spec, gap_split, gap_dich, zero_cutoff, side):
    block = gap_split.unstable if side == "unstable" else gap_split.stable
    for scale in (0.0, 0.3, 0.9):
        a = np.where(block, scale / np.sqrt(block.sum()), 0.0)
        r = solve_graph(gap_spec, zero_cutoff, gap_split, gap_dich, CFG, a, side)
        assert np.max(np.abs(r.h)) <= 1e-12


@pytest.mark.parametrize("side", ["unstable", "stable"])
def test_tangency_at_origin(gap_spec, gap_split, gap_dich, tanh_cutoff, side):
    r = solve_graph(gap_spec, tanh_cutoff, gap_split, gap_dich, CFG, np.zeros(4), side)
    assert np.max(np.abs(r.h)) <= 1e-12
    assert not np.any(r.trajectory.values)


def test_unstable_graph(gap_spec, gap_split, gap_dich, tanh_cutoff):
    p = np.array([tanh_cutoff.rho / (4 * gap_dich.K), 0, 0, 0])
    r = solve_graph_unstable(gap_spec, tanh_cutoff, gap_split, gap_dich, CFG, p)
    assert r.h[0] == 0.0
    assert np.linalg.norm(r.h) > 1e-6  # modes couple through the sine mixing
    assert r.last_delta <= CFG.tol
    assert r.contraction_est <= 0.55
    assert r.iterations <= 40
    # fixed-point residual
    again = lp_apply(gap_spec, tanh_cutoff, gap_split, gap_dich, CFG, p, r.trajectory)
    assert weighted_norm(again.times, again.values - r.trajectory.values, gap_dich.gamma) <= 2 * CFG.tol


def test_geometric_iteration_count(gap_spec, gap_split, gap_dich, tanh_cutoff):
    p = np.array([0.7, 0, 0, 0])
    lin = linear_trajectory(gap_spec, gap_split, gap_dich, CFG, "unstable", p)
    first = lp_apply(gap_spec, tanh_cutoff, gap_split, gap_dich, CFG, p, lin)
    delta0 = weighted_norm(lin.times, first.values - lin.values, gap_dich.gamma)
    r = solve_graph_unstable(gap_spec, tanh_cutoff, gap_split, gap_dich, CFG, p)
    assert r.iterations <= math.ceil(math.log(CFG.tol / delta0) / math.log(0.55)) + 2


@pytest.mark.parametrize("side", ["unstable", "stable"])
def test_contraction_random_pairs(gap_spec, gap_split, gap_dich, tanh_cutoff, side):
    rng = np.random.default_rng(21)
    t = lp_times(CFG, side)
    block = gap_split.unstable if side == "unstable" else gap_split.stable
    anchor = np.where(block, 0.5, 0.0)
    w = np.exp(gap_dich.gamma * t)[:, None]  # trajectories of unit weighted size
    worst = 0.0
    for _ in range(50):
        u, v = rng.normal(size=(2, t.size, 4)) * w * rng.uniform(0.1, 8)
        worst = max(worst, contraction_ratio(gap_spec, tanh_cutoff, gap_split, gap_dich, CFG, anchor, u, v, side))
    assert worst <= 0.55


def test_anchor_lipschitz(gap_spec, gap_split, gap_dich, tanh_cutoff):
    p, pbar = np.array([0.4, 0, 0, 0]), np.array([-0.3, 0, 0, 0])
    traj = linear_trajectory(gap_spec, gap_split, gap_dich, CFG, "unstable", np.array([0.2, 0.1, 0, 0.3]))
    a = lp_apply(gap_spec, tanh_cutoff, gap_split, gap_dich, CFG, p, traj)
    b = lp_apply(gap_spec, tanh_cutoff, gap_split, gap_dich, CFG, pbar, traj)
    gap = weighted_norm(a.times, a.values - b.values, gap_dich.gamma)
    assert gap <= gap_dich.K * 0.7 * (1 + 1e-9)


@pytest.mark.parametrize("side", ["unstable", "stable"])
def test_graph_lipschitz(gap_spec, gap_split, gap_dich, tanh_cutoff, side):
    block = gap_split.unstable if side == "unstable" else gap_split.stable
    r_max = tanh_cutoff.rho / (4 * gap_dich.K)
    rng = np.random.default_rng(2)
    anchors = []
    for _ in range(6):
        a = np.where(block, rng.normal(size=4), 0.0)
        anchors.append(a / np.linalg.norm(a) * rng.uniform(0, r_max))
    res = [solve_graph(gap_spec, tanh_cutoff, gap_split, gap_dich, CFG, a, side) for a in anchors]
    for i in range(len(anchors)):
        for j in range(i):
            q = np.linalg.norm(res[i].h - res[j].h) / np.linalg.norm(anchors[i] - anchors[j])
            assert q <= 2.2 * gap_dich.K
            tr = weighted_norm(
                res[i].trajectory.times, res[i].trajectory.values - res[j].trajectory.values, gap_dich.gamma
            )
            assert tr <= 2 * gap_dich.K * np.linalg.norm(anchors[i] - anchors[j]) * 1.1


def test_stable_graph_block(gap_spec, gap_split, gap_dich, tanh_cutoff):
    q = np.array([0, 0.5, -0.3, 0.2])
    r = solve_graph_stable(gap_spec, tanh_cutoff, gap_split, gap_dich, CFG, q)
    assert not np.any(r.h[gap_split.stable])
    assert r.tail_bound < 1e-6


def test_preconditions(gap_spec, gap_split, gap_dich, tanh_cutoff):
    with pytest.raises(PreconditionError):
        solve_graph_unstable(gap_spec, tanh_cutoff, gap_split, gap_dich, CFG, np.array([0, 1.0, 0, 0]))
    with pytest.raises(PreconditionError):
        solve_graph_unstable(gap_spec, tanh_cutoff, gap_split, gap_dich, CFG, np.array([5.0, 0, 0, 0]))
    big = make_cutoff(NonlinearField("lipschitz_componentwise", 2.0, mixing="sine"), 4.0, dim=4)
    with pytest.raises(PreconditionError):
        solve_graph_unstable(gap_spec, big, gap_split, gap_dich, CFG, np.array([0.1, 0, 0, 0]))


def test_non_convergence_reports_ratio(gap_spec, gap_split, gap_dich, tanh_cutoff):
    with pytest.raises(ConvergenceError) as info:
        solve_graph_unstable(gap_spec, tanh_cutoff, gap_split, gap_dich, LPConfig(20.0, 0.01, 1e-10, 2), np.array([0.9, 0, 0, 0]))
    assert info.value.contraction_est < 0.55


def test_stable_apply_wrapper(gap_spec, gap_split, gap_dich, zero_cutoff):
    q = np.array([0, 0.2, 0, 0])
    traj = linear_trajectory(gap_spec, gap_split, gap_dich, CFG, "stable", q)
    out = lp_apply_stable(gap_spec, zero_cutoff, gap_split, gap_dich, CFG, q, traj)
    assert np.allclose(out.values, traj.values, rtol=0, atol=1e-15)


def test_invariance_trivial_cases(gap_spec, gap_split, gap_dich, tanh_cutoff, zero_cutoff):
    p = np.array([0.8, 0, 0, 0])
    assert verify_invariance(gap_spec, zero_cutoff, gap_split, gap_dich, CFG, p, 1.0, 0.01) <= 1e-8
    assert verify_invariance(gap_spec, tanh_cutoff, gap_split, gap_dich, CFG, np.zeros(4), 1.0, 0.01) <= 1e-8
    with pytest.raises(ParameterError):
        verify_invariance(gap_spec, tanh_cutoff, gap_split, gap_dich, CFG, p, 6.0, 0.01)


def test_invariance_stable_side(gap_spec, gap_split, gap_dich, tanh_cutoff):
    q = np.array([0, 0.6, 0, 0])
    d = verify_invariance(gap_spec, tanh_cutoff, gap_split, gap_dich, CFG, q, 1.0, 0.001, side="stable")
    assert d < 1e-3
