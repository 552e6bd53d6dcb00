import math

import numpy as np
import pytest

from melpath.exceptions import InputError
from melpath.functional import (
    Trajectory,
    accumulate_alpha,
    accumulation_profile,
    evaluate_objective,
    modified_energy,
)
from melpath.model import KParameter, line_problem, plane_problem
from melpath.oracle import DiscretePath, discrete_objective
from melpath.solver import shoot


def constant_path(x, T=1.0, n=100):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return Trajectory(np.linspace(0, T, n + 1), np.tile(x, (n + 1, 1)), np.zeros((n + 1, x.size)), T / n)


def sine_path(n, T=1.0):
    t = np.linspace(0, T, n + 1)
    return Trajectory(t, 2 * t + 0.3 * np.sin(np.pi * t), 2 + 0.3 * np.pi * np.cos(np.pi * t), T / n)


def test_trajectory_validation():
    with pytest.raises(InputError):
        Trajectory([0.0], [[0.0]], [[0.0]], 1.0)
    with pytest.raises(InputError):
        Trajectory([0.0, 0.5, 1.5], np.zeros(3), np.zeros(3), 0.5)
    with pytest.raises(InputError):
        Trajectory([0.0, 1.0], np.zeros(2), np.zeros(3), 1.0)


def test_from_positions_velocities():
    tr = Trajectory.from_positions([0.0, 1.0, 4.0], 2.0)
    assert tr.dt == 1.0
    assert tr.velocities[:, 0].tolist() == [1.0, 3.0, 3.0]


def test_accumulate_constant_path():
    prob = line_problem()
    c = math.exp(-0.25 / (2 * 0.25))
    assert accumulate_alpha(prob, constant_path([1.5]))[0] == pytest.approx(c, abs=1e-12)


def test_accumulate_far_from_points():
    prob = line_problem()
    z = accumulate_alpha(prob, constant_path([1.0 + 10 * 0.5]))
    assert z[0] <= math.exp(-50)


def test_trapezoid_second_order():
    prob = line_problem()
    ref = accumulate_alpha(prob, sine_path(100_000))[0]
    errs = [abs(accumulate_alpha(prob, sine_path(n))[0] - ref) for n in (50, 100, 200)]
    ratios = np.array(errs[:-1]) / errs[1:]
    assert np.all((ratios >= 3.5) & (ratios <= 4.5)), ratios


def test_objective_constant_path_at_point():
    prob = line_problem(horizon=2.0)
    tr = constant_path([1.0], T=2.0)
    assert evaluate_objective(prob, tr) == pytest.approx(1 - math.exp(-2.0), abs=1e-10)


def test_objective_at_rest_far_away():
    prob = line_problem()
    assert evaluate_objective(prob, constant_path([40.0])) == pytest.approx(0.0, abs=1e-300)


def test_objective_matches_discrete_to_first_order():
    prob = line_problem()
    gaps = []
    for n in (50, 100, 200):
        tr = sine_path(n)
        path = DiscretePath(tr.positions[1:-1], tr.positions[0], tr.positions[-1], tr.dt)
        # forward differences for both so only the quadrature differs
        gaps.append(abs(evaluate_objective(prob, Trajectory.from_positions(tr.positions, 1.0))
                        - discrete_objective(prob, path)))
    assert gaps[2] < gaps[1] < gaps[0]
    assert gaps[0] / gaps[1] == pytest.approx(2.0, rel=0.2)


def test_profile_start_and_end():
    prob = line_problem()
    prof = accumulation_profile(prob, constant_path([1.0]))
    assert prof.A[0] == 0.0 and prof.A_R[0] == 0.0
    assert prof.A[-1] == pytest.approx(0.63212, abs=5e-6)
    assert prof.header() == ["t", "A", "A_R", "K_1"]
    assert prof.rows().shape == (101, 4)


def test_profile_K_nonincreasing():
    prob = plane_problem()
    t = np.linspace(0, 3, 301)
    x = np.column_stack([np.sin(t), 2 * t / 3])
    v = np.column_stack([np.cos(t), np.full_like(t, 2 / 3)])
    prof = accumulation_profile(prob, Trajectory(t, x, v, 0.01))
    assert np.all(np.diff(prof.K_t, axis=0) <= 0)
    assert prof.header() == ["t", "A", "A_R", "K_1", "K_2", "K_3"]


def test_energy_without_memory_is_kinetic():
    prob = line_problem()
    tr = Trajectory(np.linspace(0, 1, 11), np.linspace(0, 2, 11), np.full(11, 2.0), 0.1)
    E = modified_energy(prob, tr, KParameter([0.0], 0, 1))
    np.testing.assert_allclose(E, 0.5 * 0.1 * 4.0, rtol=0, atol=1e-15)


def test_energy_reversal():
    prob = line_problem()
    K = KParameter([0.4], 0, 1)
    tr = shoot(prob, K, 500).trajectory
    np.testing.assert_allclose(modified_energy(prob, tr.reversed(), K),
                               modified_energy(prob, tr, K)[::-1], rtol=0, atol=1e-15)


def test_dimension_mismatch():
    with pytest.raises(InputError):
        evaluate_objective(plane_problem(), constant_path([0.0]))
