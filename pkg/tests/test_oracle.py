import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from melpath.exceptions import InputError
from melpath.model import (
    InfoModel,
    MemoryProblem,
    PointOfInterest,
    RiskModel,
    line_problem,
    plane_problem,
)
from melpath.oracle import DiscretePath, discrete_gradient, discrete_objective, optimize_discrete


def far_problem(dim=2):
    info = InfoModel([PointOfInterest([1e3] * dim, 1.0)], length_scale=1.0)
    return MemoryProblem(info, RiskModel(0.3), 2.0, [0.0] * dim, [1.0] + [0.5] * (dim - 1))


def random_path(problem, N, rng, scale=1.0):
    base = DiscretePath.straight(problem, N)
    return base.with_interior(base.interior + scale * rng.standard_normal(base.interior.shape))


def fd_gradient(problem, path, h=1e-6):
    g = np.zeros_like(path.interior)
    for idx in np.ndindex(*g.shape):
        up, dn = path.interior.copy(), path.interior.copy()
        up[idx] += h
        dn[idx] -= h
        g[idx] = (discrete_objective(problem, path.with_interior(up))
                  - discrete_objective(problem, path.with_interior(dn))) / (2 * h)
    return g


def test_straight_line_far_from_points():
    prob = far_problem()
    path = DiscretePath.straight(prob, 50)
    expected = -prob.mass * np.sum((prob.xf - prob.x0) ** 2) / (2 * prob.horizon)
    assert discrete_objective(prob, path) == pytest.approx(expected, rel=1e-12)


def test_pinned_at_point():
    info = InfoModel([PointOfInterest([1.0], 1.0)], length_scale=0.5, rate=1.0)
    prob = MemoryProblem(info, RiskModel(0.1), 1.0, [1.0], [1.0])
    N = 40
    path = DiscretePath(np.ones((N - 1, 1)), [1.0], [1.0], 1.0 / N)
    assert discrete_objective(prob, path) == pytest.approx(1 - math.exp(-(N - 1) / N), abs=1e-14)


def test_gradient_zero_for_free_particle():
    prob = far_problem()
    g = discrete_gradient(prob, DiscretePath.straight(prob, 30))
    assert np.max(np.abs(g)) <= 1e-12


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dim=st.sampled_from([1, 2]))
def test_gradient_matches_finite_differences(seed, dim):
    rng = np.random.default_rng(seed)
    prob = line_problem() if dim == 1 else plane_problem()
    path = random_path(prob, 12, rng, 0.3)
    g = discrete_gradient(prob, path)
    fd = fd_gradient(prob, path)
    assert np.linalg.norm(g - fd) <= 1e-5 * np.linalg.norm(g)


def test_gradient_translation_invariant(rng):
    prob = plane_problem()
    shift = np.array([3.0, -1.5])
    info = prob.info
    moved_info = InfoModel([PointOfInterest(c + shift, w) for c, w in zip(info.centers, info.weights)],
                           length_scale=info.length_scale, rate=info.rate)
    moved = MemoryProblem(moved_info, prob.risk, prob.horizon, prob.x0 + shift, prob.xf + shift)
    path = random_path(prob, 20, rng, 0.5)
    moved_path = DiscretePath(path.interior + shift, path.x0 + shift, path.xf + shift, path.dt)
    np.testing.assert_allclose(discrete_gradient(moved, moved_path), discrete_gradient(prob, path),
                               rtol=1e-12, atol=1e-13)


def test_free_particle_is_stationary():
    prob = far_problem()
    path = optimize_discrete(prob, 20)
    np.testing.assert_array_equal(path.nodes, DiscretePath.straight(prob, 20).nodes)


def test_objective_nondecreasing():
    prob = line_problem()
    values = [discrete_objective(prob, optimize_discrete(prob, 30, max_iter=k)) for k in range(12)]
    assert np.all(np.diff(values) >= 0)
    assert values[-1] > values[0]


def test_line_oracle_converges():
    prob = line_problem()
    path = optimize_discrete(prob, 100)
    assert np.max(np.abs(discrete_gradient(prob, path))) <= 1e-8
    tr = path.to_trajectory()
    assert tr.n_steps == 100 and tr.positions[-1, 0] == 2.0


def test_input_validation():
    prob = line_problem()
    with pytest.raises(InputError):
        optimize_discrete(prob, 3)
    with pytest.raises(InputError):
        discrete_objective(prob, DiscretePath([[0.5]], [0.0], [1.0], 0.5))
    with pytest.raises(InputError):
        discrete_objective(plane_problem(), DiscretePath.straight(prob, 10))
