import math

import numpy as np
import pytest

from melpath import catenary as cat
from melpath import solver
from melpath.exceptions import InputError, ShootingError
from melpath.model import (
    InfoModel,
    KParameter,
    MemoryProblem,
    PointOfInterest,
    RiskModel,
    TransformKind,
    beta_eval,
    line_problem,
    plane_problem,
)
from melpath.solver import (
    fixed_point_K,
    golden_section_max,
    integrate,
    mel_rhs,
    objective_of_K,
    optimize_K,
    shoot,
    sweep_K,
    tail_K,
)

CAT = cat.CatenaryConfig()
K_CAT = 2.1566


def linear_problem(c=0.7):
    info = InfoModel([PointOfInterest([1.0], 1.0)], length_scale=0.5, rate=c,
                     transform_kind=TransformKind.LINEAR)
    return MemoryProblem(info, RiskModel(0.1), 1.0, [0.0], [2.0])


def test_rhs_zero_without_memory():
    prob = plane_problem()
    assert np.all(mel_rhs(prob, KParameter([0, 0, 0], 0, 1), 0.0, [0.3, 0.4], [1, 1]) == 0)


def test_rhs_zero_at_centers():
    info = InfoModel([PointOfInterest([1.0, 1.0]), PointOfInterest([1.0, 1.0])])
    prob = MemoryProblem(info, RiskModel(0.1), 1.0, [0, 0], [1, 1])
    np.testing.assert_array_equal(mel_rhs(prob, KParameter([0.5, 0.5], 0, 1), 0.0, [1, 1], [0, 0]), 0)


def test_rhs_reference_value():
    prob = line_problem(mass=1.0, length_scale=1.0)
    a = mel_rhs(prob, KParameter([1.0], 0, 1), 0.0, [0.0], [0.0])
    assert a[0] == pytest.approx(-0.60653, abs=5e-6)
    assert a[0] == pytest.approx(-math.exp(-0.5), rel=1e-14)


def test_integrate_free_particle_exact():
    prob = plane_problem()
    tr = integrate(prob, KParameter([0, 0, 0], 0, 1), [0.4, -1.1], 300)
    expected = prob.x0 + np.outer(tr.times, [0.4, -1.1])
    np.testing.assert_allclose(tr.positions, expected, rtol=0, atol=1e-13)


def test_integrate_rejects_short_grid():
    with pytest.raises(InputError):
        integrate(line_problem(), KParameter([0.2], 0, 1), [1.0], 1)


def test_integrate_fourth_order_on_catenary():
    b = math.sqrt(K_CAT * CAT.k / CAT.m)
    v0 = b / math.sinh(b)
    prob = CAT.problem()
    K = KParameter([K_CAT], 0, 10)
    errs = []
    for n in (100, 200, 400):
        tr = integrate(prob, K, [v0], n)
        errs.append(np.max(np.abs(tr.positions[:, 0] - cat.closed_form(CAT, K_CAT, tr.times))))
    ratios = np.array(errs[:-1]) / errs[1:]
    assert np.all((ratios > 14) & (ratios < 18)), ratios


def test_shoot_free_particle():
    prob = plane_problem()
    res = shoot(prob, KParameter([0, 0, 0], 0, 1), 300)
    np.testing.assert_allclose(res.v0, (prob.xf - prob.x0) / prob.horizon, rtol=0, atol=1e-14)
    assert res.endpoint_error <= 1e-12


def test_shoot_catenary_initial_velocity():
    res = shoot(CAT.problem(), KParameter([K_CAT], 0, 10), 1000, 1e-12)
    b = math.sqrt(K_CAT * CAT.k / CAT.m)
    assert res.v0[0] == pytest.approx(b / math.sinh(b), abs=1e-5)


@pytest.mark.parametrize("K", [[0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [0.2, 0.9, 0.5], [1.0, 0.0, 0.3]])
def test_shoot_plane_endpoint(K):
    res = shoot(plane_problem(), KParameter(K, 0, 1), 1500, 1e-8)
    assert res.endpoint_error <= 1e-8


def test_shoot_failure_is_reported():
    with pytest.raises(ShootingError) as info:
        shoot(line_problem(), KParameter([1.0], 0, 1), 500, 1e-14, max_iter=1, homotopy=False)
    assert np.isfinite(info.value.best_residual)


def test_shoot_rejects_bad_tolerance():
    with pytest.raises(InputError):
        shoot(line_problem(), KParameter([0.5], 0, 1), 100, 0.0)


def test_residual_positive_at_upper_bound():
    rec = objective_of_K(line_problem(), KParameter([1.0], 0, 1), 1000)
    assert rec.residual[0] > 0
    assert rec.ok


def test_linear_transform_known_constant():
    prob = linear_problem(0.7)
    K, rec = optimize_K(prob, steps=1000)
    assert K.values[0] == 0.7
    assert rec.residual[0] == 0.0
    assert fixed_point_K(prob, KParameter([0.7], 0.7, 0.7), max_iter=1).values[0] == 0.7


def test_catenary_optimize_through_solver():
    K, rec = optimize_K(CAT.problem(), steps=1000, grid=16, box=(1.6, 2.6))
    assert abs(K.values[0] - K_CAT) <= 2e-3


def test_catenary_fixed_point_through_solver():
    K = fixed_point_K(CAT.problem(), KParameter([1.0], 0, np.inf), damping=0.5, steps=1000)
    assert abs(K.values[0] - K_CAT) <= 1e-3


def test_catenary_map_at_one():
    prob = CAT.problem()
    rec = objective_of_K(prob, KParameter([1.0], 0, 10), 2000, 1e-12)
    f1 = 1.0 - rec.residual[0]
    assert f1 == pytest.approx(1.796, abs=1e-3)


def test_catenary_sweep_has_interior_extremum():
    ks = np.linspace(1.6, 2.6, 21)
    recs = sweep_K(CAT.problem(), ks, 500, 1e-12, box=(1.6, 2.6))
    obj = np.array([r.objective for r in recs])
    i = int(np.argmax(obj))  # objective = -J with the negative orientation
    assert 0 < i < ks.size - 1
    assert abs(ks[i] - 2.16) <= 0.05


def test_sweep_is_order_and_thread_independent():
    prob = line_problem()
    ks = np.linspace(0, 1, 9)
    a = sweep_K(prob, ks, 400, threads=1)
    b = sweep_K(prob, ks, 400, threads=4)
    for ra, rb in zip(a, b):
        assert ra.objective == rb.objective
        np.testing.assert_array_equal(ra.residual, rb.residual)


def test_sweep_failures_become_nan(monkeypatch):
    real = solver.shoot

    def flaky(problem, K, *args, **kw):
        if K.values[0] > 0.6:
            raise ShootingError("forced")
        return real(problem, K, *args, **kw)

    monkeypatch.setattr(solver, "shoot", flaky)
    recs = sweep_K(line_problem(), [0.2, 0.8], 200)
    assert recs[0].ok and not recs[1].ok
    assert np.isnan(recs[1].residual).all()


def test_golden_section():
    x, fx = golden_section_max(lambda x: -(x - 0.3) ** 2, 0.0, 1.0, 1e-9)
    assert x == pytest.approx(0.3, abs=1e-8)
    assert fx == pytest.approx(0.0, abs=1e-15)


def test_tail_K_properties():
    prob = line_problem()
    K = KParameter([0.5], 0, 1)
    tr = shoot(prob, K, 1000).trajectory
    full = beta_eval(prob.info, solver.accumulate_alpha(prob, tr))
    np.testing.assert_allclose(tail_K(prob, tr, 0.4 * tr.dt), full, rtol=1e-15)
    assert tail_K(prob, tr, 0.5)[0] > full[0]
    assert tail_K(prob, tr, 1.0 - tr.dt)[0] >= beta_eval(prob.info, tr.dt)
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(InputError):
            tail_K(prob, tr, bad)


def test_K_dimension_checked():
    with pytest.raises(InputError):
        shoot(plane_problem(), KParameter([0.5], 0, 1), 100)
