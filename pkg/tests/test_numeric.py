import math

import numpy as np
import pytest
import sympy as sp

from ocfactor.control import canonical_equations
from ocfactor.errors import ChartExit, ExhaustedSampling, StepRejected
from ocfactor.factorization import factor_canonical_equations
from ocfactor.numeric import (
    conservation_drift,
    first_viable_start,
    integrate,
    map_trajectory,
    residual_dynamics,
    step_halving_ratio,
)
from ocfactor.sampling import SamplePlan, sample_points

x, y = sp.symbols("x1 y1")
p1, p2, q1, q2 = sp.symbols("p1 p2 q1 q2")
half, third = sp.Rational(1, 2), sp.Rational(1, 3)
G1 = half * x**2 - 4 * third * y ** sp.Rational(3, 2)


def test_circle_quarter_turn():
    traj = integrate([-y, x], (x, y), (0, 1), T=math.pi / 2, h=1e-3)
    assert np.allclose(traj.endpoint, (-1, 0), atol=1e-6)


def test_linear_flow():
    traj = integrate([0, x], (x, y), (1, 0), T=1, h=1e-3)
    assert np.allclose(traj.endpoint, (1, 1), atol=1e-9)


def test_trajectory_grid():
    traj = integrate([0, x], (x, y), (1, 0), T=1, h=1e-3)
    assert traj.horizon == pytest.approx(1.0)
    assert traj.step == pytest.approx(1e-3)
    assert np.all(np.diff(traj.times) > 0)
    assert traj.states.shape == (1001, 2)


def test_step_halving_endpoints_agree(e1):
    rhs, coords = canonical_equations(e1), e1.frame.symbols
    a = integrate(rhs, coords, (1, 1, 1, 1), 0.5, 1e-3, e1.charts).endpoint
    b = integrate(rhs, coords, (1, 1, 1, 1), 0.5, 5e-4, e1.charts).endpoint
    assert np.max(np.abs(a - b)) <= 1e-8


def test_convergence_order_on_corpus_flows(hams):
    for name, start in (("e1", (1, 1, 1, 1)), ("e2", (1, 0.5, -0.5, 1)), ("e3", (0.5, 1, -1, 1, 0.5, -0.5))):
        hs = hams[name]
        ratio = step_halving_ratio(canonical_equations(hs), hs.frame.symbols, start, 1.0, 0.05, hs.charts)
        assert 12 <= ratio <= 20, (name, ratio)


def test_chart_exit():
    with pytest.raises(ChartExit) as exc:
        integrate([sp.Integer(-1)], (q1,), (0.5,), T=1, h=1e-2, charts=(q1,))
    assert 0.4 < exc.value.t < 0.6


def test_start_off_chart():
    with pytest.raises(ChartExit) as exc:
        integrate([sp.Integer(1)], (q1,), (0.0,), charts=(q1,))
    assert exc.value.t == 0.0


def test_step_rejected_on_blow_up():
    with pytest.raises(StepRejected):
        integrate([q1**2], (q1,), (1.0,), T=2, h=0.01)


def test_mapped_first_example_trajectory(e1, corpus):
    c = corpus["e1"].candidate("reduce1")
    traj = integrate(canonical_equations(e1), e1.frame.symbols, (1, 1, 1, 1), 1.0, 1e-3, e1.charts)
    mapped = map_trajectory(c.maps, (x, y), traj)
    assert np.allclose(mapped.column(x), 2 * traj.column(p2))
    assert np.allclose(mapped.column(y), traj.column(q1) ** 2)
    assert residual_dynamics(factor_canonical_equations(G1, 1), mapped) <= 1e-5
    wrong = [2 * sp.sqrt(y) / 2, x]  # x' = sqrt(y) instead of 2 sqrt(y)
    assert residual_dynamics(wrong, mapped) >= 0.5


def test_identity_map_reproduces_trajectory(e1):
    coords = e1.frame.symbols
    traj = integrate(canonical_equations(e1), coords, (1, 1, 1, 1), 1.0, 1e-3, e1.charts)
    same = map_trajectory(coords, coords, traj)
    assert np.array_equal(same.states, traj.states)
    assert residual_dynamics(canonical_equations(e1), same) <= 1e-5


def test_fourth_example_mapped_closed_form(e4, corpus):
    c = corpus["e4"].candidate("derived")
    traj = integrate(canonical_equations(e4), e4.frame.symbols, (1, 1, 0, 0), 1.0, 1e-3)
    mapped = map_trajectory(c.maps, (x, y), traj)
    assert np.allclose(mapped.column(x), 1.0, atol=1e-12)
    assert np.allclose(mapped.column(y), 1 + traj.times, atol=1e-9)
    assert conservation_drift(p1, traj) == 0.0


def test_drift_of_first_integrals(e1):
    traj = integrate(canonical_equations(e1), e1.frame.symbols, (1, 1, 1, 1), 1.0, 1e-3, e1.charts)
    assert conservation_drift(2 * p2**2 - 4 * third * q1**3, traj) <= 1e-6
    assert conservation_drift(e1.hamiltonian, traj) <= 1e-6
    assert conservation_drift(p1, traj) > 1e-2


def test_sampling_respects_charts_and_is_deterministic():
    plan = SamplePlan((p1, p2, q1, q2), charts=(q1,))
    pts = sample_points(plan)
    assert len(pts) == 100
    assert all(pt[q1] >= 1e-3 for pt in pts)
    assert all(-2 <= float(v) <= 2 for pt in pts for v in pt.values())
    assert pts == sample_points(plan)


def test_sampling_exhaustion():
    plan = SamplePlan((q1,), count=10, bounds={q1: (-2, -1)}, charts=(q1,), max_attempts=500)
    with pytest.raises(ExhaustedSampling):
        sample_points(plan)


def test_first_viable_start_skips_points_near_the_chart_edge(e1):
    pts = [{p1: 1, p2: 1, q1: sp.Rational(1, 100), q2: 1}, {p1: 1, p2: 1, q1: 1, q2: 1}]
    pt, traj = first_viable_start(canonical_equations(e1), e1.frame.symbols, pts, 1.0, 1e-3, e1.charts)
    assert pt is pts[1] and traj is not None
