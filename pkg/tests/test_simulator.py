import math

import numpy as np
import pytest

from twolevel_consensus.controllers import ControllerKind
from twolevel_consensus.errors import InvalidScenario, NonFinite, ValidationError
from twolevel_consensus.graph import Digraph, SwitchingSchedule, laplacian
from twolevel_consensus.plant import Plant
from twolevel_consensus.scenario import Scenario, demo_scenario, demo_graphs
from twolevel_consensus.simulator import Trajectory, ave, compute_metrics, init_network, run, step_rk4


def test_ave():
    assert ave([1, 2, 3, 4]) == 2.5
    assert ave([7.0] * 5) == 7.0
    assert ave([1, 3], weights=[1, 3]) == 2.5


def test_init_network_enforces_output_initialisation():
    s = demo_scenario()
    s0 = init_network(s)
    z0 = s0[8:12]
    np.testing.assert_array_equal(z0, [p.output(x) for p, x in zip(s.plants, s.x0)])


def test_init_network_observer_defaults_to_zero():
    s0 = init_network(demo_scenario("output"))
    assert s0.size == 8 + 4 + 8
    np.testing.assert_array_equal(s0[12:], 0.0)


def test_init_network_rejects_printed_agent3():
    with pytest.raises(InvalidScenario) as exc:
        init_network(demo_scenario(printed_agent3=True))
    assert "origin_zero" in exc.value.checks


def test_step_rk4_constant_field():
    s = np.array([1.0, -2.0])
    np.testing.assert_array_equal(step_rk4(s, 0.0, 0.1, lambda t, x: np.zeros_like(x)), s)


def test_step_rk4_exponential():
    x = step_rk4(np.array([1.0]), 0.0, 0.1, lambda t, x: -x)
    assert abs(x[0] - math.exp(-0.1)) < 1e-7


def test_step_rk4_conserves_sum_on_path_graph(graphs):
    L = laplacian(graphs[0])
    z = np.array([1.0, 2.0, 3.0, 4.0])
    for k in range(100):
        z_next = step_rk4(z, k * 0.05, 0.05, lambda t, s: -L @ s)
        assert abs(z_next.sum() - z.sum()) < 1e-12
        z = z_next


def test_step_rk4_non_finite():
    with pytest.raises(NonFinite):
        step_rk4(np.array([1e308]), 0.0, 1.0, lambda t, x: 1e308 * x)
    with pytest.raises(ValueError):
        step_rk4(np.array([1.0]), 0.0, 0.0, lambda t, x: x)


def test_run_non_finite_from_unstable_override():
    base = demo_scenario(t_final=40.0)
    # unstable state feedback poles are rejected by validation; a huge dt blows up RK4 instead
    s = base.with_overrides(dt=2.5, t_final=1000.0)
    with pytest.raises(NonFinite):
        run(s)


def _single_agent(y0=3.0, **kw):
    p = Plant([[0.0, 1.0], [-2.0, -1.0]], [0.0, 1.0], [1.0, 0.0])
    return Scenario(
        plants=(p,),
        x0=(np.array([y0, 0.5]),),
        schedule=SwitchingSchedule.fixed(Digraph(np.zeros((1, 1)))),
        **kw,
    )


def test_single_agent_tracks_its_own_initial_output():
    traj, metrics = run(_single_agent(t_final=20.0))
    np.testing.assert_array_equal(traj.v, 0.0)
    np.testing.assert_array_equal(traj.z, 3.0)
    assert abs(traj.y[-1, 0] - 3.0) < 1e-6
    assert metrics.settled


def test_zero_initial_conditions_stay_zero():
    s = demo_scenario(t_final=10.0)
    s = s.with_overrides(x0=tuple(np.zeros_like(x) for x in s.x0))
    traj, metrics = run(s)
    for arr in (traj.y, traj.z, traj.u, traj.v, traj.e):
        np.testing.assert_array_equal(arr, 0.0)
    assert metrics.final_errors == [0.0] * 4


@pytest.mark.parametrize("kind", ["state", "output"])
def test_kernel_matches_generic_rk4_across_a_switch(kind):
    s = demo_scenario(kind, t_final=6.0, dt=1e-2)
    fast, _ = run(s)
    slow, _ = run(s, engine="generic")
    for name in ("y", "z", "u", "v"):
        np.testing.assert_allclose(getattr(fast, name), getattr(slow, name), rtol=0, atol=1e-11)


def test_output_feedback_with_exact_observer_matches_state_feedback():
    s_state = demo_scenario("state", t_final=20.0)
    s_out = demo_scenario("output", t_final=20.0).with_overrides(xi0=s_state.x0)
    a, _ = run(s_state)
    b, _ = run(s_out)
    for name in ("y", "z", "u", "v"):
        assert np.max(np.abs(getattr(a, name) - getattr(b, name))) < 1e-9


def test_error_shrinks_with_horizon():
    errs = []
    for t_final in (10.0, 20.0, 40.0):
        _, m = run(demo_scenario(t_final=t_final))
        errs.append(max(m.final_errors))
    assert errs[0] > errs[1] > errs[2]


def test_stride_keeps_last_sample():
    traj, _ = run(demo_scenario(t_final=1.0, stride=300))
    assert traj.times[-1] == pytest.approx(1.0)
    np.testing.assert_allclose(traj.times[:-1], np.arange(0, 1.0, 0.3), atol=1e-12)


def _synthetic(y):
    y = np.asarray(y, dtype=float)
    t = np.arange(y.shape[0], dtype=float)
    return Trajectory(t, y, y.copy(), 0 * y, 0 * y, y - y[0].mean(), float(y[0].mean()), np.ones(y.shape[1]))


def test_metrics_constant_consensus():
    m = compute_metrics(_synthetic(np.full((5, 3), 2.0)), 1e-3)
    assert m.final_errors == [0.0, 0.0, 0.0]
    assert m.max_sum_drift == 0.0
    assert m.settling_time == 0.0


def test_metrics_diverging():
    y = np.outer(np.exp(np.arange(6.0)), [1.0, -1.0])
    m = compute_metrics(_synthetic(y), 1e-2)
    assert m.settling_time is None and not m.settled


def test_metrics_settling_time_is_last_entry():
    y = np.array([[1.0, -1.0], [0.001, -0.001], [0.5, -0.5], [0.001, -0.001], [0.0, 0.0]])
    m = compute_metrics(_synthetic(y), 1e-2)
    assert m.settling_time == 3.0


def test_weighted_reference_and_drift():
    p = Plant([[0.0]], [[1.0]], [[1.0]])
    ring = Digraph.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)])
    s = Scenario(
        plants=(p, p, p),
        x0=(np.array([1.0]), np.array([-2.0]), np.array([4.0])),
        schedule=SwitchingSchedule.fixed(ring),
        weights=(1.0, 2.0, 3.0),
        t_final=5.0,
    )
    traj, m = run(s)
    assert traj.reference == pytest.approx(1.5)
    assert m.max_sum_drift < 1e-10


def test_scenario_validation_grid_alignment():
    s = demo_scenario().with_overrides(dt=0.3)
    with pytest.raises(ValidationError) as exc:
        run(s)
    assert "grid_alignment" in exc.value.checks


def test_unbalanced_graph_rejected():
    s = demo_scenario()
    chain = Digraph.from_edges(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0), (0, 2, 1.0)])
    from twolevel_consensus.scenario import _unchecked_schedule

    bad = s.with_overrides(schedule=_unchecked_schedule([chain], (0,), math.inf))
    with pytest.raises(ValidationError) as exc:
        run(bad)
    assert exc.value.checks == ["balance"]
